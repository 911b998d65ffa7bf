use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quill_core::al::ConfidenceAgg;
use quill_core::prompt::{
    build_prompt, parse_tags, select_random, select_similar, ApiConfig, CompletionClient, FewShotExample, HashedBow,
    HttpCompletionClient, Strategy,
};
use quill_core::schema::{fixtures, parse_task_file, validate_task_document, InterfaceSpec};
use quill_core::sim::{run_scenario, CorpusSource, MockKind, Scenario, SimConfig, SyntheticParams};
use quill_core::store::{SqliteStorage, Store};
use quill_server::{AppState, ServerConfig};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "quill", version, about = "Annotation platform with active-learning and prompting back-ends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Check a task file against its interface.
    Validate(ValidateArgs),
    /// Build a few-shot prompt, optionally sending it to a completion API.
    Prompt(PromptArgs),
    /// Run a simulation scenario and write its report.
    Sim(SimArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// SQLite database; in-memory when omitted.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long, default_value = "admin")]
    admin: String,
    /// Password for the bootstrap administrator.
    #[arg(long, env = "QUILL_ADMIN_PASSWORD", hide_env_values = true)]
    admin_password: String,
    #[arg(long, default_value_t = 30)]
    lease_minutes: u64,
    #[arg(long, default_value_t = 12)]
    session_hours: u64,
}

#[derive(Args)]
struct ValidateArgs {
    file: PathBuf,
    /// Check the data against a predefined interface instead of the file's `format`.
    #[arg(long)]
    interface: Option<String>,
}

#[derive(Args)]
struct PromptArgs {
    /// JSON: a list of `{sentence, answer}` exemplars, or an object with
    /// `examples` and optionally `task_name` and `target`.
    #[arg(long)]
    exemplars: PathBuf,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    task_name: Option<String>,
    /// Use this many exemplars, chosen by `--strategy`; all when omitted.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "random")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Send the prompt and print the parsed tags.
    #[arg(long)]
    complete: bool,
    #[arg(long, default_value = "")]
    endpoint: String,
    #[arg(long, default_value = "")]
    model: String,
}

#[derive(Args)]
struct SimArgs {
    /// mtal_vs_single, al_vs_random, demographic or prompt_eval.
    scenario: Scenario,
    /// JSON config applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CoNLL file instead of the synthetic corpus.
    #[arg(long, conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,
    /// Synthetic corpus size in sentences.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Comma-separated seeds, e.g. `0,1,2,3,4`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    initial: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Instances queried per round.
    #[arg(long)]
    k: Option<usize>,
    /// Task weight, `task=value`; repeatable.
    #[arg(long, value_parser = parse_alpha)]
    alpha: Vec<(String, f64)>,
    /// Confidence aggregation across tasks: mean or min.
    #[arg(long)]
    agg: Option<ConfidenceAgg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Exemplar selection for prompt_eval: random or similar.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Comma-separated exemplar counts for prompt_eval.
    #[arg(long, value_delimiter = ',')]
    n_examples: Option<Vec<usize>>,
    /// Offline completion mock for prompt_eval: gold or all_outside.
    #[arg(long)]
    mock_llm: Option<MockKind>,
    /// Call a real completion API instead of a mock.
    #[arg(long, conflicts_with = "mock_llm")]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_alpha(s: &str) -> Result<(String, f64), String> {
    let (task, value) = s.split_once('=').ok_or_else(|| format!("expected task=value, got `{s}`"))?;
    let value: f64 = value.parse().map_err(|e| format!("alpha `{value}`: {e}"))?;
    Ok((task.to_string(), value))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Validate(a) => validate(a),
        Command::Prompt(a) => prompt(a),
        Command::Sim(a) => sim(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn serve(a: ServeArgs) -> Result<ExitCode> {
    let store = match &a.db {
        Some(path) => Store::new(Box::new(SqliteStorage::open(path).with_context(|| format!("opening {}", path.display()))?)),
        None => Store::in_memory(),
    }
    .with_lease_ms(a.lease_minutes * 60_000);
    let state = AppState::new(Arc::new(store), ServerConfig { session_ttl_ms: a.session_hours * 3_600_000 });
    state.bootstrap_admin(&a.admin, &a.admin_password).map_err(|e| anyhow::anyhow!("{}", e.detail))?;
    tokio::runtime::Runtime::new()?.block_on(quill_server::serve(a.addr, state))?;
    Ok(ExitCode::SUCCESS)
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let (data, spec): (_, InterfaceSpec) = match &a.interface {
        Some(name) => {
            let spec = fixtures::predefined_interface(name).with_context(|| format!("no predefined interface `{name}`"))?;
            let mut raw: serde_json::Value = serde_json::from_str(&text)?;
            raw["format"] = spec.to_value();
            (parse_task_file(&raw.to_string())?.data, spec)
        }
        None => {
            let file = parse_task_file(&text)?;
            (file.data, file.format)
        }
    };
    let violations = validate_task_document(&data, &spec);
    if violations.is_empty() {
        println!("valid: {} instances, {} components", data.len(), spec.len());
        return Ok(ExitCode::SUCCESS);
    }
    for v in &violations {
        println!("{}", serde_json::to_string(v)?);
    }
    Ok(ExitCode::FAILURE)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ExemplarFile {
    List(Vec<FewShotExample>),
    Full {
        examples: Vec<FewShotExample>,
        #[serde(default)]
        task_name: Option<String>,
        #[serde(default)]
        target: Option<String>,
    },
}

fn prompt(a: PromptArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.exemplars).with_context(|| format!("reading {}", a.exemplars.display()))?;
    let (examples, file_task, file_target) = match serde_json::from_str(&text)? {
        ExemplarFile::List(examples) => (examples, None, None),
        ExemplarFile::Full { examples, task_name, target } => (examples, task_name, target),
    };
    let Some(target) = a.target.or(file_target) else { bail!("no target sentence: pass --target") };
    let Some(task_name) = a.task_name.or(file_task) else { bail!("no task name: pass --task-name") };
    let chosen = match a.n {
        None => examples,
        Some(n) => match a.strategy {
            Strategy::Random => select_random(&examples, n, a.seed)?,
            Strategy::Similar => select_similar(&examples, &target, n, &HashedBow::default())?,
        },
    };
    let prompt = build_prompt(&chosen, &target, &task_name)?;
    if !a.complete {
        print!("{prompt}");
        return Ok(ExitCode::SUCCESS);
    }
    let client = HttpCompletionClient::new(ApiConfig { endpoint: a.endpoint, model: a.model, ..ApiConfig::default() });
    let completion = client.complete(&prompt)?;
    let parsed = parse_tags(&completion.text, target.split_whitespace().count());
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({"completion": completion, "tags": parsed}))?);
    Ok(ExitCode::SUCCESS)
}

fn sim(a: SimArgs) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(path) => {
            let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let mut base = serde_json::to_value(SimConfig::for_scenario(a.scenario))?;
            merge(&mut base, raw);
            serde_json::from_value(base).context("sim config")?
        }
        None => SimConfig::for_scenario(a.scenario),
    };
    cfg.scenario = a.scenario;
    if let Some(path) = a.corpus {
        cfg.corpus = CorpusSource::Conll(path);
    }
    if let Some(sentences) = a.synthetic {
        cfg.corpus = CorpusSource::Synthetic(SyntheticParams { sentences, ..SyntheticParams::default() });
    }
    if let Some(v) = a.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = a.budget {
        cfg.budget = v;
    }
    if let Some(v) = a.initial {
        cfg.initial = v;
    }
    if let Some(v) = a.test_size {
        cfg.test_size = v;
    }
    if let Some(v) = a.k {
        cfg.al.query_batch_k = v;
    }
    if !a.alpha.is_empty() {
        cfg.al.alphas = a.alpha.into_iter().collect::<BTreeMap<_, _>>();
    }
    if let Some(v) = a.agg {
        cfg.al.confidence_agg = v;
    }
    if let Some(v) = a.epochs {
        cfg.al.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.al.learning_rate = v;
    }
    if let Some(v) = a.noise {
        cfg.noise = v;
    }
    if let Some(v) = a.strategy {
        cfg.prompt_strategy = v;
    }
    if let Some(v) = a.n_examples {
        cfg.n_examples = v;
    }
    if let Some(v) = a.mock_llm {
        cfg.mock_llm = Some(v);
    }
    if let Some(endpoint) = a.endpoint {
        cfg.mock_llm = None;
        cfg.api.endpoint = endpoint;
    }
    if let Some(model) = a.model {
        cfg.api.model = model;
    }
    cfg.out = a.out.or(cfg.out);
    let output = run_scenario(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&output.report.summary)?);
    if let Some(dir) = output.written_to {
        eprintln!("report written to {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}
