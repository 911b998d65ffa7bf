//! The serve → annotate → retrain → evaluate loop and the four
//! comparisons built on it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::annotator::SimulatedAnnotator;
use super::corpus::{
    class_label, generate_demographic_corpus, generate_two_task_corpus, read_conll, text_only_bayes_bound, Corpus,
    DemographicParams, SyntheticParams, N_CLASSES,
};
use super::report::{area_under_curve, MetricReport, RoundRow};
use super::SimError;
use crate::al::{
    self, select_queries, ALConfig, HeadSpec, Instance, InstanceId, Label, MultiTaskModel, NativeConfig, PoolState, TaskKind,
};
use crate::demographic::{augment, DemoValue, DemographicProfile, DemographicSchema};
use crate::metrics::{evaluate_sequence_labeling, LabelScheme};
use crate::prompt::{self, ApiConfig, CompletionClient, FewShotExample, HttpCompletionClient, MockLlm, PromptBackend, PromptConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    MtalVsSingle,
    AlVsRandom,
    Demographic,
    PromptEval,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::MtalVsSingle => "mtal_vs_single",
            Scenario::AlVsRandom => "al_vs_random",
            Scenario::Demographic => "demographic",
            Scenario::PromptEval => "prompt_eval",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Scenario::MtalVsSingle, Scenario::AlVsRandom, Scenario::Demographic, Scenario::PromptEval]
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Generated afresh for every seed.
    Synthetic(SyntheticParams),
    /// A fixed CoNLL file; seeds vary the split and the model.
    Conll(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    #[default]
    LeastConfidence,
    Random,
}

impl SelectionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::LeastConfidence => "least_confidence",
            SelectionStrategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    Gold,
    AllOutside,
}

impl std::str::FromStr for MockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gold" => Ok(MockKind::Gold),
            "all_outside" | "all-o" | "all_o" => Ok(MockKind::AllOutside),
            other => Err(format!("unknown mock `{other}` (expected gold or all_outside)")),
        }
    }
}

/// Ages of the simulated annotator pool: half below 50, half above.
pub const DEFAULT_AGES: [f64; 8] = [22.0, 27.0, 34.0, 41.0, 53.0, 58.0, 64.0, 71.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub corpus: CorpusSource,
    pub seeds: Vec<u64>,
    /// Most instances ever labeled in one run.
    pub budget: usize,
    /// Randomly drawn instances labeled before the first round.
    pub initial: usize,
    /// Held-out instances for evaluation.
    pub test_size: usize,
    /// Training and query settings; `query_batch_k` is the per-round k.
    pub al: ALConfig,
    pub native: NativeConfig,
    /// Annotator error rate.
    pub noise: f64,
    pub demographic: DemographicParams,
    pub ages: Vec<f64>,
    /// Exemplar counts compared by `prompt_eval`.
    pub n_examples: Vec<usize>,
    pub prompt_strategy: prompt::Strategy,
    /// Offline completion client; `None` calls `api`.
    pub mock_llm: Option<MockKind>,
    pub api: ApiConfig,
    /// Task layer labeled by `prompt_eval`.
    pub prompt_task: String,
    pub out: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::AlVsRandom,
            corpus: CorpusSource::Synthetic(SyntheticParams::default()),
            seeds: vec![0, 1, 2, 3, 4],
            budget: 500,
            initial: 50,
            test_size: 1000,
            al: ALConfig { query_batch_k: 50, ..ALConfig::default() },
            native: NativeConfig::default(),
            noise: 0.0,
            demographic: DemographicParams::default(),
            ages: DEFAULT_AGES.to_vec(),
            n_examples: vec![1, 5, 10],
            prompt_strategy: prompt::Strategy::Random,
            mock_llm: Some(MockKind::Gold),
            api: ApiConfig::default(),
            prompt_task: "ner".into(),
            out: None,
        }
    }
}

impl SimConfig {
    /// Defaults tuned per scenario. The sentence classifier behind the
    /// demographic comparison needs small initial weights and a gentle
    /// step to learn age-by-keyword conjunctions through the pooled
    /// `tanh`.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let base = Self { scenario, ..Self::default() };
        match scenario {
            Scenario::Demographic => Self {
                budget: 3000,
                initial: 1000,
                al: ALConfig { query_batch_k: 1000, learning_rate: 0.05, epochs: 20, ..base.al.clone() },
                native: NativeConfig { init_scale: 0.02, ..NativeConfig::default() },
                ..base
            },
            Scenario::PromptEval => Self { budget: 200, test_size: 200, ..base },
            _ => base,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidParams(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.initial > self.budget {
            return bad(format!("initial {} exceeds budget {}", self.initial, self.budget));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        self.al.validate().map_err(SimError::InvalidParams)?;
        if self.scenario == Scenario::Demographic && self.ages.is_empty() {
            return bad("demographic scenario needs annotator ages".into());
        }
        if self.scenario == Scenario::PromptEval && (self.n_examples.is_empty() || self.n_examples.contains(&0)) {
            return bad("n_examples must be non-empty and positive".into());
        }
        Ok(())
    }
}

/// The report plus where it was written, if anywhere.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub report: MetricReport,
    pub written_to: Option<PathBuf>,
}

/// Runs every seed of `cfg.scenario` and writes the report to `cfg.out`.
pub fn run_scenario(cfg: &SimConfig) -> Result<ScenarioOutput, SimError> {
    cfg.validate()?;
    let report = match cfg.scenario {
        Scenario::MtalVsSingle => mtal_vs_single(cfg)?,
        Scenario::AlVsRandom => al_vs_random(cfg)?,
        Scenario::Demographic => demographic(cfg)?,
        Scenario::PromptEval => prompt_eval(cfg)?,
    };
    if let Some(dir) = &cfg.out {
        report.write_to(dir)?;
    }
    Ok(ScenarioOutput { report, written_to: cfg.out.clone() })
}

/// Train and test corpora for one seed.
fn load_split(cfg: &SimConfig, seed: u64) -> Result<(Corpus, Corpus), SimError> {
    let corpus = match &cfg.corpus {
        CorpusSource::Synthetic(params) => {
            let mut params = params.clone();
            params.sentences = params.sentences.max(cfg.test_size + cfg.budget);
            generate_two_task_corpus(&params, seed)?
        }
        CorpusSource::Conll(path) => {
            let mut c = read_conll(path, None)?;
            c.sentences.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            c
        }
    };
    if corpus.sentences.len() <= cfg.test_size {
        return Err(SimError::InvalidParams(format!(
            "corpus has {} sentences, not more than test_size {}",
            corpus.sentences.len(),
            cfg.test_size
        )));
    }
    let (train, test) = corpus.split(cfg.test_size);
    if cfg.budget > train.sentences.len() {
        return Err(SimError::InvalidParams(format!("budget {} exceeds the {} training sentences", cfg.budget, train.sentences.len())));
    }
    Ok((train, test))
}

/// Token accuracy and entity P/R/F1 of `model` on `test` for each head.
fn evaluate_sequence_heads(model: &MultiTaskModel, test: &[Instance]) -> Result<BTreeMap<String, [f64; 4]>, SimError> {
    let mut preds: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for inst in test {
        for (task, s) in al::suggest(model, inst)? {
            if let Label::Sequence(tags) = s.labels {
                preds.entry(task).or_default().push(tags);
            }
        }
    }
    let mut out = BTreeMap::new();
    for (task, p) in preds {
        let golds: Vec<Vec<String>> = test
            .iter()
            .map(|i| match i.labels.get(&task) {
                Some(Label::Sequence(t)) => Ok(t.clone()),
                _ => Err(SimError::MissingGold(format!("test instance {} lacks `{task}`", i.id.0))),
            })
            .collect::<Result<_, _>>()?;
        let m = evaluate_sequence_labeling(&p, &golds, LabelScheme::Bio)?;
        out.insert(task, [m.accuracy, m.precision, m.recall, m.f1]);
    }
    Ok(out)
}

/// One active-learning run: a random initial batch, then rounds of
/// `k` queries until the budget is spent. Each round retrains from
/// scratch on the labeled pool and scores the held-out split.
fn learning_curve(
    cfg: &SimConfig,
    setting: &str,
    heads: &[HeadSpec],
    train: &Corpus,
    test: &[Instance],
    strategy: SelectionStrategy,
    seed: u64,
) -> Result<Vec<RoundRow>, SimError> {
    let gold = train.instances();
    let label_sets: BTreeMap<String, Vec<String>> = heads.iter().map(|h| (h.task_id.clone(), h.labels.clone())).collect();
    let mut annotator = SimulatedAnnotator::new(cfg.noise, seed ^ 0xa11)?;
    let mut pool = PoolState::new(gold.iter().map(|i| i.id));
    let mut labeled: Vec<Instance> = Vec::new();
    let mut annotate = |ids: &[InstanceId], pool: &mut PoolState, labeled: &mut Vec<Instance>| -> Result<(), SimError> {
        for id in ids {
            let idx = id.0 as usize;
            let answers = annotator.annotate_sentence(&train.sentences[idx], &label_sets)?;
            let mut inst = Instance::new(id.0, gold[idx].tokens.clone());
            for (task, tags) in answers {
                inst.labels.insert(task, Label::Sequence(tags));
            }
            pool.mark_labeled(*id);
            labeled.push(inst);
        }
        Ok(())
    };

    let initial: Vec<InstanceId> = index::sample(&mut ChaCha8Rng::seed_from_u64(seed), gold.len(), cfg.initial.max(1))
        .into_iter()
        .map(|i| InstanceId(i as u64))
        .collect();
    pool.take(&initial);
    annotate(&initial, &mut pool, &mut labeled)?;

    let mut pick_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1ec7);
    let mut rows = Vec::new();
    let mut passes = 0u64;
    let started = Instant::now();
    let train_cfg = ALConfig { seed, ..cfg.al.clone() };
    for round in 0.. {
        let mut model = MultiTaskModel::native(cfg.native.clone(), heads, seed)?;
        let refs: Vec<&Instance> = labeled.iter().collect();
        passes += al::train_in_place(&mut model, &refs, &train_cfg)?.forward_passes;
        for (task, [accuracy, precision, recall, f1]) in evaluate_sequence_heads(&model, test)? {
            rows.push(RoundRow {
                setting: setting.to_string(),
                seed,
                round,
                labeled_count: labeled.len(),
                task,
                accuracy,
                precision,
                recall,
                f1,
                forward_passes: passes,
                wall_clock: started.elapsed().as_secs_f64(),
            });
        }
        let room = cfg.budget.saturating_sub(labeled.len());
        if room == 0 || pool.unlabeled.is_empty() {
            break;
        }
        let k = cfg.al.query_batch_k.min(room);
        let picked = match strategy {
            SelectionStrategy::LeastConfidence => {
                let q = ALConfig { query_batch_k: k, ..cfg.al.clone() };
                select_queries(&model, &mut pool, |id| gold.get(id.0 as usize), &q)?
            }
            SelectionStrategy::Random => {
                let unlabeled: Vec<InstanceId> = pool.unlabeled.iter().copied().collect();
                let ids: Vec<InstanceId> =
                    index::sample(&mut pick_rng, unlabeled.len(), k.min(unlabeled.len())).into_iter().map(|i| unlabeled[i]).collect();
                pool.take(&ids);
                ids
            }
        };
        annotate(&picked, &mut pool, &mut labeled)?;
    }
    debug_assert_eq!(labeled.iter().map(|i| i.id).collect::<BTreeSet<_>>().len(), labeled.len());
    Ok(rows)
}

fn final_f1(rows: &[RoundRow], setting: &str, seed: u64, task: &str) -> f64 {
    rows.iter().rfind(|r| r.setting == setting && r.seed == seed && r.task == task).map_or(0.0, |r| r.f1)
}

fn final_passes(rows: &[RoundRow], setting: &str, seed: u64) -> u64 {
    rows.iter().rfind(|r| r.setting == setting && r.seed == seed).map_or(0, |r| r.forward_passes)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 }
}

/// Joint multi-task AL against one single-task AL run per task under
/// the same budget and schedule.
fn mtal_vs_single(cfg: &SimConfig) -> Result<MetricReport, SimError> {
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    let mut tasks = Vec::new();
    for &seed in &cfg.seeds {
        let (train, test) = load_split(cfg, seed)?;
        let heads = train.heads();
        tasks = train.tasks.clone();
        let test_inst = test.instances();
        rows.extend(learning_curve(cfg, "multi_task", &heads, &train, &test_inst, SelectionStrategy::LeastConfidence, seed)?);
        for h in &heads {
            let setting = format!("single_{}", h.task_id);
            rows.extend(learning_curve(cfg, &setting, std::slice::from_ref(h), &train, &test_inst, SelectionStrategy::LeastConfidence, seed)?);
        }
        let mt = final_passes(&rows, "multi_task", seed);
        let st: u64 = heads.iter().map(|h| final_passes(&rows, &format!("single_{}", h.task_id), seed)).sum();
        let f1: BTreeMap<&str, (f64, f64)> = heads
            .iter()
            .map(|h| {
                let t = h.task_id.as_str();
                (t, (final_f1(&rows, "multi_task", seed, t), final_f1(&rows, &format!("single_{t}"), seed, t)))
            })
            .collect();
        per_seed.push(json!({
            "seed": seed,
            "multi_task_forward_passes": mt,
            "single_task_forward_passes": st,
            "ratio": mt as f64 / st.max(1) as f64,
            "final_f1": f1.iter().map(|(t, (m, s))| (t.to_string(), json!({"multi_task": m, "single_task": s}))).collect::<serde_json::Map<_, _>>(),
        }));
    }
    let ratio = mean(&per_seed.iter().map(|s| s["ratio"].as_f64().unwrap_or(0.0)).collect::<Vec<_>>());
    let mut gaps = serde_json::Map::new();
    for t in &tasks {
        let mt = mean(&cfg.seeds.iter().map(|&s| final_f1(&rows, "multi_task", s, t)).collect::<Vec<_>>());
        let st = mean(&cfg.seeds.iter().map(|&s| final_f1(&rows, &format!("single_{t}"), s, t)).collect::<Vec<_>>());
        gaps.insert(t.clone(), json!({"multi_task_f1": mt, "single_task_f1": st, "difference": mt - st}));
    }
    Ok(MetricReport {
        scenario: Scenario::MtalVsSingle.name().into(),
        rows,
        summary: json!({"forward_pass_ratio": ratio, "mean_final_f1": gaps, "seeds": per_seed}),
    })
}

/// Area under the seed's learning curve, averaged over tasks.
fn aulc(rows: &[RoundRow], setting: &str, seed: u64, tasks: &[String]) -> f64 {
    mean(
        &tasks
            .iter()
            .map(|t| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.setting == setting && r.seed == seed && &r.task == t)
                    .map(|r| (r.labeled_count as f64, r.f1))
                    .collect();
                area_under_curve(&pts)
            })
            .collect::<Vec<_>>(),
    )
}

fn al_vs_random(cfg: &SimConfig) -> Result<MetricReport, SimError> {
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    let mut wins = 0;
    for &seed in &cfg.seeds {
        let (train, test) = load_split(cfg, seed)?;
        let heads = train.heads();
        let test_inst = test.instances();
        for s in [SelectionStrategy::LeastConfidence, SelectionStrategy::Random] {
            rows.extend(learning_curve(cfg, s.name(), &heads, &train, &test_inst, s, seed)?);
        }
        let al = aulc(&rows, "least_confidence", seed, &train.tasks);
        let rnd = aulc(&rows, "random", seed, &train.tasks);
        wins += usize::from(al > rnd);
        per_seed.push(json!({"seed": seed, "least_confidence_aulc": al, "random_aulc": rnd}));
    }
    Ok(MetricReport {
        scenario: Scenario::AlVsRandom.name().into(),
        rows,
        summary: json!({"least_confidence_wins": wins, "seeds": per_seed}),
    })
}

fn profile_of(age: f64) -> DemographicProfile {
    [("age".to_string(), DemoValue::Number(age))].into()
}

/// Accuracy plus macro precision, recall and F1 over the classes.
fn classification_scores(preds: &[usize], golds: &[usize]) -> [f64; 4] {
    let n = golds.len().max(1) as f64;
    let accuracy = preds.iter().zip(golds).filter(|(p, g)| p == g).count() as f64 / n;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..N_CLASSES {
        let tp = preds.iter().zip(golds).filter(|(p, g)| **p == c && **g == c).count() as f64;
        let pp = preds.iter().filter(|p| **p == c).count() as f64;
        let gp = golds.iter().filter(|g| **g == c).count() as f64;
        let p = if pp == 0.0 { 0.0 } else { tp / pp };
        let r = if gp == 0.0 { 0.0 } else { tp / gp };
        p_sum += p;
        r_sum += r;
        f_sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    let k = N_CLASSES as f64;
    [accuracy, p_sum / k, r_sum / k, f_sum / k]
}

/// Statement-only against age-augmented training on the same annotated
/// items. Each training item is labeled by one annotator drawn from the
/// age pool; every test item is scored once per annotator.
fn demographic(cfg: &SimConfig) -> Result<MetricReport, SimError> {
    const TASK: &str = "sentiment";
    let schema = DemographicSchema::age_only();
    let heads = [HeadSpec { task_id: TASK.into(), kind: TaskKind::Classification, labels: (0..N_CLASSES).map(class_label).collect() }];
    let flip = cfg.demographic.flip_age;
    let bound = text_only_bayes_bound(&cfg.demographic, &cfg.ages);
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    for &seed in &cfg.seeds {
        let mut params = cfg.demographic.clone();
        params.items = params.items.max(cfg.test_size + cfg.budget);
        let corpus = generate_demographic_corpus(&params, seed)?;
        let (test_items, train_items) = corpus.items.split_at(cfg.test_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde70);
        let mut plain = Vec::with_capacity(cfg.budget);
        let mut augmented = Vec::with_capacity(cfg.budget);
        for (i, item) in train_items.iter().take(cfg.budget).enumerate() {
            let age = cfg.ages[rng.random_range(0..cfg.ages.len())];
            let mut annotator = SimulatedAnnotator::new(cfg.noise, seed ^ i as u64)?.with_profile(profile_of(age));
            let label = class_label(annotator.annotate_item(item, flip)?);
            let inst = Instance::new(i as u64, item.tokens.clone()).with_label(TASK, Label::Single(label));
            augmented.push(augment(&inst, &schema, &profile_of(age))?.combined);
            plain.push(inst);
        }
        let mut test_plain = Vec::new();
        let mut test_aug = Vec::new();
        let mut golds = Vec::new();
        for (i, item) in test_items.iter().enumerate() {
            for &age in &cfg.ages {
                let inst = Instance::new(i as u64, item.tokens.clone());
                test_aug.push(augment(&inst, &schema, &profile_of(age))?.combined);
                test_plain.push(inst);
                golds.push(item.label_for(age, flip));
            }
        }
        let mut finals = BTreeMap::new();
        for (setting, train_set, test_set) in [("statement_only", &plain, &test_plain), ("augmented", &augmented, &test_aug)] {
            let started = Instant::now();
            let mut passes = 0;
            let mut n = 0;
            let mut round = 0;
            let mut last = 0.0;
            while n < train_set.len() {
                n = (n + cfg.al.query_batch_k.max(cfg.initial)).min(train_set.len());
                let mut model = MultiTaskModel::native(cfg.native.clone(), &heads, seed)?;
                let refs: Vec<&Instance> = train_set[..n].iter().collect();
                passes += al::train_in_place(&mut model, &refs, &ALConfig { seed, ..cfg.al.clone() })?.forward_passes;
                let preds = test_set
                    .iter()
                    .map(|inst| {
                        let s = al::suggest(&model, inst)?;
                        Ok(match &s[TASK].labels {
                            Label::Single(l) => heads[0].labels.iter().position(|x| x == l).unwrap_or(0),
                            Label::Sequence(_) => 0,
                        })
                    })
                    .collect::<Result<Vec<_>, SimError>>()?;
                let [accuracy, precision, recall, f1] = classification_scores(&preds, &golds);
                last = accuracy;
                rows.push(RoundRow {
                    setting: setting.into(),
                    seed,
                    round,
                    labeled_count: n,
                    task: TASK.into(),
                    accuracy,
                    precision,
                    recall,
                    f1,
                    forward_passes: passes,
                    wall_clock: started.elapsed().as_secs_f64(),
                });
                round += 1;
            }
            finals.insert(setting, last);
        }
        per_seed.push(json!({
            "seed": seed,
            "statement_only_accuracy": finals["statement_only"],
            "augmented_accuracy": finals["augmented"],
        }));
    }
    let avg = |key: &str| mean(&per_seed.iter().map(|s| s[key].as_f64().unwrap_or(0.0)).collect::<Vec<_>>());
    let (st, au) = (avg("statement_only_accuracy"), avg("augmented_accuracy"));
    Ok(MetricReport {
        scenario: Scenario::Demographic.name().into(),
        rows,
        summary: json!({
            "statement_only_accuracy": st,
            "augmented_accuracy": au,
            "gain": au - st,
            "statement_only_bayes_bound": bound,
            "sensitive_rate": cfg.demographic.sensitive_rate(),
            "seeds": per_seed,
        }),
    })
}

/// Few-shot prompting at each exemplar count, scored on the held-out
/// split. Rows use the exemplar count as `labeled_count`.
fn prompt_eval(cfg: &SimConfig) -> Result<MetricReport, SimError> {
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    let task = cfg.prompt_task.as_str();
    let mut counts = cfg.n_examples.clone();
    counts.sort_unstable();
    counts.dedup();
    for &seed in &cfg.seeds {
        let (train, test) = load_split(cfg, seed)?;
        if !train.tasks.iter().any(|t| t == task) {
            return Err(SimError::MissingGold(format!("corpus has no `{task}` layer")));
        }
        let exemplars: Vec<FewShotExample> = train
            .sentences
            .iter()
            .take(cfg.budget)
            .map(|s| FewShotExample::from_tagged(&s.tokens, &s.tags[task], task))
            .collect();
        let client: Arc<dyn CompletionClient> = match cfg.mock_llm {
            Some(MockKind::Gold) => Arc::new(MockLlm::Gold(
                test.sentences.iter().map(|s| (s.tokens.join(" "), s.tags[task].join(" "))).collect::<HashMap<_, _>>(),
            )),
            Some(MockKind::AllOutside) => Arc::new(MockLlm::AllOutside),
            None => Arc::new(HttpCompletionClient::new(cfg.api.clone())),
        };
        let setting = format!("{:?}", cfg.prompt_strategy).to_lowercase();
        let started = Instant::now();
        let mut mismatches = BTreeMap::new();
        for (round, &n) in counts.iter().enumerate() {
            let pc = PromptConfig {
                n_examples: n,
                strategy: cfg.prompt_strategy,
                seed,
                api: cfg.api.clone(),
                ..PromptConfig::new(task)
            };
            let backend = PromptBackend::new(pc, exemplars.clone(), client.clone())?;
            let mut preds = Vec::new();
            let mut mismatch = 0usize;
            for s in &test.sentences {
                let out = backend.suggest(&s.tokens)?;
                mismatch += usize::from(out.mismatch);
                preds.push(out.tags);
            }
            let golds: Vec<&Vec<String>> = test.sentences.iter().map(|s| &s.tags[task]).collect();
            let golds: Vec<Vec<String>> = golds.into_iter().cloned().collect();
            let m = evaluate_sequence_labeling(&preds, &golds, LabelScheme::Bio)?;
            mismatches.insert(n.to_string(), mismatch);
            rows.push(RoundRow {
                setting: setting.clone(),
                seed,
                round,
                labeled_count: n,
                task: task.to_string(),
                accuracy: m.accuracy,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                forward_passes: 0,
                wall_clock: started.elapsed().as_secs_f64(),
            });
        }
        per_seed.push(json!({"seed": seed, "o_fraction": test.o_fraction(task), "length_mismatches": mismatches}));
    }
    Ok(MetricReport { scenario: Scenario::PromptEval.name().into(), rows, summary: json!({"seeds": per_seed}) })
}
