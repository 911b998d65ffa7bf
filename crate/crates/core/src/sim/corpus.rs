//! Gold corpora: a CoNLL reader and two synthetic generators.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::al::{HeadSpec, Instance, Label, TaskKind};

/// One sentence with a tag layer per task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tags: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub tasks: Vec<String>,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    /// Every tag of `task`, `O` first, then sorted.
    pub fn label_set(&self, task: &str) -> Vec<String> {
        let mut set: BTreeSet<&str> = BTreeSet::new();
        for s in &self.sentences {
            if let Some(tags) = s.tags.get(task) {
                set.extend(tags.iter().map(String::as_str));
            }
        }
        set.remove("O");
        std::iter::once("O".to_string()).chain(set.into_iter().map(str::to_string)).collect()
    }

    pub fn heads(&self) -> Vec<HeadSpec> {
        self.tasks
            .iter()
            .map(|t| HeadSpec { task_id: t.clone(), kind: TaskKind::Sequence, labels: self.label_set(t) })
            .collect()
    }

    /// Sentences as model instances with id = position.
    pub fn instances(&self) -> Vec<Instance> {
        self.sentences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut inst = Instance::new(i as u64, s.tokens.clone());
                for (task, tags) in &s.tags {
                    inst.labels.insert(task.clone(), Label::Sequence(tags.clone()));
                }
                inst
            })
            .collect()
    }

    /// The first `n_test` sentences become the held-out split.
    pub fn split(&self, n_test: usize) -> (Corpus, Corpus) {
        let n_test = n_test.min(self.sentences.len());
        let (test, train) = self.sentences.split_at(n_test);
        (
            Corpus { tasks: self.tasks.clone(), sentences: train.to_vec() },
            Corpus { tasks: self.tasks.clone(), sentences: test.to_vec() },
        )
    }

    /// Share of `O` tags in a task layer.
    pub fn o_fraction(&self, task: &str) -> f64 {
        let (mut o, mut n) = (0usize, 0usize);
        for s in &self.sentences {
            if let Some(tags) = s.tags.get(task) {
                o += tags.iter().filter(|t| *t == "O").count();
                n += tags.len();
            }
        }
        if n == 0 { 0.0 } else { o as f64 / n as f64 }
    }
}

/// Which CoNLL columns hold the tokens and each task's tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConllColumns {
    pub token: usize,
    pub tasks: Vec<(String, usize)>,
}

impl ConllColumns {
    /// `word POS chunk NER` when four columns are present, `word tag`
    /// when two, else the last column as `tag`.
    pub fn infer(width: usize) -> Self {
        let tasks = match width {
            4 => vec![("chunk".to_string(), 2), ("ner".to_string(), 3)],
            2 => vec![("ner".to_string(), 1)],
            w => vec![("tag".to_string(), w.saturating_sub(1))],
        };
        Self { token: 0, tasks }
    }
}

/// Parses whitespace-separated columns with blank lines between
/// sentences. `-DOCSTART-` lines are skipped.
pub fn parse_conll(text: &str, columns: Option<&ConllColumns>) -> Result<Corpus, SimError> {
    let mut cols: Option<ConllColumns> = columns.cloned();
    let mut sentences = Vec::new();
    let mut current: Option<Sentence> = None;
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || fields[0] == "-DOCSTART-" {
            if let Some(s) = current.take() {
                sentences.push(s);
            }
            continue;
        }
        let cols = cols.get_or_insert_with(|| ConllColumns::infer(fields.len()));
        let need = cols.tasks.iter().map(|(_, c)| *c).chain([cols.token]).max().unwrap_or(0);
        if fields.len() <= need {
            return Err(SimError::Corpus(format!("line {}: expected at least {} columns", lineno + 1, need + 1)));
        }
        let s = current.get_or_insert_with(|| Sentence { tokens: Vec::new(), tags: BTreeMap::new() });
        s.tokens.push(fields[cols.token].to_string());
        for (task, c) in &cols.tasks {
            s.tags.entry(task.clone()).or_default().push(fields[*c].to_string());
        }
    }
    if let Some(s) = current {
        sentences.push(s);
    }
    let cols = cols.ok_or_else(|| SimError::Corpus("no sentences found".into()))?;
    Ok(Corpus { tasks: cols.tasks.into_iter().map(|(t, _)| t).collect(), sentences })
}

pub fn read_conll(path: &Path, columns: Option<&ConllColumns>) -> Result<Corpus, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Corpus(format!("{}: {e}", path.display())))?;
    parse_conll(&text, columns)
}

/// Writes a corpus in the four-column layout `word _ chunk ner` (or the
/// generic `word tag...` layout for other task sets).
pub fn to_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        for (i, tok) in s.tokens.iter().enumerate() {
            out.push_str(tok);
            if corpus.tasks == ["chunk", "ner"] {
                out.push_str(" _");
            }
            for task in &corpus.tasks {
                out.push(' ');
                out.push_str(&s.tags[task][i]);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub sentences: usize,
    /// Distinct generated names per entity type.
    pub names_per_type: usize,
    /// Zipf exponent of name frequencies.
    pub zipf_s: f64,
    pub min_chunks: usize,
    pub max_chunks: usize,
    /// Chance that an organization borrows a location's name.
    pub shared_name_rate: f64,
    /// Chance that a noun phrase is a named entity.
    pub entity_rate: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self { sentences: 3000, names_per_type: 400, zipf_s: 1.0, min_chunks: 3, max_chunks: 7, shared_name_rate: 0.3, entity_rate: 0.5 }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if self.sentences == 0 || self.names_per_type == 0 {
            return bad("sentences and names_per_type must be positive");
        }
        if self.min_chunks < 2 || self.min_chunks > self.max_chunks {
            return bad("need 2 <= min_chunks <= max_chunks");
        }
        if !(0.0..=1.0).contains(&self.shared_name_rate) || !(0.0..=1.0).contains(&self.entity_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.zipf_s >= 0.0) {
            return bad("zipf_s must be non-negative");
        }
        Ok(())
    }
}

const DETS: &[&str] = &["the", "a", "this", "that", "every", "some", "its", "their"];
const ADJS: &[&str] = &[
    "new", "old", "large", "small", "local", "public", "major", "early", "strong", "final", "foreign", "private",
    "recent", "senior", "political", "economic", "military", "annual", "national", "financial", "quiet", "rapid",
];
const NOUNS: &[&str] = &[
    "company", "government", "market", "report", "team", "city", "season", "price", "plan", "deal", "share",
    "official", "minister", "election", "match", "bank", "police", "week", "year", "court", "talks", "profit",
    "group", "party", "president", "agency", "statement", "output", "growth", "crisis", "meeting", "coach", "title",
];
const VERBS: &[&str] = &[
    "said", "won", "lost", "announced", "reported", "signed", "rejected", "visited", "beat", "expected", "raised",
    "cut", "told", "joined", "left", "opened", "closed", "bought", "sold", "agreed", "met", "faced", "called",
];
const AUXS: &[&str] = &["has", "had", "will", "would", "could", "may"];
const PREPS: &[&str] = &["in", "on", "at", "with", "from", "near", "for", "about", "against", "after"];
const ORG_SUFFIXES: &[&str] = &["Corp", "Group", "Bank", "Inc", "Holdings", "United", "Airlines"];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr", "gl", "h"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ei"];

fn pseudo_word(rng: &mut ChaCha8Rng, endings: &[&str]) -> String {
    let syllables = rng.random_range(1..=2);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
    }
    w.push_str(endings.choose(rng).expect("non-empty"));
    let mut chars = w.chars();
    let first = chars.next().expect("non-empty").to_ascii_uppercase();
    std::iter::once(first).chain(chars).collect()
}

fn name_pool(rng: &mut ChaCha8Rng, n: usize, endings: &[&str], taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(rng, endings);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Lexicon {
    first_names: Vec<String>,
    surnames: Vec<String>,
    places: Vec<String>,
    orgs: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl Lexicon {
    fn new(rng: &mut ChaCha8Rng, p: &SyntheticParams) -> Self {
        let mut taken = BTreeSet::new();
        let n = p.names_per_type;
        let weights: Vec<f64> = (1..=n).map(|r| 1.0 / (r as f64).powf(p.zipf_s)).collect();
        Self {
            first_names: name_pool(rng, n, &["n", "a", "o", "ie", "el"], &mut taken),
            surnames: name_pool(rng, n, &["son", "ez", "ova", "ski", "er", "ini"], &mut taken),
            places: name_pool(rng, n, &["ia", "burg", "ton", "ville", "stan", "port"], &mut taken),
            orgs: name_pool(rng, n, &["tex", "co", "ix", "sys", "max", "tel"], &mut taken),
            zipf: WeightedIndex::new(weights).expect("positive weights"),
        }
    }

    fn pick<'a>(&self, rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a str {
        &pool[self.zipf.sample(rng)]
    }
}

struct Builder {
    tokens: Vec<String>,
    chunk: Vec<String>,
    ner: Vec<String>,
}

impl Builder {
    fn push_chunk(&mut self, kind: &str, words: &[(String, String)]) {
        for (i, (w, ner)) in words.iter().enumerate() {
            self.tokens.push(w.clone());
            self.chunk.push(format!("{}-{kind}", if i == 0 { "B" } else { "I" }));
            self.ner.push(ner.clone());
        }
    }

    fn push_outside(&mut self, w: &str) {
        self.tokens.push(w.to_string());
        self.chunk.push("O".into());
        self.ner.push("O".into());
    }
}

fn entity(words: Vec<String>, kind: &str) -> Vec<(String, String)> {
    words
        .into_iter()
        .enumerate()
        .map(|(i, w)| (w, format!("{}-{kind}", if i == 0 { "B" } else { "I" })))
        .collect()
}

fn noun_phrase(rng: &mut ChaCha8Rng, lex: &Lexicon, p: &SyntheticParams, after_prep: bool) -> Vec<(String, String)> {
    if rng.random_bool(p.entity_rate) {
        let roll: f64 = rng.random();
        if roll < 0.34 {
            let mut words = Vec::new();
            if rng.random_bool(0.6) {
                words.push(lex.pick(rng, &lex.first_names).to_string());
            }
            words.push(lex.pick(rng, &lex.surnames).to_string());
            return entity(words, "PER");
        }
        if roll < 0.67 || (after_prep && roll < 0.8) {
            return entity(vec![lex.pick(rng, &lex.places).to_string()], "LOC");
        }
        let base = if rng.random_bool(p.shared_name_rate) { lex.pick(rng, &lex.places) } else { lex.pick(rng, &lex.orgs) };
        let mut words = vec![base.to_string()];
        if rng.random_bool(0.7) {
            words.push(ORG_SUFFIXES.choose(rng).expect("non-empty").to_string());
        }
        return entity(words, "ORG");
    }
    let mut words = vec![DETS.choose(rng).expect("non-empty").to_string()];
    for _ in 0..rng.random_range(0..=2) {
        words.push(ADJS.choose(rng).expect("non-empty").to_string());
    }
    words.push(NOUNS.choose(rng).expect("non-empty").to_string());
    words.into_iter().map(|w| (w, "O".to_string())).collect()
}

fn verb_phrase(rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let mut words = Vec::new();
    if rng.random_bool(0.3) {
        words.push(AUXS.choose(rng).expect("non-empty").to_string());
    }
    words.push(VERBS.choose(rng).expect("non-empty").to_string());
    words.into_iter().map(|w| (w, "O".to_string())).collect()
}

/// A corpus with aligned `chunk` (NP/VP/PP) and `ner` (PER/LOC/ORG) BIO
/// layers. Entity names follow a Zipf law, so many are rare; some
/// organizations reuse place names and only context tells them apart.
pub fn generate_two_task_corpus(params: &SyntheticParams, seed: u64) -> Result<Corpus, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = Lexicon::new(&mut rng, params);
    let mut sentences = Vec::with_capacity(params.sentences);
    for _ in 0..params.sentences {
        let mut b = Builder { tokens: Vec::new(), chunk: Vec::new(), ner: Vec::new() };
        let n_chunks = rng.random_range(params.min_chunks..=params.max_chunks);
        b.push_chunk("NP", &noun_phrase(&mut rng, &lex, params, false));
        b.push_chunk("VP", &verb_phrase(&mut rng));
        let mut used = 2;
        if used < n_chunks && rng.random_bool(0.7) {
            b.push_chunk("NP", &noun_phrase(&mut rng, &lex, params, false));
            used += 1;
        }
        while used + 1 < n_chunks + 1 && used < n_chunks {
            if rng.random_bool(0.15) {
                b.push_outside(",");
            }
            b.push_chunk("PP", &[(PREPS.choose(&mut rng).expect("non-empty").to_string(), "O".to_string())]);
            b.push_chunk("NP", &noun_phrase(&mut rng, &lex, params, true));
            used += 2;
        }
        b.push_outside(".");
        let tags = BTreeMap::from([("chunk".to_string(), b.chunk), ("ner".to_string(), b.ner)]);
        sentences.push(Sentence { tokens: b.tokens, tags });
    }
    Ok(Corpus { tasks: vec!["chunk".into(), "ner".into()], sentences })
}

/// Five-way sentiment items whose label can depend on annotator age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemographicParams {
    pub items: usize,
    /// Keywords per class.
    pub keywords_per_class: usize,
    /// Keywords per non-neutral class whose label flips for older
    /// annotators.
    pub sensitive_per_class: usize,
    pub filler_vocab: usize,
    pub min_filler: usize,
    pub max_filler: usize,
    /// Annotators at or above this age read sensitive items inverted.
    pub flip_age: f64,
}

impl Default for DemographicParams {
    fn default() -> Self {
        Self { items: 4000, keywords_per_class: 10, sensitive_per_class: 5, filler_vocab: 300, min_filler: 4, max_filler: 9, flip_age: 50.0 }
    }
}

pub const N_CLASSES: usize = 5;
const NEUTRAL: usize = 2;

impl DemographicParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.items == 0 || self.keywords_per_class == 0 || self.filler_vocab == 0 {
            return Err(SimError::InvalidParams("items, keywords_per_class and filler_vocab must be positive".into()));
        }
        if self.sensitive_per_class > self.keywords_per_class {
            return Err(SimError::InvalidParams("sensitive_per_class exceeds keywords_per_class".into()));
        }
        if self.min_filler > self.max_filler {
            return Err(SimError::InvalidParams("min_filler exceeds max_filler".into()));
        }
        Ok(())
    }

    /// Probability that an item's label depends on age: sensitive
    /// keywords over all keywords (keywords are drawn uniformly).
    pub fn sensitive_rate(&self) -> f64 {
        (self.sensitive_per_class * (N_CLASSES - 1)) as f64 / (self.keywords_per_class * N_CLASSES) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoItem {
    pub tokens: Vec<String>,
    /// Class as read by a younger annotator.
    pub class: usize,
    pub sensitive: bool,
}

impl DemoItem {
    /// The label an annotator of `age` gives this item.
    pub fn label_for(&self, age: f64, flip_age: f64) -> usize {
        if self.sensitive && age >= flip_age {
            N_CLASSES - 1 - self.class
        } else {
            self.class
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicCorpus {
    pub params: DemographicParams,
    pub items: Vec<DemoItem>,
    /// `keywords[c]` lists class `c`'s keywords; the first
    /// `sensitive_per_class` of a non-neutral class are sensitive.
    pub keywords: Vec<Vec<String>>,
}

pub fn class_label(c: usize) -> String {
    ["very_negative", "negative", "neutral", "positive", "very_positive"][c].to_string()
}

pub fn generate_demographic_corpus(params: &DemographicParams, seed: u64) -> Result<DemographicCorpus, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keywords: Vec<Vec<String>> =
        (0..N_CLASSES).map(|c| (0..params.keywords_per_class).map(|k| format!("kw{c}x{k}")).collect()).collect();
    let filler: Vec<String> = (0..params.filler_vocab).map(|i| format!("w{i}")).collect();
    let mut items = Vec::with_capacity(params.items);
    for _ in 0..params.items {
        let class = rng.random_range(0..N_CLASSES);
        let k = rng.random_range(0..params.keywords_per_class);
        let sensitive = class != NEUTRAL && k < params.sensitive_per_class;
        let n = rng.random_range(params.min_filler..=params.max_filler);
        let mut tokens: Vec<String> = (0..n).map(|_| filler.choose(&mut rng).expect("non-empty").clone()).collect();
        let at = rng.random_range(0..=tokens.len());
        tokens.insert(at, keywords[class][k].clone());
        items.push(DemoItem { tokens, class, sensitive });
    }
    Ok(DemographicCorpus { params: params.clone(), items, keywords })
}

/// Best accuracy any text-only predictor can reach when annotators are
/// drawn from `ages` uniformly: each item's most common label wins.
pub fn text_only_bayes_bound(params: &DemographicParams, ages: &[f64]) -> f64 {
    let old = ages.iter().filter(|&&a| a >= params.flip_age).count() as f64 / ages.len().max(1) as f64;
    let s = params.sensitive_rate();
    (1.0 - s) + s * old.max(1.0 - old)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let p = SyntheticParams { sentences: 50, ..Default::default() };
        assert_eq!(generate_two_task_corpus(&p, 3).unwrap(), generate_two_task_corpus(&p, 3).unwrap());
        assert_ne!(generate_two_task_corpus(&p, 3).unwrap(), generate_two_task_corpus(&p, 4).unwrap());
        let d = DemographicParams { items: 50, ..Default::default() };
        assert_eq!(generate_demographic_corpus(&d, 1).unwrap(), generate_demographic_corpus(&d, 1).unwrap());
    }

    #[test]
    fn generated_tags_are_well_formed_bio() {
        let c = generate_two_task_corpus(&SyntheticParams { sentences: 500, ..Default::default() }, 0).unwrap();
        for s in &c.sentences {
            for task in &c.tasks {
                let tags = &s.tags[task];
                assert_eq!(tags.len(), s.tokens.len());
                for (i, t) in tags.iter().enumerate() {
                    if let Some(kind) = t.strip_prefix("I-") {
                        let prev = &tags[i - 1];
                        assert!(prev == &format!("B-{kind}") || prev == t, "{:?}", tags);
                    }
                }
            }
        }
        assert_eq!(c.label_set("ner"), ["O", "B-LOC", "B-ORG", "B-PER", "I-ORG", "I-PER"]);
    }

    #[test]
    fn conll_round_trip() {
        let c = generate_two_task_corpus(&SyntheticParams { sentences: 20, ..Default::default() }, 0).unwrap();
        let text = format!("-DOCSTART- -X- O O\n\n{}", to_conll(&c));
        assert_eq!(parse_conll(&text, None).unwrap(), c);
    }

    #[test]
    fn conll_two_columns_and_errors() {
        let c = parse_conll("EU B-ORG\nrejects O\n\nPeter B-PER\n", None).unwrap();
        assert_eq!(c.tasks, ["ner"]);
        assert_eq!(c.sentences.len(), 2);
        let cols = ConllColumns { token: 0, tasks: vec![("ner".into(), 3)] };
        assert!(parse_conll("EU B-ORG\n", Some(&cols)).is_err());
        assert!(parse_conll("\n\n", None).is_err());
    }

    #[test]
    fn invalid_params() {
        let p = SyntheticParams { min_chunks: 1, ..Default::default() };
        assert!(matches!(generate_two_task_corpus(&p, 0), Err(SimError::InvalidParams(_))));
        let d = DemographicParams { sensitive_per_class: 11, ..Default::default() };
        assert!(matches!(generate_demographic_corpus(&d, 0), Err(SimError::InvalidParams(_))));
    }

    #[test]
    fn sensitive_share_matches_design() {
        let d = DemographicParams::default();
        assert!((d.sensitive_rate() - 0.4).abs() < 1e-12);
        assert!((text_only_bayes_bound(&d, &[22.0, 27.0, 53.0, 58.0]) - 0.8).abs() < 1e-12);
    }
}
