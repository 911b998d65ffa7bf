//! Shared extractor with one linear head per task.
//!
//! Sequence heads score every token vector; classification heads score
//! the pooled vector. A single extractor forward pass per instance feeds
//! every head, which is where joint training saves compute over one model
//! per task.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::EncoderClient;
use super::features::{Encoded, NativeConfig, NativeExtractor};
use super::math::{argmax, softmax_unchecked};
use super::query::{ALConfig, ConfidenceAgg};
use super::AlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u64);

impl std::fmt::Display for InstanceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Gold or predicted label(s) for one task on one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Sequence(Vec<String>),
    Single(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: InstanceId,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, Label>,
    /// Leading context tokens (e.g. annotator pseudo-tokens) that feed the
    /// extractor but carry no sequence labels.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub prefix: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl Instance {
    pub fn new(id: u64, tokens: Vec<String>) -> Self {
        Self { id: InstanceId(id), tokens, labels: BTreeMap::new(), prefix: 0 }
    }

    /// Tokens that sequence labels align with.
    pub fn word_tokens(&self) -> &[String] {
        &self.tokens[self.prefix.min(self.tokens.len())..]
    }

    pub fn with_label(mut self, task: impl Into<String>, label: Label) -> Self {
        self.labels.insert(task.into(), label);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// One label per token.
    Sequence,
    /// One label per instance.
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHead {
    pub task_id: String,
    pub kind: TaskKind,
    pub label_set: Vec<String>,
    /// `n × dim`, row `i` scores `label_set[i]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TaskHead {
    fn new(task_id: String, kind: TaskKind, label_set: Vec<String>, dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let n = label_set.len();
        let weights = (0..n * dim).map(|_| rng.random_range(-scale..scale)).collect();
        Self { task_id, kind, label_set, weights, bias: vec![0.0; n] }
    }

    pub fn n_labels(&self) -> usize {
        self.label_set.len()
    }

    fn dim(&self) -> usize {
        self.weights.len() / self.label_set.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        self.bias
            .iter()
            .enumerate()
            .map(|(i, b)| b + self.weights[i * dim..(i + 1) * dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn label_index(&self, label: &str) -> Result<usize, AlError> {
        self.label_set.iter().position(|l| l == label).ok_or_else(|| AlError::UnknownLabel {
            task: self.task_id.clone(),
            label: label.to_string(),
        })
    }

    /// Gold label indices for the rows this head scores, or `None` when
    /// the instance carries no label for this task.
    fn targets(&self, inst: &Instance) -> Result<Option<Vec<usize>>, AlError> {
        let Some(label) = inst.labels.get(&self.task_id) else { return Ok(None) };
        match (self.kind, label) {
            (TaskKind::Sequence, Label::Sequence(seq)) => {
                if seq.len() != inst.word_tokens().len() {
                    return Err(AlError::LabelLength {
                        task: self.task_id.clone(),
                        expected: inst.word_tokens().len(),
                        found: seq.len(),
                    });
                }
                seq.iter().map(|l| self.label_index(l)).collect::<Result<_, _>>().map(Some)
            }
            (TaskKind::Classification, Label::Single(l)) => Ok(Some(vec![self.label_index(l)?])),
            _ => Err(AlError::LabelShape(self.task_id.clone())),
        }
    }

    /// Rows scored by this head: token vectors or the pooled vector.
    fn inputs<'a>(&self, enc: &'a Encoded, prefix: usize) -> Vec<&'a [f64]> {
        match self.kind {
            TaskKind::Sequence => enc.tokens.iter().skip(prefix).map(Vec::as_slice).collect(),
            TaskKind::Classification => vec![enc.pooled.as_slice()],
        }
    }

    /// Probability rows: one per word token, or one for classification.
    pub fn probabilities(&self, enc: &Encoded, prefix: usize) -> Vec<Vec<f64>> {
        self.inputs(enc, prefix).into_iter().map(|x| softmax_unchecked(&self.logits(x))).collect()
    }
}

/// Where token vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Extractor {
    Native(NativeExtractor),
    /// Frozen vectors from an encoder service; only heads train.
    External(EncoderClient),
}

impl Extractor {
    pub fn dim(&self) -> usize {
        match self {
            Extractor::Native(n) => n.dim(),
            Extractor::External(c) => c.dim,
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Encoded, AlError> {
        if tokens.is_empty() {
            return Err(AlError::EmptyInstance);
        }
        match self {
            Extractor::Native(n) => Ok(n.forward(tokens)),
            Extractor::External(client) => {
                let vectors = client.encode(tokens)?;
                let dim = client.dim;
                let mut pooled = vec![0.0; dim];
                for v in &vectors {
                    for (p, x) in pooled.iter_mut().zip(v) {
                        *p += x / vectors.len() as f64;
                    }
                }
                Ok(Encoded { buckets: Vec::new(), tokens: vectors, pooled })
            }
        }
    }
}

/// Declares one head when building a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub task_id: String,
    pub kind: TaskKind,
    pub labels: Vec<String>,
}

impl HeadSpec {
    pub fn new(task_id: impl Into<String>, kind: TaskKind, labels: &[&str]) -> Self {
        Self { task_id: task_id.into(), kind, labels: labels.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskModel {
    pub extractor: Extractor,
    pub heads: BTreeMap<String, TaskHead>,
    /// Gradient steps taken so far; zero means untrained.
    pub steps: u64,
}

/// Addresses one scalar parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamId {
    Embedding { bucket: u32, dim: usize },
    HiddenBias { dim: usize },
    HeadWeight { task: String, label: usize, dim: usize },
    HeadBias { task: String, label: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeadGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradient of the joint loss. Embedding rows are sparse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub embeddings: HashMap<u32, Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub heads: BTreeMap<String, HeadGrad>,
}

impl Gradients {
    pub fn get(&self, id: &ParamId) -> f64 {
        match id {
            ParamId::Embedding { bucket, dim } => self.embeddings.get(bucket).map_or(0.0, |r| r[*dim]),
            ParamId::HiddenBias { dim } => self.hidden_bias.get(*dim).copied().unwrap_or(0.0),
            ParamId::HeadWeight { task, label, dim } => self.heads.get(task).map_or(0.0, |h| {
                let d = h.weights.len() / h.bias.len();
                h.weights[label * d + dim]
            }),
            ParamId::HeadBias { task, label } => self.heads.get(task).map_or(0.0, |h| h.bias[*label]),
        }
    }
}

/// Per-task weighted losses of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub joint: f64,
    pub per_task: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    /// Mean per-batch `L_i` for each epoch.
    pub loss_curve: BTreeMap<String, Vec<f64>>,
    pub wall_clock_secs: f64,
    /// Extractor forward passes spent on training.
    pub forward_passes: u64,
}

/// Prediction for one task on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuggestion {
    pub labels: Label,
    pub confidence: f64,
}

impl MultiTaskModel {
    /// A freshly initialized model with a native extractor.
    pub fn native(config: NativeConfig, heads: &[HeadSpec], seed: u64) -> Result<Self, AlError> {
        Self::with_extractor(Extractor::Native(NativeExtractor::new(config.clone(), seed)), heads, seed)
    }

    pub fn with_extractor(extractor: Extractor, heads: &[HeadSpec], seed: u64) -> Result<Self, AlError> {
        let dim = extractor.dim();
        let scale = match &extractor {
            Extractor::Native(n) => n.config.init_scale,
            Extractor::External(_) => 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut map = BTreeMap::new();
        for spec in heads {
            if spec.labels.len() < 2 {
                return Err(AlError::TooFewLabels(spec.task_id.clone()));
            }
            let head = TaskHead::new(spec.task_id.clone(), spec.kind, spec.labels.clone(), dim, &mut rng, scale);
            map.insert(spec.task_id.clone(), head);
        }
        Ok(Self { extractor, heads: map, steps: 0 })
    }

    pub fn dim(&self) -> usize {
        self.extractor.dim()
    }

    pub fn is_trained(&self) -> bool {
        self.steps > 0
    }

    pub fn head(&self, task_id: &str) -> Result<&TaskHead, AlError> {
        self.heads.get(task_id).ok_or_else(|| AlError::UnknownTask(task_id.to_string()))
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Encoded, AlError> {
        self.extractor.encode(tokens)
    }

    /// Mean loss and gradient of `Σ α_i L_i` over `batch`.
    ///
    /// `L_i` averages token cross-entropy within an instance, then over
    /// the batch instances that carry a label for task `i`.
    pub fn loss_and_gradient(
        &self,
        batch: &[&Instance],
        alphas: &BTreeMap<String, f64>,
    ) -> Result<(BatchLoss, Gradients), AlError> {
        let encoded = batch.iter().map(|inst| self.encode(&inst.tokens)).collect::<Result<Vec<_>, _>>()?;
        self.loss_and_gradient_encoded(batch, &encoded, alphas)
    }

    fn loss_and_gradient_encoded(
        &self,
        batch: &[&Instance],
        encoded: &[Encoded],
        alphas: &BTreeMap<String, f64>,
    ) -> Result<(BatchLoss, Gradients), AlError> {
        let dim = self.dim();
        let mut grads = Gradients { hidden_bias: vec![0.0; dim], ..Default::default() };
        let mut per_task = BTreeMap::new();
        let mut joint = 0.0;
        // d(loss)/d(token vector) and d(loss)/d(pooled vector), per instance
        let mut d_tokens: Vec<Vec<Vec<f64>>> = encoded.iter().map(|e| vec![vec![0.0; dim]; e.tokens.len()]).collect();
        let mut d_pooled: Vec<Vec<f64>> = vec![vec![0.0; dim]; batch.len()];

        for (task_id, head) in &self.heads {
            let targets = batch.iter().map(|inst| head.targets(inst)).collect::<Result<Vec<_>, _>>()?;
            let labeled = targets.iter().filter(|t| t.is_some()).count();
            if labeled == 0 {
                continue;
            }
            let alpha = alphas.get(task_id).copied().unwrap_or(1.0);
            let mut hg = HeadGrad { weights: vec![0.0; head.weights.len()], bias: vec![0.0; head.n_labels()] };
            let mut task_loss = 0.0;
            for (b, target) in targets.iter().enumerate() {
                let Some(target) = target else { continue };
                let prefix = batch[b].prefix;
                let rows = head.inputs(&encoded[b], prefix);
                let inst_scale = 1.0 / (labeled as f64 * rows.len() as f64);
                let upstream = alpha * inst_scale;
                for (r, (x, &gold)) in rows.iter().zip(target).enumerate() {
                    let p = softmax_unchecked(&head.logits(x));
                    task_loss += -p[gold].ln() * inst_scale;
                    let d_x = match head.kind {
                        TaskKind::Sequence => &mut d_tokens[b][prefix + r],
                        TaskKind::Classification => &mut d_pooled[b],
                    };
                    for (i, &pi) in p.iter().enumerate() {
                        let g = upstream * (pi - if i == gold { 1.0 } else { 0.0 });
                        hg.bias[i] += g;
                        let w_row = &head.weights[i * dim..(i + 1) * dim];
                        let gw_row = &mut hg.weights[i * dim..(i + 1) * dim];
                        for k in 0..dim {
                            gw_row[k] += g * x[k];
                            d_x[k] += g * w_row[k];
                        }
                    }
                }
            }
            joint += alpha * task_loss;
            per_task.insert(task_id.clone(), task_loss);
            grads.heads.insert(task_id.clone(), hg);
        }

        if matches!(self.extractor, Extractor::Native(_)) {
            for (b, enc) in encoded.iter().enumerate() {
                // pooled = tanh(Σ z): every token receives the full gradient
                let d_pool_z: Vec<f64> = d_pooled[b].iter().zip(&enc.pooled).map(|(g, y)| g * (1.0 - y * y)).collect();
                for (t, x) in enc.tokens.iter().enumerate() {
                    let d_z: Vec<f64> = (0..dim).map(|k| d_tokens[b][t][k] * (1.0 - x[k] * x[k]) + d_pool_z[k]).collect();
                    for (acc, g) in grads.hidden_bias.iter_mut().zip(&d_z) {
                        *acc += g;
                    }
                    for &bucket in &enc.buckets[t] {
                        let row = grads.embeddings.entry(bucket).or_insert_with(|| vec![0.0; dim]);
                        for (acc, g) in row.iter_mut().zip(&d_z) {
                            *acc += g;
                        }
                    }
                }
            }
        }
        Ok((BatchLoss { joint, per_task }, grads))
    }

    /// One plain gradient-descent step.
    pub fn apply_gradient(&mut self, grads: &Gradients, learning_rate: f64) {
        if let Extractor::Native(native) = &mut self.extractor {
            let dim = native.config.dim;
            for (bucket, g) in &grads.embeddings {
                let row = &mut native.embeddings[*bucket as usize * dim..(*bucket as usize + 1) * dim];
                for (p, gi) in row.iter_mut().zip(g) {
                    *p -= learning_rate * gi;
                }
            }
            for (p, gi) in native.bias.iter_mut().zip(&grads.hidden_bias) {
                *p -= learning_rate * gi;
            }
        }
        for (task, g) in &grads.heads {
            if let Some(head) = self.heads.get_mut(task) {
                for (p, gi) in head.weights.iter_mut().zip(&g.weights) {
                    *p -= learning_rate * gi;
                }
                for (p, gi) in head.bias.iter_mut().zip(&g.bias) {
                    *p -= learning_rate * gi;
                }
            }
        }
        self.steps += 1;
    }

    pub fn param(&self, id: &ParamId) -> f64 {
        match id {
            ParamId::Embedding { bucket, dim } => match &self.extractor {
                Extractor::Native(n) => n.embeddings[*bucket as usize * n.config.dim + dim],
                Extractor::External(_) => 0.0,
            },
            ParamId::HiddenBias { dim } => match &self.extractor {
                Extractor::Native(n) => n.bias[*dim],
                Extractor::External(_) => 0.0,
            },
            ParamId::HeadWeight { task, label, dim } => self.heads[task].weights[label * self.dim() + dim],
            ParamId::HeadBias { task, label } => self.heads[task].bias[*label],
        }
    }

    pub fn set_param(&mut self, id: &ParamId, value: f64) {
        let d = self.dim();
        match id {
            ParamId::Embedding { bucket, dim } => {
                if let Extractor::Native(n) = &mut self.extractor {
                    n.embeddings[*bucket as usize * d + dim] = value;
                }
            }
            ParamId::HiddenBias { dim } => {
                if let Extractor::Native(n) = &mut self.extractor {
                    n.bias[*dim] = value;
                }
            }
            ParamId::HeadWeight { task, label, dim } => {
                self.heads.get_mut(task).expect("known task").weights[label * d + dim] = value
            }
            ParamId::HeadBias { task, label } => self.heads.get_mut(task).expect("known task").bias[*label] = value,
        }
    }

    /// Every parameter, in a stable order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let dim = self.dim();
        let mut ids = Vec::new();
        if let Extractor::Native(n) = &self.extractor {
            for bucket in 0..n.config.buckets as u32 {
                ids.extend((0..dim).map(|d| ParamId::Embedding { bucket, dim: d }));
            }
            ids.extend((0..dim).map(|d| ParamId::HiddenBias { dim: d }));
        }
        for (task, head) in &self.heads {
            for label in 0..head.n_labels() {
                ids.extend((0..dim).map(|d| ParamId::HeadWeight { task: task.clone(), label, dim: d }));
                ids.push(ParamId::HeadBias { task: task.clone(), label });
            }
        }
        ids
    }

    /// Confidence of the best labeling for one task (see [`ConfidenceAgg`]).
    pub fn task_confidence(&self, enc: &Encoded, prefix: usize, task_id: &str, agg: ConfidenceAgg) -> Result<f64, AlError> {
        let head = self.head(task_id)?;
        Ok(aggregate_confidence(&head.probabilities(enc, prefix), agg))
    }

    /// Mean of per-task confidences over every head, from one forward pass.
    pub fn multi_task_confidence(&self, inst: &Instance, agg: ConfidenceAgg) -> Result<f64, AlError> {
        let enc = self.encode(&inst.tokens)?;
        let mut total = 0.0;
        for head in self.heads.values() {
            total += aggregate_confidence(&head.probabilities(&enc, inst.prefix), agg);
        }
        Ok(total / self.heads.len().max(1) as f64)
    }
}

/// Reduces per-row probability vectors to one confidence: the row's max
/// probability, aggregated over rows by `agg`.
pub fn aggregate_confidence(rows: &[Vec<f64>], agg: ConfidenceAgg) -> f64 {
    let best = rows.iter().map(|p| p.iter().copied().fold(0.0, f64::max));
    match agg {
        ConfidenceAgg::Mean => best.sum::<f64>() / rows.len().max(1) as f64,
        ConfidenceAgg::Min => best.fold(1.0, f64::min),
    }
}

/// Confidence of `model`'s best labeling of `inst` for one task.
pub fn instance_confidence(
    model: &MultiTaskModel,
    inst: &Instance,
    task_id: &str,
    agg: ConfidenceAgg,
) -> Result<f64, AlError> {
    model.head(task_id)?;
    let enc = model.encode(&inst.tokens)?;
    model.task_confidence(&enc, inst.prefix, task_id, agg)
}

/// Trains a copy of `model` on `instances` with mini-batch gradient descent.
pub fn train(
    model: &MultiTaskModel,
    instances: &[&Instance],
    cfg: &ALConfig,
) -> Result<(MultiTaskModel, TrainStats), AlError> {
    let mut next = model.clone();
    let stats = train_in_place(&mut next, instances, cfg)?;
    Ok((next, stats))
}

pub fn train_in_place(model: &mut MultiTaskModel, instances: &[&Instance], cfg: &ALConfig) -> Result<TrainStats, AlError> {
    if instances.is_empty() {
        return Err(AlError::NoLabeledData);
    }
    if let Some(inst) = instances.iter().find(|i| !model.heads.keys().any(|t| i.labels.contains_key(t))) {
        return Err(AlError::Unlabeled(inst.id));
    }
    let started = Instant::now();
    let mut stats = TrainStats::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let batch_size = cfg.batch_size.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&Instance> = chunk.iter().map(|&i| instances[i]).collect();
            let encoded = batch.iter().map(|inst| model.encode(&inst.tokens)).collect::<Result<Vec<_>, _>>()?;
            stats.forward_passes += batch.len() as u64;
            let (loss, grads) = model.loss_and_gradient_encoded(&batch, &encoded, &cfg.alphas)?;
            model.apply_gradient(&grads, cfg.learning_rate);
            for (task, l) in loss.per_task {
                let e = sums.entry(task).or_default();
                e.0 += l;
                e.1 += 1;
            }
        }
        for (task, (sum, n)) in sums {
            stats.loss_curve.entry(task).or_default().push(sum / n as f64);
        }
    }
    stats.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(stats)
}

/// Argmax labels and confidence for every task head.
pub fn suggest(model: &MultiTaskModel, inst: &Instance) -> Result<BTreeMap<String, TaskSuggestion>, AlError> {
    suggest_with(model, inst, ConfidenceAgg::Mean)
}

pub fn suggest_with(
    model: &MultiTaskModel,
    inst: &Instance,
    agg: ConfidenceAgg,
) -> Result<BTreeMap<String, TaskSuggestion>, AlError> {
    if !model.is_trained() {
        return Err(AlError::UntrainedModel);
    }
    let enc = model.encode(&inst.tokens)?;
    let mut out = BTreeMap::new();
    for (task, head) in &model.heads {
        let probs = head.probabilities(&enc, inst.prefix);
        let picks: Vec<String> = probs.iter().map(|p| head.label_set[argmax(p)].clone()).collect();
        let labels = match head.kind {
            TaskKind::Sequence => Label::Sequence(picks),
            TaskKind::Classification => Label::Single(picks.into_iter().next().expect("one row")),
        };
        out.insert(task.clone(), TaskSuggestion { labels, confidence: aggregate_confidence(&probs, agg) });
    }
    Ok(out)
}
