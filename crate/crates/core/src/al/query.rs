//! Least-confidence query selection over an unlabeled pool.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::{Instance, InstanceId, MultiTaskModel};
use super::AlError;

/// How per-token confidences reduce to one sequence confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceAgg {
    #[default]
    Mean,
    Min,
}

impl std::str::FromStr for ConfidenceAgg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(ConfidenceAgg::Mean),
            "min" => Ok(ConfidenceAgg::Min),
            other => Err(format!("unknown aggregation `{other}` (expected mean or min)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ALConfig {
    /// Task weights in the joint loss; absent tasks weigh 1.0.
    pub alphas: BTreeMap<String, f64>,
    pub query_batch_k: usize,
    pub retrain_every: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub confidence_agg: ConfidenceAgg,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            alphas: BTreeMap::new(),
            query_batch_k: 10,
            retrain_every: 10,
            learning_rate: 0.5,
            epochs: 5,
            batch_size: 8,
            seed: 0,
            confidence_agg: ConfidenceAgg::Mean,
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<(), String> {
        if let Some((t, a)) = self.alphas.iter().find(|(_, a)| !(**a > 0.0)) {
            return Err(format!("alpha for `{t}` must be positive, got {a}"));
        }
        if self.query_batch_k == 0 || self.retrain_every == 0 {
            return Err("query_batch_k and retrain_every must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        Ok(())
    }
}

/// Partition of instance ids into labeled, unlabeled, and queried-but-
/// not-yet-labeled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub labeled: BTreeSet<InstanceId>,
    pub unlabeled: BTreeSet<InstanceId>,
    /// Every id ever queried, in query order.
    pub queried: Vec<InstanceId>,
}

impl PoolState {
    pub fn new(unlabeled: impl IntoIterator<Item = InstanceId>) -> Self {
        Self { unlabeled: unlabeled.into_iter().collect(), ..Default::default() }
    }

    /// Ids handed out by a query that have not come back labeled.
    pub fn pending(&self) -> impl Iterator<Item = &InstanceId> {
        self.queried.iter().filter(|id| !self.labeled.contains(id))
    }

    /// Records a label for `id`, whether it was queried or taken directly
    /// from the unlabeled set.
    pub fn mark_labeled(&mut self, id: InstanceId) {
        self.unlabeled.remove(&id);
        self.labeled.insert(id);
    }

    /// Moves ids out of `unlabeled` into the query log.
    pub fn take(&mut self, ids: &[InstanceId]) {
        for id in ids {
            if self.unlabeled.remove(id) {
                self.queried.push(*id);
            }
        }
    }
}

/// The `k` lowest-confidence ids, ties broken by ascending id.
pub fn least_confident(scores: &[(InstanceId, f64)], k: usize) -> Vec<InstanceId> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    sorted.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Scores every unlabeled instance with `model` (mean of per-task
/// confidences) and queries the `cfg.query_batch_k` least confident.
pub fn select_queries<'a, F>(
    model: &MultiTaskModel,
    pool: &mut PoolState,
    lookup: F,
    cfg: &ALConfig,
) -> Result<Vec<InstanceId>, AlError>
where
    F: Fn(InstanceId) -> Option<&'a Instance>,
{
    if pool.unlabeled.is_empty() {
        return Err(AlError::EmptyPool);
    }
    let scores = pool
        .unlabeled
        .iter()
        .map(|&id| {
            let inst = lookup(id).ok_or(AlError::UnknownInstance(id))?;
            Ok((id, model.multi_task_confidence(inst, cfg.confidence_agg)?))
        })
        .collect::<Result<Vec<_>, AlError>>()?;
    let picked = least_confident(&scores, cfg.query_batch_k);
    pool.take(&picked);
    Ok(picked)
}
