use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{DemoItem, Sentence, N_CLASSES};
use super::SimError;
use crate::demographic::{DemoValue, DemographicProfile};
use crate::store::{NextInstance, Store, Submission};

/// Answers with gold labels, replacing each label with a uniformly drawn
/// different one at rate `noise`.
#[derive(Debug, Clone)]
pub struct SimulatedAnnotator {
    pub noise: f64,
    pub profile: DemographicProfile,
    rng: ChaCha8Rng,
}

impl SimulatedAnnotator {
    pub fn new(noise: f64, seed: u64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(SimError::InvalidParams(format!("noise must lie in [0, 1], got {noise}")));
        }
        Ok(Self { noise, profile: DemographicProfile::new(), rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn with_profile(mut self, profile: DemographicProfile) -> Self {
        self.profile = profile;
        self
    }

    /// `gold`, or with probability `noise` another member of `labels`.
    pub fn answer_label(&mut self, gold: &str, labels: &[String]) -> String {
        if self.noise == 0.0 || labels.len() < 2 || !self.rng.random_bool(self.noise) {
            return gold.to_string();
        }
        let others: Vec<&String> = labels.iter().filter(|l| *l != gold).collect();
        others[self.rng.random_range(0..others.len())].clone()
    }

    /// One answer per task in `label_sets`, token by token.
    pub fn annotate_sentence(
        &mut self,
        sentence: &Sentence,
        label_sets: &BTreeMap<String, Vec<String>>,
    ) -> Result<BTreeMap<String, Vec<String>>, SimError> {
        let mut out = BTreeMap::new();
        for (task, labels) in label_sets {
            let gold = sentence
                .tags
                .get(task)
                .filter(|t| t.len() == sentence.tokens.len())
                .ok_or_else(|| SimError::MissingGold(format!("task `{task}` on `{}`", sentence.tokens.join(" "))))?;
            let answer = gold.iter().map(|g| self.answer_label(g, labels)).collect();
            out.insert(task.clone(), answer);
        }
        Ok(out)
    }

    fn age(&self) -> Result<f64, SimError> {
        match self.profile.get("age") {
            Some(DemoValue::Number(a)) => Ok(*a),
            _ => Err(SimError::MissingGold("profile has no numeric age".into())),
        }
    }

    /// The profile-conditioned class of a demographic item, noised.
    pub fn annotate_item(&mut self, item: &DemoItem, flip_age: f64) -> Result<usize, SimError> {
        let gold = item.label_for(self.age()?, flip_age);
        if self.noise == 0.0 || !self.rng.random_bool(self.noise) {
            return Ok(gold);
        }
        let other = self.rng.random_range(0..N_CLASSES - 1);
        Ok(if other >= gold { other + 1 } else { other })
    }
}

/// Serves `user_id` every instance the store hands out for `task_id` and
/// submits `answer`'s results. Returns the submitted instance indices.
pub fn drive_store_task<F>(store: &Store, task_id: &str, user_id: &str, mut answer: F) -> Result<Vec<usize>, SimError>
where
    F: FnMut(&NextInstance) -> Result<Vec<crate::schema::ResultValue>, SimError>,
{
    let mut done = Vec::new();
    while let Some(next) = store.next_instance(task_id, user_id)? {
        let results = answer(&next)?;
        store.submit_annotation(
            task_id,
            user_id,
            Submission { instance_index: next.instance_index, results, ..Default::default() },
        )?;
        done.push(next.instance_index);
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::corpus::{generate_demographic_corpus, DemographicParams};

    fn sentence(tags: &[&str]) -> Sentence {
        Sentence {
            tokens: tags.iter().map(|_| "w".to_string()).collect(),
            tags: BTreeMap::from([("t".to_string(), tags.iter().map(|s| s.to_string()).collect())]),
        }
    }

    #[test]
    fn noiseless_is_gold_and_full_noise_on_binary_is_complement() {
        let sets = BTreeMap::from([("t".to_string(), vec!["O".to_string(), "B-X".to_string()])]);
        let s = sentence(&["O", "B-X", "O", "B-X"]);
        let mut exact = SimulatedAnnotator::new(0.0, 1).unwrap();
        assert_eq!(exact.annotate_sentence(&s, &sets).unwrap()["t"], s.tags["t"]);
        let mut flip = SimulatedAnnotator::new(1.0, 1).unwrap();
        assert_eq!(flip.annotate_sentence(&s, &sets).unwrap()["t"], ["B-X", "O", "B-X", "O"]);
    }

    #[test]
    fn missing_gold() {
        let sets = BTreeMap::from([("other".to_string(), vec!["O".to_string(), "B-X".to_string()])]);
        let mut a = SimulatedAnnotator::new(0.0, 1).unwrap();
        assert!(matches!(a.annotate_sentence(&sentence(&["O"]), &sets), Err(SimError::MissingGold(_))));
        assert!(SimulatedAnnotator::new(1.5, 0).is_err());
    }

    #[test]
    fn profiles_disagree_at_the_designed_rate() {
        let params = DemographicParams { items: 1000, ..Default::default() };
        let corpus = generate_demographic_corpus(&params, 11).unwrap();
        let mut young = SimulatedAnnotator::new(0.0, 0).unwrap().with_profile([("age".to_string(), DemoValue::Number(27.0))].into());
        let mut old = SimulatedAnnotator::new(0.0, 0).unwrap().with_profile([("age".to_string(), DemoValue::Number(58.0))].into());
        let conflicts = corpus
            .items
            .iter()
            .filter(|it| young.annotate_item(it, params.flip_age).unwrap() != old.annotate_item(it, params.flip_age).unwrap())
            .count();
        let rate = conflicts as f64 / 1000.0;
        assert!((rate - params.sensitive_rate()).abs() <= 0.02, "rate {rate}");
    }
}
