use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embed::EmbeddingProvider;
use super::template::FewShotExample;
use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Random,
    Similar,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "similar" => Ok(Strategy::Similar),
            other => Err(format!("unknown strategy `{other}` (expected random or similar)")),
        }
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, PromptError> {
    if u.len() != v.len() {
        return Err(PromptError::DimMismatch { left: u.len(), right: v.len() });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(PromptError::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn check_pool(n: usize, len: usize) -> Result<(), PromptError> {
    if n > len {
        return Err(PromptError::PoolTooSmall { requested: n, available: len });
    }
    Ok(())
}

/// `n` distinct exemplars drawn uniformly without replacement, in draw
/// order.
pub fn select_random(train: &[FewShotExample], n: usize, seed: u64) -> Result<Vec<FewShotExample>, PromptError> {
    check_pool(n, train.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, train.len(), n).into_iter().map(|i| train[i].clone()).collect())
}

/// The `n` exemplars most cosine-similar to `target`, most similar first.
/// Equal scores keep training order.
pub fn select_similar(
    train: &[FewShotExample],
    target: &str,
    n: usize,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<FewShotExample>, PromptError> {
    check_pool(n, train.len())?;
    let t = embedder.embed(target)?;
    let mut scored = train
        .iter()
        .enumerate()
        .map(|(i, ex)| Ok((i, cosine(&embedder.embed(&ex.sentence)?, &t)?)))
        .collect::<Result<Vec<_>, PromptError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(n).map(|(i, _)| train[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::HashedBow;

    fn pool(n: usize) -> Vec<FewShotExample> {
        (0..n).map(|i| FewShotExample::new(format!("s{i}"), "t", "O")).collect()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[0.3, -2.0, 1.0], &[0.3, -2.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(PromptError::ZeroVector));
        assert_eq!(cosine(&[1.0], &[1.0, 0.0]), Err(PromptError::DimMismatch { left: 1, right: 2 }));
    }

    #[test]
    fn random_selection_is_a_permutation_when_n_is_pool_size() {
        let p = pool(12);
        let mut got: Vec<_> = select_random(&p, 12, 4).unwrap().into_iter().map(|e| e.sentence).collect();
        got.sort();
        let mut want: Vec<_> = p.into_iter().map(|e| e.sentence).collect();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn random_selection_is_seeded() {
        let p = pool(100);
        assert_eq!(select_random(&p, 5, 9).unwrap(), select_random(&p, 5, 9).unwrap());
        assert_eq!(select_random(&p, 101, 0), Err(PromptError::PoolTooSmall { requested: 101, available: 100 }));
    }

    #[test]
    fn different_seeds_rarely_collide() {
        // Two independent 5-draws from 100 agree with probability
        // 1 / (100·99·98·97·96) ≈ 1.1e-10; over 1225 seed pairs the
        // chance of any collision is below 1.4e-7.
        let p = pool(100);
        let draws: Vec<_> = (0..50).map(|s| select_random(&p, 5, s).unwrap()).collect();
        for i in 0..draws.len() {
            for j in i + 1..draws.len() {
                assert_ne!(draws[i], draws[j], "seeds {i} and {j}");
            }
        }
    }

    #[test]
    fn identical_sentence_ranks_first() {
        let train = vec![
            FewShotExample::new("the cat sat", "t", "O O O"),
            FewShotExample::new("stocks fell sharply", "t", "O O O"),
            FewShotExample::new("a dog ran", "t", "O O O"),
        ];
        let bow = HashedBow::default();
        let got = select_similar(&train, "stocks fell sharply", 2, &bow).unwrap();
        assert_eq!(got[0].sentence, "stocks fell sharply");
    }
}
