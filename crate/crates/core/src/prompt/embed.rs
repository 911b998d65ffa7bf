use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::al::EncoderClient;

/// Maps a sentence to a fixed-dimension vector, deterministically.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &str) -> Result<Vec<f64>, PromptError>;
}

/// L2-normalized bag of lowercased words, hashed into `dim` buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedBow {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashedBow {
    fn default() -> Self {
        Self { dim: 1024, seed: 0 }
    }
}

impl HashedBow {
    fn bucket(&self, word: &str) -> usize {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for b in word.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        (h % self.dim as u64) as usize
    }
}

impl EmbeddingProvider for HashedBow {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, PromptError> {
        let mut v = vec![0.0; self.dim];
        for w in sentence.split_whitespace() {
            v[self.bucket(&w.to_lowercase())] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Mean of the token vectors returned by an encoder service.
#[derive(Debug, Clone)]
pub struct EncoderEmbedder {
    pub client: EncoderClient,
}

impl EmbeddingProvider for EncoderEmbedder {
    fn dim(&self) -> usize {
        self.client.dim
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, PromptError> {
        let tokens: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Ok(vec![0.0; self.client.dim]);
        }
        let vectors = self.client.encode(&tokens).map_err(|e| PromptError::EmbedderUnavailable(e.to_string()))?;
        let mut mean = vec![0.0; self.client.dim];
        for v in &vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / vectors.len() as f64;
            }
        }
        Ok(mean)
    }
}
