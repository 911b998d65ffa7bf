//! Native feature extractor: hashed sparse window features projected
//! through a trainable dense layer with a `tanh` nonlinearity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sparse features per token: identity, lowercase, prefixes and
/// suffixes up to length 3, and lowercase neighbors at ±1 and ±2.
pub const FEATURES_PER_TOKEN: usize = 12;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, template: u8, text: &str) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for b in std::iter::once(template).chain(text.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NativeConfig {
    pub buckets: usize,
    pub dim: usize,
    pub hash_seed: u64,
    pub init_scale: f64,
}

impl Default for NativeConfig {
    fn default() -> Self {
        Self { buckets: 1 << 14, dim: 48, hash_seed: 0x5eed, init_scale: 0.1 }
    }
}

/// Output of one extractor forward pass over a token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    /// Active hash buckets per token (empty for external encoders).
    pub buckets: Vec<[u32; FEATURES_PER_TOKEN]>,
    /// One `dim`-vector per token.
    pub tokens: Vec<Vec<f64>>,
    /// Sequence-level vector consumed by classification heads.
    pub pooled: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeExtractor {
    pub config: NativeConfig,
    /// `buckets × dim`, row-major.
    pub(crate) embeddings: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl NativeExtractor {
    pub fn new(config: NativeConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = config.init_scale;
        let embeddings = (0..config.buckets * config.dim).map(|_| rng.random_range(-scale..scale)).collect();
        let bias = vec![0.0; config.dim];
        Self { config, embeddings, bias }
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn token_buckets(&self, tokens: &[String]) -> Vec<[u32; FEATURES_PER_TOKEN]> {
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let seed = self.config.hash_seed;
        let n_buckets = self.config.buckets as u64;
        let neighbor = |i: isize| -> &str {
            if i < 0 {
                "<s>"
            } else {
                lower.get(i as usize).map_or("</s>", String::as_str)
            }
        };
        (0..tokens.len())
            .map(|t| {
                let chars: Vec<char> = lower[t].chars().collect();
                let prefix = |k: usize| chars[..k.min(chars.len())].iter().collect::<String>();
                let suffix = |k: usize| chars[chars.len() - k.min(chars.len())..].iter().collect::<String>();
                let ti = t as isize;
                let feats: [(u8, String); FEATURES_PER_TOKEN] = [
                    (0, tokens[t].clone()),
                    (1, lower[t].clone()),
                    (2, prefix(1)),
                    (3, prefix(2)),
                    (4, prefix(3)),
                    (5, suffix(1)),
                    (6, suffix(2)),
                    (7, suffix(3)),
                    (8, neighbor(ti - 1).to_string()),
                    (9, neighbor(ti + 1).to_string()),
                    (10, neighbor(ti - 2).to_string()),
                    (11, neighbor(ti + 2).to_string()),
                ];
                feats.map(|(tpl, s)| (fnv1a(seed, tpl, &s) % n_buckets) as u32)
            })
            .collect()
    }

    pub fn forward(&self, tokens: &[String]) -> Encoded {
        let dim = self.config.dim;
        let buckets = self.token_buckets(tokens);
        let mut pooled_z = vec![0.0; dim];
        let token_vecs = buckets
            .iter()
            .map(|feats| {
                let mut z = self.bias.clone();
                for &b in feats {
                    let row = &self.embeddings[b as usize * dim..(b as usize + 1) * dim];
                    for (zi, ei) in z.iter_mut().zip(row) {
                        *zi += ei;
                    }
                }
                for (p, zi) in pooled_z.iter_mut().zip(&z) {
                    *p += zi;
                }
                z.iter().map(|v| v.tanh()).collect()
            })
            .collect();
        let pooled = pooled_z.iter().map(|z| z.tanh()).collect();
        Encoded { buckets, tokens: token_vecs, pooled }
    }
}
