use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_SEED: u64 = 0x5eed_1234;

/// Deterministic offline provider: lowercase alphanumeric tokens are
/// feature-hashed (FNV-1a, signed) into a fixed number of buckets and the
/// counts are L2-normalized. Empty text maps to the zero vector.
#[derive(Debug, Clone)]
pub struct HashingProvider {
    dim: usize,
    seed: u64,
    name: String,
}

impl Default for HashingProvider {
    fn default() -> Self {
        Self::new(DEFAULT_DIM, DEFAULT_SEED)
    }
}

impl HashingProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0);
        HashingProvider {
            dim,
            seed,
            name: format!("hashing-{dim}-{seed:x}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn hash(&self, token: &str) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.seed.to_le_bytes().iter().chain(token.as_bytes()) {
            h ^= *b as u64;
            h = h.wrapping_mul(PRIME);
        }
        h
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut acc = vec![0f64; self.dim];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let h = self.hash(token);
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[(h % self.dim as u64) as usize] += sign;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            acc.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector::new(acc.into_iter().map(|x| x as f32).collect())
    }
}

impl EmbeddingProvider for HashingProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
