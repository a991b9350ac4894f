use super::{EmbeddingError, EmbeddingProvider, EmbeddingProviderDescriptor};

pub const DEFAULT_DIMENSION: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded bag-of-tokens feature hashing.
///
/// Text is lowercased and split into alphanumeric tokens; each token is hashed
/// (FNV-1a, seed folded into the offset basis) to one of `dimension` buckets
/// and bucket counts form the raw vector. Output depends only on the seed,
/// the dimension and the text.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: u64,
    descriptor: EmbeddingProviderDescriptor,
}

impl HashEmbedder {
    pub fn new(seed: u64, dimension: usize) -> Self {
        assert!(dimension > 0, "hash embedder dimension must be positive");
        HashEmbedder {
            seed,
            descriptor: EmbeddingProviderDescriptor {
                provider_id: format!("hash-fnv1a-d{dimension}-s{seed}"),
                dimension,
                deterministic: true,
            },
        }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self::new(seed, DEFAULT_DIMENSION)
    }

    /// Bucket a single token lands in.
    pub fn bucket(&self, token: &str) -> usize {
        let mut h = FNV_OFFSET ^ self.seed.wrapping_mul(FNV_PRIME);
        for b in token.to_lowercase().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        (h % self.descriptor.dimension as u64) as usize
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
}

impl EmbeddingProvider for HashEmbedder {
    fn descriptor(&self) -> &EmbeddingProviderDescriptor {
        &self.descriptor
    }

    fn raw_embedding(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let mut counts = vec![0.0; self.descriptor.dimension];
        for token in tokens(text) {
            counts[self.bucket(token)] += 1.0;
        }
        Ok(counts)
    }
}
