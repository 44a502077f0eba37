use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Seeded random stream used by every stochastic operation.
///
/// Backed by ChaCha8, a counter-based generator whose output for a given seed
/// is identical on every platform. Floats are produced from the top 53 bits of
/// a `u64` draw, so the mapping from seed to values does not depend on any
/// external sampling code.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child stream keyed by `(seed, key)`, used for per-tile and
    /// per-resample streams so results do not depend on scheduling order.
    pub fn derive(seed: u64, key: &str) -> Self {
        Self::new(derive_seed(seed, key))
    }

    /// Child stream keyed by an index.
    pub fn derive_indexed(seed: u64, index: u64) -> Self {
        Self::derive(seed, &format!("#{index}"))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`, computed as `lo + (hi - lo) * u`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// `true` with probability `p`. Always consumes exactly one draw.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below() needs a non-empty range");
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// `SHA-256(seed_le || key)` truncated to the first eight bytes.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
