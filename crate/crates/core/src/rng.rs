//! Deterministic 64-bit linear congruential generator.
//!
//! Test problems must be bit-reproducible across platforms, so the generator
//! is spelled out here instead of relying on an external crate whose stream
//! could change between versions.

/// Multiplier from Knuth's MMIX generator.
pub const LCG_MULTIPLIER: u64 = 6_364_136_223_846_793_005;
/// Increment from Knuth's MMIX generator.
pub const LCG_INCREMENT: u64 = 1_442_695_040_888_963_407;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        // One warm-up step decorrelates small consecutive seeds.
        let mut g = Lcg { state: seed ^ 0x9E37_79B9_7F4A_7C15 };
        g.next_u64();
        g
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_MULTIPLIER).wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)` from the top 53 bits of the state.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn uniform_vec(&mut self, len: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(lo, hi)).collect()
    }
}
