//! Portable SplitMix64 generator.
//!
//! Every random draw in the simulator (initial conditions, agent selection
//! inside the subgraph operation) goes through this generator so that any
//! implementation following the update rule below reproduces identical
//! streams:
//!
//! ```text
//! state <- state + 0x9E3779B97F4A7C15            (wrapping)
//! z     <- state
//! z     <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (wrapping)
//! z     <- (z ^ (z >> 27)) * 0x94D049BB133111EB  (wrapping)
//! out   <- z ^ (z >> 31)
//! ```
//!
//! Floats are `(out >> 11) * 2^-53` in `[0, 1)`. Bounded integers use the
//! multiply-high reduction `(out * n) >> 64`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derives an independent stream from a seed and a stream label.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut mixer = Self::new(seed ^ stream.wrapping_mul(GOLDEN_GAMMA));
        Self::new(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
