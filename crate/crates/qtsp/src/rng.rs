//! Portable seeded generator used by the instance generator and the
//! simulated-annealing improver.
//!
//! State transition (splitmix64):
//!   state += 0x9e3779b97f4a7c15
//!   z = state
//!   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//!   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//!   output = z ^ (z >> 31)
//!
//! Bounded draws use the multiply-shift reduction `(x * k) >> 64`; the bias
//! is below 2^-50 for the ranges used here.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from `0..k`.
    pub fn next_below(&mut self, k: u64) -> u64 {
        debug_assert!(k > 0);
        ((self.next_u64() as u128 * k as u128) >> 64) as u64
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_stream() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn bounded_draws_in_range() {
        let mut r = SplitMix64::new(7);
        for _ in 0..10_000 {
            assert!(r.next_below(501) < 501);
            let f = r.next_f64();
            assert!((0.0..1.0).contains(&f));
        }
    }
}
