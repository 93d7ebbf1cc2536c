//! Seeded generator used for scene layout.
//!
//! The recurrence is fixed so that layouts reproduce bit-for-bit in any
//! implementation:
//!
//! * the 64-bit user seed is expanded once with SplitMix64
//!   (`z += 0x9E3779B97F4A7C15; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^= z >> 31`), and a zero
//!   result is replaced by `0x9E3779B97F4A7C15`;
//! * each draw is xorshift64* (`x ^= x >> 12; x ^= x << 25; x ^= x >> 27;
//!   out = x * 0x2545F4914F6CDD1D`, all wrapping);
//! * a uniform real in `[0, 1)` is `(out >> 11) * 2^-53`.

#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        if z == 0 {
            z = 0x9E37_79B9_7F4A_7C15;
        }
        Self { state: z }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the closed range `[lo, hi]` (up to rounding at the top end).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = XorShift64Star::new(42);
        let mut b = XorShift64Star::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_interval() {
        let mut r = XorShift64Star::new(0);
        for _ in 0..10_000 {
            let v = r.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn reference_stream() {
        // Frozen first draws for seed 1; changing the recurrence changes every scene.
        // Values from an independent Python evaluation of the recurrence above.
        let mut r = XorShift64Star::new(1);
        let first: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(
            first,
            vec![0x4b46a55df3611b9b, 0xd7e1f1410e763ef4, 0x5f14ec66975f9b06]
        );
    }
}
