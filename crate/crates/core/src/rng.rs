//! SplitMix64 stream used wherever a result has to be reproducible from a
//! seed across platforms and crate versions.
//!
//! The generator is bit-exact:
//!
//! ```text
//! state ← state + 0x9E3779B97F4A7C15          (wrapping)
//! z ← state
//! z ← (z ⊕ (z >> 30)) · 0xBF58476D1CE4E5B9     (wrapping)
//! z ← (z ⊕ (z >> 27)) · 0x94D049BB133111EB     (wrapping)
//! output z ⊕ (z >> 31)
//! ```
//!
//! Derived draws:
//!
//! * `next_f64` = `(next_u64 >> 11) · 2⁻⁵³`, uniform in `[0, 1)`.
//! * `uniform(lo, hi)` = `lo + (hi − lo) · next_f64`.
//! * `below(n)` = `⌊next_f64 · n⌋` (bias below 2⁻⁵³·n, irrelevant at our sizes).

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// `k` distinct elements of `items`, uniformly, by a partial
    /// Fisher–Yates shuffle. Output order is the draw order.
    pub fn sample<T: Clone>(&mut self, items: &[T], k: usize) -> Vec<T> {
        assert!(k <= items.len());
        let mut pool = items.to_vec();
        for i in 0..k {
            let j = i + self.below(pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
