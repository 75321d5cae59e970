//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`Stream`], a thin wrapper
//! around xoshiro256++ seeded through SplitMix64 (`seed_from_u64`). The
//! derived quantities are fixed so that other implementations can reproduce
//! datasets and traces bit-for-bit:
//!
//! * uniform `[0, 1)`: `(next_u64 >> 11) * 2^-53`;
//! * standard normal: Marsaglia's polar method on `2u - 1` pairs, both
//!   variates used (the second one is cached);
//! * index below `n`: `floor(u * n)` with `u` the uniform above;
//! * `M` distinct indices out of `N`: partial Fisher-Yates on `0..N`,
//!   returned sorted ascending.
//!
//! Repeat `r` of a run uses the stream seeded with `master_seed ^ r`.
//! Auxiliary streams (dataset, initialization, ...) use [`derive_seed`].

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Domain tags for [`derive_seed`].
pub mod tags {
    pub const DATASET: u64 = 0x6461_7461_7365_7431;
    pub const SOURCE_NOISE: u64 = 0x736f_7572_6365_6e31;
    pub const INIT: u64 = 0x696e_6974_6961_6c31;
    pub const ESTIMATE: u64 = 0x6573_7469_6d61_7431;
}

/// SplitMix64 finalizer applied to `seed ^ tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = (seed ^ tag).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the per-repeat stream.
pub fn repeat_seed(master_seed: u64, repeat: u64) -> u64 {
    master_seed ^ repeat
}

#[derive(Debug, Clone)]
pub struct Stream {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
    scratch: Vec<usize>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
            scratch: Vec::new(),
        }
    }

    /// Stream for repeat `repeat` of a run with the given master seed.
    pub fn for_repeat(master_seed: u64, repeat: u64) -> Self {
        Self::new(repeat_seed(master_seed, repeat))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Index uniformly distributed on `0..n`.
    pub fn index_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal variate (Marsaglia polar method).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.normal()
    }

    /// Writes `m` distinct indices drawn uniformly from `0..n` into `out`,
    /// sorted ascending.
    pub fn sample_indices(&mut self, n: usize, m: usize, out: &mut Vec<usize>) {
        assert!(m <= n, "cannot draw {m} distinct indices out of {n}");
        if self.scratch.len() != n {
            self.scratch = (0..n).collect();
        }
        out.clear();
        let mut swaps = Vec::with_capacity(m);
        for i in 0..m {
            let j = i + self.index_below(n - i);
            self.scratch.swap(i, j);
            swaps.push(j);
            out.push(self.scratch[i]);
        }
        // undo the swaps so the scratch permutation is the identity again
        for (i, &j) in swaps.iter().enumerate().rev() {
            self.scratch.swap(i, j);
        }
        out.sort_unstable();
    }
}
