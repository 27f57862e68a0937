//! Deterministic labelled random streams.
//!
//! A stream is derived from `(master_seed, label)`: the ChaCha12 seed is the
//! SHA-256 digest of the 8-byte little-endian master seed followed by the
//! UTF-8 bytes of the label. Equal inputs reproduce the exact draw sequence
//! on every platform; distinct labels (or seeds) give independent streams.
//! No wall-clock or OS entropy is used anywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// A seeded random stream. All simulation randomness flows through these.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    /// Derive the stream for `(master_seed, label)`.
    pub fn derive(master_seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        RngStream {
            rng: ChaCha12Rng::from_seed(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform f64 in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform index in [0, n). Panics when n = 0.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw an index from an empty range");
        self.rng.random_range(0..n)
    }

    /// True with probability `p`: includes iff the next f64 draw is below p.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Gaussian draw with mean 0 and standard deviation `sigma`.
    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * sigma
    }

    /// The first `k` positions of a Fisher-Yates shuffle of `0..n`, in draw
    /// order. Used both for sampling subsets and for random pairings.
    pub fn pick_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut all: Vec<usize> = (0..n).collect();
        for j in 0..k {
            let swap_with = j + self.index(n - j);
            all.swap(j, swap_with);
        }
        all.truncate(k);
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_label_reproduce_the_stream() {
        let mut a = RngStream::derive(42, "habitat/0");
        let mut b = RngStream::derive(42, "habitat/0");
        for _ in 0..64 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_labels_diverge() {
        let mut a = RngStream::derive(42, "habitat/0");
        let mut b = RngStream::derive(42, "habitat/1");
        let drew_differently = (0..64).any(|_| a.next_u64() != b.next_u64());
        assert!(drew_differently);
    }

    #[test]
    fn distinct_seeds_diverge() {
        let mut a = RngStream::derive(42, "x");
        let mut b = RngStream::derive(43, "x");
        let drew_differently = (0..64).any(|_| a.next_u64() != b.next_u64());
        assert!(drew_differently);
    }

    // Golden values pin the derivation itself: SHA-256(seed_le || label)
    // feeding ChaCha12. Any change to the derivation shows up here.
    #[test]
    fn golden_draws_for_seed_42_habitat_0() {
        let mut s = RngStream::derive(42, "habitat/0");
        let got: Vec<u64> = (0..4).map(|_| s.next_u64()).collect();
        assert_eq!(got, GOLDEN_42_HABITAT_0);
    }

    const GOLDEN_42_HABITAT_0: [u64; 4] = [
        4179396916445091628,
        11783695337949017065,
        16102748140878480811,
        1372383134454773401,
    ];

    #[test]
    fn pick_indices_is_a_permutation_prefix() {
        let mut s = RngStream::derive(7, "pick");
        let picked = s.pick_indices(10, 6);
        assert_eq!(picked.len(), 6);
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 6, "indices must be distinct");
        assert!(picked.iter().all(|&i| i < 10));
    }

    #[test]
    fn index_covers_range() {
        let mut s = RngStream::derive(1, "cover");
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[s.index(5)] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
