//! Counter-based Gaussian streams.
//!
//! A global seed is expanded into named substreams (`"fvm-noise"`,
//! `"particle-noise"`, `"init"`, ...) by hashing. Each substream is a ChaCha8
//! key; ChaCha's 64-bit stream id and word counter then address any draw
//! directly. Gaussian pairs are produced by Box-Muller from exactly two `u64`
//! words, so pair number `k` of stream `s` always sits at word `4k` and can be
//! regenerated without replaying the stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;

/// 256-bit key of one named substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn derive(seed: u64, name: &str) -> Self {
        let digest = Sha256::new()
            .chain_update(seed.to_le_bytes())
            .chain_update(name.as_bytes())
            .finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        StreamKey(key)
    }

    /// Plain sequential generator for non-Gaussian uses (initial placement).
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(stream);
        rng
    }
}

const WORDS_PER_PAIR: u128 = 4;

/// Standard normal pairs from one ChaCha stream.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(key: &StreamKey, stream: u64) -> Self {
        GaussianStream {
            rng: key.rng(stream),
        }
    }

    /// Stream positioned at pair `pair_index`.
    pub fn at(key: &StreamKey, stream: u64, pair_index: u64) -> Self {
        let mut s = Self::new(key, stream);
        s.seek(pair_index);
        s
    }

    pub fn seek(&mut self, pair_index: u64) {
        self.rng.set_word_pos(pair_index as u128 * WORDS_PER_PAIR);
    }

    #[inline]
    pub fn next_pair(&mut self) -> [f64; 2] {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        box_muller(a, b)
    }
}

/// Two independent standard normals from two uniform words.
#[inline]
pub fn box_muller(a: u64, b: u64) -> [f64; 2] {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (TAU * u2).sin_cos();
    [r * c, r * s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_give_distinct_keys() {
        assert_ne!(
            StreamKey::derive(1, "fvm-noise"),
            StreamKey::derive(1, "particle-noise")
        );
        assert_ne!(StreamKey::derive(1, "init"), StreamKey::derive(2, "init"));
        assert_eq!(StreamKey::derive(7, "init"), StreamKey::derive(7, "init"));
    }

    #[test]
    fn seeking_matches_sequential_draws() {
        let key = StreamKey::derive(42, "test");
        let mut seq = GaussianStream::new(&key, 3);
        let draws: Vec<_> = (0..37).map(|_| seq.next_pair()).collect();
        for k in [0usize, 1, 5, 16, 36] {
            let mut s = GaussianStream::at(&key, 3, k as u64);
            assert_eq!(s.next_pair(), draws[k]);
        }
    }

    #[test]
    fn moments_are_standard() {
        let mut s = GaussianStream::new(&StreamKey::derive(9, "moments"), 0);
        let n = 200_000;
        let (mut m1, mut m2, mut cross) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let [a, b] = s.next_pair();
            m1 += a + b;
            m2 += a * a + b * b;
            cross += a * b;
        }
        let samples = 2.0 * n as f64;
        assert!((m1 / samples).abs() < 4.0 / samples.sqrt());
        assert!((m2 / samples - 1.0).abs() < 4.0 * (2.0 / samples).sqrt());
        assert!((cross / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }
}
