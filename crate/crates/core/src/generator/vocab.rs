//! Pseudo-word vocabulary and rank samplers.
//!
//! Word `r` is the bijective encoding of `r + 60` in base 60, one
//! consonant-vowel syllable per digit, so every word has at least two
//! syllables, contains only `[a-z]`, and distinct ranks never collide.

use rand::Rng;
use rand_distr::{Distribution, Zipf};

const CONSONANTS: &[u8] = b"bdfgklmnprst";
const VOWELS: &[u8] = b"aeiou";
const BASE: usize = 60;

/// Word at 0-based frequency rank `rank`.
pub fn word(rank: usize) -> String {
    let mut n = rank + BASE;
    let mut digits = Vec::new();
    while n > 0 {
        digits.push(n % BASE);
        n /= BASE;
    }
    let mut s = String::with_capacity(digits.len() * 2);
    for d in digits.iter().rev() {
        s.push(CONSONANTS[d / VOWELS.len()] as char);
        s.push(VOWELS[d % VOWELS.len()] as char);
    }
    s
}

/// Inverse of [`word`]; `None` for strings that are not generated words.
pub fn rank_of(w: &str) -> Option<usize> {
    let b = w.as_bytes();
    if b.len() < 4 || !b.len().is_multiple_of(2) {
        return None;
    }
    let mut n = 0usize;
    for pair in b.chunks(2) {
        let c = CONSONANTS.iter().position(|&x| x == pair[0])?;
        let v = VOWELS.iter().position(|&x| x == pair[1])?;
        n = n.checked_mul(BASE)?.checked_add(c * VOWELS.len() + v)?;
    }
    if b[0..2] == [CONSONANTS[0], VOWELS[0]] {
        // leading zero digit: not produced by `word`
        return None;
    }
    n.checked_sub(BASE)
}

/// Samples 0-based ranks from a Zipf law over `n` items.
#[derive(Debug, Clone)]
pub struct RankSampler {
    zipf: Zipf<f64>,
    n: usize,
}

impl RankSampler {
    pub fn new(n: usize, exponent: f64) -> Result<Self, String> {
        let zipf = Zipf::new(n as f64, exponent).map_err(|e| format!("invalid Zipf parameters: {e}"))?;
        Ok(RankSampler { zipf, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r = self.zipf.sample(rng) as usize;
        r.clamp(1, self.n) - 1
    }
}

/// Moves `rank` to another rank of the same power-of-two octave, by an
/// amount fixed per (topic, octave). Octave boundaries are preserved, so the
/// mixture of shifted and unshifted draws stays close to the base law while
/// each topic favours its own words.
pub fn topic_shift(rank: usize, topic: u32, n: usize) -> usize {
    let r1 = rank + 1;
    let k = usize::BITS - 1 - r1.leading_zeros();
    let lo = 1usize << k;
    let width = lo.min(n + 1 - lo);
    if width <= 1 {
        return rank;
    }
    let shift = (mix(((topic as u64) << 32) | k as u64) % width as u64) as usize;
    lo + (r1 - lo + shift) % width - 1
}

/// SplitMix64 finalizer.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Zipf CDF over ranks `1..=n`, used by statistical checks.
pub fn zipf_cdf(n: usize, exponent: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}
