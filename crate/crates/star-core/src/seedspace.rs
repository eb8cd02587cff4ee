//! Sparse ternary seed vectors.
//!
//! Every term gets a deterministic d-dimensional vector with exactly `k`
//! coordinates set to +1 and `k` set to -1 (all others zero). Two such
//! vectors drawn independently are quasi-orthogonal: their normalized dot
//! product is zero-centered noise whose spread shrinks as `1/sqrt(d)`, which
//! is what lets a modest `d` host a very large vocabulary.
//!
//! Generation is fully pinned down so an index can be rebuilt bit-for-bit:
//! FNV-1a (64-bit) hashes the term, the hash plus the global seed key a
//! ChaCha8 stream, and a rejection-free partial Fisher-Yates shuffle over
//! `[0, d)` draws the `2k` distinct coordinate indices (first `k` positive).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the term-to-seed derivation scheme, recorded in stored
/// indexes; changing any part of the derivation requires a new identifier.
pub const HASH_FUNCTION_ID: &str = "fnv1a64+chacha8+fisher-yates/1";

/// Domain tag mixed into every seed-stream key (16 bytes).
const STREAM_DOMAIN: &[u8; 16] = b"ternary-seeds/01";

/// Geometry of the seed space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedConfig {
    /// Dimension of the space.
    pub dim: usize,
    /// Number of +1 coordinates (and, equally, of -1 coordinates).
    pub k: usize,
    /// Global seed; two indexes agree on term vectors iff they share it.
    pub global_seed: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig { dim: 1000, k: 20, global_seed: 0 }
    }
}

impl SeedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::ConfigInvalid(format!("dim must be at least 2, got {}", self.dim)));
        }
        if self.k < 1 {
            return Err(Error::ConfigInvalid("k must be at least 1".into()));
        }
        if 2 * self.k > self.dim {
            return Err(Error::ConfigInvalid(format!(
                "2k must not exceed dim: k = {}, dim = {}",
                self.k, self.dim
            )));
        }
        Ok(())
    }

    /// Squared Euclidean norm of every seed vector: `2k`.
    pub fn seed_norm_sq(&self) -> f64 {
        (2 * self.k) as f64
    }
}

/// A sparse ternary vector: sorted coordinate lists for the +1s and -1s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedVector {
    /// Dimension of the embedding space this vector lives in.
    pub dim: u32,
    /// Sorted indices holding +1.
    pub positives: Vec<u32>,
    /// Sorted indices holding -1.
    pub negatives: Vec<u32>,
}

impl SeedVector {
    /// Add `weight` times this vector into a dense accumulator of length `dim`.
    pub fn add_scaled_into(&self, weight: f64, dense: &mut [f64]) {
        debug_assert_eq!(dense.len(), self.dim as usize);
        for &i in &self.positives {
            dense[i as usize] += weight;
        }
        for &i in &self.negatives {
            dense[i as usize] -= weight;
        }
    }
}

/// 64-bit FNV-1a hash; the stable term hash of the format.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// ChaCha8 stream keyed by two 64-bit values plus a fixed domain tag.
fn seed_stream(a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..].copy_from_slice(STREAM_DOMAIN);
    ChaCha8Rng::from_seed(key)
}

/// Uniform integer in `[0, n)` by Lemire's multiply-then-reject method; no
/// modulo bias, and the draw sequence is part of the stored-index contract.
fn uniform_below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    loop {
        let x = rng.next_u64();
        let m = (x as u128) * (n as u128);
        let low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            if low < threshold {
                continue;
            }
        }
        return (m >> 64) as u64;
    }
}

/// Draws distinct indices from `[0, dim)` by partial Fisher-Yates shuffle.
/// The pool is restored after every draw so one sampler can be reused.
struct IndexSampler {
    pool: Vec<u32>,
    swaps: Vec<(usize, usize)>,
}

impl IndexSampler {
    fn new(dim: usize) -> Self {
        IndexSampler { pool: (0..dim as u32).collect(), swaps: Vec::new() }
    }

    fn sample(&mut self, rng: &mut ChaCha8Rng, take: usize, out: &mut Vec<u32>) {
        let dim = self.pool.len();
        debug_assert!(take <= dim);
        out.clear();
        for i in 0..take {
            let j = i + uniform_below(rng, (dim - i) as u64) as usize;
            self.pool.swap(i, j);
            self.swaps.push((i, j));
        }
        out.extend_from_slice(&self.pool[..take]);
        for &(i, j) in self.swaps.iter().rev() {
            self.pool.swap(i, j);
        }
        self.swaps.clear();
    }
}

fn seed_vector_from_stream(config: &SeedConfig, rng: &mut ChaCha8Rng, sampler: &mut IndexSampler) -> SeedVector {
    let mut drawn = Vec::with_capacity(2 * config.k);
    sampler.sample(rng, 2 * config.k, &mut drawn);
    let mut positives: Vec<u32> = drawn[..config.k].to_vec();
    let mut negatives: Vec<u32> = drawn[config.k..].to_vec();
    positives.sort_unstable();
    negatives.sort_unstable();
    SeedVector { dim: config.dim as u32, positives, negatives }
}

/// The deterministic seed vector of `term` under `config`.
pub fn seed_for_term(term: &str, config: &SeedConfig) -> Result<SeedVector> {
    config.validate()?;
    let mut sampler = IndexSampler::new(config.dim);
    Ok(seed_for_term_with(term, config, &mut sampler))
}

/// Same as [`seed_for_term`] but reusing a sampler; config must be valid.
fn seed_for_term_with(term: &str, config: &SeedConfig, sampler: &mut IndexSampler) -> SeedVector {
    let mut rng = seed_stream(config.global_seed, fnv1a64(term.as_bytes()));
    seed_vector_from_stream(config, &mut rng, sampler)
}

/// Batch variant of [`seed_for_term`]: one validated sampler, many terms.
pub fn seeds_for_terms<'a>(
    terms: impl IntoIterator<Item = &'a str>,
    config: &SeedConfig,
) -> Result<Vec<SeedVector>> {
    config.validate()?;
    let mut sampler = IndexSampler::new(config.dim);
    Ok(terms
        .into_iter()
        .map(|t| seed_for_term_with(t, config, &mut sampler))
        .collect())
}

/// A random (non-term) seed vector from a keyed stream; used for sampling.
fn random_seed_vector(
    config: &SeedConfig,
    stream_seed: u64,
    counter: u64,
    sampler: &mut IndexSampler,
) -> SeedVector {
    let mut rng = seed_stream(stream_seed, counter);
    seed_vector_from_stream(config, &mut rng, sampler)
}

/// Exact integer dot product of two seed vectors.
pub fn seed_dot(a: &SeedVector, b: &SeedVector) -> Result<i64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim as usize, found: b.dim as usize });
    }
    let agree = sorted_common(&a.positives, &b.positives) + sorted_common(&a.negatives, &b.negatives);
    let disagree = sorted_common(&a.positives, &b.negatives) + sorted_common(&a.negatives, &b.positives);
    Ok(agree - disagree)
}

/// Number of values shared by two sorted, duplicate-free slices.
fn sorted_common(a: &[u32], b: &[u32]) -> i64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Sample statistics of the normalized dot product between independent
/// random seed vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub dim: usize,
    pub k: usize,
    pub samples: u64,
    /// Mean of `dot / 2k`; approaches zero.
    pub mean: f64,
    /// Sample standard deviation of `dot / 2k`; shrinks like `1/sqrt(dim)`.
    pub std_dev: f64,
}

/// Estimate the quasi-orthogonality noise floor of `config` by drawing
/// `n_samples` independent vector pairs from a stream keyed by `sample_seed`.
pub fn estimate_noise(config: &SeedConfig, n_samples: u64, sample_seed: u64) -> Result<NoiseEstimate> {
    config.validate()?;
    if n_samples < 100 {
        return Err(Error::ConfigInvalid(format!(
            "noise estimation needs at least 100 samples, got {n_samples}"
        )));
    }
    let norm_sq = config.seed_norm_sq();
    let mut sampler = IndexSampler::new(config.dim);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for i in 0..n_samples {
        let a = random_seed_vector(config, sample_seed, 2 * i, &mut sampler);
        let b = random_seed_vector(config, sample_seed, 2 * i + 1, &mut sampler);
        let x = seed_dot(&a, &b).expect("same config, same dim") as f64 / norm_sq;
        sum += x;
        sum_sq += x * x;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(NoiseEstimate { dim: config.dim, k: config.k, samples: n_samples, mean, std_dev: var.sqrt() })
}

/// Angle statistics over pairs of deterministic seed vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub dim: usize,
    pub k: usize,
    pub vectors: usize,
    /// Number of pairs measured (all `i < j` pairs, or a deterministic
    /// sample when the full set would be too large).
    pub pairs: u64,
    /// Half-width of the band around 90 degrees.
    pub epsilon_deg: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub mean_angle_deg: f64,
    /// Fraction of pairs with angle in `90 +/- epsilon_deg`.
    pub fraction_within: f64,
}

/// Cap on exhaustive pair enumeration; beyond it pairs are sampled.
const MAX_EXHAUSTIVE_PAIRS: u64 = 2_000_000;

/// Measure pairwise angles between `n_vectors` deterministic seed vectors.
/// Self-pairs are skipped. When the full pair set exceeds an internal cap, a
/// deterministic sample of pairs is measured instead.
pub fn quasi_orthogonality_report(
    n_vectors: usize,
    config: &SeedConfig,
    epsilon_deg: f64,
) -> Result<AngleReport> {
    config.validate()?;
    if n_vectors < 2 {
        return Err(Error::ConfigInvalid(format!(
            "angle report needs at least 2 vectors, got {n_vectors}"
        )));
    }
    let mut sampler = IndexSampler::new(config.dim);
    let vectors: Vec<SeedVector> = (0..n_vectors)
        .map(|i| random_seed_vector(config, config.global_seed, i as u64, &mut sampler))
        .collect();

    let norm_sq = config.seed_norm_sq();
    let mut pairs = 0u64;
    let mut within = 0u64;
    let mut sum = 0.0f64;
    let mut min_angle = f64::INFINITY;
    let mut max_angle = f64::NEG_INFINITY;
    let mut measure = |a: &SeedVector, b: &SeedVector| {
        let cos = (seed_dot(a, b).expect("same config, same dim") as f64 / norm_sq).clamp(-1.0, 1.0);
        let angle = cos.acos().to_degrees();
        pairs += 1;
        sum += angle;
        min_angle = min_angle.min(angle);
        max_angle = max_angle.max(angle);
        if (angle - 90.0).abs() <= epsilon_deg {
            within += 1;
        }
    };

    let total = n_vectors as u64 * (n_vectors as u64 - 1) / 2;
    if total <= MAX_EXHAUSTIVE_PAIRS {
        for i in 0..n_vectors {
            for j in (i + 1)..n_vectors {
                measure(&vectors[i], &vectors[j]);
            }
        }
    } else {
        let mut rng = seed_stream(config.global_seed, 0x414e_474c_4553u64);
        let mut drawn = 0u64;
        while drawn < MAX_EXHAUSTIVE_PAIRS {
            let i = uniform_below(&mut rng, n_vectors as u64) as usize;
            let j = uniform_below(&mut rng, n_vectors as u64) as usize;
            if i == j {
                continue;
            }
            measure(&vectors[i], &vectors[j]);
            drawn += 1;
        }
    }

    Ok(AngleReport {
        dim: config.dim,
        k: config.k,
        vectors: n_vectors,
        pairs,
        epsilon_deg,
        min_angle_deg: min_angle,
        max_angle_deg: max_angle,
        mean_angle_deg: sum / pairs as f64,
        fraction_within: within as f64 / pairs as f64,
    })
}
