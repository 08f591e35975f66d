//! Chunked, seed-deterministic Monte Carlo for success probabilities.
//!
//! Trials are split into fixed-size chunks; chunk `c` draws from a ChaCha8
//! stream seeded with `mix(seed, c)`. Chunk results are integer counts, so
//! the total does not depend on how many threads ran the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Trials per chunk. Part of the reproducibility contract: changing it
/// changes every reported estimate.
pub const CHUNK_TRIALS: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub parallelism: usize,
    pub ci_level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { trials: 100_000, seed: 42, parallelism: 1, ci_level: 0.95 }
    }
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        let cfg = Self { trials, seed, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_parallelism(mut self, threads: usize) -> Self {
        self.parallelism = threads.max(1);
        self
    }

    pub fn with_ci_level(mut self, level: f64) -> Self {
        self.ci_level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 100 {
            return Err(Error::param("trials", format!("need at least 100 trials, got {}", self.trials)));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::param("ci_level", format!("must lie in (0, 1), got {}", self.ci_level)));
        }
        if self.parallelism == 0 {
            return Err(Error::param("parallelism", "must be at least 1"));
        }
        Ok(())
    }

    /// Two-sided normal critical value for `ci_level`.
    pub fn z(&self) -> f64 {
        std::f64::consts::SQRT_2 * erfc_inv(1.0 - self.ci_level)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chunk_seed(seed: u64, chunk: u64) -> u64 {
    splitmix64(seed ^ splitmix64(chunk))
}

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(chunk_seed(seed, chunk))
}

/// A binomial proportion with its Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            successes,
            trials,
            estimate: p,
            ci_half_width: half,
            lower: (center - half).max(0.0),
            upper: (center + half).min(1.0),
        }
    }
}

/// Runs `trials` Bernoulli experiments and counts successes.
///
/// `trial` receives the chunk's generator and a per-chunk scratch value.
pub fn count_successes<S, F>(mc: &McConfig, trial: F) -> Result<Proportion>
where
    S: Default,
    F: Fn(&mut ChaCha8Rng, &mut S) -> Result<bool> + Sync,
{
    mc.validate()?;
    let chunks = mc.trials.div_ceil(CHUNK_TRIALS);
    let run_chunk = |c: u64| -> Result<u64> {
        let mut rng = chunk_rng(mc.seed, c);
        let mut scratch = S::default();
        let len = CHUNK_TRIALS.min(mc.trials - c * CHUNK_TRIALS);
        let mut hits = 0;
        for _ in 0..len {
            hits += u64::from(trial(&mut rng, &mut scratch)?);
        }
        Ok(hits)
    };
    let counts: Vec<Result<u64>> = if mc.parallelism <= 1 || chunks == 1 {
        (0..chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(mc.parallelism)
            .build()
            .map_err(|e| Error::param("parallelism", e.to_string()))?;
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
    };
    let mut successes = 0;
    for c in counts {
        successes += c?;
    }
    Ok(Proportion::wilson(successes, mc.trials, mc.z()))
}
