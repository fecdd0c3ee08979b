use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::particle_rng;
use crate::error::{invalid, Error, Result};
use crate::state::{momentum_at, StateVector};

/// Outcomes of repeated projective momentum measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Measured momenta. With truncation these are the lower edges of bins
    /// of width `N / 2^m`.
    pub outcomes: Vec<i64>,
    /// Grid size `N`.
    pub grid: usize,
    pub seed: u64,
    /// Number `m` of most significant qubits read out, if truncated.
    pub truncated_to_qubits: Option<u32>,
}

impl ShotRecord {
    pub fn shots(&self) -> usize {
        self.outcomes.len()
    }

    /// Width of the momentum cells the outcomes resolve.
    pub fn resolution(&self) -> usize {
        match self.truncated_to_qubits {
            Some(m) => self.grid >> m,
            None => 1,
        }
    }
}

/// Independent stream `run` derived from the master seed.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    particle_rng(seed, run)
}

/// Draw `shots` outcomes from a centered momentum distribution.
///
/// With `truncate = Some(m)` only the `m` most significant bits of the
/// centered index are read out; outcomes are drawn from the marginal over
/// those bits.
pub fn sample_distribution(
    probs: &[f64],
    shots: usize,
    rng: &mut ChaCha8Rng,
    truncate: Option<u32>,
) -> Result<Vec<i64>> {
    if shots == 0 {
        return Err(invalid("shots", "must be at least 1"));
    }
    let n = probs.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(invalid("distribution", "length must be 2^n_q"));
    }
    let n_q = n.trailing_zeros();
    let width = match truncate {
        Some(m) if m == 0 || m > n_q => {
            return Err(invalid("truncate", format!("must be in 1..={n_q}")))
        }
        Some(m) => n >> m,
        None => 1,
    };
    let mut cdf = Vec::with_capacity(n / width);
    let mut acc = 0.0;
    for chunk in probs.chunks(width) {
        acc += chunk.iter().sum::<f64>();
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Empty("probability mass"));
    }
    Ok((0..shots)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            let bin = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            momentum_at(bin * width, n)
        })
        .collect())
}

/// Projective measurement of `psi` in the momentum basis, `shots` times.
pub fn sample_momentum(
    psi: &StateVector,
    shots: usize,
    seed: u64,
    truncate: Option<u32>,
) -> Result<ShotRecord> {
    let probs = psi.momentum_probabilities();
    let mut rng = run_rng(seed, 0);
    let outcomes = sample_distribution(&probs, shots, &mut rng, truncate)?;
    Ok(ShotRecord {
        outcomes,
        grid: probs.len(),
        seed,
        truncated_to_qubits: truncate,
    })
}
