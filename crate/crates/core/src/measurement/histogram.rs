use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measurement::ShotRecord;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramSource {
    ExactAmplitudes,
    Sampled,
}

/// Coarse-grained momentum distribution.
///
/// Bins tile the centered grid `[-N/2, N/2)` from the bottom with width
/// `bin_width`; the top bin is narrower when the width does not divide `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumHistogram {
    pub grid: usize,
    pub bin_width: usize,
    /// `bins + 1` edges; bin `b` holds momenta in `[edges[b], edges[b + 1])`.
    pub edges: Vec<i64>,
    /// Probability per bin.
    pub probabilities: Vec<f64>,
    /// Raw counts for sampled histograms.
    pub counts: Option<Vec<u64>>,
    pub source: HistogramSource,
}

impl MomentumHistogram {
    pub fn bins(&self) -> usize {
        self.probabilities.len()
    }

    /// Mean of the integer momenta covered by bin `b`.
    pub fn center(&self, b: usize) -> f64 {
        (self.edges[b] + self.edges[b + 1] - 1) as f64 / 2.0
    }

    pub fn width(&self, b: usize) -> usize {
        (self.edges[b + 1] - self.edges[b]) as usize
    }

    /// Average probability per momentum level in bin `b`.
    pub fn density(&self, b: usize) -> f64 {
        self.probabilities[b] / self.width(b) as f64
    }

    pub fn shots(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }

    pub fn bin_of(&self, momentum: i64) -> Option<usize> {
        if momentum < self.edges[0] || momentum >= *self.edges.last()? {
            return None;
        }
        Some(((momentum - self.edges[0]) as usize) / self.bin_width)
    }
}

fn edges(grid: usize, bin_width: usize) -> Result<Vec<i64>> {
    if bin_width == 0 {
        return Err(invalid("bin_width", "must be at least 1"));
    }
    if bin_width > grid {
        return Err(invalid("bin_width", format!("{bin_width} exceeds the grid size {grid}")));
    }
    let half = (grid / 2) as i64;
    let mut e: Vec<i64> = (0..grid.div_ceil(bin_width))
        .map(|b| -half + (b * bin_width) as i64)
        .collect();
    e.push(half);
    Ok(e)
}

/// Histogram of an exact centered distribution `|psi_hat(n)|^2`.
pub fn histogram_exact(probs: &[f64], bin_width: usize) -> Result<MomentumHistogram> {
    let edges = edges(probs.len(), bin_width)?;
    let probabilities = probs.chunks(bin_width).map(|c| c.iter().sum()).collect();
    Ok(MomentumHistogram {
        grid: probs.len(),
        bin_width,
        edges,
        probabilities,
        counts: None,
        source: HistogramSource::ExactAmplitudes,
    })
}

pub fn histogram_state(psi: &StateVector, bin_width: usize) -> Result<MomentumHistogram> {
    histogram_exact(&psi.momentum_probabilities(), bin_width)
}

/// Histogram of measured outcomes. Truncated records can only be binned at
/// multiples of their resolution.
pub fn histogram_sampled(record: &ShotRecord, bin_width: usize) -> Result<MomentumHistogram> {
    let edges = edges(record.grid, bin_width)?;
    if bin_width % record.resolution() != 0 {
        return Err(invalid(
            "bin_width",
            format!(
                "{bin_width} is not a multiple of the measured resolution {}",
                record.resolution()
            ),
        ));
    }
    let mut counts = vec![0u64; edges.len() - 1];
    let half = (record.grid / 2) as i64;
    for &o in &record.outcomes {
        if o < -half || o >= half {
            return Err(invalid("outcomes", format!("momentum {o} outside the grid")));
        }
        counts[((o + half) as usize) / bin_width] += 1;
    }
    let total = record.outcomes.len() as f64;
    Ok(MomentumHistogram {
        grid: record.grid,
        bin_width,
        edges,
        probabilities: counts.iter().map(|&c| c as f64 / total).collect(),
        counts: Some(counts),
        source: HistogramSource::Sampled,
    })
}
