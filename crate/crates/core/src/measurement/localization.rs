use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measurement::{histogram_sampled, run_rng, sample_distribution, MomentumHistogram, ShotRecord};
use crate::measurement::HistogramSource;
use crate::params::MapParams;
use crate::state::momentum_moments;
use crate::stats::weighted_linear_fit;

/// Smallest probability ever admitted into a log fit.
const ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Both sides of `n0` share one decay length.
    TwoSided,
    /// Use only bins at or above `n0`.
    Upper,
    /// Use only bins at or below `n0`.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mode: FitMode,
    /// Bins with probability below this are dropped. Defaults to
    /// `max(10 / shots, 1e-12)` for sampled and `1e-12` for exact data.
    pub floor: Option<f64>,
    /// Only bins with `|center - n0| <= max_distance` enter the fit.
    pub max_distance: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::TwoSided,
            floor: None,
            max_distance: None,
        }
    }
}

/// Exponential fit `W_n ~ exp(-2 |n - n0| / ell)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFit {
    pub ell: f64,
    pub n0: f64,
    pub stderr: f64,
    /// Smallest and largest `|n - n0|` used.
    pub fit_range: (f64, f64),
    pub r_squared: f64,
    pub bins_used: usize,
    /// `ell < N / 4`; otherwise the profile is limited by the system size.
    pub localized: bool,
}

/// Weighted least squares of `ln W` against `|n - n0|`, with `ell = -2 / slope`.
///
/// `W` is the per-level probability of each bin. Sampled histograms weight
/// bins by their counts, exact ones uniformly. Zero bins and bins under the
/// floor are skipped.
pub fn fit_localization(
    hist: &MomentumHistogram,
    n0: f64,
    options: &FitOptions,
) -> Result<LocalizationFit> {
    let floor = options.floor.unwrap_or(match hist.shots() {
        Some(shots) => (10.0 / shots as f64).max(ABSOLUTE_FLOOR),
        None => ABSOLUTE_FLOOR,
    });
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    let (mut below, mut above) = (0usize, 0usize);
    for b in 0..hist.bins() {
        let prob = hist.probabilities[b];
        if !(prob > 0.0) || prob < floor {
            continue;
        }
        let offset = hist.center(b) - n0;
        let keep = match options.mode {
            FitMode::TwoSided => true,
            FitMode::Upper => offset >= 0.0,
            FitMode::Lower => offset <= 0.0,
        };
        if !keep || options.max_distance.is_some_and(|d| offset.abs() > d) {
            continue;
        }
        if offset < 0.0 {
            below += 1;
        } else {
            above += 1;
        }
        x.push(offset.abs());
        y.push(hist.density(b).ln());
        w.push(match (&hist.counts, hist.source) {
            (Some(c), HistogramSource::Sampled) => c[b] as f64,
            _ => 1.0,
        });
    }
    let enough = match options.mode {
        FitMode::TwoSided => below >= 3 && above >= 3,
        FitMode::Upper | FitMode::Lower => x.len() >= 4,
    };
    if !enough {
        return Err(Error::FitUndetermined(format!(
            "{below} usable bins below and {above} above n0"
        )));
    }
    let fit = weighted_linear_fit(&x, &y, &w)?;
    if !(fit.slope < 0.0) {
        return Err(Error::FitUndetermined(format!(
            "profile does not decay (slope {})",
            fit.slope
        )));
    }
    let ell = -2.0 / fit.slope;
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(0.0, f64::max);
    Ok(LocalizationFit {
        ell,
        n0,
        stderr: 2.0 * fit.slope_stderr / (fit.slope * fit.slope),
        fit_range: (lo, hi),
        r_squared: fit.r_squared,
        bins_used: x.len(),
        localized: ell < hist.grid as f64 / 4.0,
    })
}

/// Diffusion in level units and the break-time / localization estimates
/// that follow from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakTime {
    /// `D_n = pi^2 k^2 / 3`.
    pub d_n: f64,
    pub t_star: f64,
    pub ell_pred: f64,
}

pub fn predict_break_time(params: &MapParams) -> BreakTime {
    let d_n = PI * PI * params.k * params.k / 3.0;
    BreakTime {
        d_n,
        t_star: d_n,
        ell_pred: d_n,
    }
}

/// Default coarse-graining width `max(1, round(ell_pred / 6))`.
pub fn default_bin_width(params: &MapParams) -> usize {
    ((predict_break_time(params).ell_pred / 6.0).round() as usize).max(1)
}

/// First `t` at which the spreading stays below 80% of `d_n t` for five
/// consecutive steps.
pub fn detect_break_time(msd: &[f64], d_n: f64) -> Option<usize> {
    const SUSTAIN: usize = 5;
    let below: Vec<bool> = msd
        .iter()
        .enumerate()
        .map(|(t, &v)| t > 0 && v < 0.8 * d_n * t as f64)
        .collect();
    (1..msd.len()).find(|&t| t + SUSTAIN <= msd.len() && below[t..t + SUSTAIN].iter().all(|&b| b))
}

/// Mean of the distributions `trajectory[a..=b]`.
pub fn time_average_distribution(trajectory: &[Vec<f64>], window: (usize, usize)) -> Result<Vec<f64>> {
    let (a, b) = window;
    if a > b {
        return Err(Error::Empty("averaging window"));
    }
    if b >= trajectory.len() {
        return Err(invalid(
            "window",
            format!("ends at {b}, trajectory has {} steps", trajectory.len()),
        ));
    }
    let len = trajectory[a].len();
    let mut avg = vec![0.0; len];
    for dist in &trajectory[a..=b] {
        for (acc, v) in avg.iter_mut().zip(dist) {
            *acc += v;
        }
    }
    let count = (b - a + 1) as f64;
    avg.iter_mut().for_each(|v| *v /= count);
    Ok(avg)
}

/// Momentum variance `<(dn)^2>` of each distribution.
pub fn msd_series(trajectory: &[Vec<f64>]) -> Vec<f64> {
    trajectory.iter().map(|d| momentum_moments(d).1).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledMsd {
    pub variance: f64,
    /// Delete-one jackknife standard error.
    pub stderr: f64,
}

/// Momentum variance estimated from measured shots.
pub fn msd_from_shots(record: &ShotRecord) -> Result<SampledMsd> {
    let n = record.outcomes.len();
    if n < 2 {
        return Err(invalid("shots", "need at least two outcomes"));
    }
    let x: Vec<f64> = record.outcomes.iter().map(|&o| o as f64).collect();
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let nf = n as f64;
    let variance = s2 / nf - (s1 / nf).powi(2);
    let m = nf - 1.0;
    let loo: Vec<f64> = x
        .iter()
        .map(|v| (s2 - v * v) / m - ((s1 - v) / m).powi(2))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / nf;
    let ss: f64 = loo.iter().map(|v| (v - mean_loo).powi(2)).sum();
    Ok(SampledMsd {
        variance,
        stderr: (m / nf * ss).sqrt(),
    })
}

/// Repeat the sample-histogram-fit protocol `runs` times on independent
/// streams of `seed`, returning the fitted `ell` of each run that could be
/// fitted.
pub fn repeat_localization(
    probs: &[f64],
    shots: usize,
    runs: usize,
    seed: u64,
    bin_width: usize,
    truncate: Option<u32>,
    n0: f64,
    options: &FitOptions,
) -> Result<Vec<f64>> {
    let mut ells = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut rng = run_rng(seed, run as u64);
        let outcomes = sample_distribution(probs, shots, &mut rng, truncate)?;
        let record = ShotRecord {
            outcomes,
            grid: probs.len(),
            seed,
            truncated_to_qubits: truncate,
        };
        let hist = histogram_sampled(&record, bin_width)?;
        if let Ok(fit) = fit_localization(&hist, n0, options) {
            ells.push(fit.ell);
        }
    }
    Ok(ells)
}
