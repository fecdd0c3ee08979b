use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const ZERO_PAD: usize = 8;
/// Peaks weaker than this multiple of the median power are not signals.
const PEAK_TO_MEDIAN: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMethod {
    /// Real series `<(dn)^2>(t)`. A breathing ellipse oscillates at twice
    /// the rotation frequency, so the peak is halved and flagged.
    VarianceOscillation,
    /// Complex series `<e^{i theta}>(t)`, which rotates at `omega` directly.
    CenterOfMassReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    /// Radians per map iteration.
    pub omega: f64,
    pub amplitude: f64,
    pub method: FrequencyMethod,
    /// Half the unpadded frequency resolution, `pi / len`, divided by two
    /// again when the peak was halved.
    pub stderr: f64,
    pub halved: bool,
}

/// Hann-windowed, mean-removed, zero-padded power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Angular frequency of each bin in `[-pi, pi)`, ascending.
    pub omegas: Vec<f64>,
    pub power: Vec<f64>,
    /// Sum of window weights, for amplitude normalization.
    pub window_sum: f64,
    /// Length of the input series.
    pub samples: usize,
}

fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
        .collect()
}

pub fn periodogram(series: &[Complex64]) -> Result<Periodogram> {
    if series.len() < 4 {
        return Err(invalid("series", "need at least 4 samples"));
    }
    let len = series.len();
    let mean = series.iter().sum::<Complex64>() / len as f64;
    let window = hann(len);
    let m = len * ZERO_PAD;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for ((b, s), w) in buf.iter_mut().zip(series).zip(&window) {
        *b = (s - mean) * w;
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    // X_j = sum_t x_t e^{-2 pi i j t / m}; a component e^{i w t} peaks at w = 2 pi j / m.
    let half = m / 2;
    let mut omegas = Vec::with_capacity(m);
    let mut power = Vec::with_capacity(m);
    for j in 0..m {
        let idx = (j + half) % m;
        omegas.push(2.0 * PI * (j as f64 - half as f64) / m as f64);
        power.push(buf[idx].norm_sqr());
    }
    Ok(Periodogram {
        omegas,
        power,
        window_sum: window.iter().sum(),
        samples: len,
    })
}

/// Dominant nonzero frequency of a time series.
///
/// The search excludes the Hann main lobe around zero frequency. The peak is
/// refined by a parabola through the log power of the three bins around the
/// maximum.
pub fn estimate_frequency(series: &[Complex64], method: FrequencyMethod) -> Result<FrequencyEstimate> {
    let spec = periodogram(series)?;
    let m = spec.power.len();
    let center = m / 2;
    let guard = 2 * ZERO_PAD;
    let real_input = matches!(method, FrequencyMethod::VarianceOscillation);
    let candidates: Vec<usize> = (1..m - 1)
        .filter(|&j| j.abs_diff(center) > guard && (!real_input || j > center))
        .collect();
    let max_power = spec.power.iter().copied().fold(0.0, f64::max);
    if !(max_power > 0.0) {
        return Err(Error::NoSignal);
    }
    let mut sorted: Vec<f64> = candidates.iter().map(|&j| spec.power[j]).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let &peak = candidates
        .iter()
        .max_by(|&&a, &&b| spec.power[a].total_cmp(&spec.power[b]))
        .ok_or(Error::NoSignal)?;
    let top = spec.power[peak];
    if !(top > PEAK_TO_MEDIAN * median) || top < 1e-24 * max_power.max(1.0) {
        return Err(Error::NoSignal);
    }
    let (a, b, c) = (
        spec.power[peak - 1].ln(),
        top.ln(),
        spec.power[peak + 1].ln(),
    );
    let denom = a - 2.0 * b + c;
    let delta = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let step = 2.0 * PI / m as f64;
    let raw = (spec.omegas[peak] + delta * step).abs();
    let halved = real_input;
    let amplitude_scale = if real_input { 2.0 } else { 1.0 };
    let resolution = PI / spec.samples as f64;
    Ok(FrequencyEstimate {
        omega: if halved { raw / 2.0 } else { raw },
        amplitude: amplitude_scale * top.sqrt() / spec.window_sum,
        method,
        stderr: if halved { resolution / 2.0 } else { resolution },
        halved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(series: impl Iterator<Item = f64>) -> Vec<Complex64> {
        series.map(|v| Complex64::new(v, 0.0)).collect()
    }

    #[test]
    fn synthetic_cosine() {
        let w = 0.95f64.acos();
        let s = real((0..400).map(|t| 3.0 + (w * t as f64).cos()));
        let est = estimate_frequency(&s, FrequencyMethod::VarianceOscillation).unwrap();
        assert!(est.halved);
        assert!((2.0 * est.omega - w).abs() < PI / 400.0, "{}", est.omega);
        assert!((est.amplitude - 1.0).abs() < 0.1, "{}", est.amplitude);
    }

    #[test]
    fn rotating_complex_series() {
        for w in [0.3176, -0.3176, PI / 2.0, 2.5] {
            let s: Vec<Complex64> = (0..300)
                .map(|t| Complex64::new(-1.0, 0.0) + 0.2 * Complex64::from_polar(1.0, w * t as f64))
                .collect();
            let est = estimate_frequency(&s, FrequencyMethod::CenterOfMassReturn).unwrap();
            assert!(!est.halved);
            assert!((est.omega - w.abs()).abs() < 1e-3, "{w}: {}", est.omega);
            assert!((est.amplitude - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn constant_and_noise_have_no_signal() {
        let flat = real(std::iter::repeat(2.0).take(64));
        assert_eq!(
            estimate_frequency(&flat, FrequencyMethod::VarianceOscillation),
            Err(Error::NoSignal)
        );
        assert!(periodogram(&flat[..3]).is_err());
    }

    #[test]
    fn periodogram_peak_location() {
        let s = real((0..128).map(|t| (PI / 4.0 * t as f64).sin()));
        let p = periodogram(&s).unwrap();
        let j = (0..p.power.len())
            .max_by(|&a, &b| p.power[a].total_cmp(&p.power[b]))
            .unwrap();
        assert!((p.omegas[j].abs() - PI / 4.0).abs() < 1e-12);
        assert_eq!(p.omegas.len(), 128 * 8);
    }
}
