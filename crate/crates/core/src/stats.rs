//! Small least-squares helpers shared by the fitting routines.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub points: usize,
}

/// Weighted least squares fit of `y = intercept + slope * x`.
///
/// Weights are relative: the parameter covariance is scaled by the weighted
/// residual variance, so exact data yields zero standard errors.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let points = x.len();
    if points < 2 {
        return Err(Error::FitUndetermined(format!(
            "{points} points for a two-parameter fit"
        )));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += wi * dx * dx;
        sxy += wi * dx * dy;
        syy += wi * dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::FitUndetermined("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| {
            let r = yi - intercept - slope * xi;
            wi * r * r
        })
        .sum();
    let (slope_stderr, intercept_stderr) = if points > 2 {
        let sigma2 = rss / (points - 2) as f64;
        let var_slope = sigma2 / sxx;
        let var_intercept = sigma2 * (1.0 / sw + mx * mx / sxx);
        (var_slope.sqrt(), var_intercept.sqrt())
    } else {
        (0.0, 0.0)
    };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r_squared,
        points,
    })
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    weighted_linear_fit(x, y, &vec![1.0; x.len()])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

/// Median absolute deviation scaled to match the standard deviation of a
/// normal sample; insensitive to the heavy tails of ratio estimators.
pub fn robust_std(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    1.482_602_218_505_602 * median(&dev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test that two count vectors share one multinomial
/// distribution. Categories empty in both samples are skipped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter {
            name: "counts",
            reason: format!("{} vs {} categories", a.len(), b.len()),
        });
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::Empty("sample"));
    }
    let total = (na + nb) as f64;
    let mut statistic = 0.0;
    let mut categories = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64;
        if pooled == 0.0 {
            continue;
        }
        categories += 1;
        let ea = pooled * na as f64 / total;
        let eb = pooled * nb as f64 / total;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if categories < 2 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let dof = categories - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::FitUndetermined(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}
