//! Classical sawtooth map
//!
//! `n' = n + k (theta - pi)`, `theta' = theta + T n'` with `theta` taken
//! modulo `2 pi`. In rescaled momentum `p = T n` the dynamics depends only on
//! `K = k T`. The force is linear on `[0, 2 pi)`, so the tangent map is the
//! same constant matrix everywhere except on the discontinuity at `theta = 0`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::{Geometry, MapParams};
use crate::stats::{linear_fit, LinearFit};

/// Particles per accumulation chunk. Chunks are summed in index order so the
/// result does not depend on the number of worker threads.
const CHUNK: usize = 256;

/// Attempts per particle before rejection sampling gives up.
const MAX_REJECTIONS: usize = 100_000;

/// Generator used for every random draw in this crate.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), one stream per trajectory";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    /// Action in level units.
    pub n: f64,
    /// Angle in `[0, 2 pi)`.
    pub theta: f64,
}

impl ClassicalState {
    pub fn new(n: f64, theta: f64) -> Self {
        Self {
            n,
            theta: wrap_angle(theta),
        }
    }

    pub fn momentum(&self, params: &MapParams) -> f64 {
        params.t * self.n
    }
}

/// Reduce an angle into `[0, 2 pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2 pi for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduce `p` into `[-half, half)`.
pub fn wrap_symmetric(p: f64, half: f64) -> f64 {
    let r = (p + half).rem_euclid(2.0 * half) - half;
    if r >= half {
        -half
    } else {
        r
    }
}

/// One iteration of the map.
pub fn step(state: ClassicalState, params: &MapParams) -> ClassicalState {
    let n = state.n + params.k * (state.theta - PI);
    let theta = wrap_angle(state.theta + params.t * n);
    let n = match params.geometry {
        Geometry::Torus { cells } if params.t > 0.0 => {
            wrap_symmetric(params.t * n, PI * cells as f64) / params.t
        }
        _ => n,
    };
    ClassicalState { n, theta }
}

/// Exact inverse of [`step`] on the cylinder.
pub fn inverse_step(state: ClassicalState, params: &MapParams) -> ClassicalState {
    let theta = wrap_angle(state.theta - params.t * state.n);
    let n = state.n - params.k * (theta - PI);
    ClassicalState { n, theta }
}

/// Tangent map `d(n', theta') / d(n, theta)` away from the discontinuity.
pub fn jacobian(params: &MapParams) -> [[f64; 2]; 2] {
    [[1.0, params.k], [params.t, 1.0 + params.big_k()]]
}

/// Rotation angle per iteration around the elliptic fixed point `(0, pi)`.
///
/// The trace of the tangent map is `2 + K`, so the eigenvalues are
/// `exp(+-i omega)` with `cos omega = 1 + K / 2`.
pub fn island_rotation_frequency(params: &MapParams) -> Result<f64> {
    let big_k = params.big_k();
    if !(big_k > -4.0 && big_k < 0.0) {
        return Err(Error::UnstableFixedPoint(big_k));
    }
    Ok((1.0 + big_k / 2.0).acos())
}

/// Quadratic invariant `p^2 + K p u - K u^2` of the linearised motion around
/// the fixed point, with `u = theta - pi` and `p` reduced into `[-pi, pi)`.
pub fn island_invariant(big_k: f64, theta: f64, p: f64) -> f64 {
    let u = wrap_angle(theta) - PI;
    let p = wrap_symmetric(p, PI);
    p * p + big_k * p * u - big_k * u * u
}

/// Whether `(theta, p)` lies inside the main elliptic island.
///
/// For `-4 < K < 0` the motion is exactly linear as long as the orbit never
/// crosses `theta = 0`; the largest invariant ellipse that fits in
/// `|u| < pi` bounds the island.
pub fn main_island_contains(big_k: f64, theta: f64, p: f64) -> bool {
    if !(big_k > -4.0 && big_k < 0.0) {
        return false;
    }
    let q_max = PI * PI * (-big_k) * (1.0 + big_k / 4.0);
    island_invariant(big_k, theta, p) < q_max
}

/// Rejection region for the initial phases of an ensemble.
#[derive(Clone, Default)]
pub enum Exclusion {
    #[default]
    None,
    /// Reject initial conditions inside the main island.
    MainIsland,
    /// Reject `(theta, p)` for which the predicate returns `true`.
    Custom(Arc<dyn Fn(f64, f64) -> bool + Send + Sync>),
}

impl std::fmt::Debug for Exclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exclusion::None => write!(f, "None"),
            Exclusion::MainIsland => write!(f, "MainIsland"),
            Exclusion::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Exclusion {
    fn rejects(&self, big_k: f64, theta: f64, p: f64) -> bool {
        match self {
            Exclusion::None => false,
            Exclusion::MainIsland => main_island_contains(big_k, theta, p),
            Exclusion::Custom(pred) => pred(theta, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub states: Vec<ClassicalState>,
    /// Initial momentum `p0 = T n0`.
    pub p0: f64,
    pub seed: u64,
}

impl Ensemble {
    /// `count` particles at momentum `p0` with phases uniform in `[0, 2 pi)`.
    ///
    /// Particle `i` draws from its own stream of a generator seeded with
    /// `seed`, so the ensemble does not depend on evaluation order.
    pub fn random_phases(
        count: usize,
        p0: f64,
        seed: u64,
        params: &MapParams,
        exclusion: &Exclusion,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::Empty("ensemble"));
        }
        if params.t <= 0.0 {
            return Err(invalid("T", "classical ensembles need T > 0"));
        }
        let big_k = params.big_k();
        let states = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = particle_rng(seed, i as u64);
                for _ in 0..MAX_REJECTIONS {
                    let theta = rng.gen_range(0.0..TAU);
                    if !exclusion.rejects(big_k, theta, p0) {
                        return Ok(ClassicalState::new(p0 / params.t, theta));
                    }
                }
                Err(invalid("exclusion", "rejects every initial phase"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { states, p0, seed })
    }

    /// Ensemble from explicit states; `p0` is taken from the first one.
    pub fn from_states(states: Vec<ClassicalState>, params: &MapParams) -> Result<Self> {
        let first = states.first().ok_or(Error::Empty("ensemble"))?;
        Ok(Self {
            p0: first.momentum(params),
            states,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn particle_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean square momentum spread `<(p - p0)^2>` per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdSeries {
    pub t: Vec<usize>,
    pub msd: Vec<f64>,
    /// Standard error of the ensemble mean.
    pub stderr: Vec<f64>,
}

impl MsdSeries {
    pub fn from_values(msd: Vec<f64>) -> Self {
        Self {
            t: (0..msd.len()).collect(),
            stderr: vec![0.0; msd.len()],
            msd,
        }
    }

    pub fn len(&self) -> usize {
        self.msd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msd.is_empty()
    }
}

/// Evolve every particle for `t_max` iterations and return
/// `<(p - p0)^2>(t)` for `t = 0..=t_max`.
///
/// Momentum is followed on the covering cylinder so that spreading is not
/// masked by the torus reduction.
pub fn evolve_ensemble(ens: &Ensemble, params: &MapParams, t_max: usize) -> Result<MsdSeries> {
    if ens.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    if t_max == 0 {
        return Err(invalid("t_max", "must be at least 1"));
    }
    let lifted = MapParams {
        geometry: Geometry::Cylinder,
        ..*params
    };
    let len = t_max + 1;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = ens
        .states
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = vec![0.0; len];
            let mut sum_sq = vec![0.0; len];
            for &start in chunk {
                let mut s = start;
                for t in 0..len {
                    if t > 0 {
                        s = step(s, &lifted);
                    }
                    let dp = s.momentum(params) - ens.p0;
                    let d2 = dp * dp;
                    sum[t] += d2;
                    sum_sq[t] += d2 * d2;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    for (s, s2) in &partials {
        for t in 0..len {
            sum[t] += s[t];
            sum_sq[t] += s2[t];
        }
    }
    let m = ens.len() as f64;
    let msd: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let stderr = sum_sq
        .iter()
        .zip(&msd)
        .map(|(s2, mean)| {
            if ens.len() < 2 {
                0.0
            } else {
                let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0);
                (var / m).sqrt()
            }
        })
        .collect();
    Ok(MsdSeries {
        t: (0..len).collect(),
        msd,
        stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    /// Slope of a linear fit of `<(dp)^2>` against `t`.
    pub d: f64,
    pub d_stderr: f64,
    /// Exponent of `<(dp)^2> ~ t^alpha` from a log-log fit.
    pub alpha: f64,
    pub alpha_stderr: f64,
    /// Prefactor `A` of `A t^alpha`.
    pub prefactor: f64,
    pub fit_window: (usize, usize),
    /// `|alpha - 1|` is within [`NORMAL_DIFFUSION_TOLERANCE`].
    pub normal: bool,
    /// The series carried no spread at all.
    pub zero_variance: bool,
}

pub const NORMAL_DIFFUSION_TOLERANCE: f64 = 0.1;

/// Default fit window: drop the first 10% of the series as transient.
pub fn default_fit_window(series: &MsdSeries) -> (usize, usize) {
    let last = series.t.last().copied().unwrap_or(0);
    let start = ((last as f64) * 0.1).ceil() as usize;
    (start.max(1), last)
}

/// Fit diffusion laws to a spreading series over `window` (inclusive).
pub fn fit_diffusion(
    series: &MsdSeries,
    window: Option<(usize, usize)>,
) -> Result<DiffusionEstimate> {
    let window = window.unwrap_or_else(|| default_fit_window(series));
    let (t, y): (Vec<f64>, Vec<f64>) = series
        .t
        .iter()
        .zip(&series.msd)
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &y)| (t as f64, y))
        .unzip();
    if t.len() < 4 {
        return Err(Error::FitUndetermined(format!(
            "{} points inside the fit window, need 4",
            t.len()
        )));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok(DiffusionEstimate {
            d: 0.0,
            d_stderr: 0.0,
            alpha: 0.0,
            alpha_stderr: 0.0,
            prefactor: 0.0,
            fit_window: window,
            normal: false,
            zero_variance: true,
        });
    }
    let linear = linear_fit(&t, &y)?;
    let (lt, ly): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&y)
        .filter(|(&t, &y)| t > 0.0 && y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .unzip();
    let loglog: LinearFit = linear_fit(&lt, &ly)?;
    Ok(DiffusionEstimate {
        d: linear.slope,
        d_stderr: linear.slope_stderr,
        alpha: loglog.slope,
        alpha_stderr: loglog.slope_stderr,
        prefactor: loglog.intercept.exp(),
        fit_window: window,
        normal: (loglog.slope - 1.0).abs() <= NORMAL_DIFFUSION_TOLERANCE,
        zero_variance: false,
    })
}

/// Random-phase estimate `D(K) = pi^2 K^2 / 3` for `K > 1`.
pub fn random_phase_diffusion(big_k: f64) -> f64 {
    PI * PI * big_k * big_k / 3.0
}

/// Cantori-limited estimate `D(K) = 3.3 K^(5/2)` for `0 < K < 1`.
pub fn cantori_diffusion(big_k: f64) -> f64 {
    3.3 * big_k.powf(2.5)
}

/// Occupation density over `[0, 2 pi) x [p_min, p_max)`.
///
/// `values` is row-major with row 0 at the top (`p` close to `p_max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub rows: usize,
    pub cols: usize,
    pub p_range: (f64, f64),
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn cell_area(&self) -> f64 {
        (TAU / self.cols as f64) * ((self.p_range.1 - self.p_range.0) / self.rows as f64)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Cell `(row, col)` holding the point `(theta, p)`, if inside the window.
    pub fn cell_of(&self, theta: f64, p: f64) -> Option<(usize, usize)> {
        cell_index(self.rows, self.cols, self.p_range, theta, p)
    }
}

fn cell_index(
    rows: usize,
    cols: usize,
    (p_min, p_max): (f64, f64),
    theta: f64,
    p: f64,
) -> Option<(usize, usize)> {
    if p < p_min || p >= p_max {
        return None;
    }
    let col = ((wrap_angle(theta) / TAU) * cols as f64).floor() as usize;
    let from_bottom = (((p - p_min) / (p_max - p_min)) * rows as f64).floor() as usize;
    Some((rows - 1 - from_bottom.min(rows - 1), col.min(cols - 1)))
}

/// Phase-space occupation accumulated over `t = 0..=t_max` and all particles.
///
/// On the torus the window is `[-pi L, pi L)`; on the cylinder `p_window`
/// must be given and points outside it are dropped.
pub fn phase_space_density(
    ens: &Ensemble,
    params: &MapParams,
    t_max: usize,
    (rows, cols): (usize, usize),
    p_window: Option<(f64, f64)>,
) -> Result<DensityGrid> {
    if rows < 2 || cols < 2 {
        return Err(invalid("grid", "needs at least 2 x 2 cells"));
    }
    if ens.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    let p_range = match (params.geometry, p_window) {
        (_, Some(w)) => w,
        (Geometry::Torus { cells }, None) => (-PI * cells as f64, PI * cells as f64),
        (Geometry::Cylinder, None) => {
            return Err(invalid("p_window", "cylinder geometry needs an explicit window"))
        }
    };
    if !(p_range.1 > p_range.0) {
        return Err(invalid("p_window", "empty momentum window"));
    }
    let partials: Vec<Vec<u64>> = ens
        .states
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; rows * cols];
            for &start in chunk {
                let mut s = start;
                for t in 0..=t_max {
                    if t > 0 {
                        s = step(s, params);
                    }
                    if let Some((r, c)) =
                        cell_index(rows, cols, p_range, s.theta, s.momentum(params))
                    {
                        counts[r * cols + c] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; rows * cols];
    for part in &partials {
        for (c, v) in counts.iter_mut().zip(part) {
            *c += v;
        }
    }
    let total: u64 = counts.iter().sum();
    let mut grid = DensityGrid {
        rows,
        cols,
        p_range,
        values: vec![0.0; rows * cols],
    };
    if total > 0 {
        let scale = 1.0 / (total as f64 * grid.cell_area());
        for (v, &c) in grid.values.iter_mut().zip(&counts) {
            *v = c as f64 * scale;
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest};

    fn unit(k: f64) -> MapParams {
        MapParams::new(k, 1.0, Geometry::Cylinder, None).unwrap()
    }

    #[test]
    fn fixed_point_is_invariant() {
        for k in [-3.0, -0.1, 0.7, 5.0] {
            let s = step(ClassicalState::new(0.0, PI), &unit(k));
            assert_abs_diff_eq!(s.n, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.theta, PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_rotation_without_kick() {
        let s = step(ClassicalState::new(1.0, 0.5), &unit(0.0));
        assert_abs_diff_eq!(s.n, 1.0);
        assert_abs_diff_eq!(s.theta, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn kicked_step_from_origin() {
        let s = step(ClassicalState::new(1.0, 0.0), &unit(1.0));
        assert_abs_diff_eq!(s.n, 1.0 - PI, epsilon = 1e-14);
        assert_abs_diff_eq!(s.theta, 1.0 + PI, epsilon = 1e-14);
    }

    #[test]
    fn torus_reduces_momentum() {
        let params = MapParams::new(2.0, 1.0, Geometry::Torus { cells: 1 }, None).unwrap();
        let mut s = ClassicalState::new(0.3, 0.2);
        for _ in 0..200 {
            s = step(s, &params);
            assert!(s.n >= -PI && s.n < PI);
            assert!(s.theta >= 0.0 && s.theta < TAU);
        }
    }

    #[test]
    fn jacobian_is_area_preserving() {
        let mut rng = particle_rng(7, 0);
        for _ in 0..100 {
            let k = rng.gen_range(-5.0..5.0);
            let t = rng.gen_range(0.1..2.0);
            let params = MapParams::new(k, t, Geometry::Cylinder, None).unwrap();
            let j = jacobian(&params);
            assert!((j[0][0] * j[1][1] - j[0][1] * j[1][0] - 1.0).abs() < 1e-12);

            // finite differences at a random point away from the discontinuity
            let s = ClassicalState::new(rng.gen_range(-3.0..3.0), rng.gen_range(1.0..5.0));
            let h = 1e-6;
            let base = step(s, &params);
            if base.theta < 0.1 || base.theta > TAU - 0.1 {
                continue;
            }
            let dn = step(ClassicalState::new(s.n + h, s.theta), &params);
            let dth = step(ClassicalState::new(s.n, s.theta + h), &params);
            let fd = [
                [(dn.n - base.n) / h, (dth.n - base.n) / h],
                [(dn.theta - base.theta) / h, (dth.theta - base.theta) / h],
            ];
            for r in 0..2 {
                for c in 0..2 {
                    assert!((fd[r][c] - j[r][c]).abs() < 1e-5 * (1.0 + j[r][c].abs()));
                }
            }
        }
    }

    #[test]
    fn inverse_undoes_each_step() {
        let params = MapParams::new(0.8, 0.9, Geometry::Cylinder, None).unwrap();
        let mut s = ClassicalState::new(0.4, 2.0);
        for _ in 0..100 {
            let next = step(s, &params);
            let back = inverse_step(next, &params);
            assert!((back.n - s.n).abs() < 1e-10);
            let dth = (back.theta - s.theta).abs();
            assert!(dth.min(TAU - dth) < 1e-10);
            s = next;
        }
    }

    #[test]
    fn island_frequency_examples() {
        let at = |k: f64| island_rotation_frequency(&unit(k));
        assert_abs_diff_eq!(at(-2.0).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(at(-0.1).unwrap(), 0.95f64.acos(), epsilon = 1e-15);
        assert!((at(-4.0 + 1e-9).unwrap() - PI).abs() < 1e-4);
        assert!(matches!(at(0.5), Err(Error::UnstableFixedPoint(_))));
        assert!(at(-4.0).is_err());
    }

    #[test]
    fn island_rotation_matches_tangent_eigenvalues() {
        // cos(omega) is half the trace of the tangent map
        let params = MapParams::new(-0.25, 0.4, Geometry::Cylinder, None).unwrap();
        let j = jacobian(&params);
        let half_trace = (j[0][0] + j[1][1]) / 2.0;
        assert_abs_diff_eq!(
            island_rotation_frequency(&params).unwrap(),
            half_trace.acos(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn island_invariant_is_conserved_inside() {
        let big_k = -0.3;
        let params = unit(big_k);
        let mut s = ClassicalState::new(0.4, PI + 0.6);
        let q0 = island_invariant(big_k, s.theta, s.n);
        assert!(main_island_contains(big_k, s.theta, s.n));
        for _ in 0..500 {
            s = step(s, &params);
            assert!((island_invariant(big_k, s.theta, s.n) - q0).abs() < 1e-9);
        }
        assert!(!main_island_contains(big_k, 0.1, 2.0));
        assert!(!main_island_contains(0.5, PI, 0.0));
    }

    #[test]
    fn fixed_point_ensemble_does_not_spread() {
        let params = unit(1.3);
        let ens = Ensemble::from_states(vec![ClassicalState::new(0.0, PI)], &params).unwrap();
        let series = evolve_ensemble(&ens, &params, 50).unwrap();
        assert!(series.msd.iter().all(|&v| v.abs() < 1e-20));
        let fit = fit_diffusion(&series, None).unwrap();
        assert!(fit.zero_variance);
        assert_eq!(fit.d, 0.0);
    }

    #[test]
    fn evolve_rejects_bad_input() {
        let params = unit(1.0);
        let empty = Ensemble {
            states: vec![],
            p0: 0.0,
            seed: 0,
        };
        assert!(evolve_ensemble(&empty, &params, 3).is_err());
        let ens = Ensemble::random_phases(4, 0.0, 1, &params, &Exclusion::None).unwrap();
        assert!(evolve_ensemble(&ens, &params, 0).is_err());
        assert!(Ensemble::random_phases(0, 0.0, 1, &params, &Exclusion::None).is_err());
    }

    #[test]
    fn ensembles_are_reproducible() {
        let params = unit(2.0);
        let a = Ensemble::random_phases(1000, 0.0, 42, &params, &Exclusion::None).unwrap();
        let b = Ensemble::random_phases(1000, 0.0, 42, &params, &Exclusion::None).unwrap();
        let c = Ensemble::random_phases(1000, 0.0, 43, &params, &Exclusion::None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let sa = evolve_ensemble(&a, &params, 20).unwrap();
        let sb = evolve_ensemble(&b, &params, 20).unwrap();
        assert_eq!(sa, sb);
        assert!(a.states.iter().all(|s| s.theta >= 0.0 && s.theta < TAU && s.n == 0.0));
    }

    #[test]
    fn exclusion_rejects_island_phases() {
        let params = unit(-0.3);
        let ens = Ensemble::random_phases(500, 0.5, 3, &params, &Exclusion::MainIsland).unwrap();
        assert!(ens
            .states
            .iter()
            .all(|s| !main_island_contains(-0.3, s.theta, s.n)));
        let custom = Exclusion::Custom(Arc::new(|theta, _| theta < PI));
        let ens = Ensemble::random_phases(200, 0.0, 3, &params, &custom).unwrap();
        assert!(ens.states.iter().all(|s| s.theta >= PI));
        let all = Exclusion::Custom(Arc::new(|_, _| true));
        assert!(Ensemble::random_phases(1, 0.0, 3, &params, &all).is_err());
    }

    #[test]
    fn fit_of_synthetic_series() {
        let linear = MsdSeries::from_values((0..=100).map(|t| 7.0 * t as f64).collect());
        let fit = fit_diffusion(&linear, None).unwrap();
        assert_abs_diff_eq!(fit.d, 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.alpha, 1.0, epsilon = 1e-10);
        assert!(fit.normal);
        assert_eq!(fit.fit_window, (10, 100));

        let power = MsdSeries::from_values((0..=1000).map(|t| 2.0 * (t as f64).powf(0.57)).collect());
        let fit = fit_diffusion(&power, None).unwrap();
        assert_abs_diff_eq!(fit.alpha, 0.57, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.prefactor, 2.0, epsilon = 1e-9);
        assert!(!fit.normal);

        let short = MsdSeries::from_values(vec![0.0, 1.0, 2.0]);
        assert!(fit_diffusion(&short, None).is_err());
    }

    #[test]
    fn density_of_fixed_point() {
        let params = MapParams::new(-0.3, 1.0, Geometry::Torus { cells: 1 }, None).unwrap();
        let ens = Ensemble::from_states(vec![ClassicalState::new(0.0, PI)], &params).unwrap();
        let grid = phase_space_density(&ens, &params, 10, (16, 16), None).unwrap();
        let (r, c) = grid.cell_of(PI, 0.0).unwrap();
        assert_eq!((r, c), (7, 8));
        let mass: f64 = grid.values.iter().sum::<f64>() * grid.cell_area();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(grid.get(r, c) * grid.cell_area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn density_needs_window_on_cylinder() {
        let params = unit(1.0);
        let ens = Ensemble::random_phases(10, 0.0, 1, &params, &Exclusion::None).unwrap();
        assert!(phase_space_density(&ens, &params, 5, (8, 8), None).is_err());
        assert!(phase_space_density(&ens, &params, 5, (1, 8), Some((-1.0, 1.0))).is_err());
        assert!(phase_space_density(&ens, &params, 5, (8, 8), Some((-PI, PI))).is_ok());
    }

    #[test]
    fn non_evolving_uniform_ensemble_is_flat() {
        // uniform in theta, and uniform in p through a custom list of states
        let params = MapParams::new(0.0, 1.0, Geometry::Torus { cells: 1 }, None).unwrap();
        let mut rng = particle_rng(11, 0);
        let states: Vec<_> = (0..40_000)
            .map(|_| ClassicalState::new(rng.gen_range(-PI..PI), rng.gen_range(0.0..TAU)))
            .collect();
        let ens = Ensemble::from_states(states, &params).unwrap();
        let grid = phase_space_density(&ens, &params, 0, (4, 4), None).unwrap();
        let expected: f64 = 1.0 / 16.0;
        let sigma = (expected * (1.0 - expected) / 40_000.0).sqrt();
        for v in &grid.values {
            assert!((v * grid.cell_area() - expected).abs() < 5.0 * sigma);
        }
    }

    proptest! {
        #[test]
        fn step_keeps_angle_in_range(n in -50.0f64..50.0, th in 0.0f64..TAU, k in -5.0f64..5.0) {
            let s = step(ClassicalState::new(n, th), &unit(k));
            prop_assert!(s.theta >= 0.0 && s.theta < TAU);
        }

        #[test]
        fn torus_momentum_in_window(n in -50.0f64..50.0, th in 0.0f64..TAU, cells in 1u32..4) {
            let params = MapParams::new(1.7, 0.3, Geometry::Torus { cells }, None).unwrap();
            let s = step(ClassicalState::new(n, th), &params);
            let p = s.momentum(&params);
            let half = PI * cells as f64;
            prop_assert!(p >= -half - 1e-12 && p < half + 1e-12);
        }
    }
}
