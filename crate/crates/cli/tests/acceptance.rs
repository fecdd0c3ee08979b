//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Expected values come from closed forms computed here, not from
//! the library under test.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use sawtooth::circuit::{apply_circuit, apply_gates, build_free_circuit, build_iteration, build_kick_circuit};
use sawtooth::classical::{evolve_ensemble, fit_diffusion, Ensemble, Exclusion};
use sawtooth::husimi::{husimi, time_averaged_husimi, GridSpec};
use sawtooth::io::read_matrix;
use sawtooth::measurement::{
    estimate_frequency, fit_localization, histogram_exact, histogram_sampled, repeat_localization,
    sample_momentum, time_average_distribution, FitOptions, FrequencyMethod,
};
use sawtooth::params::{Geometry, MapParams};
use sawtooth::state::{trajectory, Basis, StateVector};
use sawtooth::stats::{chi_square_homogeneity, linear_fit, robust_std};
use sawtooth_cli::{Experiment, ExperimentConfig, RunOptions, Settings};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Split-operator step written out with direct O(N^2) sums on the centered
/// grids `theta_j = 2 pi j / N`, `n_m = m - N/2`.
fn oracle_step(psi: &[Complex64], k: f64, t: f64) -> Vec<Complex64> {
    let n = psi.len();
    let nf = n as f64;
    let theta = |j: usize| 2.0 * PI * j as f64 / nf;
    let level = |m: usize| m as f64 - nf / 2.0;
    let kicked: Vec<Complex64> = (0..n)
        .map(|j| psi[j] * Complex64::from_polar(1.0, k * (theta(j) - PI).powi(2) / 2.0))
        .collect();
    let momentum: Vec<Complex64> = (0..n)
        .map(|m| {
            let sum: Complex64 = (0..n)
                .map(|j| kicked[j] * Complex64::from_polar(1.0, -level(m) * theta(j)))
                .sum();
            sum / nf.sqrt() * Complex64::from_polar(1.0, -t * level(m).powi(2) / 2.0)
        })
        .collect();
    (0..n)
        .map(|j| {
            let sum: Complex64 = (0..n)
                .map(|m| momentum[m] * Complex64::from_polar(1.0, level(m) * theta(j)))
                .sum();
            sum / nf.sqrt()
        })
        .collect()
}

fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

fn criterion_1() -> Check {
    let k = 3f64.sqrt();
    let t = 2f64.sqrt() / k;
    let mut worst = 0.0f64;
    for n_q in 2..=8u32 {
        let params = MapParams::cylinder(k, t, n_q).unwrap();
        let circuit = build_iteration(&params, n_q);
        for trial in 0..20u64 {
            let start = StateVector::random(params, Basis::Theta, 1000 * n_q as u64 + trial).unwrap();
            let mut via_gates = start.clone();
            let mut oracle = start.amplitudes().to_vec();
            for _ in 0..20 {
                apply_circuit(&mut via_gates, &circuit).unwrap();
                oracle = oracle_step(&oracle, k, t);
            }
            worst = worst.max(1.0 - fidelity(via_gates.amplitudes(), &oracle));
        }
    }
    let mut phase_error = 0.0f64;
    for n_q in 1..=6u32 {
        let n = 1usize << n_q;
        let params = MapParams::cylinder(k, t, n_q).unwrap();
        let kick = build_kick_circuit(&params, n_q);
        let free = build_free_circuit(&params, n_q);
        for x in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[x] = Complex64::new(1.0, 0.0);
            let mut a = e.clone();
            apply_gates(&mut a, &kick).unwrap();
            let u = 2.0 * PI * x as f64 / n as f64 - PI;
            phase_error = phase_error.max((a[x] - Complex64::from_polar(1.0, k * u * u / 2.0)).norm());
            let mut b = e;
            apply_gates(&mut b, &free).unwrap();
            let level = x as f64 - n as f64 / 2.0;
            phase_error = phase_error.max((b[x] - Complex64::from_polar(1.0, -t * level * level / 2.0)).norm());
        }
    }
    ensure(
        worst < 1e-10 && phase_error <= 1e-12,
        format!("max 1-F = {worst:.2e} (< 1e-10), max phase error = {phase_error:.2e} (<= 1e-12)"),
    )
}

fn criterion_2() -> Check {
    let mut bad = Vec::new();
    for n_q in 1..=12u32 {
        let params = MapParams::cylinder(1.0, 0.5, n_q).unwrap();
        let count = build_iteration(&params, n_q).counted_gates();
        let want = (3 * n_q * n_q + n_q) as usize;
        if count != want {
            bad.push(format!("n_q={n_q}: {count} != {want}"));
        }
    }
    ensure(bad.is_empty(), if bad.is_empty() { "3n^2+n for n_q = 1..12".into() } else { bad.join(", ") })
}

fn localization_distribution(steps: usize) -> Vec<Vec<f64>> {
    let k = 3f64.sqrt();
    let params = MapParams::cylinder(k, 2f64.sqrt() / k, 6).unwrap();
    let circuit = build_iteration(&params, 6);
    let mut psi = StateVector::momentum_eigenstate(0, params).unwrap().into_basis(Basis::Theta);
    let mut probs = vec![psi.momentum_probabilities()];
    for _ in 0..steps {
        apply_circuit(&mut psi, &circuit).unwrap();
        probs.push(psi.momentum_probabilities());
    }
    probs
}

fn criterion_3() -> Check {
    let probs = localization_distribution(300);
    let ell = |w| {
        let avg = time_average_distribution(&probs, w).unwrap();
        fit_localization(&histogram_exact(&avg, 1).unwrap(), 0.0, &FitOptions::default()).map(|f| f.ell)
    };
    let (early, late) = match (ell((10, 20)), ell((290, 300))) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return Err(format!("fit failed: {a:?} {b:?}")),
    };
    let change = (late - early).abs() / early;
    ensure(
        (6.0..=20.0).contains(&early) && change < 0.25,
        format!("ell[10,20] = {early:.2} (in [6,20]), ell[290,300] = {late:.2}, change {:.1}% (< 25%)", 100.0 * change),
    )
}

fn criterion_4() -> Check {
    let rate = |big_k: f64, particles: usize, p0: f64, steps: usize, seed: u64| {
        let p = MapParams::classical(big_k, Geometry::Cylinder).unwrap();
        let ens = Ensemble::random_phases(particles, p0, seed, &p, &Exclusion::None).unwrap();
        fit_diffusion(&evolve_ensemble(&ens, &p, steps).unwrap(), None).unwrap()
    };
    let strong = rate(5.0, 10_000, 0.0, 100, 1);
    let strong_ratio = strong.d / 25.0 / (PI * PI / 3.0);
    let weak = rate(0.5, 10_000, 0.0, 1000, 2);
    let weak_ratio = weak.d / (3.3 * 0.5f64.powf(2.5));
    let anomalous = rate(-0.1, 10_000, 1.1, 100_000, 3);
    let ok = (0.8..=1.2).contains(&strong_ratio)
        && (0.7..=1.3).contains(&weak_ratio)
        && (0.45..=0.70).contains(&anomalous.alpha);
    ensure(
        ok,
        format!(
            "K=5 D/K^2 = {strong_ratio:.3} x pi^2/3, K=0.5 D = {weak_ratio:.3} x 3.3K^2.5, K=-0.1 alpha = {:.3}",
            anomalous.alpha
        ),
    )
}

fn criterion_5() -> Check {
    let probs = localization_distribution(20);
    let avg = time_average_distribution(&probs, (10, 20)).unwrap();
    // one fixed protocol for every shot count
    let opts = FitOptions {
        floor: Some(0.0),
        max_distance: Some(14.0),
        ..FitOptions::default()
    };
    let shots = [100usize, 1000, 10_000];
    let mut log_spread = Vec::new();
    for &s in &shots {
        let ells = repeat_localization(&avg, s, 400, 77, 4, None, 0.0, &opts).unwrap();
        if ells.len() < 360 {
            return Err(format!("only {} of 400 runs fitted at {s} shots", ells.len()));
        }
        log_spread.push(robust_std(&ells).ln());
    }
    let x: Vec<f64> = shots.iter().map(|&s| (s as f64).ln()).collect();
    let slope = linear_fit(&x, &log_spread).unwrap().slope;

    let params = MapParams::cylinder(3f64.sqrt(), 2f64.sqrt() / 3f64.sqrt(), 6).unwrap();
    let amps = avg.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect();
    let psi = StateVector::normalized(amps, Basis::Momentum, params).unwrap();
    let full = sample_momentum(&psi, 100_000, 31, None).unwrap();
    let truncated = sample_momentum(&psi, 100_000, 32, Some(3)).unwrap();
    let a = histogram_sampled(&full, 8).unwrap().counts.unwrap();
    let b = histogram_sampled(&truncated, 8).unwrap().counts.unwrap();
    let chi = chi_square_homogeneity(&a, &b).unwrap();
    ensure(
        (slope + 0.5).abs() <= 0.15 && chi.p_value > 0.001,
        format!("spread ~ shots^{slope:.3} (-0.5 +- 0.15), 3-bit readout chi2 p = {:.3} (> 0.001)", chi.p_value),
    )
}

fn criterion_6() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for big_k in [-0.1f64, -2.0] {
        let oracle = (1.0 + big_k / 2.0).acos();
        let p = MapParams::torus(big_k, 1, 8).unwrap();
        let psi = StateVector::coherent(PI + 0.5, 0.0, 1.0, p).unwrap();
        let series: Vec<Complex64> = trajectory(&psi, &p, 400).iter().map(|s| s.moments().first_circular).collect();
        match estimate_frequency(&series, FrequencyMethod::CenterOfMassReturn) {
            Ok(est) => {
                let rel = (est.omega - oracle).abs() / oracle;
                ok &= rel < 0.1;
                parts.push(format!("K={big_k}: omega = {:.4} vs {oracle:.4} ({:.2}%)", est.omega, 100.0 * rel));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("K={big_k}: {e}"));
            }
        }
    }
    ensure(ok, parts.join(", "))
}

fn criterion_7() -> Check {
    let p8 = MapParams::torus(-0.1, 1, 8).unwrap();
    let psi = StateVector::random(p8, Basis::Momentum, 5).unwrap();
    let grid = husimi(&psi, GridSpec::square(64), 1.0).unwrap();
    let min = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let total = grid.values.iter().sum::<f64>() * (2.0 * PI / 64.0) * (2.0 * PI / 64.0);

    let p6 = MapParams::torus(-0.1, 1, 6).unwrap();
    let eigen = husimi(&StateVector::momentum_eigenstate(5, p6).unwrap(), GridSpec::square(32), 1.0).unwrap();
    let mut row_spread = 0.0f64;
    for r in 0..eigen.rows {
        let row = &eigen.values[r * eigen.cols..(r + 1) * eigen.cols];
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        row_spread = row_spread.max(hi - lo);
    }

    let start = StateVector::momentum_eigenstate(0, p6).unwrap();
    let averaged = time_averaged_husimi(&trajectory(&start, &p6, 20), (1, 20), GridSpec::square(32), 1.0).unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/husimi_k-0.1_nq6_32x32.txt");
    let (_, golden) = read_matrix(BufReader::new(File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?))
        .map_err(|e| e.to_string())?;
    let golden_err = if golden.len() == averaged.values.len() {
        golden.iter().zip(&averaged.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    ensure(
        min >= 0.0 && (total - 1.0).abs() <= 0.02 && row_spread <= 1e-10 && golden_err < 1e-9,
        format!(
            "min = {min:.2e}, sum H dA = {total:.4}, eigenstate row spread = {row_spread:.1e}, golden L-inf = {golden_err:.1e}"
        ),
    )
}

fn criterion_8() -> Check {
    let dir = std::env::temp_dir().join(format!("sawtooth-acceptance-{}", std::process::id()));
    let configs = [
        (
            Experiment::Localization,
            Settings {
                shots: Some(2000),
                runs: Some(5),
                seed: Some(42),
                ..Settings::default()
            },
        ),
        (
            Experiment::ClassicalDiffusion,
            Settings {
                particles: Some(3000),
                steps: Some(50),
                seed: Some(42),
                ..Settings::default()
            },
        ),
    ];
    let mut checked = Vec::new();
    for (experiment, settings) in configs {
        let config = ExperimentConfig::resolve(experiment, settings).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for (i, threads) in [1usize, 3].into_iter().enumerate() {
            let out = dir.join(format!("{experiment}-{i}"));
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| sawtooth_cli::run(&config, &out, &RunOptions::default()))
                .map_err(|e| e.to_string())?;
            outputs.push(out);
        }
        // replay from the echo written by the first run
        let echo = sawtooth_cli::load_echo(&outputs[0].join("config.json")).map_err(|e| e.to_string())?;
        let replay = dir.join(format!("{experiment}-replay"));
        sawtooth_cli::run(&echo, &replay, &RunOptions::default()).map_err(|e| e.to_string())?;
        outputs.push(replay);
        let reference = std::fs::read(outputs[0].join("summary.json")).map_err(|e| e.to_string())?;
        for out in &outputs[1..] {
            let other = std::fs::read(out.join("summary.json")).map_err(|e| e.to_string())?;
            if other != reference {
                let _ = std::fs::remove_dir_all(&dir);
                return Err(format!("{experiment}: summary differs in {}", out.display()));
            }
        }
        checked.push(experiment.name());
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{}: summaries byte-identical across 1/3 threads and replay", checked.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("circuit correctness", criterion_1),
        ("gate count", criterion_2),
        ("dynamical localization", criterion_3),
        ("classical diffusion", criterion_4),
        ("measurement scaling", criterion_5),
        ("island frequency", criterion_6),
        ("husimi sanity", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let result = check();
        let secs = clock.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS  {detail}  [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL  {detail}  [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
