use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use sawtooth::circuit::{
    apply_circuit, build_iteration, diagonal_phase_error, expected_iteration_gates, verify_iteration,
};
use sawtooth::classical::{
    cantori_diffusion, evolve_ensemble, fit_diffusion, phase_space_density, random_phase_diffusion,
    Ensemble, Exclusion,
};
use sawtooth::husimi::{time_averaged_husimi, GridSpec};
use sawtooth::io::{write_csv, write_histogram_csv, write_matrix, write_ppm, write_shots};
use sawtooth::measurement::{
    detect_break_time, estimate_frequency, fit_localization, histogram_exact, msd_from_shots,
    predict_break_time, repeat_localization, run_rng, sample_distribution, time_average_distribution,
    FitOptions, FrequencyMethod, ShotRecord,
};
use sawtooth::params::MapParams;
use sawtooth::state::{momentum_moments, Basis, Floquet, StateVector};
use sawtooth::stats::{mean, robust_std, std_dev};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Backend, Experiment, ExperimentConfig, Windows};
use crate::error::CliError;

/// Largest acceptable drift of the state norm over a run.
const NORM_DRIFT: f64 = 1e-9;
/// Largest acceptable `1 - fidelity` between circuit and oracle.
const FIDELITY_DEFICIT: f64 = 1e-10;
const PHASE_ERROR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// What a run produced, as also written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub provenance: Provenance,
    pub results: Value,
    pub violations: Vec<String>,
    pub artifacts: Vec<String>,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    format!("{:x}", Sha256::digest(bytes))
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.names.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> sawtooth::Result<()>) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Also write the iteration circuit as `circuit.jsonl`.
    pub emit_circuit: bool,
}

struct Outcome {
    results: Value,
    violations: Vec<String>,
}

/// Run an experiment and write its artifacts into `out`.
///
/// Writes `config.json` (the resolved configuration, usable for replay),
/// `summary.json` (deterministic results) and `metadata.json` (timing and
/// artifact checksums) alongside the experiment's data files. Invariant
/// violations are recorded in the summary and reported as an error after
/// everything has been written.
pub fn run(config: &ExperimentConfig, out: &Path, options: &RunOptions) -> Result<Summary, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    fs::create_dir_all(out)?;
    let mut artifacts = Artifacts {
        dir: out.to_path_buf(),
        names: Vec::new(),
    };
    let echo = serde_json::to_string_pretty(config).expect("config serializes");
    fs::write(out.join("config.json"), echo + "\n")?;

    let outcome = match config.experiment {
        Experiment::ClassicalDiffusion => classical_diffusion(config, &mut artifacts)?,
        Experiment::PhaseSpace => phase_space(config, &mut artifacts)?,
        Experiment::Localization => localization(config, &mut artifacts)?,
        Experiment::CircuitVerify => circuit_verify(config)?,
        Experiment::Msd => msd(config, &mut artifacts)?,
        Experiment::IslandFrequency => island_frequency(config, &mut artifacts)?,
        Experiment::Husimi => husimi(config, &mut artifacts)?,
    };
    if config.experiment.is_quantum() && options.emit_circuit {
        let params = config.params()?;
        let n_q = params.qubits.expect("quantum runs have a register");
        let text = build_iteration(&params, n_q).to_json_lines();
        artifacts.write("circuit.jsonl", |w| Ok(w.write_all(text.as_bytes())?))?;
    }

    let provenance = Provenance {
        config_hash: config_hash(config),
        seed: config.seed(),
        version: config.version.clone(),
    };
    let summary = Summary {
        experiment: config.experiment,
        provenance: provenance.clone(),
        results: outcome.results,
        violations: outcome.violations,
        artifacts: artifacts.names.clone(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(out.join("summary.json"), text + "\n")?;

    let checksums: Vec<Value> = artifacts
        .names
        .iter()
        .chain(["config.json".to_string(), "summary.json".to_string()].iter())
        .map(|name| {
            let bytes = fs::read(out.join(name))?;
            Ok(json!({ "name": name, "sha256": format!("{:x}", Sha256::digest(bytes)) }))
        })
        .collect::<Result<_, std::io::Error>>()?;
    let metadata = json!({
        "provenance": provenance,
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "rng": sawtooth::classical::RNG_NAME,
        "artifacts": checksums,
    });
    fs::write(
        out.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("metadata serializes") + "\n",
    )?;

    if !summary.violations.is_empty() {
        return Err(CliError::Invariant(summary.violations.join("; ")));
    }
    Ok(summary)
}

fn get<T: Copy>(v: Option<T>, name: &str) -> T {
    v.unwrap_or_else(|| panic!("resolved config lacks {name}"))
}

fn classical_diffusion(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let params = config.params()?;
    let exclusion = if get(s.exclude_island, "exclude_island") {
        Exclusion::MainIsland
    } else {
        Exclusion::None
    };
    let ens = Ensemble::random_phases(
        get(s.particles, "particles"),
        get(s.p0, "p0"),
        config.seed(),
        &params,
        &exclusion,
    )?;
    let series = evolve_ensemble(&ens, &params, get(s.steps, "steps"))?;
    let t: Vec<f64> = series.t.iter().map(|&t| t as f64).collect();
    artifacts.write("msd.csv", |w| {
        write_csv(w, &["t", "msd", "stderr"], &[&t, &series.msd, &series.stderr])
    })?;
    let fit = fit_diffusion(&series, None)?;
    let big_k = params.big_k();
    let mut violations = Vec::new();
    if !fit.d.is_finite() || !fit.alpha.is_finite() {
        violations.push("diffusion fit is not finite".to_string());
    }
    Ok(Outcome {
        results: json!({
            "K": big_k,
            "particles": ens.len(),
            "diffusion": fit,
            "d_over_k2": fit.d / (big_k * big_k),
            "random_phase_d": random_phase_diffusion(big_k),
            "cantori_d": cantori_diffusion(big_k),
            "ratio_random_phase": fit.d / random_phase_diffusion(big_k),
            "ratio_cantori": fit.d / cantori_diffusion(big_k),
        }),
        violations,
    })
}

fn phase_space(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let params = config.params()?;
    let exclusion = if get(s.exclude_island, "exclude_island") {
        Exclusion::MainIsland
    } else {
        Exclusion::None
    };
    let ens = Ensemble::random_phases(
        get(s.particles, "particles"),
        get(s.p0, "p0"),
        config.seed(),
        &params,
        &exclusion,
    )?;
    let [rows, cols] = get(s.grid, "grid");
    let steps = get(s.steps, "steps");
    let window = match params.p_half_width() {
        Some(_) => None,
        None => {
            // cylinder: cover the expected spread around p0
            let reach = 4.0 * (random_phase_diffusion(params.big_k()) * steps as f64).sqrt() + 1.0;
            Some((ens.p0 - reach, ens.p0 + reach))
        }
    };
    let density = phase_space_density(&ens, &params, steps, (rows, cols), window)?;
    artifacts.write("density.txt", |w| write_matrix(w, cols, &density.values))?;
    artifacts.write("density.ppm", |w| write_ppm(w, cols, &density.values))?;
    let occupied = density.values.iter().filter(|&&v| v > 0.0).count();
    Ok(Outcome {
        results: json!({
            "K": params.big_k(),
            "rows": rows,
            "cols": cols,
            "p_range": density.p_range,
            "occupied_fraction": occupied as f64 / density.values.len() as f64,
            "total": density.values.iter().sum::<f64>() * density.cell_area(),
        }),
        violations: Vec::new(),
    })
}

fn initial_state(config: &ExperimentConfig, params: MapParams) -> Result<StateVector, CliError> {
    let s = &config.settings;
    let psi = match s.theta0 {
        Some(theta0) => StateVector::coherent(theta0, s.p0.unwrap_or(0.0), s.squeeze.unwrap_or(1.0), params)?,
        None => StateVector::momentum_eigenstate(s.n0.unwrap_or(0), params)?,
    };
    Ok(psi.into_basis(Basis::Theta))
}

/// Evolve `psi` for `steps` iterations, calling `visit` on `t = 0..=steps`.
fn evolve(
    mut psi: StateVector,
    params: &MapParams,
    steps: usize,
    backend: Backend,
    mut visit: impl FnMut(usize, &StateVector),
) -> Result<StateVector, CliError> {
    visit(0, &psi);
    match backend {
        Backend::Circuit => {
            let circuit = build_iteration(params, psi.n_q());
            for t in 1..=steps {
                apply_circuit(&mut psi, &circuit)?;
                visit(t, &psi);
            }
        }
        Backend::SplitOperator => {
            let floquet = Floquet::new(params, psi.dim());
            for t in 1..=steps {
                floquet.step(&mut psi);
                visit(t, &psi);
            }
        }
    }
    Ok(psi)
}

fn norm_violation(psi: &StateVector) -> Option<String> {
    let drift = (psi.norm_sqr() - 1.0).abs();
    (drift > NORM_DRIFT).then(|| format!("norm drifted by {drift:e}"))
}

fn gate_counts(params: &MapParams) -> Value {
    let n_q = params.qubits.expect("quantum runs have a register");
    let circuit = build_iteration(params, n_q);
    json!({
        "per_iteration": circuit.counted_gates(),
        "expected": expected_iteration_gates(n_q),
        "tally": circuit.tally(),
    })
}

fn quantum_trajectory(config: &ExperimentConfig) -> Result<(MapParams, Vec<Vec<f64>>, StateVector), CliError> {
    let params = config.params()?;
    let psi = initial_state(config, params)?;
    let mut probs = Vec::new();
    let last = evolve(
        psi,
        &params,
        get(config.settings.steps, "steps"),
        get(config.settings.backend, "backend"),
        |_, s| probs.push(s.momentum_probabilities()),
    )?;
    Ok((params, probs, last))
}

fn localization(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let (params, probs, last) = quantum_trajectory(config)?;
    let n = params.dim().expect("register");
    let n0 = s.n0.unwrap_or(0) as f64;
    let width = config.bin_width(&params);
    let msd: Vec<f64> = probs.iter().map(|p| momentum_moments(p).1).collect();
    let t: Vec<f64> = (0..msd.len()).map(|t| t as f64).collect();
    artifacts.write("msd.csv", |w| write_csv(w, &["t", "msd"], &[&t, &msd]))?;
    let predicted = predict_break_time(&params);

    let Windows(windows) = s.windows.clone().expect("resolved windows");
    let mut fits = Vec::new();
    for (i, &[a, b]) in windows.iter().enumerate() {
        let avg = time_average_distribution(&probs, (a, b))?;
        let hist = histogram_exact(&avg, width)?;
        artifacts.write(&format!("histogram_{a}_{b}.csv"), |w| write_histogram_csv(w, &hist))?;
        let exact = fit_localization(&hist, n0, &FitOptions::default());
        let sampled = match s.shots {
            Some(shots) => {
                let runs = s.runs.unwrap_or(1);
                let stream_seed = config.seed().wrapping_add(i as u64);
                let mut rng = run_rng(stream_seed, 0);
                let record = ShotRecord {
                    outcomes: sample_distribution(&avg, shots, &mut rng, s.truncate)?,
                    grid: n,
                    seed: stream_seed,
                    truncated_to_qubits: s.truncate,
                };
                artifacts.write(&format!("shots_{a}_{b}.bin"), |w| write_shots(w, &record))?;
                let ells = repeat_localization(&avg, shots, runs, stream_seed, width, s.truncate, n0, &FitOptions::default())?;
                json!({
                    "shots": shots,
                    "runs": runs,
                    "fitted_runs": ells.len(),
                    "ell_mean": (!ells.is_empty()).then(|| mean(&ells)),
                    "ell_std": (ells.len() > 1).then(|| std_dev(&ells)),
                    "ell_robust_std": (ells.len() > 1).then(|| robust_std(&ells)),
                })
            }
            None => Value::Null,
        };
        fits.push(json!({
            "window": [a, b],
            "exact": match exact {
                Ok(fit) => serde_json::to_value(fit).expect("fit serializes"),
                Err(e) => json!({ "error": e.to_string() }),
            },
            "sampled": sampled,
        }));
    }
    let ells: Vec<f64> = fits
        .iter()
        .filter_map(|f| f["exact"]["ell"].as_f64())
        .collect();
    let frozen = match (ells.first(), ells.last()) {
        (Some(first), Some(last)) if ells.len() > 1 => Some((last - first).abs() / first),
        _ => None,
    };
    Ok(Outcome {
        results: json!({
            "params": params,
            "bin_width": width,
            "break_time": predicted,
            "detected_break_time": detect_break_time(&msd, predicted.d_n),
            "fits": fits,
            "relative_ell_change": frozen,
            "gate_counts": gate_counts(&params),
        }),
        violations: norm_violation(&last).into_iter().collect(),
    })
}

fn msd(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let (params, probs, last) = quantum_trajectory(config)?;
    let msd: Vec<f64> = probs.iter().map(|p| momentum_moments(p).1).collect();
    let t: Vec<f64> = (0..msd.len()).map(|t| t as f64).collect();
    match s.shots {
        Some(shots) => {
            let mut sampled = Vec::with_capacity(probs.len());
            let mut stderr = Vec::with_capacity(probs.len());
            for (step, p) in probs.iter().enumerate() {
                let mut rng = run_rng(config.seed(), step as u64);
                let record = ShotRecord {
                    outcomes: sample_distribution(p, shots, &mut rng, s.truncate)?,
                    grid: p.len(),
                    seed: config.seed(),
                    truncated_to_qubits: s.truncate,
                };
                let est = msd_from_shots(&record)?;
                sampled.push(est.variance);
                stderr.push(est.stderr);
            }
            artifacts.write("msd.csv", |w| {
                write_csv(w, &["t", "msd", "sampled_msd", "sampled_stderr"], &[&t, &msd, &sampled, &stderr])
            })?;
        }
        None => artifacts.write("msd.csv", |w| write_csv(w, &["t", "msd"], &[&t, &msd]))?,
    }
    let predicted = predict_break_time(&params);
    // growth rate over the classical stretch t = 1..t*, through the origin
    let t_end = (predicted.t_star.ceil() as usize).clamp(1, msd.len() - 1);
    let (num, den) = (1..=t_end).fold((0.0, 0.0), |(a, b), t| (a + t as f64 * msd[t], b + (t * t) as f64));
    let tail = &msd[msd.len() - (msd.len() / 10).max(1)..];
    Ok(Outcome {
        results: json!({
            "params": params,
            "break_time": predicted,
            "detected_break_time": detect_break_time(&msd, predicted.d_n),
            "early_growth_rate": num / den,
            "early_window": [1, t_end],
            "saturated_msd": mean(tail),
            "gate_counts": gate_counts(&params),
        }),
        violations: norm_violation(&last).into_iter().collect(),
    })
}

fn circuit_verify(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let params = config.params()?;
    let n_q = params.qubits.expect("register");
    let report = verify_iteration(&params, n_q, get(s.trials, "trials"), get(s.steps, "steps"), config.seed())?;
    let phase_error = if n_q <= 6 {
        Some(diagonal_phase_error(&params, n_q)?)
    } else {
        None
    };
    let mut violations = Vec::new();
    if !(report.max_fidelity_deficit <= FIDELITY_DEFICIT) {
        violations.push(format!("fidelity deficit {:e} exceeds {FIDELITY_DEFICIT:e}", report.max_fidelity_deficit));
    }
    if let Some(err) = phase_error {
        if !(err <= PHASE_ERROR) {
            violations.push(format!("basis-state phase error {err:e} exceeds {PHASE_ERROR:e}"));
        }
    }
    if report.counted_gates != expected_iteration_gates(n_q) {
        violations.push(format!("{} gates, expected {}", report.counted_gates, expected_iteration_gates(n_q)));
    }
    Ok(Outcome {
        results: json!({
            "params": params,
            "verification": report,
            "max_phase_error": phase_error,
            "gate_counts": gate_counts(&params),
        }),
        violations,
    })
}

fn island_frequency(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let params = config.params()?;
    let psi = initial_state(config, params)?;
    let mut com = Vec::new();
    let mut var = Vec::new();
    let last = evolve(psi, &params, get(s.steps, "steps"), get(s.backend, "backend"), |_, st| {
        let m = st.moments();
        com.push(m.first_circular);
        var.push(m.var_n);
    })?;
    let t: Vec<f64> = (0..com.len()).map(|t| t as f64).collect();
    let re: Vec<f64> = com.iter().map(|c| c.re).collect();
    let im: Vec<f64> = com.iter().map(|c| c.im).collect();
    artifacts.write("series.csv", |w| {
        write_csv(w, &["t", "com_re", "com_im", "var_n"], &[&t, &re, &im, &var])
    })?;
    let oracle = sawtooth::classical::island_rotation_frequency(&params)?;
    let center = estimate_frequency(&com, FrequencyMethod::CenterOfMassReturn);
    let var_series: Vec<Complex64> = var.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let breathing = estimate_frequency(&var_series, FrequencyMethod::VarianceOscillation);
    let as_json = |r: &sawtooth::Result<sawtooth::measurement::FrequencyEstimate>| match r {
        Ok(e) => json!({
            "estimate": e,
            "relative_error": (e.omega - oracle).abs() / oracle,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(Outcome {
        results: json!({
            "params": params,
            "oracle_omega": oracle,
            "oracle_period": 2.0 * PI / oracle,
            "center_of_mass": as_json(&center),
            "variance_oscillation": as_json(&breathing),
        }),
        violations: norm_violation(&last).into_iter().collect(),
    })
}

fn husimi(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = &config.settings;
    let params = config.params()?;
    let psi = initial_state(config, params)?;
    let mut states = Vec::new();
    let last = evolve(psi, &params, get(s.steps, "steps"), get(s.backend, "backend"), |_, st| {
        states.push(st.clone())
    })?;
    let [rows, cols] = get(s.grid, "grid");
    let squeeze = get(s.squeeze, "squeeze");
    let Windows(windows) = s.windows.clone().expect("resolved windows");
    let mut grids = Vec::new();
    let mut violations: Vec<String> = norm_violation(&last).into_iter().collect();
    for [a, b] in windows {
        let grid = time_averaged_husimi(&states, (a, b), GridSpec { rows, cols }, squeeze)?;
        artifacts.write(&format!("husimi_{a}_{b}.txt"), |w| grid.write_text(w))?;
        artifacts.write(&format!("husimi_{a}_{b}.ppm"), |w| grid.write_ppm(w))?;
        let min = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            violations.push(format!("negative Husimi value {min:e}"));
        }
        let (row, col) = grid.argmax();
        grids.push(json!({
            "window": [a, b],
            "total": grid.total(),
            "max": grid.get(row, col),
            "min": min,
            "argmax": { "theta": grid.theta(col), "p": grid.momentum(row) },
        }));
    }
    Ok(Outcome {
        results: json!({
            "params": params,
            "rows": rows,
            "cols": cols,
            "squeeze": squeeze,
            "grids": grids,
        }),
        violations,
    })
}
