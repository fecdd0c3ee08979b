use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use clap::{Args, ValueEnum};
use sawtooth::measurement::default_bin_width;
use sawtooth::params::{Geometry, MapParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, FieldError};

pub const DEFAULT_MAX_QUBITS: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ClassicalDiffusion,
    PhaseSpace,
    Localization,
    CircuitVerify,
    Msd,
    IslandFrequency,
    Husimi,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::ClassicalDiffusion => "classical-diffusion",
            Self::PhaseSpace => "phase-space",
            Self::Localization => "localization",
            Self::CircuitVerify => "circuit-verify",
            Self::Msd => "msd",
            Self::IslandFrequency => "island-frequency",
            Self::Husimi => "husimi",
        }
    }

    pub fn is_quantum(self) -> bool {
        !matches!(self, Self::ClassicalDiffusion | Self::PhaseSpace)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Gate-by-gate application of the iteration circuit.
    Circuit,
    /// FFT split-operator evolution.
    SplitOperator,
}

/// Experiment settings as read from a JSON file or the command line. Every
/// field is optional; [`ExperimentConfig::resolve`] fills in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    /// Software version that wrote a config echo.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    /// Kick strength k.
    #[arg(long = "k")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Period T (the effective Planck constant).
    #[arg(long = "T")]
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Classical parameter K = kT.
    #[arg(long = "K", allow_hyphen_values = true)]
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub big_k: Option<f64>,
    /// Torus cells L; selects the torus geometry.
    #[arg(long = "L")]
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub cells: Option<u32>,
    #[arg(long = "nq")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nq: Option<u32>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    /// Initial momentum p0 = T n0 (classical runs, coherent states).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    /// Initial angle of a coherent state; without it quantum runs start
    /// from the momentum eigenstate `n0`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<i64>,
    /// Reject initial conditions inside the main island.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_island: Option<bool>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    /// Independent repetitions of a sampled measurement.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    /// Read out only this many most significant qubits.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate: Option<u32>,
    /// Histogram bin width in momentum levels.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<usize>,
    /// Averaging windows, e.g. `10:20,290:300`.
    #[arg(long, value_parser = parse_windows)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Windows>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Output grid as `ROWSxCOLS` or a single size.
    #[arg(long, value_parser = parse_grid)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    /// Coherent-state squeezing s = dp/dtheta.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    /// Refuse registers larger than this.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_qubits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Windows(pub Vec<[usize; 2]>);

fn parse_windows(s: &str) -> Result<Windows, String> {
    s.split(',')
        .map(|w| {
            let (a, b) = w.split_once(':').ok_or(format!("window {w:?} is not a:b"))?;
            let a = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
            let b = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
            Ok([a, b])
        })
        .collect::<Result<_, String>>()
        .map(Windows)
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    match s.split_once('x') {
        Some((r, c)) => Ok([parse(r)?, parse(c)?]),
        None => {
            let n = parse(s)?;
            Ok([n, n])
        }
    }
}

impl Settings {
    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            experiment, version, k, t, big_k, cells, nq, steps, seed, particles, p0, theta0, n0, exclude_island, shots,
            runs, truncate, bin_width, windows, trials, grid, squeeze, backend, max_qubits
        )
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("config", e.to_string()))
    }
}

/// A fully resolved configuration: every setting the experiment reads has
/// a concrete value. This is what gets echoed to `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Settings", try_from = "Settings")]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub version: String,
    pub settings: Settings,
}

impl From<ExperimentConfig> for Settings {
    fn from(c: ExperimentConfig) -> Settings {
        Settings {
            experiment: Some(c.experiment),
            version: Some(c.version),
            ..c.settings
        }
    }
}

impl TryFrom<Settings> for ExperimentConfig {
    type Error = String;

    fn try_from(s: Settings) -> Result<Self, String> {
        Ok(Self {
            experiment: s.experiment.ok_or("missing experiment")?,
            version: s.version.clone().ok_or("missing version")?,
            settings: Settings {
                experiment: None,
                version: None,
                ..s
            },
        })
    }
}

impl ExperimentConfig {
    pub fn resolve(experiment: Experiment, given: Settings) -> Result<Self, CliError> {
        let mut errors = Vec::new();
        let mut s = Settings {
            experiment: None,
            version: None,
            ..given
        };
        s.seed.get_or_insert(1);
        match experiment {
            Experiment::ClassicalDiffusion => {
                s.big_k.get_or_insert(5.0);
                s.particles.get_or_insert(10_000);
                s.steps.get_or_insert(100);
                s.p0.get_or_insert(0.0);
                s.exclude_island.get_or_insert(false);
            }
            Experiment::PhaseSpace => {
                s.big_k.get_or_insert(-0.1);
                s.cells.get_or_insert(1);
                s.particles.get_or_insert(1000);
                s.steps.get_or_insert(1000);
                s.p0.get_or_insert(2.0);
                s.exclude_island.get_or_insert(false);
                s.grid.get_or_insert([128, 128]);
            }
            Experiment::Localization | Experiment::Msd => {
                fill_cylinder_defaults(&mut s);
                s.nq.get_or_insert(6);
                s.steps.get_or_insert(300);
                s.n0.get_or_insert(0);
                s.backend.get_or_insert(Backend::Circuit);
                if experiment == Experiment::Localization {
                    s.windows.get_or_insert(Windows(vec![[10, 20], [290, 300]]));
                }
            }
            Experiment::CircuitVerify => {
                fill_cylinder_defaults(&mut s);
                s.nq.get_or_insert(4);
                s.trials.get_or_insert(20);
                s.steps.get_or_insert(20);
            }
            Experiment::IslandFrequency => {
                s.big_k.get_or_insert(-0.1);
                s.cells.get_or_insert(1);
                s.nq.get_or_insert(8);
                s.steps.get_or_insert(400);
                s.theta0.get_or_insert(PI + 0.5);
                s.p0.get_or_insert(0.0);
                s.squeeze.get_or_insert(1.0);
                s.backend.get_or_insert(Backend::SplitOperator);
            }
            Experiment::Husimi => {
                s.big_k.get_or_insert(-0.1);
                s.cells.get_or_insert(1);
                s.nq.get_or_insert(6);
                s.steps.get_or_insert(20);
                s.windows.get_or_insert(Windows(vec![[1, 20]]));
                s.grid.get_or_insert([64, 64]);
                s.squeeze.get_or_insert(1.0);
                s.backend.get_or_insert(Backend::SplitOperator);
                if s.theta0.is_none() {
                    s.n0.get_or_insert(0);
                } else {
                    s.p0.get_or_insert(0.0);
                }
            }
        }
        if experiment.is_quantum() {
            s.max_qubits.get_or_insert(DEFAULT_MAX_QUBITS);
        }
        let mut config = Self {
            experiment,
            version: crate::VERSION.to_string(),
            settings: s,
        };
        let params = config.map_params(&mut errors);
        config.check(&params, &mut errors);
        if let (Some(p), Experiment::Localization) = (&params, experiment) {
            if errors.is_empty() {
                config.settings.bin_width = Some(config.bin_width(p));
            }
        }
        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        if let (Some(n_q), Some(cap)) = (config.settings.nq, config.settings.max_qubits) {
            if n_q > cap {
                return Err(CliError::Resource(format!(
                    "n_q = {n_q} exceeds the cap of {cap} qubits (raise --max-qubits)"
                )));
            }
        }
        Ok(config)
    }

    /// Map parameters implied by the settings.
    pub fn params(&self) -> Result<MapParams, CliError> {
        let mut errors = Vec::new();
        match self.map_params(&mut errors) {
            Some(p) if errors.is_empty() => Ok(p),
            _ => Err(CliError::Config(errors)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.settings.seed.unwrap_or(1)
    }

    fn map_params(&self, errors: &mut Vec<FieldError>) -> Option<MapParams> {
        let s = &self.settings;
        if !self.experiment.is_quantum() {
            let Some(big_k) = s.big_k else {
                errors.push(FieldError::new("K", "classical runs need K"));
                return None;
            };
            let geometry = match s.cells {
                Some(cells) => Geometry::Torus { cells },
                None => Geometry::Cylinder,
            };
            return push_err(errors, "K", MapParams::classical(big_k, geometry));
        }
        let Some(n_q) = s.nq else {
            errors.push(FieldError::new("nq", "quantum runs need a register size"));
            return None;
        };
        if n_q == 0 || n_q > 30 {
            errors.push(FieldError::new("nq", format!("must be in 1..=30, got {n_q}")));
            return None;
        }
        if let Some(cells) = s.cells {
            let Some(big_k) = s.big_k else {
                errors.push(FieldError::new("K", "torus runs take K and L"));
                return None;
            };
            let p = push_err(errors, "L", MapParams::torus(big_k, cells, n_q))?;
            if let Some(t) = s.t {
                if (t - p.t).abs() > 1e-9 * p.t {
                    errors.push(FieldError::new("T", format!("torus fixes T = 2 pi L / N = {}", p.t)));
                }
            }
            if let Some(k) = s.k {
                if (k - p.k).abs() > 1e-9 * p.k.abs().max(1e-300) {
                    errors.push(FieldError::new("k", format!("torus fixes k = K / T = {}", p.k)));
                }
            }
            return Some(p);
        }
        let (k, t) = match (s.k, s.t, s.big_k) {
            (Some(k), Some(t), big_k) => {
                if let Some(big_k) = big_k {
                    if (k * t - big_k).abs() > 1e-6 * big_k.abs().max(1e-12) {
                        errors.push(FieldError::new("K", format!("K = {big_k} disagrees with kT = {}", k * t)));
                    }
                }
                (k, t)
            }
            (Some(k), None, Some(big_k)) => {
                if k == 0.0 {
                    errors.push(FieldError::new("k", "cannot derive T = K / k with k = 0"));
                    return None;
                }
                (k, big_k / k)
            }
            (None, Some(t), Some(big_k)) => (big_k / t, t),
            _ => {
                errors.push(FieldError::new("T", "cylinder runs need two of k, T, K"));
                return None;
            }
        };
        if !(t > 0.0) {
            errors.push(FieldError::new("T", format!("must be positive, got {t}")));
            return None;
        }
        push_err(errors, "k", MapParams::cylinder(k, t, n_q))
    }

    fn check(&self, params: &Option<MapParams>, errors: &mut Vec<FieldError>) {
        let s = &self.settings;
        let positive = |errors: &mut Vec<FieldError>, name: &'static str, v: Option<usize>| {
            if v == Some(0) {
                errors.push(FieldError::new(name, "must be at least 1"));
            }
        };
        positive(errors, "steps", s.steps);
        positive(errors, "particles", s.particles);
        positive(errors, "shots", s.shots);
        positive(errors, "runs", s.runs);
        positive(errors, "trials", s.trials);
        positive(errors, "bin_width", s.bin_width);
        if let Some(sq) = s.squeeze {
            if !(sq > 0.0) || !sq.is_finite() {
                errors.push(FieldError::new("squeeze", "must be positive"));
            }
        }
        if let Some([rows, cols]) = s.grid {
            let min = if self.experiment == Experiment::Husimi { 8 } else { 2 };
            if rows < min || cols < min {
                errors.push(FieldError::new("grid", format!("needs at least {min}x{min} cells")));
            }
        }
        if let (Some(Windows(ws)), Some(steps)) = (&s.windows, s.steps) {
            if ws.is_empty() {
                errors.push(FieldError::new("windows", "need at least one window"));
            }
            for &[a, b] in ws {
                if a > b || b > steps {
                    errors.push(FieldError::new(
                        "windows",
                        format!("{a}:{b} is empty or extends past step {steps}"),
                    ));
                }
            }
        }
        if let (Some(p), Some(n_q)) = (params, s.nq) {
            let n = 1i64 << n_q;
            if let Some(n0) = s.n0 {
                if n0 < -n / 2 || n0 >= n / 2 {
                    errors.push(FieldError::new("n0", format!("outside the grid [-{}, {})", n / 2, n / 2)));
                }
            }
            if let Some(m) = s.truncate {
                if m == 0 || m > n_q {
                    errors.push(FieldError::new("truncate", format!("must be in 1..={n_q}")));
                }
            }
            if let (Some(width), Some(m)) = (s.bin_width, s.truncate) {
                let resolution = (n >> m.min(n_q)) as usize;
                if width % resolution != 0 {
                    errors.push(FieldError::new(
                        "bin_width",
                        format!("must be a multiple of the truncated resolution {resolution}"),
                    ));
                }
            }
            if matches!(self.experiment, Experiment::IslandFrequency) && !(-4.0 < p.big_k() && p.big_k() < 0.0) {
                errors.push(FieldError::new("K", "island frequency needs -4 < K < 0"));
            }
        }
    }

    /// Bin width to use, defaulting to `max(1, round(ell_pred / 6))`, rounded
    /// up to the truncated resolution when needed.
    pub fn bin_width(&self, params: &MapParams) -> usize {
        let mut width = self.settings.bin_width.unwrap_or_else(|| default_bin_width(params));
        if let (Some(m), Some(n_q)) = (self.settings.truncate, self.settings.nq) {
            let resolution = 1usize << (n_q - m);
            width = width.div_ceil(resolution) * resolution;
        }
        width.min(params.dim().unwrap_or(usize::MAX))
    }
}

fn fill_cylinder_defaults(s: &mut Settings) {
    if s.cells.is_none() {
        let given = [s.k.is_some(), s.t.is_some(), s.big_k.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given < 2 {
            if s.k.is_none() {
                s.k = Some(3f64.sqrt());
            }
            if s.t.is_none() && s.big_k.is_none() {
                s.big_k = Some(2f64.sqrt());
            }
        }
    }
}

fn push_err(errors: &mut Vec<FieldError>, field: &'static str, r: sawtooth::Result<MapParams>) -> Option<MapParams> {
    match r {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(FieldError::new(field, e.to_string()));
            None
        }
    }
}
