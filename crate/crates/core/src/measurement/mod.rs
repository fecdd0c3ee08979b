//! Information extraction from simulated runs: projective sampling,
//! coarse-grained histograms, localization-length and diffusion estimates,
//! and dominant-frequency estimation.

mod histogram;
mod localization;
mod sampling;
mod spectrum;

pub use histogram::{histogram_exact, histogram_sampled, histogram_state, HistogramSource, MomentumHistogram};
pub use localization::{
    default_bin_width, detect_break_time, fit_localization, msd_from_shots, msd_series,
    predict_break_time, repeat_localization, time_average_distribution, BreakTime, FitMode,
    FitOptions, LocalizationFit, SampledMsd,
};
pub use sampling::{run_rng, sample_distribution, sample_momentum, ShotRecord};
pub use spectrum::{estimate_frequency, periodogram, FrequencyEstimate, FrequencyMethod, Periodogram};
