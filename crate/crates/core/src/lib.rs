//! Classical and quantum sawtooth map toolkit.
//!
//! * [`classical`]: the area-preserving map, ensemble diffusion and
//!   phase-space densities.
//! * [`state`]: statevectors on the angle/momentum grids and the exact
//!   split-operator Floquet evolution.
//! * [`circuit`]: the gate-level realization of one map iteration
//!   (diagonal phase gates plus quantum Fourier transforms).
//! * [`measurement`]: projective sampling, coarse-grained histograms and the
//!   estimators for localization length, diffusion and island frequency.
//! * [`husimi`]: coherent-state phase-space distributions.
//! * [`io`]: CSV, plain-text matrix, PPM and binary state dump formats.

pub mod circuit;
pub mod classical;
pub mod error;
pub mod husimi;
pub mod io;
pub mod measurement;
pub mod params;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
pub use params::{Geometry, MapParams};
pub use state::{Basis, StateVector};
