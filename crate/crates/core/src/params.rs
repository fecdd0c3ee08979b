//! Map parameters shared by the classical and quantum models.
//!
//! The classical dynamics only depends on `K = k T`. The quantum model
//! additionally fixes `hbar_eff = T` and, on the torus, ties the number of
//! momentum cells to the register size through `L = T N / (2 pi)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative tolerance used when checking `L = T N / 2 pi` for integrality.
const TORUS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Unbounded momentum. Quantum runs cut it off at the register size.
    Cylinder,
    /// Momentum periodic with length `2 pi L`.
    Torus { cells: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    /// Kick strength `k`.
    pub k: f64,
    /// Period `T`, also the effective Planck constant.
    pub t: f64,
    pub geometry: Geometry,
    /// Register size for quantum runs; `None` for purely classical work.
    pub qubits: Option<u32>,
}

impl MapParams {
    /// Classical parameters with `T = 1`, so that `p = n` and `k = K`.
    pub fn classical(big_k: f64, geometry: Geometry) -> Result<Self> {
        Self::new(big_k, 1.0, geometry, None)
    }

    /// Quantum cylinder run: `k` and `T` given directly, `N = 2^n_q` acts as
    /// the momentum cutoff.
    pub fn cylinder(k: f64, t: f64, n_q: u32) -> Result<Self> {
        Self::new(k, t, Geometry::Cylinder, Some(n_q))
    }

    /// Quantum torus run from `K` and `L`: `T = 2 pi L / N`, `k = K / T`.
    pub fn torus(big_k: f64, cells: u32, n_q: u32) -> Result<Self> {
        check_qubits(n_q)?;
        if cells == 0 {
            return Err(invalid("L", "torus needs at least one cell"));
        }
        let n = (1u64 << n_q) as f64;
        let t = 2.0 * PI * cells as f64 / n;
        Self::new(big_k / t, t, Geometry::Torus { cells }, Some(n_q))
    }

    pub fn new(k: f64, t: f64, geometry: Geometry, qubits: Option<u32>) -> Result<Self> {
        if !k.is_finite() {
            return Err(invalid("k", "must be finite"));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(invalid("T", "must be finite and non-negative"));
        }
        if let Some(n_q) = qubits {
            check_qubits(n_q)?;
        }
        let params = Self {
            k,
            t,
            geometry,
            qubits,
        };
        if let (Geometry::Torus { cells }, Some(_)) = (geometry, qubits) {
            if cells == 0 {
                return Err(invalid("L", "torus needs at least one cell"));
            }
            let implied = params.cells_implied().unwrap_or(0.0);
            if (implied - cells as f64).abs() > TORUS_TOLERANCE * cells as f64 {
                return Err(invalid(
                    "L",
                    format!("T N / 2 pi = {implied} does not match L = {cells}"),
                ));
            }
        }
        if let Geometry::Torus { cells: 0 } = geometry {
            return Err(invalid("L", "torus needs at least one cell"));
        }
        Ok(params)
    }

    /// Classical chaos parameter `K = k T`.
    pub fn big_k(&self) -> f64 {
        self.k * self.t
    }

    pub fn hbar_eff(&self) -> f64 {
        self.t
    }

    /// Hilbert space dimension `N`, if a register is attached.
    pub fn dim(&self) -> Option<usize> {
        self.qubits.map(|q| 1usize << q)
    }

    /// `T N / 2 pi`, the number of momentum cells covered by the register.
    pub fn cells_implied(&self) -> Option<f64> {
        self.dim().map(|n| self.t * n as f64 / (2.0 * PI))
    }

    /// Half-width of the momentum window `pi L` (in `p = T n` units), when
    /// one is defined by the geometry or by the register.
    pub fn p_half_width(&self) -> Option<f64> {
        match self.geometry {
            Geometry::Torus { cells } => Some(PI * cells as f64),
            Geometry::Cylinder => self.cells_implied().map(|l| PI * l),
        }
    }

    pub fn with_kick(mut self, k: f64) -> Self {
        self.k = k;
        self
    }
}

fn check_qubits(n_q: u32) -> Result<()> {
    if n_q == 0 || n_q > 30 {
        return Err(invalid("n_q", format!("must be in 1..=30, got {n_q}")));
    }
    Ok(())
}
