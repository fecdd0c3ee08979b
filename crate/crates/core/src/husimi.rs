//! Husimi quasi-probability on the quantum phase space.
//!
//! `H(theta0, p0) = |<coh(theta0, p0, s)|psi>|^2 / (2 pi T)`, with the
//! periodized coherent states of [`StateVector::coherent`]. Grid samples sit
//! at the lower-left corner of each cell: `theta_c = 2 pi c / cols` and
//! `p = -P + 2 P r / rows` for the `r`-th row from the bottom, where `P` is
//! the half-width `T N / 2` of the momentum window. Row 0 is stored on top.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{write_matrix, write_ppm};
use crate::state::{coherent_amplitudes, Basis, StateVector};

pub const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn square(size: usize) -> Self {
        Self { rows: size, cols: size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub rows: usize,
    pub cols: usize,
    /// Squeezing `dp / dtheta` of the probing coherent states.
    pub s: f64,
    pub p_half_width: f64,
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn theta(&self, col: usize) -> f64 {
        TAU * col as f64 / self.cols as f64
    }

    pub fn momentum(&self, row: usize) -> f64 {
        let from_bottom = self.rows - 1 - row;
        -self.p_half_width + 2.0 * self.p_half_width * from_bottom as f64 / self.rows as f64
    }

    pub fn cell_area(&self) -> f64 {
        (TAU / self.cols as f64) * (2.0 * self.p_half_width / self.rows as f64)
    }

    /// `sum H dtheta dp`, close to one on fine grids.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn argmax(&self) -> (usize, usize) {
        let i = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        (i / self.cols, i % self.cols)
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        write_matrix(w, self.cols, &self.values)
    }

    pub fn write_ppm<W: Write>(&self, w: &mut W) -> Result<()> {
        write_ppm(w, self.cols, &self.values)
    }
}

fn probe_grid(psi: &StateVector, spec: GridSpec, s: f64) -> Result<HusimiGrid> {
    if spec.rows < MIN_GRID || spec.cols < MIN_GRID {
        return Err(invalid(
            "grid",
            format!("{}x{} is coarser than {MIN_GRID}x{MIN_GRID}", spec.rows, spec.cols),
        ));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid("s", "squeezing must be positive"));
    }
    let t = psi.params().t;
    Ok(HusimiGrid {
        rows: spec.rows,
        cols: spec.cols,
        s,
        p_half_width: t * psi.dim() as f64 / 2.0,
        values: Vec::new(),
    })
}

fn evaluate(grid: &HusimiGrid, psi: &StateVector) -> Result<Vec<f64>> {
    let psi = psi.clone().into_basis(Basis::Theta);
    let n = psi.dim();
    let t = psi.params().t;
    let norm = 1.0 / (2.0 * PI * t);
    (0..grid.rows * grid.cols)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / grid.cols, i % grid.cols);
            let coh = coherent_amplitudes(grid.theta(col), grid.momentum(row), grid.s, t, n)?;
            let norm_sqr: f64 = coh.iter().map(|a| a.norm_sqr()).sum();
            let overlap: Complex64 = coh
                .iter()
                .zip(psi.amplitudes())
                .map(|(c, a)| c.conj() * a)
                .sum();
            Ok(overlap.norm_sqr() / norm_sqr * norm)
        })
        .collect()
}

pub fn husimi(psi: &StateVector, spec: GridSpec, s: f64) -> Result<HusimiGrid> {
    let mut grid = probe_grid(psi, spec, s)?;
    grid.values = evaluate(&grid, psi)?;
    Ok(grid)
}

/// Pointwise mean of the Husimi grids of `trajectory[a..=b]`.
pub fn time_averaged_husimi(
    trajectory: &[StateVector],
    window: (usize, usize),
    spec: GridSpec,
    s: f64,
) -> Result<HusimiGrid> {
    let (a, b) = window;
    if a > b || b >= trajectory.len() {
        return Err(Error::Empty("husimi averaging window"));
    }
    let mut grid = probe_grid(&trajectory[a], spec, s)?;
    let mut acc = vec![0.0; spec.rows * spec.cols];
    for psi in &trajectory[a..=b] {
        for (sum, v) in acc.iter_mut().zip(evaluate(&grid, psi)?) {
            *sum += v;
        }
    }
    let count = (b - a + 1) as f64;
    acc.iter_mut().for_each(|v| *v /= count);
    grid.values = acc;
    Ok(grid)
}
