//! Lattices and fields on them.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of lattice cells.
pub const MAX_CELLS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Dirichlet => "dirichlet",
        }
    }
}

/// Row-major lattice on `∏[0, L_i)`; the last axis is contiguous.
///
/// Periodic nodes sit at `x = jΔx`, `j = 0..N`. Dirichlet grids (d = 1)
/// store nodes `j = 0..N` of `[0, L]`; node 0 is the left boundary and the
/// right boundary `x = L` is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(extent: Vec<f64>, points: Vec<usize>, boundary: Boundary) -> Result<Self> {
        let grid = Grid {
            dim: extent.len(),
            extent,
            points,
            boundary,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn periodic(extent: &[f64], points: &[usize]) -> Result<Self> {
        Grid::new(extent.to_vec(), points.to_vec(), Boundary::Periodic)
    }

    pub fn cube(dim: usize, extent: f64, points: usize) -> Result<Self> {
        Grid::new(vec![extent; dim], vec![points; dim], Boundary::Periodic)
    }

    pub fn dirichlet(extent: f64, points: usize) -> Result<Self> {
        Grid::new(vec![extent], vec![points], Boundary::Dirichlet)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Grid(format!("dim must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.extent.len() != self.dim || self.points.len() != self.dim {
            return Err(Error::Grid(format!(
                "extent and points need {} entries, got {} and {}",
                self.dim,
                self.extent.len(),
                self.points.len()
            )));
        }
        for (&l, &n) in self.extent.iter().zip(&self.points) {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Grid(format!("extent must be positive, got {l}")));
            }
            if n < 4 {
                return Err(Error::Grid(format!("need at least 4 points per axis, got {n}")));
            }
            if self.boundary == Boundary::Periodic && !n.is_power_of_two() {
                return Err(Error::Grid(format!(
                    "periodic grids need power-of-two points, got {n}"
                )));
            }
        }
        if self.boundary == Boundary::Dirichlet && self.dim != 1 {
            return Err(Error::Grid("Dirichlet grids are one-dimensional".into()));
        }
        let total = self
            .points
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&n| n <= MAX_CELLS);
        if total.is_none() {
            return Err(Error::Grid(format!("more than {MAX_CELLS} cells")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.extent
            .iter()
            .zip(&self.points)
            .map(|(l, &n)| l / n as f64)
            .collect()
    }

    /// `∏Δx_i`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim];
        for i in (0..self.dim.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.points[i + 1];
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for i in (0..self.dim).rev() {
            idx[i] = flat % self.points[i];
            flat /= self.points[i];
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(flat)
            .iter()
            .zip(&h)
            .map(|(&j, &dx)| j as f64 * dx)
            .collect()
    }

    /// Whether the cell carries a degree of freedom (false only on the
    /// Dirichlet boundary node).
    pub fn is_interior(&self, flat: usize) -> bool {
        self.boundary == Boundary::Periodic || flat != 0
    }

    /// `2πk/L` for FFT index `k` on one periodic axis (`k ≥ N/2` wraps to
    /// negative frequencies; Nyquist stays positive).
    pub fn wavenumber(&self, axis: usize, k: usize) -> f64 {
        let n = self.points[axis];
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * signed / self.extent[axis]
    }

    /// `|κ|²` for every mode, in the same layout as the field.
    ///
    /// Periodic: FFT ordering. Dirichlet: entry `m` holds `(mπ/L)²` for the
    /// sine mode `m` (entry 0 is unused).
    pub fn wavenumber_squared(&self) -> Vec<f64> {
        match self.boundary {
            Boundary::Periodic => {
                let axes: Vec<Vec<f64>> = (0..self.dim)
                    .map(|a| {
                        (0..self.points[a])
                            .map(|k| self.wavenumber(a, k).powi(2))
                            .collect()
                    })
                    .collect();
                (0..self.len())
                    .map(|f| {
                        self.multi_index(f)
                            .iter()
                            .enumerate()
                            .map(|(a, &k)| axes[a][k])
                            .sum()
                    })
                    .collect()
            }
            Boundary::Dirichlet => (0..self.points[0])
                .map(|m| (m as f64 * PI / self.extent[0]).powi(2))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("non-finite field value {v}")));
        }
        Ok(Field { grid, time, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            time: 0.0,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Field {
            grid: grid.clone(),
            time: 0.0,
            values,
        }
    }

    /// `Σ φ ψ ∏Δx`.
    pub fn inner(&self, other: &Field) -> f64 {
        let dv = self.grid.cell_volume();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * dv
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Complex coefficients of a field (FFT layout for periodic grids).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Flat index of `−k`.
    pub fn partner(grid: &Grid, flat: usize) -> usize {
        let idx = grid.multi_index(flat);
        let strides = grid.strides();
        idx.iter()
            .zip(&grid.points)
            .zip(&strides)
            .map(|((&k, &n), &s)| ((n - k) % n) * s)
            .sum()
    }

    /// `max_k |c(−k) − conj(c(k))|` relative to `max |c|`.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        (0..self.coeffs.len())
            .map(|f| {
                let p = SpectralField::partner(&self.grid, f);
                (self.coeffs[p] - self.coeffs[f].conj()).norm()
            })
            .fold(0.0, f64::max)
            / scale
    }
}
