//! Cached multi-dimensional FFTs for periodic grids and the DST-I used on
//! Dirichlet grids.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};

/// Forward and inverse transforms sized for one grid.
///
/// Periodic: unnormalized forward DFT over all axes, inverse scaled by `1/N`.
/// Dirichlet: sine coefficients `S_m = Σ_j f_j sin(πmj/N)` and the inverse
/// `f_j = (2/N) Σ_m S_m sin(πmj/N)`.
pub struct Transform {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Transform {
    pub fn new(grid: &Grid) -> Result<Self> {
        grid.validate()?;
        let mut planner = FftPlanner::new();
        let lengths: Vec<usize> = match grid.boundary {
            Boundary::Periodic => grid.points.clone(),
            Boundary::Dirichlet => vec![2 * grid.points[0]],
        };
        let forward: Vec<_> = lengths.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse: Vec<_> = lengths.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let longest = lengths.iter().copied().max().unwrap_or(0);
        Ok(Transform {
            grid: grid.clone(),
            forward,
            inverse,
            line: vec![Complex64::new(0.0, 0.0); longest],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&mut self, data: &mut [Complex64], inverse: bool) {
        let strides = self.grid.strides();
        let total = data.len();
        for axis in 0..self.grid.dim {
            let n = self.grid.points[axis];
            let stride = strides[axis];
            let plan = if inverse {
                self.inverse[axis].clone()
            } else {
                self.forward[axis].clone()
            };
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            let block = n * stride;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    let line = &mut self.line[..n];
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    plan.process_with_scratch(line, &mut self.scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// In-place forward DFT (periodic grids).
    pub fn forward_complex(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(self.grid.boundary, Boundary::Periodic);
        self.apply(data, false);
    }

    /// In-place inverse DFT including the `1/N` factor (periodic grids).
    pub fn inverse_complex(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(self.grid.boundary, Boundary::Periodic);
        self.apply(data, true);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Forward transform of a real field into `out`.
    pub fn forward(&mut self, values: &[f64], out: &mut [Complex64]) -> Result<()> {
        self.check_len(values.len())?;
        match self.grid.boundary {
            Boundary::Periodic => {
                for (o, &v) in out.iter_mut().zip(values) {
                    *o = Complex64::new(v, 0.0);
                }
                self.forward_complex(out);
            }
            Boundary::Dirichlet => {
                let s = self.dst(values);
                for (o, v) in out.iter_mut().zip(s) {
                    *o = Complex64::new(v, 0.0);
                }
            }
        }
        Ok(())
    }

    /// Inverse transform into a real field; imaginary parts are discarded.
    pub fn inverse(&mut self, coeffs: &mut [Complex64], out: &mut [f64]) -> Result<()> {
        self.check_len(coeffs.len())?;
        match self.grid.boundary {
            Boundary::Periodic => {
                self.inverse_complex(coeffs);
                for (o, c) in out.iter_mut().zip(coeffs.iter()) {
                    *o = c.re;
                }
            }
            Boundary::Dirichlet => {
                let re: Vec<f64> = coeffs.iter().map(|c| c.re).collect();
                let f = self.dst(&re);
                let scale = 2.0 / self.grid.points[0] as f64;
                for (o, v) in out.iter_mut().zip(f) {
                    *o = v * scale;
                }
            }
        }
        Ok(())
    }

    /// DST-I through a length-2N FFT of the odd extension. Entry 0 of input
    /// and output is ignored / zero.
    pub fn dst(&mut self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.points[0];
        let buf = &mut self.line[..2 * n];
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for j in 1..n {
            buf[j] = Complex64::new(f[j], 0.0);
            buf[2 * n - j] = Complex64::new(-f[j], 0.0);
        }
        self.forward[0].process_with_scratch(buf, &mut self.scratch);
        let mut s = vec![0.0; n];
        for m in 1..n {
            s[m] = -0.5 * buf[m].im;
        }
        s
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.grid.len() {
            return Err(Error::Grid(format!(
                "transform expects {} values, got {n}",
                self.grid.len()
            )));
        }
        Ok(())
    }
}
