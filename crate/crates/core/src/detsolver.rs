//! Deterministic L-KS evolution: exact spectral flow on periodic lattices,
//! direct kernel convolution, the PDE residual, and the Dirichlet sine-series
//! solution on an interval.

use std::collections::HashMap;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};
use crate::kernel::{kernel_value, KernelSpec};
use crate::spectral::Transform;

fn require_periodic(grid: &Grid) -> Result<()> {
    if grid.boundary != Boundary::Periodic {
        return Err(Error::Grid("operation needs a periodic grid".into()));
    }
    Ok(())
}

fn check_dim(spec: &KernelSpec, grid: &Grid) -> Result<()> {
    spec.validate()?;
    if spec.dim != grid.dim {
        return Err(Error::InvalidArgument(format!(
            "kernel dim {} does not match grid dim {}",
            spec.dim, grid.dim
        )));
    }
    Ok(())
}

/// Multiplies each Fourier coefficient by `exp(−εt(|κ|² − 2θ)²/8)`.
pub fn evolve_spectral(spec: &KernelSpec, u0: &Field, t: f64) -> Result<Field> {
    require_periodic(&u0.grid)?;
    check_dim(spec, &u0.grid)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let grid = &u0.grid;
    let mut tr = Transform::new(grid)?;
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    tr.forward(&u0.values, &mut c)?;
    for (ck, k2) in c.iter_mut().zip(grid.wavenumber_squared()) {
        let w = k2 - 2.0 * spec.theta;
        *ck *= (-spec.epsilon * t * w * w / 8.0).exp();
    }
    let mut values = vec![0.0; grid.len()];
    tr.inverse(&mut c, &mut values)?;
    Field::new(grid.clone(), u0.time + t, values)
}

#[derive(Clone, Debug)]
pub struct ConvolutionResult {
    pub field: Field,
    /// Share of the sampled `|K|` mass at offsets beyond half the box.
    pub outside_mass: f64,
    pub warning: Option<String>,
}

/// `u(x_i) = Σ_j K_t(x_i − x_j) u0(x_j) ∏Δx` on the open space (no periodic
/// images), with the kernel sampled by [`kernel_value`].
pub fn solve_kernel_convolution(
    spec: &KernelSpec,
    u0: &Field,
    t: f64,
    mass_tolerance: f64,
) -> Result<ConvolutionResult> {
    let grid = &u0.grid;
    check_dim(spec, grid)?;
    if grid.dim > 2 {
        return Err(Error::InvalidArgument(
            "direct convolution is limited to d = 1, 2".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let h = grid.spacing();
    let n = &grid.points;
    // Kernel on all offsets (m_0, .., m_{d−1}) with |m_a| < N_a, cached by
    // squared radius since K is radial.
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut sample = |r2: f64| -> Result<f64> {
        let key = r2.to_bits();
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let mut x = vec![0.0; grid.dim];
        x[0] = r2.sqrt();
        let v = kernel_value(spec, t, &x)?;
        cache.insert(key, v);
        Ok(v)
    };
    let span: Vec<usize> = n.iter().map(|&k| 2 * k - 1).collect();
    let total: usize = span.iter().product();
    let mut table = vec![0.0; total];
    let (mut inside, mut outside) = (0.0, 0.0);
    for (flat, slot) in table.iter_mut().enumerate() {
        let mut rem = flat;
        let mut r2 = 0.0;
        let mut beyond = false;
        for a in (0..grid.dim).rev() {
            let m = (rem % span[a]) as f64 - (n[a] - 1) as f64;
            rem /= span[a];
            r2 += (m * h[a]).powi(2);
            beyond |= m.abs() * h[a] > 0.5 * grid.extent[a];
        }
        *slot = sample(r2)?;
        if beyond {
            outside += slot.abs();
        } else {
            inside += slot.abs();
        }
    }
    let dv = grid.cell_volume();
    let support: Vec<usize> = (0..grid.len()).filter(|&j| u0.values[j] != 0.0).collect();
    let idx: Vec<Vec<usize>> = (0..grid.len()).map(|i| grid.multi_index(i)).collect();
    let mut values = vec![0.0; grid.len()];
    for (i, out) in values.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &j in &support {
            let mut off = 0;
            for a in 0..grid.dim {
                let m = idx[i][a] + n[a] - 1 - idx[j][a];
                off = off * span[a] + m;
            }
            acc += table[off] * u0.values[j];
        }
        *out = acc * dv;
    }
    let outside_mass = outside / (inside + outside).max(f64::MIN_POSITIVE);
    let warning = (outside_mass > mass_tolerance).then(|| {
        format!("kernel mass outside the box is {outside_mass:.3e}; enlarge the box")
    });
    Ok(ConvolutionResult {
        field: Field::new(grid.clone(), u0.time + t, values)?,
        outside_mass,
        warning,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialOperator {
    /// `(Δ + 2θ)²` applied exactly in Fourier space.
    Spectral,
    /// Second-order finite differences (the squared `2d+1`-point Laplacian).
    Stencil,
}

fn apply_operator(spec: &KernelSpec, u: &Field, op: SpatialOperator) -> Result<Vec<f64>> {
    let grid = &u.grid;
    match op {
        SpatialOperator::Spectral => {
            let mut tr = Transform::new(grid)?;
            let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
            tr.forward(&u.values, &mut c)?;
            for (ck, k2) in c.iter_mut().zip(grid.wavenumber_squared()) {
                let w = 2.0 * spec.theta - k2;
                *ck *= w * w;
            }
            let mut out = vec![0.0; grid.len()];
            tr.inverse(&mut c, &mut out)?;
            Ok(out)
        }
        SpatialOperator::Stencil => {
            let lap = |v: &[f64]| -> Vec<f64> {
                let h = grid.spacing();
                let strides = grid.strides();
                (0..grid.len())
                    .map(|i| {
                        let idx = grid.multi_index(i);
                        let mut s = 0.0;
                        for a in 0..grid.dim {
                            let n = grid.points[a];
                            let up = i - idx[a] * strides[a] + ((idx[a] + 1) % n) * strides[a];
                            let dn = i - idx[a] * strides[a] + ((idx[a] + n - 1) % n) * strides[a];
                            s += (v[up] - 2.0 * v[i] + v[dn]) / (h[a] * h[a]);
                        }
                        s
                    })
                    .collect()
            };
            let l1 = lap(&u.values);
            let l2 = lap(&l1);
            let th = 2.0 * spec.theta;
            Ok((0..grid.len())
                .map(|i| l2[i] + 2.0 * th * l1[i] + th * th * u.values[i])
                .collect())
        }
    }
}

/// `max_{n,x} |(u_{n+1} − u_{n−1})/(2dt) + (ε/8)(Δ + 2θ)² u_n|`.
pub fn pde_residual(
    spec: &KernelSpec,
    trajectory: &[Field],
    dt: f64,
    op: SpatialOperator,
) -> Result<f64> {
    if trajectory.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 snapshots, got {}",
            trajectory.len()
        )));
    }
    require_periodic(&trajectory[0].grid)?;
    check_dim(spec, &trajectory[0].grid)?;
    let mut worst: f64 = 0.0;
    for w in trajectory.windows(3) {
        let lu = apply_operator(spec, &w[1], op)?;
        for i in 0..lu.len() {
            let dudt = (w[2].values[i] - w[0].values[i]) / (2.0 * dt);
            worst = worst.max((dudt + spec.epsilon / 8.0 * lu[i]).abs());
        }
    }
    Ok(worst)
}

/// Sine-series solution on a Dirichlet grid: mode `m` decays by
/// `exp(−εt(m²π²/L² − 2θ)²/8)`; modes above `modes` are discarded.
pub fn dirichlet_sine_solve(spec: &KernelSpec, u0: &Field, t: f64, modes: usize) -> Result<Field> {
    let grid = &u0.grid;
    if grid.boundary != Boundary::Dirichlet {
        return Err(Error::Grid("sine solve needs a Dirichlet grid".into()));
    }
    check_dim(spec, grid)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let n = grid.points[0];
    if modes == 0 || modes > n / 2 {
        return Err(Error::InvalidArgument(format!(
            "modes must be in 1..={}, got {modes}",
            n / 2
        )));
    }
    let scale = u0.max_abs().max(1.0);
    if u0.values[0].abs() > 1e-10 * scale {
        return Err(Error::BoundaryViolation {
            max: u0.values[0].abs(),
        });
    }
    let mut tr = Transform::new(grid)?;
    let s = tr.dst(&u0.values);
    let k2 = grid.wavenumber_squared();
    let mut c: Vec<Complex64> = (0..n)
        .map(|m| {
            if m == 0 || m > modes {
                return Complex64::new(0.0, 0.0);
            }
            let w = k2[m] - 2.0 * spec.theta;
            Complex64::new(s[m] * (-spec.epsilon * t * w * w / 8.0).exp(), 0.0)
        })
        .collect();
    let mut values = vec![0.0; n];
    tr.inverse(&mut c, &mut values)?;
    values[0] = 0.0;
    Field::new(grid.clone(), u0.time + t, values)
}

/// Sine coefficients `S_m`, `m = 0..N` (entry 0 is zero).
pub fn sine_coefficients(u: &Field) -> Result<Vec<f64>> {
    if u.grid.boundary != Boundary::Dirichlet {
        return Err(Error::Grid("sine coefficients need a Dirichlet grid".into()));
    }
    Ok(Transform::new(&u.grid)?.dst(&u.values))
}
