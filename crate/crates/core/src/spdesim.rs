//! Exponential-Euler simulation of
//! `∂U = −L U + b(U) + eps2·a(U)·Ẇ` with `L` the L-KS (or heat) operator,
//! on periodic lattices (FFT) and on Dirichlet intervals (sine series).
//!
//! One step is `Û ← e^{−dt λ}(Û + dt·b̂(U) + eps2·(a(U)ΔW)^)`, the left-point
//! (Itô) discretization of the mild formulation.

use std::collections::HashMap;

use rustfft::num_complex::Complex64;

use crate::config::{Operator, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};
use crate::noise::{self, Domain, NoiseKey, NoiseScheme, NormalStream};
use crate::spectral::Transform;

/// Values beyond this magnitude count as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;
/// Largest tolerated `dt·max|b'(U)|` per (sub)step.
pub const DRIFT_CAP: f64 = 0.5;
const MAX_BRIDGE_LEVELS: u32 = 16;

/// Decay rate `λ` of every mode of the configured operator.
pub fn mode_rates(cfg: &SimConfig) -> Vec<f64> {
    let k2 = cfg.grid.wavenumber_squared();
    match cfg.operator {
        Operator::Lks => {
            let c = cfg.spec.epsilon * cfg.eps1 / 8.0;
            let th2 = 2.0 * cfg.spec.theta;
            k2.iter().map(|&k| c * (k - th2) * (k - th2)).collect()
        }
        Operator::Heat => k2.iter().map(|&k| 0.5 * cfg.eps1 * k).collect(),
    }
}

fn dealias_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.len())
        .map(|f| match grid.boundary {
            Boundary::Periodic => grid.multi_index(f).iter().zip(&grid.points).all(|(&k, &n)| {
                let s = k.min(n - k);
                3 * s <= n
            }),
            Boundary::Dirichlet => 3 * f <= 2 * grid.points[0],
        })
        .collect()
}

/// Reusable per-trajectory workspace.
pub struct Stepper<'a> {
    cfg: &'a SimConfig,
    transform: Transform,
    rates: Vec<f64>,
    decay: HashMap<u64, Vec<f64>>,
    mask: Option<Vec<bool>>,
    buf: Vec<Complex64>,
    drift_buf: Vec<Complex64>,
    phys: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.grid.len();
        Ok(Stepper {
            cfg,
            transform: Transform::new(&cfg.grid)?,
            rates: mode_rates(cfg),
            decay: HashMap::new(),
            mask: cfg.dealias.then(|| dealias_mask(&cfg.grid)),
            buf: vec![Complex64::new(0.0, 0.0); n],
            drift_buf: vec![Complex64::new(0.0, 0.0); n],
            phys: vec![0.0; n],
        })
    }

    fn decay_for(&mut self, h: f64) -> &[f64] {
        let rates = &self.rates;
        self.decay
            .entry(h.to_bits())
            .or_insert_with(|| rates.iter().map(|&l| (-h * l).exp()).collect())
    }

    /// One exponential-Euler step of size `h` driven by the cell increments `dw`.
    pub fn advance(&mut self, u: &mut [f64], dw: &[f64], h: f64) -> Result<()> {
        let cfg = self.cfg;
        let drift_on = !cfg.drift.is_zero();
        let split = drift_on && self.mask.is_some();
        for i in 0..u.len() {
            let noise = cfg.eps2 * cfg.diffusion.eval(u[i]) * dw[i];
            let drift = if drift_on { h * cfg.drift.eval(u[i]) } else { 0.0 };
            self.phys[i] = if split { u[i] + noise } else { u[i] + noise + drift };
        }
        self.transform.forward(&self.phys, &mut self.buf)?;
        if split {
            for i in 0..u.len() {
                self.phys[i] = h * cfg.drift.eval(u[i]);
            }
            self.transform.forward(&self.phys, &mut self.drift_buf)?;
            let mask = self.mask.as_ref().expect("split implies mask");
            for i in 0..u.len() {
                if mask[i] {
                    self.buf[i] += self.drift_buf[i];
                }
            }
        }
        let decay = self.decay_for(h).to_vec();
        for (c, d) in self.buf.iter_mut().zip(&decay) {
            *c *= *d;
        }
        self.transform.inverse(&mut self.buf, u)?;
        if cfg.grid.boundary == Boundary::Dirichlet {
            u[0] = 0.0;
        }
        Ok(())
    }

    fn max_drift_slope(&self, u: &[f64]) -> f64 {
        if self.cfg.drift.is_zero() {
            return 0.0;
        }
        u.iter()
            .map(|&v| self.cfg.drift.derivative(v).abs())
            .fold(0.0, f64::max)
    }
}

fn check_state(u: &[f64], step: usize) -> Result<()> {
    if u.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD) {
        return Err(Error::Diverged { step });
    }
    Ok(())
}

/// Physical-space increments `ΔW` for `(replicate, step)` under the
/// configured noise scheme.
pub fn step_increment(cfg: &SimConfig, replicate: u64, step: u64) -> Result<Vec<f64>> {
    Ok(noise::white_noise_increment(&cfg.noise_plan()?, replicate, step)?.values)
}

/// One exponential-Euler step without drift-adaptive refinement.
pub fn step_exponential_euler(cfg: &SimConfig, state: &Field, replicate: u64, step: u64) -> Result<Field> {
    if state.grid != cfg.grid {
        return Err(Error::Grid("state lives on a different grid".into()));
    }
    check_state(&state.values, step as usize)?;
    let mut st = Stepper::new(cfg)?;
    let dw = step_increment(cfg, replicate, step)?;
    let mut u = state.values.clone();
    st.advance(&mut u, &dw, cfg.dt)?;
    check_state(&u, step as usize)?;
    Ok(Field {
        grid: cfg.grid.clone(),
        time: state.time + cfg.dt,
        values: u,
    })
}

/// Receives the state around every step of a trajectory.
pub trait Observer {
    /// Called before step `n` with the left-point state and the increments
    /// that drive it.
    fn before_step(&mut self, _n: usize, _u: &[f64], _dw: &[f64]) -> Result<()> {
        Ok(())
    }
    /// Called after step `n` completes; `u` is the state at time `(n+1)·dt`.
    fn after_step(&mut self, _n: usize, _u: &[f64]) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Splits `dw` over `[0, h]` into `2^levels` Brownian-bridge increments that
/// sum to `dw` exactly.
pub fn bridge_split(
    cfg: &SimConfig,
    replicate: u64,
    step: u64,
    dw: &[f64],
    h: f64,
    levels: u32,
) -> Result<Vec<Vec<f64>>> {
    let dv = cfg.grid.cell_volume();
    let mut pieces = vec![dw.to_vec()];
    let mut z = vec![0.0; dw.len()];
    for level in 0..levels {
        let width = h / (1u64 << level) as f64;
        let sd = (width / (4.0 * dv)).sqrt();
        let mut next = Vec::with_capacity(2 * pieces.len());
        for (pos, piece) in pieces.iter().enumerate() {
            let node = (1u64 << level) + pos as u64;
            let seed = cfg.seed.wrapping_add(node.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            NormalStream::new(seed, Domain::Bridge, replicate, step)?.fill(&mut z);
            let mut left = vec![0.0; piece.len()];
            let mut right = vec![0.0; piece.len()];
            for i in 0..piece.len() {
                let b = if cfg.grid.is_interior(i) { sd * z[i] } else { 0.0 };
                left[i] = 0.5 * piece[i] + b;
                right[i] = piece[i] - left[i];
            }
            next.push(left);
            next.push(right);
        }
        pieces = next;
    }
    Ok(pieces)
}

/// Runs the configured trajectory for one replicate, reporting to `obs`.
/// Returns the largest number of substeps any step needed.
pub fn run(cfg: &SimConfig, replicate: u64, obs: &mut dyn Observer) -> Result<usize> {
    let mut st = Stepper::new(cfg)?;
    let mut u = cfg.u0.values.clone();
    check_state(&u, 0)?;
    let plan = cfg.noise_plan()?;
    let fast = cfg.scheme == NoiseScheme::Spectral
        && cfg.drift.is_zero()
        && cfg.diffusion.as_constant().is_some();
    if fast {
        return run_spectral_linear(cfg, replicate, obs, &mut st, u);
    }
    let mut max_sub = 1;
    for n in 0..cfg.n_steps() {
        let dw = noise::white_noise_increment(&plan, replicate, n as u64)?.values;
        obs.before_step(n, &u, &dw)?;
        let mut levels = 0;
        let slope = st.max_drift_slope(&u);
        while cfg.dt / (1u64 << levels) as f64 * slope > DRIFT_CAP {
            levels += 1;
            if levels > MAX_BRIDGE_LEVELS {
                return Err(Error::Diverged { step: n });
            }
        }
        if levels == 0 {
            st.advance(&mut u, &dw, cfg.dt)?;
        } else {
            let h = cfg.dt / (1u64 << levels) as f64;
            for piece in bridge_split(cfg, replicate, n as u64, &dw, cfg.dt, levels)? {
                st.advance(&mut u, &piece, h)?;
                check_state(&u, n)?;
            }
            max_sub = max_sub.max(1usize << levels);
        }
        check_state(&u, n)?;
        obs.after_step(n, &u)?;
    }
    Ok(max_sub)
}

/// Zero drift, constant diffusion, spectral noise: the state stays in
/// Fourier space and only snapshots are synthesized.
fn run_spectral_linear(
    cfg: &SimConfig,
    replicate: u64,
    obs: &mut dyn Observer,
    st: &mut Stepper,
    mut u: Vec<f64>,
) -> Result<usize> {
    let plan = cfg.noise_plan()?;
    let kappa = cfg.diffusion.as_constant().expect("checked by caller");
    let partners = noise::partner_table(&cfg.grid);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); u.len()];
    st.transform.forward(&u, &mut coeffs)?;
    let decay = st.decay_for(cfg.dt).to_vec();
    let mut tmp = coeffs.clone();
    let mut dw = vec![0.0; u.len()];
    for n in 0..cfg.n_steps() {
        let z = noise::standard_normals(&plan, Domain::Step, replicate, n as u64)?;
        let w = noise::hermitian_from_normals(&partners, &z, plan.cell_variance());
        tmp.copy_from_slice(&w);
        st.transform.inverse(&mut tmp, &mut dw)?;
        obs.before_step(n, &u, &dw)?;
        for ((c, wk), d) in coeffs.iter_mut().zip(&w).zip(&decay) {
            *c = (*c + cfg.eps2 * kappa * wk) * d;
        }
        tmp.copy_from_slice(&coeffs);
        st.transform.inverse(&mut tmp, &mut u)?;
        check_state(&u, n)?;
        obs.after_step(n, &u)?;
    }
    Ok(1)
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Field>,
    pub key: NoiseKey,
    /// Largest substep count used by the drift-adaptive refinement.
    pub max_substeps: usize,
}

struct SnapshotRecorder<'a> {
    grid: &'a Grid,
    dt: f64,
    wanted: Vec<(usize, usize)>,
    out: Vec<Option<Field>>,
}

impl Observer for SnapshotRecorder<'_> {
    fn after_step(&mut self, n: usize, u: &[f64]) -> Result<()> {
        for &(step, slot) in &self.wanted {
            if step == n + 1 {
                self.out[slot] = Some(Field {
                    grid: self.grid.clone(),
                    time: step as f64 * self.dt,
                    values: u.to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// Simulates one replicate and records the requested snapshot times.
pub fn simulate(cfg: &SimConfig, replicate: u64, snapshot_times: &[f64]) -> Result<Trajectory> {
    let steps: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| cfg.step_of(t))
        .collect::<Result<_>>()?;
    let mut rec = SnapshotRecorder {
        grid: &cfg.grid,
        dt: cfg.dt,
        wanted: steps.iter().enumerate().map(|(i, &s)| (s, i)).collect(),
        out: vec![None; steps.len()],
    };
    for (i, &s) in steps.iter().enumerate() {
        if s == 0 {
            rec.out[i] = Some(Field {
                time: 0.0,
                ..cfg.u0.clone()
            });
        }
    }
    let max_substeps = run(cfg, replicate, &mut rec)?;
    Ok(Trajectory {
        snapshots: rec.out.into_iter().map(|f| f.expect("every step visited")).collect(),
        key: NoiseKey {
            seed: cfg.seed,
            replicate,
        },
        max_substeps,
    })
}

/// Every state `U_0, U_1, .., U_n` of one replicate.
pub fn simulate_all_steps(cfg: &SimConfig, replicate: u64) -> Result<Trajectory> {
    let times: Vec<f64> = (0..=cfg.n_steps()).map(|n| n as f64 * cfg.dt).collect();
    simulate(cfg, replicate, &times)
}

/// `Σ_{i=1}^{m} ρ^{2i}` with `ρ = e^{−λ dt}`.
fn geometric_energy(lambda_dt: f64, m: usize) -> f64 {
    if lambda_dt == 0.0 {
        return m as f64;
    }
    let a = 2.0 * lambda_dt;
    (-a).exp() * (-(-a * m as f64).exp_m1()) / (-(-a).exp_m1())
}

/// Draws the states at the given step indices with exactly the law of the
/// per-step scheme (zero drift, constant diffusion, lattice or spectral
/// noise), advancing each Fourier or sine mode over a whole gap at once.
/// Variates come from the aggregate domain, so paths differ from [`run`]
/// while the joint law of the snapshots is the same.
pub fn sample_linear_snapshots(cfg: &SimConfig, replicate: u64, steps: &[usize]) -> Result<Vec<Field>> {
    cfg.validate()?;
    let kappa = cfg.diffusion.as_constant().ok_or_else(|| {
        Error::InvalidArgument("the linear sampler needs constant diffusion".into())
    })?;
    if !cfg.drift.is_zero() {
        return Err(Error::InvalidArgument("the linear sampler needs zero drift".into()));
    }
    if steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("steps must be nondecreasing".into()));
    }
    let grid = &cfg.grid;
    let n = grid.len();
    let rates = mode_rates(cfg);
    let cell_var = cfg.dt / grid.cell_volume();
    let mut tr = Transform::new(grid)?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    tr.forward(&cfg.u0.values, &mut coeffs)?;
    let partners = match grid.boundary {
        Boundary::Periodic => Some(noise::partner_table(grid)),
        Boundary::Dirichlet => None,
    };
    let mut z = vec![0.0; n];
    let mut tmp = coeffs.clone();
    let mut out = Vec::with_capacity(steps.len());
    let mut at = 0usize;
    for (idx, &target) in steps.iter().enumerate() {
        let m = target - at;
        if m > 0 {
            NormalStream::new(cfg.seed, Domain::Aggregate, replicate, idx as u64)?.fill(&mut z);
            let w = match &partners {
                Some(p) => noise::hermitian_from_normals(p, &z, 1.0),
                // DST-I of iid N(0, σ²) interior values: independent modes
                // with variance σ²·N/2.
                None => z
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let s = if k == 0 { 0.0 } else { (0.5 * n as f64).sqrt() };
                        Complex64::new(s * v, 0.0)
                    })
                    .collect(),
            };
            for k in 0..n {
                let ldt = rates[k] * cfg.dt;
                let rho_m = (-ldt * m as f64).exp();
                let sd = cfg.eps2 * kappa * (cell_var * geometric_energy(ldt, m)).sqrt();
                coeffs[k] = coeffs[k] * rho_m + w[k] * sd;
            }
            at = target;
        }
        tmp.copy_from_slice(&coeffs);
        let mut values = vec![0.0; n];
        tr.inverse(&mut tmp, &mut values)?;
        if grid.boundary == Boundary::Dirichlet {
            values[0] = 0.0;
        }
        out.push(Field {
            grid: grid.clone(),
            time: target as f64 * cfg.dt,
            values,
        });
    }
    Ok(out)
}

/// Exact `E|U(t,x)|²` of the per-step linear scheme from zero data
/// (periodic grids, constant diffusion): `(eps2 κ)² (dt/ΔV)/N · Σ_k Σ_i ρ_k^{2i}`.
pub fn linear_second_moment(cfg: &SimConfig, steps: usize) -> Result<f64> {
    let kappa = cfg
        .diffusion
        .as_constant()
        .ok_or_else(|| Error::InvalidArgument("needs constant diffusion".into()))?;
    if cfg.grid.boundary != Boundary::Periodic {
        return Err(Error::InvalidArgument("needs a periodic grid".into()));
    }
    let n = cfg.grid.len() as f64;
    let cell_var = cfg.dt / cfg.grid.cell_volume();
    let s: f64 = mode_rates(cfg)
        .iter()
        .map(|&l| geometric_energy(l * cfg.dt, steps))
        .sum();
    Ok((cfg.eps2 * kappa).powi(2) * cell_var * s / n)
}

/// Mismatch of the discrete weak form on a trajectory holding every step:
/// `|(U_n − U_0, φ) − Σ_j [−(U_j, Lφ) dt + (b(U_j), φ) dt + eps2 (a(U_j)ΔW_j, φ)]|`.
pub fn weak_form_residual(cfg: &SimConfig, trajectory: &Trajectory, phi: &Field) -> Result<f64> {
    let grid = &cfg.grid;
    if phi.grid != *grid {
        return Err(Error::InvalidArgument("test function lives on a different grid".into()));
    }
    let scale = phi.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    match grid.boundary {
        Boundary::Dirichlet => {
            if phi.values[0].abs() > 1e-10 * scale {
                return Err(Error::InvalidArgument(
                    "test function must vanish on the Dirichlet boundary".into(),
                ));
            }
        }
        Boundary::Periodic => {
            let edge = (0..grid.len())
                .filter(|&i| {
                    grid.multi_index(i)
                        .iter()
                        .zip(&grid.points)
                        .any(|(&j, &n)| j == 0 || j == n - 1)
                })
                .map(|i| phi.values[i].abs())
                .fold(0.0, f64::max);
            if edge > 1e-8 * scale {
                return Err(Error::InvalidArgument(
                    "test function must be supported inside the box".into(),
                ));
            }
        }
    }
    let n_steps = cfg.n_steps();
    if trajectory.snapshots.len() != n_steps + 1 {
        return Err(Error::InvalidArgument(
            "trajectory must hold every step (see simulate_all_steps)".into(),
        ));
    }
    let mut tr = Transform::new(grid)?;
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    tr.forward(&phi.values, &mut c)?;
    for (ck, l) in c.iter_mut().zip(mode_rates(cfg)) {
        *ck *= l;
    }
    let mut l_phi = vec![0.0; grid.len()];
    tr.inverse(&mut c, &mut l_phi)?;
    let l_phi = Field {
        grid: grid.clone(),
        time: 0.0,
        values: l_phi,
    };

    let plan = cfg.noise_plan()?;
    let dv = grid.cell_volume();
    let mut rhs = 0.0;
    for j in 0..n_steps {
        let u = &trajectory.snapshots[j];
        rhs -= u.inner(&l_phi) * cfg.dt;
        if !cfg.drift.is_zero() {
            rhs += cfg.dt
                * u.values
                    .iter()
                    .zip(&phi.values)
                    .map(|(&x, &p)| cfg.drift.eval(x) * p)
                    .sum::<f64>()
                * dv;
        }
        if cfg.eps2 != 0.0 {
            let dw = noise::white_noise_increment(&plan, trajectory.key.replicate, j as u64)?;
            rhs += cfg.eps2
                * u.values
                    .iter()
                    .zip(&dw.values)
                    .zip(&phi.values)
                    .map(|((&x, &w), &p)| cfg.diffusion.eval(x) * w * p)
                    .sum::<f64>()
                * dv;
        }
    }
    let first = &trajectory.snapshots[0];
    let last = &trajectory.snapshots[n_steps];
    let lhs = last.inner(phi) - first.inner(phi);
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DiffusionSpec, DriftSpec};
    use crate::detsolver::evolve_spectral;
    use crate::kernel::KernelSpec;
    use crate::stats::mean_se;

    fn linear_cfg(grid: Grid, dt: f64, t_end: f64) -> SimConfig {
        SimConfig::new(
            KernelSpec::canonical(grid.dim),
            grid,
            dt,
            t_end,
            DiffusionSpec::constant(1.0),
            1.0,
            1.0,
            5,
        )
        .unwrap()
    }

    fn bump(grid: &Grid) -> Field {
        let c = 0.5 * grid.extent[0];
        Field::from_fn(grid, |x| (-(x[0] - c).powi(2) * 4.0).exp())
    }

    #[test]
    fn deterministic_reduction_matches_detsolver() {
        let g = Grid::cube(1, 8.0, 64).unwrap();
        let mut cfg = linear_cfg(g.clone(), 0.01, 0.2);
        cfg.eps2 = 0.0;
        cfg.u0 = bump(&g);
        let traj = simulate(&cfg, 0, &[0.0, 0.1, 0.2]).unwrap();
        for snap in &traj.snapshots {
            let want = evolve_spectral(&cfg.spec, &cfg.u0, snap.time).unwrap();
            let err = snap.values.iter().zip(&want.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-13, "t={} err={err}", snap.time);
        }
    }

    #[test]
    fn single_step_without_noise_is_the_semigroup() {
        let g = Grid::cube(2, 4.0, 16).unwrap();
        let mut cfg = linear_cfg(g.clone(), 0.05, 0.05);
        cfg.eps2 = 0.0;
        let u0 = Field::from_fn(&g, |x| (x[0] * 1.3).sin() * (x[1] * 0.7).cos());
        let one = step_exponential_euler(&cfg, &u0, 0, 0).unwrap();
        let want = evolve_spectral(&cfg.spec, &u0, 0.05).unwrap();
        for (a, b) in one.values.iter().zip(&want.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let g = Grid::cube(1, 4.0, 32).unwrap();
        let mut cfg = linear_cfg(g, 1e-3, 0.02);
        cfg.drift = DriftSpec::swift_hohenberg_cubic();
        let a = simulate(&cfg, 3, &[0.01, 0.02]).unwrap();
        let b = simulate(&cfg, 3, &[0.01, 0.02]).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        let c = simulate(&cfg, 4, &[0.02]).unwrap();
        assert_ne!(a.snapshots[1].values, c.snapshots[0].values);
    }

    #[test]
    fn one_step_variance_matches_mode_sum() {
        let g = Grid::cube(1, 2.0, 64).unwrap();
        let cfg = linear_cfg(g.clone(), 1e-3, 1e-3);
        let want = linear_second_moment(&cfg, 1).unwrap();
        let mut samples = Vec::new();
        for rep in 0..400 {
            let f = step_exponential_euler(&cfg, &Field::zeros(&g), rep, 0).unwrap();
            samples.extend(f.values.iter().map(|v| v * v));
        }
        let (m, _) = mean_se(&samples);
        // Cells within a replicate are correlated; use replicate-level SE.
        let per_rep: Vec<f64> = samples.chunks(64).map(|c| c.iter().sum::<f64>() / 64.0).collect();
        let (_, se) = mean_se(&per_rep);
        assert!((m - want).abs() < 3.0 * se, "{m} vs {want} (se {se})");
    }

    #[test]
    fn linear_sampler_moments_match_per_step_path_and_formula() {
        let g = Grid::cube(1, 2.0, 32).unwrap();
        let cfg = linear_cfg(g, 1e-3, 0.05);
        let steps = [10usize, 50];
        let mut direct = vec![Vec::new(), Vec::new()];
        let mut fast = vec![Vec::new(), Vec::new()];
        for rep in 0..600 {
            let t = simulate(&cfg, rep, &[0.01, 0.05]).unwrap();
            let s = sample_linear_snapshots(&cfg, rep, &steps).unwrap();
            for i in 0..2 {
                direct[i].push(t.snapshots[i].values.iter().map(|v| v * v).sum::<f64>() / 32.0);
                fast[i].push(s[i].values.iter().map(|v| v * v).sum::<f64>() / 32.0);
            }
        }
        for i in 0..2 {
            let exact = linear_second_moment(&cfg, steps[i]).unwrap();
            let (md, sd) = mean_se(&direct[i]);
            let (mf, sf) = mean_se(&fast[i]);
            assert!((md - exact).abs() < 3.5 * sd, "direct {md} vs {exact}");
            assert!((mf - exact).abs() < 3.5 * sf, "sampler {mf} vs {exact}");
        }
    }

    #[test]
    fn spectral_scheme_matches_lattice_law() {
        let g = Grid::cube(1, 2.0, 32).unwrap();
        let lattice = linear_cfg(g, 1e-3, 0.02);
        let mut spectral = lattice.clone();
        spectral.scheme = NoiseScheme::Spectral;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rep in 0..1500 {
            a.push(simulate(&lattice, rep, &[0.02]).unwrap().snapshots[0].values[5]);
            b.push(simulate(&spectral, rep, &[0.02]).unwrap().snapshots[0].values[5]);
        }
        let (_, p) = crate::stats::ks_two_sample(&a, &b);
        assert!(p > 1e-3, "KS p-value {p}");
        let (va, vb) = (crate::stats::mean_and_var(&a).1, crate::stats::mean_and_var(&b).1);
        let se = va * (2.0 / 1500.0f64).sqrt() * 2f64.sqrt();
        assert!((va - vb).abs() < 3.0 * se, "{va} vs {vb}");
    }

    #[test]
    fn dirichlet_sampler_matches_per_step_second_moment() {
        let g = Grid::dirichlet(1.0, 16).unwrap();
        let cfg = linear_cfg(g, 1e-3, 0.02);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rep in 0..1500 {
            a.push(simulate(&cfg, rep, &[0.02]).unwrap().snapshots[0].values[8].powi(2));
            b.push(sample_linear_snapshots(&cfg, rep, &[20]).unwrap()[0].values[8].powi(2));
        }
        let ((ma, sa), (mb, sb)) = (mean_se(&a), mean_se(&b));
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
    }

    #[test]
    fn bridge_pieces_sum_to_the_step_increment() {
        let g = Grid::dirichlet(1.0, 16).unwrap();
        let cfg = linear_cfg(g, 1e-2, 1e-2);
        let dw = step_increment(&cfg, 0, 0).unwrap();
        let pieces = bridge_split(&cfg, 0, 0, &dw, cfg.dt, 3).unwrap();
        assert_eq!(pieces.len(), 8);
        for i in 0..dw.len() {
            let s: f64 = pieces.iter().map(|p| p[i]).sum();
            assert!((s - dw[i]).abs() < 1e-14);
        }
        assert!(pieces.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn stiff_drift_is_refined_and_large_growth_diverges() {
        let g = Grid::cube(1, 4.0, 16).unwrap();
        let mut cfg = linear_cfg(g.clone(), 0.1, 0.2);
        cfg.eps2 = 0.0;
        cfg.drift = DriftSpec::new(vec![0.0, 20.0]);
        cfg.u0 = bump(&g);
        let t = simulate(&cfg, 0, &[0.2]).unwrap();
        assert!(t.max_substeps >= 4);
        cfg.drift = DriftSpec::new(vec![0.0, 0.0, 1.0]);
        cfg.u0 = Field::from_fn(&g, |_| 50.0);
        cfg.t_end = 10.0;
        cfg.snapshots = vec![10.0];
        assert!(matches!(simulate(&cfg, 0, &[10.0]), Err(Error::Diverged { .. })));
    }

    #[test]
    fn weak_form_mismatch_vanishes_with_dt_for_deterministic_run() {
        let g = Grid::cube(1, 8.0, 64).unwrap();
        let phi = Field::from_fn(&g, |x| (-(x[0] - 4.0).powi(2) * 2.0).exp());
        let mut errs = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let mut cfg = linear_cfg(g.clone(), dt, 0.2);
            cfg.eps2 = 0.0;
            cfg.u0 = bump(&g);
            let traj = simulate_all_steps(&cfg, 0).unwrap();
            errs.push(weak_form_residual(&cfg, &traj, &phi).unwrap());
        }
        let s1 = (errs[0] / errs[1]).log2();
        let s2 = (errs[1] / errs[2]).log2();
        assert!((s1 - 1.0).abs() < 0.15 && (s2 - 1.0).abs() < 0.15, "{errs:?}");
        let zero = Field::zeros(&g);
        let cfg = linear_cfg(g, 0.01, 0.02);
        let traj = simulate_all_steps(&cfg, 0).unwrap();
        assert_eq!(weak_form_residual(&cfg, &traj, &zero).unwrap(), 0.0);
    }

    #[test]
    fn weak_form_rejects_boundary_violations() {
        let g = Grid::dirichlet(1.0, 16).unwrap();
        let cfg = linear_cfg(g.clone(), 0.01, 0.02);
        let traj = simulate_all_steps(&cfg, 0).unwrap();
        let bad = Field::from_fn(&g, |x| 1.0 + x[0]);
        assert!(weak_form_residual(&cfg, &traj, &bad).is_err());
    }

    #[test]
    fn noisy_swift_hohenberg_weak_form_is_small() {
        let g = Grid::dirichlet(1.0, 64).unwrap();
        let mut cfg = linear_cfg(g.clone(), 1e-4, 0.05);
        cfg.drift = DriftSpec::swift_hohenberg_cubic();
        let phi = Field::from_fn(&g, |x| (std::f64::consts::PI * x[0]).sin());
        let traj = simulate_all_steps(&cfg, 1).unwrap();
        let r = weak_form_residual(&cfg, &traj, &phi).unwrap();
        assert!(r < 2e-3, "{r}");
    }

    #[test]
    fn dealiasing_only_changes_high_modes() {
        let g = Grid::cube(1, 4.0, 32).unwrap();
        let mut cfg = linear_cfg(g.clone(), 1e-3, 0.01);
        cfg.eps2 = 0.0;
        cfg.drift = DriftSpec::new(vec![0.0, 0.0, -1.0]);
        cfg.u0 = bump(&g);
        let a = simulate(&cfg, 0, &[0.01]).unwrap();
        cfg.dealias = true;
        let b = simulate(&cfg, 0, &[0.01]).unwrap();
        let diff = a.snapshots[0].values.iter().zip(&b.snapshots[0].values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff > 0.0 && diff < 1e-2);
    }
}
