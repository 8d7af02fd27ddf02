//! The numbered acceptance checks, shared by the CLI `--verify` flag and
//! the `acceptance` test target. Every tolerance is pinned in [`tol`].

use std::f64::consts::PI;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::config::{DiffusionSpec, DriftSpec, Operator, SimConfig};
use crate::detsolver::{dirichlet_sine_solve, evolve_spectral, pde_residual, sine_coefficients, solve_kernel_convolution, SpatialOperator};
use crate::error::{Error, Result};
use crate::girsanov::{law_equivalence_check, martingale_check, Functional, LawCheckOptions};
use crate::grid::{Field, Grid};
use crate::kernel::{
    canonical_energy_d2, critical_time_d1, kernel_ft, kernel_value, l2_energy, spatial_difference_l2,
    temporal_difference_l2, KernelSpec,
};
use crate::noise::{white_noise_increment, walsh_integral, NoisePlan, NoiseScheme};
use crate::regularity::{
    critical_ratio_sweep, estimate_holder, scaling_slope, structure_ensemble, EnsemblePlan, FitOptions,
    HolderEstimate, Sampler, SweepOptions,
};
use crate::special::gamma;
use crate::stats::{geomspace, line_fit, mean_and_var};

pub mod tol {
    /// Criterion 1: relative error of the numerical transform.
    pub const FT_REL: f64 = 1e-6;
    /// Criterion 1: modes with `K̂ ≥ FT_FLOOR·max K̂` are compared.
    pub const FT_FLOOR: f64 = 1e-4;
    /// Criterion 2: spread of `E(t)·t^{d/4}` over the time range.
    pub const SCALING_REL: f64 = 1e-6;
    /// Criteria 2 and 3: agreement with closed forms.
    pub const CLOSED_FORM_REL: f64 = 1e-8;
    pub const CRITICAL_TIME: f64 = 1.506188;
    pub const CRITICAL_TIME_ABS: f64 = 1e-4;
    pub const TEMPORAL_SLOPE_ABS: f64 = 0.05;
    pub const SPATIAL_SLOPE_MIN_D1: f64 = 1.9;
    pub const SPATIAL_SLOPE_MIN_D2: f64 = 1.8;
    pub const SPATIAL_SLOPE_RANGE_D3: (f64, f64) = (0.9, 1.0);
    pub const SOLVER_REL_L2: f64 = 1e-4;
    pub const RESIDUAL_SLOPE: f64 = 2.0;
    pub const RESIDUAL_SLOPE_ABS: f64 = 0.2;
    pub const SINE_DECAY_REL: f64 = 1e-10;
    /// Criteria 9 and 12: Monte Carlo agreement in standard errors.
    pub const MC_SIGMAS: f64 = 3.0;
    pub const ISOMETRY_REPLICATES: usize = 10_000;
    pub const HOLDER_REPLICATES: usize = 500;
    pub const D1_TEMPORAL: (f64, f64) = (0.30, 0.40);
    pub const D1_SPATIAL: (f64, f64) = (0.85, 1.05);
    pub const D2_TEMPORAL: (f64, f64) = (0.18, 0.28);
    pub const D3_SPATIAL: (f64, f64) = (0.40, 0.55);
    pub const D3_TEMPORAL: (f64, f64) = (0.08, 0.17);
    pub const HEAT_TEMPORAL: (f64, f64) = (0.20, 0.30);
    pub const HEAT_SPATIAL: (f64, f64) = (0.45, 0.55);
    /// Separation of successive temporal exponents across dimensions.
    pub const ORDERING_SIGMAS: f64 = 3.0;
    pub const RATIO_SLOPE: f64 = 1.0;
    pub const RATIO_SLOPE_ABS: f64 = 0.15;
    pub const RATIO_REPLICATES: usize = 1000;
    pub const GROWTH_REPLICATES: usize = 200;
    pub const GROWTH_FACTOR: f64 = 10.0;
    pub const GIRSANOV_REPLICATES: usize = 10_000;
    pub const MIN_ESS: f64 = 100.0;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<28} measured {} (tolerance {}) {:.1}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.tolerance,
            self.elapsed_s
        )
    }
}

struct Outcome {
    passed: bool,
    measured: String,
    tolerance: String,
    detail: String,
}

pub const NAMES: [&str; 13] = [
    "fourier-identity",
    "theta-zero-energy",
    "d2-closed-form",
    "critical-time",
    "temporal-difference-slope",
    "spatial-difference-slope",
    "solver-cross-validation",
    "dirichlet-sine-decay",
    "noise-isometry",
    "holder-profile",
    "critical-ratio-scaling",
    "girsanov-suite",
    "reproducibility",
];

/// Runs one numbered check; internal errors count as failures.
pub fn run_criterion(id: u32, threads: usize) -> CriterionResult {
    let start = Instant::now();
    let out = match id {
        1 => fourier_identity(),
        2 => theta_zero_energy(),
        3 => d2_closed_form(),
        4 => critical_time(),
        5 => temporal_slopes(),
        6 => spatial_slopes(),
        7 => solver_cross_validation(),
        8 => sine_decay(),
        9 => noise_isometry(),
        10 => holder_profile(threads),
        11 => ratio_scaling(threads),
        12 => girsanov_suite(threads),
        13 => reproducibility(),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    let out = out.unwrap_or_else(|e| Outcome {
        passed: false,
        measured: "error".into(),
        tolerance: "-".into(),
        detail: e.to_string(),
    });
    CriterionResult {
        id,
        name: NAMES.get(id.wrapping_sub(1) as usize).copied().unwrap_or("unknown").to_string(),
        passed: out.passed,
        measured: out.measured,
        tolerance: out.tolerance,
        detail: out.detail,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn within(v: f64, r: (f64, f64)) -> bool {
    v >= r.0 && v <= r.1
}

fn fourier_identity() -> Result<Outcome> {
    let spec = KernelSpec::canonical(1);
    let n = 1usize << 14;
    let l = 200.0;
    let dx = l / n as f64;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for &t in &[0.1, 1.0, 5.0] {
        // Samples at x_j = (j − n/2)Δx; K is even, so evaluate half.
        let half: Vec<f64> = (0..=n / 2)
            .map(|j| kernel_value(&spec, t, &[j as f64 * dx]))
            .collect::<Result<_>>()?;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let m = (j as i64 - (n / 2) as i64).unsigned_abs() as usize;
                Complex64::new(half[m], 0.0)
            })
            .collect();
        fft.process(&mut buf);
        let ft: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let xi = 2.0 * PI * kk / l;
                // Shift x_0 = −L/2 into the phase.
                let phase = Complex64::from_polar(1.0, xi * 0.5 * l);
                let v = (buf[k] * phase).re * dx / (2.0 * PI).sqrt();
                (xi, v)
            })
            .collect();
        let exact: Vec<f64> = ft.iter().map(|&(xi, _)| kernel_ft(&spec, t, &[xi])).collect::<Result<_>>()?;
        let peak = exact.iter().cloned().fold(0.0, f64::max);
        for ((_, v), e) in ft.iter().zip(&exact) {
            if *e >= tol::FT_FLOOR * peak {
                worst = worst.max(rel(*v, *e));
                compared += 1;
            }
        }
    }
    Ok(Outcome {
        passed: worst <= tol::FT_REL,
        measured: format!("{worst:.2e}"),
        tolerance: format!("{:.0e} relative", tol::FT_REL),
        detail: format!("{compared} modes compared on a 2^14 grid, L = {l}"),
    })
}

fn theta_zero_closed_form(d: usize) -> f64 {
    match d {
        1 => 1.0 / (2.0 * gamma(0.75)),
        2 => 1.0 / (4.0 * PI.sqrt()),
        _ => gamma(0.75) / (PI * PI * 8f64.sqrt()),
    }
}

fn theta_zero_energy() -> Result<Outcome> {
    let mut spread: f64 = 0.0;
    let mut off: f64 = 0.0;
    for d in 1..=3 {
        let spec = KernelSpec::simple(d);
        let c = theta_zero_closed_form(d);
        let vals: Vec<f64> = geomspace(1e-3, 1e3, 13)
            .into_iter()
            .map(|t| Ok(l2_energy(&spec, t)? * t.powf(d as f64 / 4.0)))
            .collect::<Result<_>>()?;
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
        spread = spread.max((hi - lo) / lo);
        off = off.max(vals.iter().map(|&v| rel(v, c)).fold(0.0, f64::max));
    }
    Ok(Outcome {
        passed: spread <= tol::SCALING_REL && off <= tol::CLOSED_FORM_REL,
        measured: format!("spread {spread:.1e}, closed-form {off:.1e}"),
        tolerance: format!("{:.0e}, {:.0e}", tol::SCALING_REL, tol::CLOSED_FORM_REL),
        detail: "d = 1, 2, 3 over t in [1e-3, 1e3]".into(),
    })
}

fn d2_closed_form() -> Result<Outcome> {
    let spec = KernelSpec::canonical(2);
    let mut worst: f64 = 0.0;
    for t in [0.01, 0.1, 1.0, 10.0] {
        worst = worst.max(rel(l2_energy(&spec, t)?, canonical_energy_d2(t)));
    }
    Ok(Outcome {
        passed: worst <= tol::CLOSED_FORM_REL,
        measured: format!("{worst:.1e}"),
        tolerance: format!("{:.0e} relative", tol::CLOSED_FORM_REL),
        detail: "t in {0.01, 0.1, 1, 10}".into(),
    })
}

fn critical_time() -> Result<Outcome> {
    let t = critical_time_d1()?;
    Ok(Outcome {
        passed: (t - tol::CRITICAL_TIME).abs() <= tol::CRITICAL_TIME_ABS,
        measured: format!("{t:.7}"),
        tolerance: format!("{} ± {:.0e}", tol::CRITICAL_TIME, tol::CRITICAL_TIME_ABS),
        detail: String::new(),
    })
}

fn temporal_slopes() -> Result<Outcome> {
    let mut slopes = Vec::new();
    let mut ok = true;
    for d in 1..=3 {
        let spec = KernelSpec::canonical(d);
        let t = 1.0;
        let hs = geomspace(1e-5, 1e-3, 5);
        let y: Vec<f64> = hs
            .iter()
            .map(|&h| Ok(temporal_difference_l2(&spec, t, t - h)?.ln()))
            .collect::<Result<_>>()?;
        let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let s = line_fit(&x, &y).ok_or_else(|| Error::InvalidArgument("fit failed".into()))?.slope;
        ok &= (s - (4.0 - d as f64) / 4.0).abs() <= tol::TEMPORAL_SLOPE_ABS;
        slopes.push(s);
    }
    Ok(Outcome {
        passed: ok,
        measured: format!("{:.3} / {:.3} / {:.3}", slopes[0], slopes[1], slopes[2]),
        tolerance: format!("(4-d)/4 ± {}", tol::TEMPORAL_SLOPE_ABS),
        detail: "t = 1, t - r in [1e-5, 1e-3]".into(),
    })
}

fn spatial_slopes() -> Result<Outcome> {
    let mut slopes = Vec::new();
    for d in 1..=3 {
        let spec = KernelSpec::canonical(d);
        let zs = geomspace(1e-3, 1e-1, 5);
        let y: Vec<f64> = zs
            .iter()
            .map(|&z| {
                let mut v = vec![0.0; d];
                v[0] = z;
                Ok(spatial_difference_l2(&spec, 1.0, &v)?.ln())
            })
            .collect::<Result<_>>()?;
        let x: Vec<f64> = zs.iter().map(|z| z.ln()).collect();
        slopes.push(line_fit(&x, &y).ok_or_else(|| Error::InvalidArgument("fit failed".into()))?.slope);
    }
    let passed = slopes[0] >= tol::SPATIAL_SLOPE_MIN_D1
        && slopes[1] >= tol::SPATIAL_SLOPE_MIN_D2
        && within(slopes[2], tol::SPATIAL_SLOPE_RANGE_D3);
    Ok(Outcome {
        passed,
        measured: format!("{:.3} / {:.3} / {:.3}", slopes[0], slopes[1], slopes[2]),
        tolerance: format!(
            ">= {}, >= {}, [{}, {}]",
            tol::SPATIAL_SLOPE_MIN_D1,
            tol::SPATIAL_SLOPE_MIN_D2,
            tol::SPATIAL_SLOPE_RANGE_D3.0,
            tol::SPATIAL_SLOPE_RANGE_D3.1
        ),
        detail: "t = 1, |z| in [1e-3, 1e-1]".into(),
    })
}

fn solver_cross_validation() -> Result<Outcome> {
    let spec = KernelSpec::canonical(1);
    let g = Grid::cube(1, 20.0, 256)?;
    let u0 = Field::from_fn(&g, |x| (-(x[0] - 10.0).powi(2)).exp());
    let a = evolve_spectral(&spec, &u0, 0.1)?;
    let b = solve_kernel_convolution(&spec, &u0, 0.1, 1e-6)?.field;
    let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.values.iter().map(|x| x * x).sum();
    let err = (num / den).sqrt();

    let gl = Grid::cube(1, 2.0 * PI, 64)?;
    let v0 = Field::from_fn(&gl, |x| x[0].cos() + 0.5 * (2.0 * x[0]).sin() + 0.25 * (3.0 * x[0]).cos());
    let dts = [0.01, 0.005, 0.0025];
    let res: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let traj: Vec<Field> = (0..6).map(|n| evolve_spectral(&spec, &v0, n as f64 * dt)).collect::<Result<_>>()?;
            pde_residual(&spec, &traj, dt, SpatialOperator::Spectral)
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = res.iter().map(|r| r.ln()).collect();
    let slope = line_fit(&x, &y).ok_or_else(|| Error::InvalidArgument("fit failed".into()))?.slope;
    Ok(Outcome {
        passed: err <= tol::SOLVER_REL_L2 && (slope - tol::RESIDUAL_SLOPE).abs() <= tol::RESIDUAL_SLOPE_ABS,
        measured: format!("rel L2 {err:.1e}, residual slope {slope:.3}"),
        tolerance: format!("{:.0e}, {} ± {}", tol::SOLVER_REL_L2, tol::RESIDUAL_SLOPE, tol::RESIDUAL_SLOPE_ABS),
        detail: "d = 1 bump at t = 0.1; residuals at dt = 0.01, 0.005, 0.0025".into(),
    })
}

fn sine_decay() -> Result<Outcome> {
    let g = Grid::dirichlet(1.0, 64)?;
    let u0 = Field::from_fn(&g, |x| (PI * x[0]).sin());
    let u = dirichlet_sine_solve(&KernelSpec::canonical(1), &u0, 1.0, 32)?;
    let ratio = sine_coefficients(&u)?[1] / sine_coefficients(&u0)?[1];
    let want = (-(PI * PI - 2.0).powi(2) / 8.0).exp();
    let e = rel(ratio, want);
    Ok(Outcome {
        passed: e <= tol::SINE_DECAY_REL,
        measured: format!("{e:.1e}"),
        tolerance: format!("{:.0e} relative", tol::SINE_DECAY_REL),
        detail: format!("ratio {ratio:.12e}"),
    })
}

fn noise_isometry() -> Result<Outcome> {
    let grid = Grid::cube(1, 2.0, 256)?;
    let plan = NoisePlan::new(grid.clone(), 1e-3, 2024, NoiseScheme::Lattice)?;
    let phis = [
        Field::from_fn(&grid, |x| (PI * x[0]).sin()),
        Field::from_fn(&grid, |x| (-(x[0] - 1.0).powi(2) * 8.0).exp()),
        Field::from_fn(&grid, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }),
    ];
    let n = tol::ISOMETRY_REPLICATES;
    let mut samples = vec![Vec::with_capacity(n); phis.len()];
    for rep in 0..n as u64 {
        let inc = white_noise_increment(&plan, rep, 0)?;
        for (s, phi) in samples.iter_mut().zip(&phis) {
            s.push(walsh_integral(phi, &inc));
        }
    }
    let mut worst: f64 = 0.0;
    for (s, phi) in samples.iter().zip(&phis) {
        let want = plan.dt * phi.inner(phi);
        let (_, var) = mean_and_var(s);
        let m4 = s.iter().map(|v| v.powi(4)).sum::<f64>() / n as f64;
        let se = ((m4 - var * var) / n as f64).sqrt();
        worst = worst.max((var - want).abs() / se);
    }
    Ok(Outcome {
        passed: worst <= tol::MC_SIGMAS,
        measured: format!("{worst:.2} SE"),
        tolerance: format!("<= {} SE", tol::MC_SIGMAS),
        detail: format!("{n} replicates, 3 test functions"),
    })
}

fn temporal_lags(a: f64, b: f64) -> Vec<usize> {
    let mut v: Vec<usize> = geomspace(a, b, 13).into_iter().map(|x| x.round() as usize).collect();
    v.dedup();
    v
}

fn spatial_lags(n: usize) -> Vec<usize> {
    [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512]
        .into_iter()
        .filter(|&h| h <= n / 2)
        .collect()
}

struct HolderCase {
    dim: usize,
    points: usize,
    extent: f64,
    dt: f64,
    operator: Operator,
    base: usize,
    lags: (f64, f64),
    spatial: bool,
}

fn holder_case(c: &HolderCase, threads: usize, seed: u64) -> Result<(HolderEstimate, Option<HolderEstimate>)> {
    let grid = Grid::cube(c.dim, c.extent, c.points)?;
    let mut cfg = SimConfig::new(KernelSpec::canonical(c.dim), grid, c.dt, c.dt, DiffusionSpec::constant(1.0), 1.0, 1.0, seed)?;
    cfg.operator = c.operator;
    let plan = EnsemblePlan {
        replicates: tol::HOLDER_REPLICATES,
        p: 2,
        base_step: c.base,
        time_lag_steps: temporal_lags(c.lags.0, c.lags.1),
        space_lag_cells: if c.spatial { spatial_lags(c.points) } else { Vec::new() },
        sampler: Sampler::Linear,
        threads,
    };
    let tabs = structure_ensemble(&cfg, &plan)?;
    let t = estimate_holder(tabs.time.as_ref().expect("time lags requested"), &FitOptions::default())?;
    let s = match &tabs.space {
        None => None,
        Some(tab) => {
            // On 32³ only four lags survive the fit rules; the span is relaxed.
            let opts = if c.dim == 3 {
                FitOptions { min_lags: 4, min_decades: 0.4, ..FitOptions::default() }
            } else {
                FitOptions::default()
            };
            Some(estimate_holder(tab, &opts)?)
        }
    };
    Ok((t, s))
}

fn holder_profile(threads: usize) -> Result<Outcome> {
    let cases = [
        HolderCase { dim: 1, points: 1024, extent: 0.5, dt: 1e-5, operator: Operator::Lks, base: 2048, lags: (16.0, 4096.0), spatial: true },
        HolderCase { dim: 2, points: 128, extent: 0.5, dt: 1e-6, operator: Operator::Lks, base: 2048, lags: (32.0, 4096.0), spatial: false },
        HolderCase { dim: 3, points: 32, extent: 1.2, dt: 1e-5, operator: Operator::Lks, base: 65536, lags: (128.0, 32768.0), spatial: true },
        HolderCase { dim: 1, points: 1024, extent: 2.0, dt: 1e-5, operator: Operator::Heat, base: 4096, lags: (32.0, 8192.0), spatial: true },
    ];
    let mut est = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        est.push(holder_case(c, threads, 1000 + i as u64)?);
    }
    let (d1t, d1x) = (&est[0].0, est[0].1.as_ref().expect("spatial"));
    let d2t = &est[1].0;
    let (d3t, d3x) = (&est[2].0, est[2].1.as_ref().expect("spatial"));
    let (ht, hx) = (&est[3].0, est[3].1.as_ref().expect("spatial"));
    let sep = |a: &HolderEstimate, b: &HolderEstimate| (a.gamma - b.gamma) / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    let ordered = sep(d1t, d2t) >= tol::ORDERING_SIGMAS && sep(d2t, d3t) >= tol::ORDERING_SIGMAS;
    let passed = within(d1t.gamma, tol::D1_TEMPORAL)
        && within(d1x.gamma, tol::D1_SPATIAL)
        && within(d2t.gamma, tol::D2_TEMPORAL)
        && within(d3x.gamma, tol::D3_SPATIAL)
        && within(d3t.gamma, tol::D3_TEMPORAL)
        && within(ht.gamma, tol::HEAT_TEMPORAL)
        && within(hx.gamma, tol::HEAT_SPATIAL)
        && ordered;
    let f = |e: &HolderEstimate| format!("{:.3}±{:.3}", e.gamma, e.stderr);
    Ok(Outcome {
        passed,
        measured: format!(
            "d1 t {} x {}, d2 t {}, d3 t {} x {}, heat t {} x {}",
            f(d1t), f(d1x), f(d2t), f(d3t), f(d3x), f(ht), f(hx)
        ),
        tolerance: "t [.30,.40] x [.85,1.05]; t [.18,.28]; t [.08,.17] x [.40,.55]; heat .25±.05 .5±.05".into(),
        detail: format!(
            "{} replicates per case; ordering separations {:.1} and {:.1} SE",
            tol::HOLDER_REPLICATES,
            sep(d1t, d2t),
            sep(d2t, d3t)
        ),
    })
}

fn ratio_scaling(threads: usize) -> Result<Outcome> {
    // Regime (i): eps2 = sqrt(eps1), ratio eps1^{3/8} ↓ 0.
    let base = SimConfig::new(KernelSpec::canonical(1), Grid::cube(1, 8.0, 256)?, 1e-3, 1.0, DiffusionSpec::constant(1.0), 1.0, 1.0, 77)?;
    let schedule: Vec<(f64, f64)> = (0..6).map(|j| 4f64.powi(-j)).map(|e1| (e1, e1.sqrt())).collect();
    let opts = SweepOptions { replicates: tol::RATIO_REPLICATES, q: 1, snapshot_count: 16, sampler: Sampler::PerStep, threads };
    let res = critical_ratio_sweep(&base, &schedule, &opts)?;
    let slope = scaling_slope(&res, 1).ok_or_else(|| Error::InvalidArgument("fit failed".into()))?.slope;
    let decreasing = res.windows(2).all(|w| w[1].sup_distance < w[0].sup_distance);

    // Regime (ii): eps2 = 1, eps1 from 1 to 1e-16, ratio 1 → 100.
    let base2 = SimConfig::new(KernelSpec::canonical(1), Grid::cube(1, 1.0, 1024)?, 1e-3, 1.0, DiffusionSpec::constant(1.0), 1.0, 1.0, 78)?;
    let schedule2: Vec<(f64, f64)> = geomspace(1.0, 1e-16, 6).into_iter().map(|e1| (e1, 1.0)).collect();
    let opts2 = SweepOptions { replicates: tol::GROWTH_REPLICATES, ..opts };
    let res2 = critical_ratio_sweep(&base2, &schedule2, &opts2)?;
    let growth = res2.last().expect("nonempty").sup_distance / res2[0].sup_distance;
    let increasing = res2.windows(2).all(|w| w[1].sup_distance > w[0].sup_distance);
    Ok(Outcome {
        passed: (slope - tol::RATIO_SLOPE).abs() <= tol::RATIO_SLOPE_ABS
            && decreasing
            && growth >= tol::GROWTH_FACTOR
            && increasing,
        measured: format!("slope {slope:.3}, growth {growth:.1}x"),
        tolerance: format!("{} ± {}, >= {}x", tol::RATIO_SLOPE, tol::RATIO_SLOPE_ABS, tol::GROWTH_FACTOR),
        detail: format!(
            "regime (i) sup distances {:?}; regime (ii) {:?}",
            res.iter().map(|r| format!("{:.3e}", r.sup_distance)).collect::<Vec<_>>(),
            res2.iter().map(|r| format!("{:.3e}", r.sup_distance)).collect::<Vec<_>>()
        ),
    })
}

fn girsanov_suite(threads: usize) -> Result<Outcome> {
    let cfg = SimConfig::new(KernelSpec::canonical(1), Grid::dirichlet(1.0, 64)?, 1e-3, 0.1, DiffusionSpec::constant(1.0), 1.0, 1.0, 4242)?;
    let drift = DriftSpec::swift_hohenberg_cubic();
    let n = tol::GIRSANOV_REPLICATES;
    let mart = martingale_check(&cfg, &drift, n, &[0.01, 0.05, 0.2], threads)?;
    let z_mart = (mart.weight_mean - 1.0) / mart.weight_stderr;
    let z_levels = mart
        .levels
        .iter()
        .map(|l| if l.stderr > 0.0 { (l.mean - 1.0).abs() / l.stderr } else { 0.0 })
        .fold(0.0, f64::max);
    let law = law_equivalence_check(
        &cfg,
        &drift,
        &Functional::standard_set(),
        &LawCheckOptions { replicates: n, threads, allow_higher_dim: false },
    )?;
    let zmax = law.max_abs_z();
    Ok(Outcome {
        passed: z_mart.abs() <= tol::MC_SIGMAS && z_levels <= tol::MC_SIGMAS && zmax <= tol::MC_SIGMAS && law.ess >= tol::MIN_ESS,
        measured: format!("E[weight] z {z_mart:.2}, stopped max z {z_levels:.2}, law max |z| {zmax:.2}, ESS {:.0}", law.ess),
        tolerance: format!("|z| <= {}, ESS >= {}", tol::MC_SIGMAS, tol::MIN_ESS),
        detail: format!(
            "E[weight] = {:.5} ± {:.5}; functionals {:?}",
            mart.weight_mean,
            mart.weight_stderr,
            law.comparisons.iter().map(|c| format!("{} z={:.2}", c.name, c.z)).collect::<Vec<_>>()
        ),
    })
}

fn reproducibility() -> Result<Outcome> {
    let cfg = SimConfig::new(KernelSpec::canonical(1), Grid::cube(1, 2.0, 64)?, 1e-3, 1e-3, DiffusionSpec::constant(1.0), 1.0, 1.0, 9)?;
    let run = |threads: usize| -> Result<Vec<u8>> {
        let plan = EnsemblePlan {
            replicates: 64,
            p: 2,
            base_step: 8,
            time_lag_steps: vec![1, 2, 4, 8, 16],
            space_lag_cells: vec![1, 2, 4, 8],
            sampler: Sampler::PerStep,
            threads,
        };
        let tabs = structure_ensemble(&cfg, &plan)?;
        let mut buf = Vec::new();
        tabs.time.expect("time").write_csv(&mut buf)?;
        tabs.space.expect("space").write_csv(&mut buf)?;
        Ok(buf)
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(4)?;
    Ok(Outcome {
        passed: a == b && a == c,
        measured: format!("same threads {}, 1 vs 4 threads {}", a == b, a == c),
        tolerance: "byte-identical".into(),
        detail: format!("{} CSV bytes", a.len()),
    })
}
