use lks_core::config::{DiffusionSpec, DriftSpec, SimConfig};
use lks_core::detsolver::{dirichlet_sine_solve, evolve_spectral};
use lks_core::grid::{Field, Grid};
use lks_core::kernel::KernelSpec;
use lks_core::noise::{spectral_increment, Domain, NoiseScheme};
use lks_core::spdesim::{
    bridge_split, linear_second_moment, mode_rates, run, sample_linear_snapshots, simulate,
    step_exponential_euler, step_increment, Observer,
};
use lks_core::spectral::Transform;
use lks_core::stats::{geomspace, line_fit, mean_se};
use lks_core::Result;
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

fn config(dim: usize, extent: f64, points: usize, dt: f64, t_end: f64) -> SimConfig {
    SimConfig::new(
        KernelSpec::canonical(dim),
        Grid::cube(dim, extent, points).unwrap(),
        dt,
        t_end,
        DiffusionSpec::constant(1.0),
        1.0,
        1.0,
        3,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_driftless_step_matches_spectral_flow(
        eps1 in 0.1f64..3.0, theta in -1.0f64..1.5, dt in 1e-4f64..0.2,
        amp in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        let mut cfg = config(1, 6.0, 64, dt, dt);
        cfg.spec.theta = theta;
        cfg.eps1 = eps1;
        cfg.eps2 = 0.0;
        cfg.u0 = Field::from_fn(&cfg.grid, |x| {
            amp.iter().enumerate().map(|(k, a)| a * (k as f64 * x[0] + 0.3).sin()).sum()
        });
        let stepped = step_exponential_euler(&cfg, &cfg.u0, 0, 0).unwrap();
        let flow_spec = KernelSpec::new(cfg.spec.epsilon * eps1, theta, 1).unwrap();
        let exact = evolve_spectral(&flow_spec, &cfg.u0, dt).unwrap();
        let scale = cfg.u0.max_abs().max(1e-12);
        for (a, b) in stepped.values.iter().zip(&exact.values) {
            prop_assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn bridge_pieces_sum_to_the_coarse_increment(step in 0u64..1000, rep in 0u64..1000, levels in 1u32..6) {
        let cfg = config(1, 2.0, 32, 1e-3, 1e-3);
        let dw = step_increment(&cfg, rep, step).unwrap();
        let pieces = bridge_split(&cfg, rep, step, &dw, cfg.dt, levels).unwrap();
        prop_assert_eq!(pieces.len(), 1 << levels);
        for i in 0..dw.len() {
            let s: f64 = pieces.iter().map(|p| p[i]).sum();
            prop_assert!((s - dw[i]).abs() <= 1e-14 * dw[i].abs().max(1e-300) * (1u64 << levels) as f64);
        }
    }
}

#[test]
fn noiseless_dirichlet_run_matches_sine_solution() {
    let mut cfg = SimConfig::new(
        KernelSpec::canonical(1),
        Grid::dirichlet(1.0, 64).unwrap(),
        1e-3,
        0.05,
        DiffusionSpec::constant(1.0),
        1.0,
        0.0,
        1,
    )
    .unwrap();
    cfg.u0 = Field::from_fn(&cfg.grid, |x| (std::f64::consts::PI * x[0]).sin() + 0.3 * (3.0 * std::f64::consts::PI * x[0]).sin());
    let traj = simulate(&cfg, 0, &[0.05]).unwrap();
    let exact = dirichlet_sine_solve(&cfg.spec, &cfg.u0, 0.05, 32).unwrap();
    for (a, b) in traj.snapshots[0].values.iter().zip(&exact.values) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn replay_is_bit_identical() {
    let mut cfg = config(1, 4.0, 64, 1e-3, 0.05);
    cfg.drift = DriftSpec::swift_hohenberg_cubic();
    let times = [0.01, 0.05];
    let a = simulate(&cfg, 9, &times).unwrap();
    let b = simulate(&cfg, 9, &times).unwrap();
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let c = simulate(&cfg, 10, &times).unwrap();
    assert_ne!(a.snapshots[1].values, c.snapshots[1].values);
}

/// Rebuilds every step of a spectral-scheme run from its parts and measures
/// the imaginary residue left after the inverse transform.
struct Leakage {
    cfg: SimConfig,
    tr: Transform,
    rates: Vec<f64>,
    pending: Vec<f64>,
    worst: f64,
    mismatch: f64,
}

impl Observer for Leakage {
    fn before_step(&mut self, _n: usize, u: &[f64], dw: &[f64]) -> Result<()> {
        let k = self.cfg.eps2 * self.cfg.diffusion.eval(0.0);
        let mut c: Vec<Complex64> = u
            .iter()
            .zip(dw)
            .map(|(x, w)| Complex64::new(x + k * w, 0.0))
            .collect();
        self.tr.forward_complex(&mut c);
        for (ck, l) in c.iter_mut().zip(&self.rates) {
            *ck *= (-self.cfg.dt * l).exp();
        }
        self.tr.inverse_complex(&mut c);
        let norm = c.iter().map(|v| v.re * v.re).sum::<f64>().sqrt().max(1e-300);
        let imag = c.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
        self.worst = self.worst.max(imag / norm);
        self.pending = c.iter().map(|v| v.re).collect();
        Ok(())
    }

    fn after_step(&mut self, _n: usize, u: &[f64]) -> Result<()> {
        let d = u.iter().zip(&self.pending).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        self.mismatch = self.mismatch.max(d);
        Ok(())
    }
}

#[test]
fn spectral_intermediates_stay_hermitian() {
    for dim in [1usize, 2] {
        let mut cfg = config(dim, 4.0, if dim == 1 { 128 } else { 32 }, 1e-3, 0.02);
        cfg.scheme = NoiseScheme::Spectral;
        let plan = cfg.noise_plan().unwrap();
        for step in 0..5 {
            let s = spectral_increment(&plan, Domain::Step, 0, step).unwrap();
            let norm = s.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!(s.hermitian_defect() <= 1e-12 * norm);
        }
        let mut obs = Leakage {
            tr: Transform::new(&cfg.grid).unwrap(),
            rates: mode_rates(&cfg),
            cfg: cfg.clone(),
            pending: Vec::new(),
            worst: 0.0,
            mismatch: 0.0,
        };
        run(&cfg, 4, &mut obs).unwrap();
        assert!(obs.worst < 1e-12, "dim {dim}: leakage {}", obs.worst);
        assert!(obs.mismatch < 1e-12, "dim {dim}: mismatch {}", obs.mismatch);
    }
}

/// Setting per dimension: (extent, points, dt, replicates).
const SCALING: [(usize, f64, usize, f64, u64); 3] = [
    (1, 10.0, 2048, 1e-6, 200),
    (2, 2.0, 128, 1e-6, 40),
    (3, 2.0, 64, 1e-6, 6),
];

#[test]
fn second_moment_grows_like_the_critical_power_of_time() {
    for &(dim, extent, points, dt, reps) in &SCALING {
        let ts = geomspace(1e-4, 1e-2, 5);
        let mut cfg = config(dim, extent, points, dt, 1e-2);
        cfg.snapshots = vec![];
        let steps: Vec<usize> = ts.iter().map(|t| (t / dt).round() as usize).collect();
        // Per replicate: spatial mean of U² at each time.
        let per_rep: Vec<Vec<f64>> = (0..reps)
            .map(|r| {
                sample_linear_snapshots(&cfg, r, &steps)
                    .unwrap()
                    .iter()
                    .map(|f| f.values.iter().map(|v| v * v).sum::<f64>() / f.values.len() as f64)
                    .collect()
            })
            .collect();
        let mut logs = Vec::new();
        for (j, &s) in steps.iter().enumerate() {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[j]).collect();
            let (m, se) = mean_se(&xs);
            let exact = linear_second_moment(&cfg, s).unwrap();
            assert!((m - exact).abs() <= 4.0 * se, "d = {dim}, step {s}: {m} ± {se} vs {exact}");
            logs.push(m.ln());
        }
        let fit = line_fit(&ts.iter().map(|t| t.ln()).collect::<Vec<_>>(), &logs).unwrap();
        let target = (4.0 - dim as f64) / 4.0;
        assert!((fit.slope - target).abs() <= 0.1, "d = {dim}: slope {}", fit.slope);
    }
}
