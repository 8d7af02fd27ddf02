//! Change of measure between the zero-drift SPDE and its drifted version.
//!
//! With noise amplitude `eps2·a(u)`, the drift `b` is a shift of the driving
//! increments by `dt·R`, `R = b/(eps2·a)`. On the lattice scheme the discrete
//! likelihood ratio of that shift is exactly
//! `Ξ = exp(Σ R ΔW ΔV − ½ Σ R² dt ΔV)`, summed over interior cells and steps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{DiffusionSpec, DriftSpec, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::noise::{self, NoiseKey};
use crate::parallel::ordered_map;
use crate::regularity::csv_err;
use crate::spdesim::{run, Observer};
use crate::stats::mean_se;

/// Effective sample sizes below this trigger a warning.
pub const MIN_ESS: f64 = 100.0;

/// `b(u)/a(u)`. For `a = κ1·u` with `b(0) = 0` the value at `u = 0` is the
/// limit `c1/κ1`; the quotient is evaluated by polynomial division so it is
/// continuous there.
pub fn ratio_value(u: f64, drift: &DriftSpec, diffusion: &DiffusionSpec) -> Result<f64> {
    let r = match *diffusion {
        DiffusionSpec::Constant { kappa } => drift.eval(u) / kappa,
        DiffusionSpec::Affine { kappa0, kappa1 } => {
            let c0 = drift.coeffs.first().copied().unwrap_or(0.0);
            if kappa0 == 0.0 && c0 == 0.0 {
                let reduced = DriftSpec::new(drift.coeffs.iter().skip(1).copied().collect());
                reduced.eval(u) / kappa1
            } else {
                let a = kappa0 + kappa1 * u;
                if a == 0.0 {
                    return Err(Error::UndefinedRatio { u });
                }
                drift.eval(u) / a
            }
        }
    };
    if !r.is_finite() {
        return Err(Error::UndefinedRatio { u });
    }
    Ok(r)
}

/// `R_u = b(u)/a(u)` on every snapshot.
pub fn ratio_field(trajectory: &[Field], drift: &DriftSpec, diffusion: &DiffusionSpec) -> Result<Vec<Field>> {
    trajectory
        .iter()
        .map(|f| {
            let values = f
                .values
                .iter()
                .map(|&u| ratio_value(u, drift, diffusion))
                .collect::<Result<_>>()?;
            Ok(Field { grid: f.grid.clone(), time: f.time, values })
        })
        .collect()
}

/// Running stochastic and quadratic integrals of one path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GirsanovLedger {
    /// `Σ R ΔW ΔV` after each step.
    pub stoch_path: Vec<f64>,
    /// `Σ R² dt ΔV` after each step.
    pub quad_path: Vec<f64>,
}

impl GirsanovLedger {
    pub fn stoch_integral(&self) -> f64 {
        self.stoch_path.last().copied().unwrap_or(0.0)
    }

    pub fn quad_integral(&self) -> f64 {
        self.quad_path.last().copied().unwrap_or(0.0)
    }

    pub fn log_weight(&self) -> f64 {
        self.stoch_integral() - 0.5 * self.quad_integral()
    }

    pub fn weight(&self) -> f64 {
        self.log_weight().exp()
    }

    /// `exp(½ Σ R² dt ΔV)`, the quantity whose mean Novikov's criterion bounds.
    pub fn novikov_surrogate(&self) -> f64 {
        (0.5 * self.quad_integral()).exp()
    }

    /// Log-weight after `steps` steps.
    pub fn log_weight_at(&self, steps: usize) -> f64 {
        if steps == 0 {
            return 0.0;
        }
        self.stoch_path[steps - 1] - 0.5 * self.quad_path[steps - 1]
    }

    /// Adds one step with left-point ratios `r` and increments `dw`.
    pub fn record(&mut self, r: &[f64], dw: &[f64], grid: &Grid, dt: f64) {
        let dv = grid.cell_volume();
        let (mut s, mut q) = (0.0, 0.0);
        for i in 0..r.len() {
            if grid.is_interior(i) {
                s += r[i] * dw[i];
                q += r[i] * r[i];
            }
        }
        let s0 = self.stoch_integral();
        let q0 = self.quad_integral();
        self.stoch_path.push(s0 + s * dv);
        self.quad_path.push(q0 + q * dt * dv);
    }

    /// The ledger of `self` followed by `later`.
    pub fn concat(&self, later: &GirsanovLedger) -> GirsanovLedger {
        let (s0, q0) = (self.stoch_integral(), self.quad_integral());
        let mut out = self.clone();
        out.stoch_path.extend(later.stoch_path.iter().map(|s| s0 + s));
        out.quad_path.extend(later.quad_path.iter().map(|q| q0 + q));
        out
    }
}

/// Accumulates the ledger along a recorded path. `ratio[j]` is the ratio at
/// the left point of step `j` (already divided by `eps2` if wanted); the
/// increments are replayed from `key` under the plan of `cfg`.
pub fn accumulate_weight(cfg: &SimConfig, ratio: &[Field], key: NoiseKey) -> Result<GirsanovLedger> {
    let mut plan = cfg.noise_plan()?;
    plan.seed = key.seed;
    let mut ledger = GirsanovLedger::default();
    for (j, r) in ratio.iter().enumerate() {
        if r.grid != cfg.grid {
            return Err(Error::InvalidArgument("ratio field lives on a different grid".into()));
        }
        let dw = noise::white_noise_increment(&plan, key.replicate, j as u64)?;
        ledger.record(&r.values, &dw.values, &cfg.grid, cfg.dt);
    }
    if !ledger.quad_integral().is_finite() {
        return Err(Error::UndefinedRatio { u: f64::NAN });
    }
    Ok(ledger)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingTime {
    pub level: f64,
    /// First step time at which the quadratic integral reaches `level`, else `T`.
    pub tau: f64,
    /// Steps completed at `tau`.
    pub steps: usize,
    /// `tau == T`.
    pub reached_end: bool,
}

/// First crossings of each level by the quadratic integral, capped at
/// `n_steps·dt`. The integral at time 0 is 0, so level 0 stops at once.
pub fn stopping_times(ledger: &GirsanovLedger, levels: &[f64], dt: f64) -> Vec<StoppingTime> {
    let n = ledger.quad_path.len();
    levels
        .iter()
        .map(|&level| {
            let hit = if level <= 0.0 {
                Some(0)
            } else {
                ledger.quad_path.iter().position(|&q| q >= level).map(|j| j + 1)
            };
            let steps = hit.unwrap_or(n);
            StoppingTime {
                level,
                tau: steps as f64 * dt,
                steps,
                reached_end: steps == n,
            }
        })
        .collect()
}

/// Bounded path functionals compared across the two measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Functional {
    /// Space-time average of `U`, clipped to `[−clip, clip]`.
    ClippedMean { clip: f64 },
    /// `min(max |U|, clip)` over the path.
    ClippedMaxAbs { clip: f64 },
    /// Time average of the spatial mean of `U²`, capped at `clip`.
    ClippedTimeAverageSquare { clip: f64 },
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::ClippedMean { .. } => "clipped-mean",
            Functional::ClippedMaxAbs { .. } => "clipped-max-abs",
            Functional::ClippedTimeAverageSquare { .. } => "clipped-time-average-square",
        }
    }

    pub fn standard_set() -> Vec<Functional> {
        vec![
            Functional::ClippedMean { clip: 1.0 },
            Functional::ClippedMaxAbs { clip: 2.0 },
            Functional::ClippedTimeAverageSquare { clip: 1.0 },
        ]
    }
}

/// Streams path statistics needed by the functionals.
#[derive(Clone, Debug, Default)]
struct PathStats {
    sum: f64,
    sum_sq: f64,
    max_abs: f64,
    count: usize,
    steps: usize,
}

impl PathStats {
    fn push(&mut self, u: &[f64]) {
        for &v in u {
            self.sum += v;
            self.sum_sq += v * v;
            self.max_abs = self.max_abs.max(v.abs());
        }
        self.count += u.len();
        self.steps += 1;
    }

    fn eval(&self, f: &Functional) -> f64 {
        let n = self.count.max(1) as f64;
        match *f {
            Functional::ClippedMean { clip } => (self.sum / n).clamp(-clip, clip),
            Functional::ClippedMaxAbs { clip } => self.max_abs.min(clip),
            Functional::ClippedTimeAverageSquare { clip } => (self.sum_sq / n).min(clip),
        }
    }
}

struct LedgerObserver<'a> {
    cfg: &'a SimConfig,
    drift: &'a DriftSpec,
    ledger: Option<GirsanovLedger>,
    stats: PathStats,
    r: Vec<f64>,
}

impl Observer for LedgerObserver<'_> {
    fn before_step(&mut self, _n: usize, u: &[f64], dw: &[f64]) -> Result<()> {
        if let Some(ledger) = self.ledger.as_mut() {
            for (r, &v) in self.r.iter_mut().zip(u) {
                *r = ratio_value(v, self.drift, &self.cfg.diffusion)? / self.cfg.eps2;
            }
            ledger.record(&self.r, dw, &self.cfg.grid, self.cfg.dt);
        }
        Ok(())
    }

    fn after_step(&mut self, _n: usize, u: &[f64]) -> Result<()> {
        self.stats.push(u);
        Ok(())
    }
}

fn observe(cfg: &SimConfig, drift: &DriftSpec, replicate: u64, with_ledger: bool) -> Result<(Option<GirsanovLedger>, PathStats)> {
    let mut obs = LedgerObserver {
        cfg,
        drift,
        ledger: with_ledger.then(GirsanovLedger::default),
        stats: PathStats::default(),
        r: vec![0.0; cfg.grid.len()],
    };
    run(cfg, replicate, &mut obs)?;
    if let Some(l) = &obs.ledger {
        if !l.quad_integral().is_finite() {
            return Err(Error::UndefinedRatio { u: f64::NAN });
        }
    }
    Ok((obs.ledger, obs.stats))
}

/// Ledger of the zero-drift path of `replicate` for the ratio of `drift`.
pub fn zero_drift_ledger(cfg: &SimConfig, drift: &DriftSpec, replicate: u64) -> Result<GirsanovLedger> {
    check_setting(cfg)?;
    let mut base = cfg.clone();
    base.drift = DriftSpec::zero();
    Ok(observe(&base, drift, replicate, true)?.0.expect("ledger requested"))
}

fn check_setting(cfg: &SimConfig) -> Result<()> {
    if cfg.eps2 <= 0.0 {
        return Err(Error::InvalidArgument("a change of measure needs eps2 > 0".into()));
    }
    if cfg.dealias {
        return Err(Error::InvalidArgument("the exact discrete weight needs dealias = false".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: f64,
    /// Mean and standard error of `Ξ_{T∧τ_level}`.
    pub mean: f64,
    pub stderr: f64,
    /// Fraction of paths with `τ_level = T`.
    pub fraction_unstopped: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub replicates: usize,
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub weight_variance: f64,
    pub levels: Vec<LevelSummary>,
    pub ledgers: Vec<GirsanovLedger>,
}

impl MartingaleReport {
    /// Per-replicate columns `replicate,log_weight,quad_integral,tau_<level>...`.
    pub fn write_csv<W: Write>(&self, w: W, dt: f64) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["replicate".to_string(), "log_weight".into(), "quad_integral".into()];
        head.extend(self.levels.iter().map(|l| format!("tau_{}", l.level)));
        wr.write_record(&head).map_err(csv_err)?;
        let levels: Vec<f64> = self.levels.iter().map(|l| l.level).collect();
        for (i, l) in self.ledgers.iter().enumerate() {
            let mut rec = vec![i.to_string(), l.log_weight().to_string(), l.quad_integral().to_string()];
            rec.extend(stopping_times(l, &levels, dt).iter().map(|s| s.tau.to_string()));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Monte Carlo mean of `Ξ_T` and of the stopped weights `Ξ_{T∧τ_n}` over
/// zero-drift paths.
pub fn martingale_check(
    cfg: &SimConfig,
    drift: &DriftSpec,
    replicates: usize,
    levels: &[f64],
    threads: usize,
) -> Result<MartingaleReport> {
    check_setting(cfg)?;
    let ledgers = ordered_map(threads, replicates, |rep| zero_drift_ledger(cfg, drift, rep))?;
    let w: Vec<f64> = ledgers.iter().map(|l| l.weight()).collect();
    let (weight_mean, weight_stderr) = mean_se(&w);
    let weight_variance = crate::stats::mean_and_var(&w).1;
    let levels = levels
        .iter()
        .map(|&level| {
            let mut vals = Vec::with_capacity(ledgers.len());
            let mut unstopped = 0usize;
            for l in &ledgers {
                let st = stopping_times(l, &[level], cfg.dt)[0];
                vals.push(l.log_weight_at(st.steps).exp());
                unstopped += st.reached_end as usize;
            }
            let (mean, stderr) = mean_se(&vals);
            LevelSummary {
                level,
                mean,
                stderr,
                fraction_unstopped: unstopped as f64 / ledgers.len() as f64,
            }
        })
        .collect();
    Ok(MartingaleReport {
        replicates,
        weight_mean,
        weight_stderr,
        weight_variance,
        levels,
        ledgers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalComparison {
    pub name: String,
    pub direct_mean: f64,
    pub direct_stderr: f64,
    pub reweighted_mean: f64,
    pub reweighted_stderr: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawEquivalenceReport {
    pub replicates: usize,
    pub comparisons: Vec<FunctionalComparison>,
    /// `(ΣΞ)²/ΣΞ²` over the reweighted route.
    pub ess: f64,
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub warnings: Vec<String>,
}

impl LawEquivalenceReport {
    pub fn max_abs_z(&self) -> f64 {
        self.comparisons.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }

    /// Columns `functional,direct_mean,reweighted_mean,z,ess`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["functional", "direct_mean", "reweighted_mean", "z", "ess"]).map_err(csv_err)?;
        for c in &self.comparisons {
            wr.serialize((&c.name, c.direct_mean, c.reweighted_mean, c.z, self.ess)).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawCheckOptions {
    pub replicates: usize,
    pub threads: usize,
    /// Permit `d > 1`, where weight variance grows quickly.
    pub allow_higher_dim: bool,
}

/// Compares `E f(V)` for the drifted equation (replicates `n..2n`) with
/// `E f(U)·Ξ` for the zero-drift equation (replicates `0..n`).
pub fn law_equivalence_check(
    cfg: &SimConfig,
    drift: &DriftSpec,
    functionals: &[Functional],
    opts: &LawCheckOptions,
) -> Result<LawEquivalenceReport> {
    check_setting(cfg)?;
    if cfg.diffusion.as_constant().is_none() {
        return Err(Error::InvalidArgument("law equivalence check needs constant diffusion".into()));
    }
    if cfg.grid.dim > 1 && !opts.allow_higher_dim {
        return Err(Error::InvalidArgument("d > 1 needs allow_higher_dim".into()));
    }
    if opts.replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let n = opts.replicates;
    let mut drifted = cfg.clone();
    drifted.drift = drift.clone();
    let mut plain = cfg.clone();
    plain.drift = DriftSpec::zero();

    let direct = ordered_map(opts.threads, n, |i| {
        let (_, s) = observe(&drifted, drift, n as u64 + i, false)?;
        Ok(functionals.iter().map(|f| s.eval(f)).collect::<Vec<f64>>())
    })?;
    let reweighted = ordered_map(opts.threads, n, |i| {
        let (l, s) = observe(&plain, drift, i, true)?;
        let w = l.expect("ledger requested").weight();
        Ok((w, functionals.iter().map(|f| s.eval(f)).collect::<Vec<f64>>()))
    })?;

    let weights: Vec<f64> = reweighted.iter().map(|r| r.0).collect();
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    let ess = sw * sw / sw2;
    let (weight_mean, weight_stderr) = mean_se(&weights);
    let mut warnings = Vec::new();
    if !(ess >= MIN_ESS) {
        warnings.push(format!(
            "effective sample size {ess:.1} below {MIN_ESS}; enlarge the ensemble or shorten T"
        ));
    }
    let comparisons = functionals
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let d: Vec<f64> = direct.iter().map(|r| r[k]).collect();
            let r: Vec<f64> = reweighted.iter().map(|(w, v)| w * v[k]).collect();
            let (dm, ds) = mean_se(&d);
            let (rm, rs) = mean_se(&r);
            let se = (ds * ds + rs * rs).sqrt();
            let z = if se > 0.0 { (dm - rm) / se } else if dm == rm { 0.0 } else { f64::INFINITY };
            FunctionalComparison {
                name: f.name().to_string(),
                direct_mean: dm,
                direct_stderr: ds,
                reweighted_mean: rm,
                reweighted_stderr: rs,
                z,
            }
        })
        .collect();
    Ok(LawEquivalenceReport {
        replicates: n,
        comparisons,
        ess,
        weight_mean,
        weight_stderr,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::spdesim::simulate_all_steps;

    fn cfg(n: usize, dt: f64, t_end: f64) -> SimConfig {
        SimConfig::new(
            KernelSpec::canonical(1),
            Grid::dirichlet(1.0, n).unwrap(),
            dt,
            t_end,
            DiffusionSpec::constant(1.0),
            1.0,
            1.0,
            21,
        )
        .unwrap()
    }

    #[test]
    fn zero_drift_gives_zero_ratio_and_unit_weight() {
        let c = cfg(16, 1e-2, 0.1);
        let traj = simulate_all_steps(&c, 0).unwrap();
        let r = ratio_field(&traj.snapshots[..c.n_steps()], &DriftSpec::zero(), &c.diffusion).unwrap();
        assert!(r.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
        let l = accumulate_weight(&c, &r, traj.key).unwrap();
        assert_eq!(l.weight(), 1.0);
        assert_eq!(l.novikov_surrogate(), 1.0);
    }

    #[test]
    fn constant_ratio_matches_closed_form() {
        let c = cfg(16, 1e-2, 0.1);
        let cst = 0.7;
        let ratio: Vec<Field> = (0..c.n_steps()).map(|_| Field::from_fn(&c.grid, |_| cst)).collect();
        let key = NoiseKey { seed: c.seed, replicate: 3 };
        let l = accumulate_weight(&c, &ratio, key).unwrap();
        let plan = c.noise_plan().unwrap();
        let dv = c.grid.cell_volume();
        let w_total: f64 = (0..c.n_steps())
            .map(|j| noise::white_noise_increment(&plan, 3, j as u64).unwrap().values.iter().sum::<f64>() * dv)
            .sum();
        let interior_vol = (c.grid.len() - 1) as f64 * dv;
        let want = cst * w_total - cst * cst * c.t_end * interior_vol / 2.0;
        assert!((l.log_weight() - want).abs() < 1e-12, "{} vs {want}", l.log_weight());
    }

    #[test]
    fn multiplicative_convention_at_zero() {
        let d = DriftSpec::new(vec![0.0, 3.0, 0.0, -1.0]);
        let a = DiffusionSpec::Affine { kappa0: 0.0, kappa1: 2.0 };
        assert_eq!(ratio_value(0.0, &d, &a).unwrap(), 1.5);
        let near = ratio_value(1e-9, &d, &a).unwrap();
        assert!((near - 1.5).abs() < 1e-12);
        let shifted = DriftSpec::new(vec![1.0, 3.0]);
        assert!(matches!(ratio_value(0.0, &shifted, &a), Err(Error::UndefinedRatio { .. })));
        let affine = DiffusionSpec::Affine { kappa0: 1.0, kappa1: 1.0 };
        assert!(ratio_value(-1.0, &shifted, &affine).is_err());
    }

    #[test]
    fn squared_ratio_matches_expanded_polynomial() {
        let d = DriftSpec::swift_hohenberg_cubic();
        let kappa = 1.7;
        let sq = d.squared().scaled(1.0 / (kappa * kappa));
        let a = DiffusionSpec::constant(kappa);
        for k in 0..50 {
            let u = -2.0 + 4.0 * k as f64 / 49.0;
            let r = ratio_value(u, &d, &a).unwrap();
            assert!((r * r - sq.eval(u)).abs() <= 1e-13 * (1.0 + sq.eval(u).abs()));
        }
    }

    #[test]
    fn ledger_concatenation_is_additive() {
        let c = cfg(16, 1e-2, 0.1);
        let l = zero_drift_ledger(&c, &DriftSpec::swift_hohenberg_cubic(), 2).unwrap();
        let k = 4;
        let a = GirsanovLedger { stoch_path: l.stoch_path[..k].to_vec(), quad_path: l.quad_path[..k].to_vec() };
        let b = GirsanovLedger {
            stoch_path: l.stoch_path[k..].iter().map(|s| s - l.stoch_path[k - 1]).collect(),
            quad_path: l.quad_path[k..].iter().map(|q| q - l.quad_path[k - 1]).collect(),
        };
        let joined = a.concat(&b);
        assert!((joined.log_weight() - (a.log_weight() + b.log_weight())).abs() < 1e-14);
        assert!((joined.log_weight() - l.log_weight()).abs() < 1e-14);
        assert!(l.quad_path.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn observer_ledger_matches_replayed_ledger() {
        let mut c = cfg(16, 1e-2, 0.1);
        c.eps2 = 0.5;
        let drift = DriftSpec::swift_hohenberg_cubic();
        let l = zero_drift_ledger(&c, &drift, 5).unwrap();
        let traj = simulate_all_steps(&c, 5).unwrap();
        let mut r = ratio_field(&traj.snapshots[..c.n_steps()], &drift, &c.diffusion).unwrap();
        for f in &mut r {
            for v in &mut f.values {
                *v /= c.eps2;
            }
        }
        let replay = accumulate_weight(&c, &r, traj.key).unwrap();
        assert_eq!(l, replay);
    }

    #[test]
    fn stopping_times_are_monotone_and_capped() {
        let l = GirsanovLedger { stoch_path: vec![0.0; 4], quad_path: vec![0.5, 1.0, 2.5, 3.0] };
        let st = stopping_times(&l, &[0.0, 1.0, 2.0, 3.0, 1e9], 0.1);
        let taus: Vec<f64> = st.iter().map(|s| s.tau).collect();
        assert_eq!(st[0].tau, 0.0);
        assert!((taus[1] - 0.2).abs() < 1e-15 && (taus[2] - 0.3).abs() < 1e-15);
        assert!((taus[4] - 0.4).abs() < 1e-15 && st[4].reached_end);
        assert!(taus.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn weight_mean_is_one_and_unstopped_fraction_grows() {
        let c = cfg(16, 1e-2, 0.1);
        let rep = martingale_check(&c, &DriftSpec::new(vec![0.5, 1.0, 0.0, -1.0]), 800, &[0.0, 0.05, 0.2, 1e6], 1).unwrap();
        assert!((rep.weight_mean - 1.0).abs() < 3.0 * rep.weight_stderr, "{rep:?}");
        for l in &rep.levels {
            assert!((l.mean - 1.0).abs() < 3.0 * l.stderr.max(1e-15), "{l:?}");
        }
        let f: Vec<f64> = rep.levels.iter().map(|l| l.fraction_unstopped).collect();
        assert!(f.windows(2).all(|w| w[1] >= w[0]) && f[3] == 1.0);
    }

    #[test]
    fn smaller_drift_gives_smaller_weight_variance() {
        let c = cfg(16, 1e-2, 0.1);
        let d = DriftSpec::new(vec![0.5, 1.0, 0.0, -1.0]);
        let big = martingale_check(&c, &d, 200, &[], 1).unwrap();
        let small = martingale_check(&c, &d.scaled(0.1), 200, &[], 1).unwrap();
        assert!(small.weight_variance < big.weight_variance);
    }

    #[test]
    fn zero_drift_check_is_trivial_and_affine_rejected() {
        let c = cfg(16, 1e-2, 0.05);
        let opts = LawCheckOptions { replicates: 200, threads: 1, allow_higher_dim: false };
        let rep = law_equivalence_check(&c, &DriftSpec::zero(), &Functional::standard_set(), &opts).unwrap();
        assert_eq!(rep.weight_mean, 1.0);
        assert!(rep.max_abs_z() < 4.0);
        let mut m = c.clone();
        m.diffusion = DiffusionSpec::Affine { kappa0: 1.0, kappa1: 0.5 };
        assert!(law_equivalence_check(&m, &DriftSpec::zero(), &Functional::standard_set(), &opts).is_err());
    }

    #[test]
    fn drifted_and_reweighted_routes_agree() {
        let c = cfg(16, 1e-2, 0.1);
        let opts = LawCheckOptions { replicates: 1500, threads: 1, allow_higher_dim: false };
        let drift = DriftSpec::new(vec![1.0, 1.0, 0.0, -1.0]);
        let rep = law_equivalence_check(&c, &drift, &Functional::standard_set(), &opts).unwrap();
        assert!(rep.max_abs_z() < 3.5, "{rep:?}");
        assert!(rep.ess > 100.0);
    }
}
