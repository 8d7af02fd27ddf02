//! Hölder exponents from moment scaling of increments, and sweeps over the
//! noise/dissipation ratio `eps2/eps1^{d/8}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{Boundary, Field};
use crate::parallel::{ordered_fold, ordered_map};
use crate::spdesim::{sample_linear_snapshots, simulate};
use crate::stats::{geomspace, mean_se, weighted_line_fit};

/// Below this many replicates a table carries a warning.
pub const MIN_REPLICATES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Time,
    Space,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Time => "time",
            Direction::Space => "space",
        }
    }
}

/// `E|ΔU|^p` per lag, pooled over base points, with replicate-level errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureFunctionTable {
    pub direction: Direction,
    pub p: u32,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_replicates: usize,
    /// `dt` for time lags, `Δx` for space lags.
    pub resolution: f64,
    pub warning: Option<String>,
}

fn check_moment(p: u32) -> Result<()> {
    if p == 0 || p % 2 != 0 {
        return Err(Error::InvalidArgument(format!("moment order must be a positive even integer, got {p}")));
    }
    Ok(())
}

impl StructureFunctionTable {
    /// Reduces per-replicate rows (one moment per lag) in order.
    pub fn from_replicates(
        direction: Direction,
        p: u32,
        lags: Vec<f64>,
        resolution: f64,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        check_moment(p)?;
        if rows.is_empty() {
            return Err(Error::InvalidArgument("no replicates".into()));
        }
        if rows.iter().any(|r| r.len() != lags.len()) {
            return Err(Error::InvalidArgument("row length differs from lag count".into()));
        }
        let mut moments = Vec::with_capacity(lags.len());
        let mut stderr = Vec::with_capacity(lags.len());
        for k in 0..lags.len() {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let (m, se) = mean_se(&col);
            moments.push(m);
            stderr.push(if rows.len() > 1 { se } else { f64::NAN });
        }
        let warning = (rows.len() < MIN_REPLICATES).then(|| {
            format!("only {} replicates (fewer than {MIN_REPLICATES}); errors are unreliable", rows.len())
        });
        Ok(StructureFunctionTable {
            direction,
            p,
            lags,
            moments,
            stderr,
            n_replicates: rows.len(),
            resolution,
            warning,
        })
    }

    /// Columns `direction,p,lag,moment,stderr,n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["direction", "p", "lag", "moment", "stderr", "n"]).map_err(csv_err)?;
        for k in 0..self.lags.len() {
            wr.serialize((
                self.direction.as_str(),
                self.p,
                self.lags[k],
                self.moments[k],
                self.stderr[k],
                self.n_replicates,
            ))
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Mean over time-lag pairs `(base, base + lag)` of `|ΔU|^p`, pooled over cells;
/// one value per later snapshot.
pub fn temporal_moments(snaps: &[Field], p: u32) -> Vec<f64> {
    let base = &snaps[0].values;
    snaps[1..]
        .iter()
        .map(|s| {
            s.values.iter().zip(base).map(|(a, b)| (a - b).abs().powi(p as i32)).sum::<f64>()
                / base.len() as f64
        })
        .collect()
}

/// Mean of `|U(x + h e_a) − U(x)|^p` over cells and every axis `a`
/// (periodic wrap, or in-range pairs on Dirichlet grids).
pub fn spatial_moments(field: &Field, lag_cells: &[usize], p: u32) -> Vec<f64> {
    let g = &field.grid;
    let strides = g.strides();
    let u = &field.values;
    lag_cells
        .iter()
        .map(|&h| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for a in 0..g.dim {
                let n = g.points[a];
                let s = strides[a];
                for i in 0..u.len() {
                    let c = (i / s) % n;
                    let j = match g.boundary {
                        Boundary::Periodic => i - c * s + ((c + h) % n) * s,
                        Boundary::Dirichlet if c + h < n => i + h * s,
                        Boundary::Dirichlet => continue,
                    };
                    sum += (u[j] - u[i]).abs().powi(p as i32);
                    count += 1;
                }
            }
            if count == 0 {
                f64::NAN
            } else {
                sum / count as f64
            }
        })
        .collect()
}

fn subtract(a: &mut [Field], b: &[Field]) {
    for (x, y) in a.iter_mut().zip(b) {
        for (u, v) in x.values.iter_mut().zip(&y.values) {
            *u -= v;
        }
    }
}

/// Structure function of an ensemble. Time lags are measured from the first
/// snapshot and must match later snapshot times; space lags must be
/// multiples of the (uniform) spacing and are evaluated on the last snapshot.
/// `baseline`, typically the `eps2 = 0` twin, is subtracted first.
pub fn structure_function(
    ensemble: &[Vec<Field>],
    direction: Direction,
    p: u32,
    lags: &[f64],
    baseline: Option<&[Field]>,
) -> Result<StructureFunctionTable> {
    check_moment(p)?;
    let first = ensemble
        .first()
        .and_then(|t| t.first())
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let grid = first.grid.clone();
    let rows: Vec<Vec<f64>>;
    let resolution;
    match direction {
        Direction::Time => {
            let times: Vec<f64> = ensemble[0].iter().map(|f| f.time).collect();
            resolution = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            let idx: Vec<usize> = lags
                .iter()
                .map(|&l| {
                    times
                        .iter()
                        .position(|&t| ((t - times[0]) - l).abs() <= 1e-9 * l.max(resolution))
                        .filter(|&i| i > 0)
                        .ok_or_else(|| Error::InvalidArgument(format!("time lag {l} matches no snapshot")))
                })
                .collect::<Result<_>>()?;
            rows = ensemble
                .iter()
                .map(|traj| {
                    let mut t = traj.clone();
                    if let Some(b) = baseline {
                        subtract(&mut t, b);
                    }
                    let all = temporal_moments(&t, p);
                    idx.iter().map(|&i| all[i - 1]).collect()
                })
                .collect();
        }
        Direction::Space => {
            let dx = grid.spacing();
            if dx.iter().any(|&h| (h - dx[0]).abs() > 1e-12 * dx[0]) {
                return Err(Error::InvalidArgument("space lags need equal spacing on every axis".into()));
            }
            resolution = dx[0];
            let cells: Vec<usize> = lags
                .iter()
                .map(|&l| {
                    let c = (l / dx[0]).round();
                    if c < 1.0 || (l / dx[0] - c).abs() > 1e-6 {
                        Err(Error::InvalidArgument(format!("space lag {l} is not a multiple of dx")))
                    } else {
                        Ok(c as usize)
                    }
                })
                .collect::<Result<_>>()?;
            rows = ensemble
                .iter()
                .map(|traj| {
                    let mut last = traj.last().expect("nonempty").clone();
                    if let Some(b) = baseline {
                        subtract(std::slice::from_mut(&mut last), std::slice::from_ref(b.last().expect("nonempty")));
                    }
                    spatial_moments(&last, &cells, p)
                })
                .collect();
        }
    }
    StructureFunctionTable::from_replicates(direction, p, lags.to_vec(), resolution, &rows)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Full exponential-Euler path for every replicate.
    #[default]
    PerStep,
    /// Exact snapshot law of the linear scheme (zero drift, constant diffusion).
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePlan {
    pub replicates: usize,
    pub p: u32,
    /// Step at which time increments start.
    pub base_step: usize,
    pub time_lag_steps: Vec<usize>,
    pub space_lag_cells: Vec<usize>,
    pub sampler: Sampler,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleTables {
    pub time: Option<StructureFunctionTable>,
    pub space: Option<StructureFunctionTable>,
}

fn draw(cfg: &SimConfig, sampler: Sampler, rep: u64, steps: &[usize]) -> Result<Vec<Field>> {
    match sampler {
        Sampler::Linear => sample_linear_snapshots(cfg, rep, steps),
        Sampler::PerStep => {
            let times: Vec<f64> = steps.iter().map(|&s| s as f64 * cfg.dt).collect();
            Ok(simulate(cfg, rep, &times)?.snapshots)
        }
    }
}

/// Generates `plan.replicates` trajectories of `cfg` and reduces their
/// structure functions. Time increments run from `base_step`; space
/// increments are taken at the last snapshot. When the initial data or the
/// drift is nonzero the `eps2 = 0` twin is subtracted.
pub fn structure_ensemble(cfg: &SimConfig, plan: &EnsemblePlan) -> Result<EnsembleTables> {
    check_moment(plan.p)?;
    if plan.time_lag_steps.windows(2).any(|w| w[1] <= w[0]) || plan.time_lag_steps.first() == Some(&0) {
        return Err(Error::InvalidArgument("time lags must be positive and increasing".into()));
    }
    if plan.space_lag_cells.iter().any(|&h| h == 0) {
        return Err(Error::InvalidArgument("space lags must be positive".into()));
    }
    let mut steps = vec![plan.base_step];
    steps.extend(plan.time_lag_steps.iter().map(|l| plan.base_step + l));
    let mut cfg = cfg.clone();
    cfg.t_end = cfg.dt * (*steps.last().expect("nonempty")).max(1) as f64;
    cfg.snapshots = vec![cfg.t_end];
    cfg.validate()?;
    let twin = if cfg.drift.is_zero() && cfg.u0.max_abs() == 0.0 {
        None
    } else {
        let mut t = cfg.clone();
        t.eps2 = 0.0;
        Some(draw(&t, plan.sampler, 0, &steps)?)
    };
    let rows = ordered_map(plan.threads, plan.replicates, |rep| {
        let mut snaps = draw(&cfg, plan.sampler, rep, &steps)?;
        if let Some(t) = &twin {
            subtract(&mut snaps, t);
        }
        let time = temporal_moments(&snaps, plan.p);
        let space = spatial_moments(snaps.last().expect("nonempty"), &plan.space_lag_cells, plan.p);
        Ok((time, space))
    })?;
    let time = if plan.time_lag_steps.is_empty() {
        None
    } else {
        let r: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let lags = plan.time_lag_steps.iter().map(|&l| l as f64 * cfg.dt).collect();
        Some(StructureFunctionTable::from_replicates(Direction::Time, plan.p, lags, cfg.dt, &r)?)
    };
    let space = if plan.space_lag_cells.is_empty() {
        None
    } else {
        let dx = cfg.grid.spacing()[0];
        let r: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
        let lags = plan.space_lag_cells.iter().map(|&h| h as f64 * dx).collect();
        Some(StructureFunctionTable::from_replicates(Direction::Space, plan.p, lags, dx, &r)?)
    };
    Ok(EnsembleTables { time, space })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Lags below this multiple of the resolution are excluded.
    pub min_resolution_multiple: f64,
    /// Fraction of the largest remaining lags excluded.
    pub drop_top_fraction: f64,
    pub min_lags: usize,
    pub min_decades: f64,
    pub r2_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            min_resolution_multiple: 4.0,
            drop_top_fraction: 0.2,
            min_lags: 5,
            min_decades: 1.5,
            r2_threshold: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub direction: Direction,
    pub p: u32,
    pub gamma: f64,
    pub stderr: f64,
    pub r2: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub n_lags: usize,
    /// Set when `r2` falls below the threshold.
    pub degenerate: bool,
}

impl HolderEstimate {
    /// Columns `direction,p,gamma,stderr,r2,fit_lo,fit_hi`.
    pub fn write_csv<W: Write>(estimates: &[HolderEstimate], w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["direction", "p", "gamma", "stderr", "r2", "fit_lo", "fit_hi"])
            .map_err(csv_err)?;
        for e in estimates {
            wr.serialize((e.direction.as_str(), e.p, e.gamma, e.stderr, e.r2, e.fit_lo, e.fit_hi))
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Weighted log-log fit of the table; `gamma = slope/p`.
pub fn estimate_holder(table: &StructureFunctionTable, opts: &FitOptions) -> Result<HolderEstimate> {
    if table.lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("lags must be increasing".into()));
    }
    let floor = opts.min_resolution_multiple * table.resolution * (1.0 - 1e-9);
    let sel: Vec<usize> = (0..table.lags.len())
        .filter(|&k| table.lags[k] >= floor && table.moments[k] > 0.0)
        .collect();
    let keep = ((1.0 - opts.drop_top_fraction) * sel.len() as f64 + 1e-9).floor().max(1.0) as usize;
    let sel = &sel[..keep.min(sel.len())];
    if sel.len() < opts.min_lags {
        return Err(Error::InsufficientLags(format!("{} usable lags, need {}", sel.len(), opts.min_lags)));
    }
    let (lo, hi) = (table.lags[sel[0]], table.lags[sel[sel.len() - 1]]);
    let decades = (hi / lo).log10();
    if decades < opts.min_decades - 1e-12 {
        return Err(Error::InsufficientLags(format!(
            "fit range spans {decades:.2} decades, need {}",
            opts.min_decades
        )));
    }
    let x: Vec<f64> = sel.iter().map(|&k| table.lags[k].ln()).collect();
    let y: Vec<f64> = sel.iter().map(|&k| table.moments[k].ln()).collect();
    let have_errors = sel.iter().all(|&k| table.stderr[k].is_finite() && table.stderr[k] > 0.0);
    let w: Vec<f64> = sel
        .iter()
        .map(|&k| if have_errors { (table.moments[k] / table.stderr[k]).powi(2) } else { 1.0 })
        .collect();
    let fit = weighted_line_fit(&x, &y, &w)
        .ok_or_else(|| Error::InsufficientLags("degenerate lag set".into()))?;
    let mut slope_se = fit.slope_se;
    if !have_errors {
        slope_se = crate::stats::line_fit(&x, &y).map(|f| f.slope_se).unwrap_or(f64::NAN);
    }
    let p = table.p as f64;
    Ok(HolderEstimate {
        direction: table.direction,
        p: table.p,
        gamma: fit.slope / p,
        stderr: slope_se / p,
        r2: fit.r2,
        fit_lo: lo,
        fit_hi: hi,
        n_lags: sel.len(),
        degenerate: fit.r2 < opts.r2_threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioExperimentResult {
    pub eps1: f64,
    pub eps2: f64,
    /// `eps2/eps1^{d/8}`.
    pub ratio: f64,
    pub q: u32,
    /// Max over snapshots and cells of the Monte Carlo `E|U − u|^{2q}`.
    pub sup_distance: f64,
    /// Standard error at the maximizing snapshot and cell.
    pub sup_stderr: f64,
    pub diverged: bool,
}

impl RatioExperimentResult {
    /// Columns `eps1,eps2,ratio,q,sup_distance,diverged`.
    pub fn write_csv<W: Write>(rows: &[RatioExperimentResult], w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["eps1", "eps2", "ratio", "q", "sup_distance", "diverged"]).map_err(csv_err)?;
        for r in rows {
            wr.serialize((r.eps1, r.eps2, r.ratio, r.q, r.sup_distance, r.diverged)).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn critical_ratio(eps1: f64, eps2: f64, dim: usize) -> f64 {
    eps2 / eps1.powf(dim as f64 / 8.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub replicates: usize,
    pub q: u32,
    /// Minimum number of distinct geometric snapshot times in `(0, T]`.
    pub snapshot_count: usize,
    pub sampler: Sampler,
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            replicates: 200,
            q: 1,
            snapshot_count: 16,
            sampler: Sampler::PerStep,
            threads: 0,
        }
    }
}

/// At least `count` distinct steps, geometric in `[1, n_steps]`.
pub fn geometric_steps(n_steps: usize, count: usize) -> Result<Vec<usize>> {
    if n_steps < count || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n_steps} steps cannot hold {count} distinct snapshots"
        )));
    }
    let mut m = count;
    loop {
        let mut s: Vec<usize> = geomspace(1.0, n_steps as f64, m)
            .into_iter()
            .map(|v| (v.round() as usize).clamp(1, n_steps))
            .collect();
        s.dedup();
        if s.len() >= count {
            return Ok(s);
        }
        m += 1;
    }
}

/// Monte Carlo `sup_{t,x} E|U_{eps1,eps2} − u_{eps1}|^{2q}` for each pair of
/// the schedule, which must be monotone in the ratio. Divergent pairs are
/// recorded, not fatal.
pub fn critical_ratio_sweep(
    base: &SimConfig,
    schedule: &[(f64, f64)],
    opts: &SweepOptions,
) -> Result<Vec<RatioExperimentResult>> {
    if opts.q == 0 {
        return Err(Error::InvalidArgument("q must be positive".into()));
    }
    if opts.replicates == 0 {
        return Err(Error::InvalidArgument("no replicates".into()));
    }
    let dim = base.grid.dim;
    let ratios: Vec<f64> = schedule.iter().map(|&(e1, e2)| critical_ratio(e1, e2, dim)).collect();
    let up = ratios.windows(2).all(|w| w[1] >= w[0]);
    let down = ratios.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(Error::InvalidArgument("schedule must be sorted by ratio".into()));
    }
    let steps = geometric_steps(base.n_steps(), opts.snapshot_count)?;
    let ncell = base.grid.len();
    let pw = 2 * opts.q as i32;
    let mut out = Vec::with_capacity(schedule.len());
    for (&(eps1, eps2), &ratio) in schedule.iter().zip(&ratios) {
        let mut cfg = base.clone();
        cfg.eps1 = eps1;
        cfg.eps2 = eps2;
        cfg.snapshots = vec![cfg.t_end];
        cfg.validate()?;
        let mut res = RatioExperimentResult {
            eps1,
            eps2,
            ratio,
            q: opts.q,
            sup_distance: 0.0,
            sup_stderr: 0.0,
            diverged: false,
        };
        if eps2 == 0.0 {
            out.push(res);
            continue;
        }
        let mut twin_cfg = cfg.clone();
        twin_cfg.eps2 = 0.0;
        let twin = match draw(&twin_cfg, opts.sampler, 0, &steps) {
            Ok(t) => t,
            Err(Error::Diverged { .. }) => {
                res.diverged = true;
                res.sup_distance = f64::INFINITY;
                out.push(res);
                continue;
            }
            Err(e) => return Err(e),
        };
        let len = steps.len() * ncell;
        let acc = (vec![0.0; len], vec![0.0; len], false);
        let sums = ordered_fold(
            opts.threads,
            opts.replicates,
            acc,
            |rep| match draw(&cfg, opts.sampler, rep, &steps) {
                Ok(s) => Ok(Some(s)),
                Err(Error::Diverged { .. }) => Ok(None),
                Err(e) => Err(e),
            },
            |acc, snaps| match snaps {
                None => acc.2 = true,
                Some(snaps) => {
                    for (j, (s, t)) in snaps.iter().zip(&twin).enumerate() {
                        for i in 0..ncell {
                            let v = (s.values[i] - t.values[i]).abs().powi(pw);
                            acc.0[j * ncell + i] += v;
                            acc.1[j * ncell + i] += v * v;
                        }
                    }
                }
            },
        )?;
        if sums.2 {
            res.diverged = true;
            res.sup_distance = f64::INFINITY;
            out.push(res);
            continue;
        }
        let n = opts.replicates as f64;
        let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
        for (i, &s) in sums.0.iter().enumerate() {
            if s / n > best {
                best = s / n;
                best_i = i;
            }
        }
        res.sup_distance = best;
        res.sup_stderr = if opts.replicates > 1 {
            ((sums.1[best_i] / n - best * best).max(0.0) * n / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        out.push(res);
    }
    Ok(out)
}

/// Log-log slope of `sup_distance` against `eps2^{2q}/eps1^{dq/4}` over the
/// finite, positive entries.
pub fn scaling_slope(results: &[RatioExperimentResult], dim: usize) -> Option<crate::stats::LineFit> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| !r.diverged && r.sup_distance > 0.0 && r.sup_distance.is_finite())
        .map(|r| {
            let q = r.q as f64;
            let x = 2.0 * q * r.eps2.ln() - dim as f64 * q / 4.0 * r.eps1.ln();
            (x, r.sup_distance.ln())
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    crate::stats::line_fit(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DiffusionSpec;
    use crate::grid::Grid;
    use crate::kernel::KernelSpec;
    use crate::noise::NormalStream;
    use proptest::prelude::*;

    /// Independent Brownian motion in every cell, sampled at `times`.
    fn brownian_ensemble(reps: usize, times: &[f64], cells: usize) -> Vec<Vec<Field>> {
        let grid = Grid::cube(1, 1.0, cells).unwrap();
        (0..reps)
            .map(|r| {
                let mut u = vec![0.0; cells];
                let mut z = vec![0.0; cells];
                let mut prev = 0.0;
                times
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| {
                        NormalStream::new(99, crate::noise::Domain::Step, r as u64, k as u64)
                            .unwrap()
                            .fill(&mut z);
                        let sd = (t - prev).sqrt();
                        prev = t;
                        for (a, b) in u.iter_mut().zip(&z) {
                            *a += sd * b;
                        }
                        Field { grid: grid.clone(), time: t, values: u.clone() }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn brownian_increments_give_one_half() {
        let base = 1.0;
        let lags = geomspace(0.01, 10.0, 10);
        let mut times = vec![base];
        times.extend(lags.iter().map(|l| base + l));
        let ens = brownian_ensemble(100, &times, 64);
        let t = structure_function(&ens, Direction::Time, 2, &lags, None).unwrap();
        let opts = FitOptions { min_resolution_multiple: 0.0, ..FitOptions::default() };
        let h = estimate_holder(&t, &opts).unwrap();
        assert!((h.gamma - 0.5).abs() < 0.02, "{h:?}");
        assert!(!h.degenerate);
    }

    #[test]
    fn smooth_deterministic_field_scales_like_lag_to_the_p() {
        let g = Grid::cube(1, 2.0 * std::f64::consts::PI, 4096).unwrap();
        let f = Field::from_fn(&g, |x| x[0].sin());
        let dx = g.spacing()[0];
        let cells = [1usize, 2, 4, 8, 16, 32, 64, 128];
        let lags: Vec<f64> = cells.iter().map(|&c| c as f64 * dx).collect();
        let t = structure_function(&[vec![f]], Direction::Space, 2, &lags, None).unwrap();
        assert!(t.warning.is_some());
        let opts = FitOptions { min_resolution_multiple: 0.0, min_decades: 1.0, ..FitOptions::default() };
        let h = estimate_holder(&t, &opts).unwrap();
        assert!((h.gamma - 1.0).abs() < 1e-3, "{h:?}");
    }

    #[test]
    fn spatial_moments_periodic_and_dirichlet() {
        let g = Grid::cube(2, 4.0, 4).unwrap();
        let f = Field::from_fn(&g, |x| x[0]);
        // Axis 0: increments 1,1,1,−3 → mean square 3; axis 1: zero.
        let m = spatial_moments(&f, &[1], 2);
        assert!((m[0] - 1.5).abs() < 1e-14);
        let d = Grid::dirichlet(4.0, 4).unwrap();
        let f = Field::from_fn(&d, |x| x[0]);
        assert!((spatial_moments(&f, &[2], 2)[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn fit_rules_reject_short_ranges_and_odd_moments() {
        let t = StructureFunctionTable::from_replicates(
            Direction::Time,
            2,
            vec![1.0, 2.0, 4.0, 8.0],
            1.0,
            &[vec![1.0, 2.0, 4.0, 8.0], vec![1.0, 2.0, 4.0, 8.0]],
        )
        .unwrap();
        assert!(matches!(estimate_holder(&t, &FitOptions::default()), Err(Error::InsufficientLags(_))));
        assert!(StructureFunctionTable::from_replicates(Direction::Time, 3, vec![1.0], 1.0, &[vec![1.0]]).is_err());
    }

    #[test]
    fn low_r2_is_flagged() {
        let lags = geomspace(1.0, 1000.0, 10);
        let moments: Vec<f64> = lags.iter().enumerate().map(|(i, l)| l * if i % 2 == 0 { 1.0 } else { 30.0 }).collect();
        let t = StructureFunctionTable::from_replicates(Direction::Space, 2, lags, 0.1, &[moments]).unwrap();
        let h = estimate_holder(&t, &FitOptions { min_decades: 1.0, ..FitOptions::default() }).unwrap();
        assert!(h.degenerate);
    }

    fn lks_cfg(n: usize, l: f64, dt: f64) -> SimConfig {
        SimConfig::new(
            KernelSpec::canonical(1),
            Grid::cube(1, l, n).unwrap(),
            dt,
            dt,
            DiffusionSpec::constant(1.0),
            1.0,
            1.0,
            11,
        )
        .unwrap()
    }

    /// Exact second moments of the linear periodic scheme from zero data:
    /// temporal `(dt/V) Σ_k [(1−ρ^l)² S_b + S_l]`, spatial
    /// `(dt/V) Σ_k S_n (2 − 2 cos(k h))`, with `S_m = Σ_{i=1}^m ρ^{2i}`.
    fn exact_linear(n: usize, l: f64, dt: f64, base: usize, tl: &[usize], sl: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let ks: Vec<f64> = (0..n)
            .map(|j| {
                let f = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * std::f64::consts::PI * f / l
            })
            .collect();
        let s = |rho: f64, m: usize| (1..=m).map(|i| rho.powi(2 * i as i32)).sum::<f64>();
        let rho: Vec<f64> = ks.iter().map(|k| (-dt * (k * k - 2.0).powi(2) / 8.0).exp()).collect();
        let time = tl
            .iter()
            .map(|&lag| {
                dt / l * rho.iter().map(|&r| (1.0 - r.powi(lag as i32)).powi(2) * s(r, base) + s(r, lag)).sum::<f64>()
            })
            .collect();
        let end = base + tl.last().copied().unwrap_or(0);
        let dx = l / n as f64;
        let space = sl
            .iter()
            .map(|&h| {
                dt / l * rho.iter().zip(&ks).map(|(&r, &k)| s(r, end) * (2.0 - 2.0 * (k * h as f64 * dx).cos())).sum::<f64>()
            })
            .collect();
        (time, space)
    }

    #[test]
    fn ensemble_tables_match_exact_linear_moments() {
        let cfg = lks_cfg(64, 4.0, 1e-3);
        let plan = EnsemblePlan {
            replicates: 300,
            p: 2,
            base_step: 20,
            time_lag_steps: vec![1, 4, 16],
            space_lag_cells: vec![1, 4, 16],
            sampler: Sampler::Linear,
            threads: 1,
        };
        let (et, es) = exact_linear(64, 4.0, 1e-3, 20, &plan.time_lag_steps, &plan.space_lag_cells);
        for sampler in [Sampler::Linear, Sampler::PerStep] {
            let tabs = structure_ensemble(&cfg, &EnsemblePlan { sampler, ..plan.clone() }).unwrap();
            for (tab, exact) in [(tabs.time.unwrap(), &et), (tabs.space.unwrap(), &es)] {
                for k in 0..exact.len() {
                    let z = (tab.moments[k] - exact[k]) / tab.stderr[k];
                    assert!(z.abs() < 4.0, "{sampler:?} {:?} lag {k}: {} vs {} (z={z})", tab.direction, tab.moments[k], exact[k]);
                }
            }
        }
    }

    #[test]
    fn ensemble_is_identical_across_thread_counts() {
        let cfg = lks_cfg(32, 2.0, 1e-3);
        let plan = EnsemblePlan {
            replicates: 20,
            p: 2,
            base_step: 5,
            time_lag_steps: vec![1, 2, 4],
            space_lag_cells: vec![1, 2],
            sampler: Sampler::PerStep,
            threads: 1,
        };
        let a = structure_ensemble(&cfg, &plan).unwrap();
        let b = structure_ensemble(&cfg, &EnsemblePlan { threads: 3, ..plan }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_gives_zero_distance_and_ratio_uses_d_over_8() {
        let mut cfg = lks_cfg(16, 2.0, 1e-2);
        cfg.t_end = 0.2;
        let opts = SweepOptions { replicates: 4, threads: 1, ..SweepOptions::default() };
        let r = critical_ratio_sweep(&cfg, &[(1.0, 0.0), (0.5, 0.0)], &opts).unwrap();
        assert!(r.iter().all(|x| x.sup_distance == 0.0 && !x.diverged));
        assert!((critical_ratio(0.0625, 1.0, 2) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_rejects_unsorted_schedules() {
        let mut cfg = lks_cfg(16, 2.0, 1e-2);
        cfg.t_end = 0.2;
        let opts = SweepOptions { replicates: 2, threads: 1, ..SweepOptions::default() };
        assert!(critical_ratio_sweep(&cfg, &[(1.0, 1.0), (1.0, 0.1), (1.0, 2.0)], &opts).is_err());
    }

    #[test]
    fn geometric_steps_are_distinct_and_cover_the_end() {
        let s = geometric_steps(1000, 16).unwrap();
        assert!(s.len() >= 16 && s[0] == 1 && *s.last().unwrap() == 1000);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_columns() {
        let t = StructureFunctionTable::from_replicates(Direction::Space, 2, vec![0.5], 0.1, &[vec![2.0], vec![4.0]]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("direction,p,lag,moment,stderr,n\nspace,2,0.5,3.0,1.0,2\n"), "{s}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn recovers_exact_power_laws(gamma in 0.05f64..1.2, c in 0.1f64..10.0) {
            let lags = geomspace(1e-3, 1.0, 12);
            let row: Vec<f64> = lags.iter().map(|l| c * l.powf(2.0 * gamma)).collect();
            let t = StructureFunctionTable::from_replicates(Direction::Time, 2, lags, 1e-4, &[row]).unwrap();
            let h = estimate_holder(&t, &FitOptions::default()).unwrap();
            prop_assert!((h.gamma - gamma).abs() < 1e-10);
        }
    }
}
