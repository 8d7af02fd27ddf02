//! `lks`: batch front-end over `lks_core`.
//!
//! Every run writes its CSV/binary outputs and a `manifest.json` into the
//! output directory. Exit codes: 0 success, 1 failed check or runtime error,
//! 2 usage or configuration error.

pub mod experiment;
pub mod plot;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lks_core::config::{DriftSpec, SimConfig};
use lks_core::detsolver::{dirichlet_sine_solve, evolve_spectral, solve_kernel_convolution};
use lks_core::fieldio::{read_binary, write_binary, write_csv};
use lks_core::girsanov::{law_equivalence_check, martingale_check, Functional, LawCheckOptions};
use lks_core::grid::{Boundary, Field};
use lks_core::kernel::{kernel_ft, kernel_value, l2_energy, KernelSpec};
use lks_core::regularity::{
    critical_ratio_sweep, estimate_holder, scaling_slope, structure_ensemble, EnsemblePlan,
    HolderEstimate, RatioExperimentResult, SweepOptions,
};
use lks_core::spdesim::simulate;
use lks_core::verify::{run_criterion, CriterionResult};
use serde::Serialize;
use serde_json::{json, Map, Value};

use experiment::{ExperimentFile, InitialData, ScheduleFile, SolveMethod};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] lks_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core(lks_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lks", version, about = "L-KS kernel, solver and SPDE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct Common {
    /// Experiment file (TOML, or JSON with a .json extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed of the `[sim]` table.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "LKS_THREADS")]
    pub threads: Option<usize>,
    /// Also run the acceptance checks that belong to this subcommand.
    #[arg(long)]
    pub verify: bool,
    /// Emit gnuplot scripts next to the CSV outputs.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Kernel profiles, Fourier transform and L² energy.
    Kernel(Common),
    /// Deterministic solution snapshots.
    Solve(Common),
    /// SPDE trajectories.
    Simulate(Common),
    /// Structure functions and Hölder exponent fits.
    Holder(Common),
    /// Critical-ratio sweep.
    Ratio {
        #[command(flatten)]
        common: Common,
        /// Sweep schedule (TOML or JSON).
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Change-of-measure weights and law-equivalence check.
    Girsanov(Common),
    /// Every acceptance check.
    VerifyAll(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Holder(_) => "holder",
            Command::Ratio { .. } => "ratio",
            Command::Girsanov(_) => "girsanov",
            Command::VerifyAll(_) => "verify-all",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Kernel(c)
            | Command::Solve(c)
            | Command::Simulate(c)
            | Command::Holder(c)
            | Command::Girsanov(c)
            | Command::VerifyAll(c) => c,
            Command::Ratio { common, .. } => common,
        }
    }

    /// Acceptance checks run by `--verify`.
    pub fn criteria(&self) -> Vec<u32> {
        match self {
            Command::Kernel(_) => (1..=6).collect(),
            Command::Solve(_) => vec![7, 8],
            Command::Simulate(_) => vec![9],
            Command::Holder(_) => vec![10],
            Command::Ratio { .. } => vec![11],
            Command::Girsanov(_) => vec![12],
            Command::VerifyAll(_) => (1..=13).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub code_version: &'static str,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub summary: Map<String, Value>,
    pub criteria: Vec<CriterionResult>,
    pub status: &'static str,
    pub error: Option<String>,
}

/// Mutable state of one run: where outputs go and what was written.
struct Run {
    out: PathBuf,
    outputs: Vec<String>,
    summary: Map<String, Value>,
    threads: usize,
    plot: bool,
}

impl Run {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let f = File::create(self.out.join(name))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn note(&mut self, key: &str, v: Value) {
        self.summary.insert(key.to_string(), v);
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(m) => {
            for c in &m.criteria {
                println!("{}", c.line());
            }
            println!("{}: {} ({} outputs in {:.1}s)", m.subcommand, m.status, m.outputs.len(), m.wall_time_s);
            if m.status == "ok" {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("lks {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

/// Runs one subcommand and writes its manifest. Usage and config errors are
/// returned before anything is written; later failures still leave the
/// manifest and any outputs produced so far.
pub fn execute(cmd: &Command) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let common = cmd.common();
    let file = match &common.config {
        Some(p) => Some(experiment::load::<ExperimentFile>(p)?),
        None => None,
    };
    let has_work = file.is_some() || matches!(cmd, Command::VerifyAll(_));
    if !has_work && !common.verify {
        return Err(CliError::Usage(format!(
            "`lks {}` needs --config or --verify",
            cmd.name()
        )));
    }
    let mut file = file.unwrap_or_default();
    if let (Some(seed), Some(sim)) = (common.seed, file.sim.as_mut()) {
        sim.seed = seed;
    }
    let threads = common.threads.or(file.threads).unwrap_or(0);
    let schedule = match cmd {
        Command::Ratio { schedule: Some(p), .. } => Some(experiment::load::<ScheduleFile>(p)?),
        Command::Ratio { schedule: None, .. } if common.config.is_some() => {
            return Err(CliError::Usage("`lks ratio` needs --schedule".into()))
        }
        _ => None,
    };
    let sim = match &file.sim {
        Some(s) => Some(SimConfig::from_file(s).map_err(|e| CliError::Config(e.to_string()))?),
        None => None,
    };
    fs::create_dir_all(&common.out)?;
    let mut run = Run {
        out: common.out.clone(),
        outputs: Vec::new(),
        summary: Map::new(),
        threads,
        plot: common.plot || file.plot.unwrap_or(false),
    };

    let work = if common.config.is_some() {
        match cmd {
            Command::Kernel(_) => kernel_cmd(&mut run, &file),
            Command::Solve(_) => solve_cmd(&mut run, &file, sim.as_ref()),
            Command::Simulate(_) => simulate_cmd(&mut run, &file, sim.as_ref()),
            Command::Holder(_) => holder_cmd(&mut run, &file, sim.as_ref()),
            Command::Ratio { .. } => ratio_cmd(&mut run, &file, sim.as_ref(), schedule.as_ref()),
            Command::Girsanov(_) => girsanov_cmd(&mut run, &file, sim.as_ref()),
            Command::VerifyAll(_) => Ok(()),
        }
    } else {
        Ok(())
    };

    let mut criteria = Vec::new();
    if work.is_ok() && (common.verify || matches!(cmd, Command::VerifyAll(_))) {
        for id in cmd.criteria() {
            criteria.push(run_criterion(id, threads));
        }
        let mut w = csv::Writer::from_writer(run.create("criteria.csv")?);
        let csv_err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        w.write_record(["id", "name", "passed", "measured", "tolerance", "elapsed_s"])
            .map_err(csv_err)?;
        for c in &criteria {
            w.serialize((c.id, &c.name, c.passed, &c.measured, &c.tolerance, c.elapsed_s))
                .map_err(csv_err)?;
        }
        w.flush()?;
    }

    let status = match (&work, criteria.iter().all(|c| c.passed)) {
        (Err(_), _) => "error",
        (Ok(()), false) => "checks-failed",
        (Ok(()), true) => "ok",
    };
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "lks",
        code_version: env!("CARGO_PKG_VERSION"),
        subcommand: cmd.name().to_string(),
        config_path: common.config.as_ref().map(|p| p.display().to_string()),
        config: json!({ "experiment": file, "schedule": schedule }),
        seed: file.sim.as_ref().map(|s| s.seed),
        threads,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: run.outputs.clone(),
        summary: run.summary.clone(),
        criteria,
        status,
        error: work.as_ref().err().map(|e| e.to_string()),
    };
    let w = BufWriter::new(File::create(common.out.join("manifest.json"))?);
    serde_json::to_writer_pretty(w, &manifest).map_err(|e| CliError::Io(e.into()))?;
    work?;
    Ok(manifest)
}

fn need_sim(sim: Option<&SimConfig>) -> Result<SimConfig, CliError> {
    sim.cloned()
        .ok_or_else(|| CliError::Config("this subcommand needs a [sim] table".into()))
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref()
        .ok_or_else(|| CliError::Config(format!("this subcommand needs a [{name}] table")))
}

fn initial_field(init: Option<&InitialData>, cfg: &SimConfig) -> Result<Field, CliError> {
    let g = &cfg.grid;
    Ok(match init {
        None | Some(InitialData::Zero) => Field::zeros(g),
        Some(InitialData::Bump { centre, width }) => {
            let c: Vec<f64> = match centre {
                Some(c) if c.len() == g.dim => c.clone(),
                Some(c) => {
                    return Err(CliError::Config(format!(
                        "bump centre has {} entries for a {}-dimensional grid",
                        c.len(),
                        g.dim
                    )))
                }
                None => g.extent.iter().map(|l| 0.5 * l).collect(),
            };
            let w2 = width * width;
            Field::from_fn(g, |x| {
                (-x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / w2).exp()
            })
        }
        Some(InitialData::Sine { mode }) => {
            let m = *mode as f64;
            let dirichlet = g.boundary == Boundary::Dirichlet;
            let ext = g.extent.clone();
            Field::from_fn(g, |x| {
                x.iter()
                    .zip(&ext)
                    .map(|(xi, l)| {
                        if dirichlet {
                            (m * std::f64::consts::PI * xi / l).sin()
                        } else {
                            (2.0 * std::f64::consts::PI * m * xi / l).cos()
                        }
                    })
                    .product()
            })
        }
        Some(InitialData::File { path }) => {
            let (_, f) = read_binary(&mut File::open(path)?)?;
            if f.grid != *g {
                return Err(CliError::Config(format!("{path} lives on a different grid")));
            }
            f
        }
    })
}

fn kernel_cmd(run: &mut Run, file: &ExperimentFile) -> Result<(), CliError> {
    let k = section(&file.kernel, "kernel")?;
    let spec = KernelSpec::new(k.epsilon, k.theta, k.dim)?;
    if k.r_points < 2 || !(k.r_max > 0.0) {
        return Err(CliError::Config("kernel needs r_points ≥ 2 and r_max > 0".into()));
    }
    let rs: Vec<f64> = (0..k.r_points)
        .map(|i| k.r_max * i as f64 / (k.r_points - 1) as f64)
        .collect();
    let axis = |r: f64| {
        let mut x = vec![0.0; k.dim];
        x[0] = r;
        x
    };
    let mut values = run.create("kernel_values.csv")?;
    let mut ft = run.create("kernel_ft.csv")?;
    let mut energy = run.create("kernel_energy.csv")?;
    writeln!(values, "t,r,value")?;
    writeln!(ft, "t,xi,ft")?;
    writeln!(energy, "t,l2_energy,scaled_energy")?;
    for &t in &k.times {
        for &r in &rs {
            writeln!(values, "{t},{r},{}", kernel_value(&spec, t, &axis(r))?)?;
            writeln!(ft, "{t},{r},{}", kernel_ft(&spec, t, &axis(r))?)?;
        }
        let e = l2_energy(&spec, t)?;
        writeln!(energy, "{t},{e},{}", e * t.powf(k.dim as f64 / 4.0))?;
    }
    values.flush()?;
    ft.flush()?;
    energy.flush()?;
    if run.plot {
        run.text("kernel.gp", &plot::kernel("kernel_values.csv", &k.times))?;
    }
    Ok(())
}

fn solve_cmd(run: &mut Run, file: &ExperimentFile, sim: Option<&SimConfig>) -> Result<(), CliError> {
    let cfg = need_sim(sim)?;
    let s = section(&file.solve, "solve")?;
    let u0 = initial_field(file.initial.as_ref(), &cfg)?;
    let mut table = run.create("solve.csv")?;
    writeln!(table, "index,t,l2_norm,max_abs")?;
    let mut warnings = Vec::new();
    for (i, &t) in s.times.iter().enumerate() {
        let u = match s.method {
            SolveMethod::Spectral => evolve_spectral(&cfg.spec, &u0, t)?,
            SolveMethod::Convolution => {
                let r = solve_kernel_convolution(&cfg.spec, &u0, t, 1e-6)?;
                warnings.extend(r.warning);
                r.field
            }
            SolveMethod::Dirichlet => dirichlet_sine_solve(&cfg.spec, &u0, t, cfg.grid.points[0] / 2)?,
        };
        writeln!(table, "{i},{t},{},{}", u.l2_norm(), u.max_abs())?;
        let mut b = run.create(&format!("solution_{i:03}.lksf"))?;
        write_binary(&mut b, &u, cfg.spec.epsilon, cfg.spec.theta)?;
        b.flush()?;
        write_csv(run.create(&format!("solution_{i:03}.csv"))?, &u)?;
    }
    table.flush()?;
    run.note("warnings", json!(warnings));
    Ok(())
}

fn simulate_cmd(run: &mut Run, file: &ExperimentFile, sim: Option<&SimConfig>) -> Result<(), CliError> {
    let mut cfg = need_sim(sim)?;
    cfg.u0 = initial_field(file.initial.as_ref(), &cfg)?;
    let reps = file.replicates.unwrap_or(1);
    let times = cfg.snapshots.clone();
    let mut table = run.create("simulate.csv")?;
    writeln!(table, "replicate,snapshot,t,mean,l2_norm,max_abs,max_substeps,diverged")?;
    let mut diverged = 0usize;
    for rep in 0..reps as u64 {
        match simulate(&cfg, rep, &times) {
            Ok(traj) => {
                for (k, f) in traj.snapshots.iter().enumerate() {
                    let mean = f.values.iter().sum::<f64>() / f.values.len() as f64;
                    writeln!(
                        table,
                        "{rep},{k},{},{mean},{},{},{},false",
                        f.time,
                        f.l2_norm(),
                        f.max_abs(),
                        traj.max_substeps
                    )?;
                    let mut b = run.create(&format!("rep{rep:04}_snap{k:03}.lksf"))?;
                    write_binary(&mut b, f, cfg.spec.epsilon, cfg.spec.theta)?;
                    b.flush()?;
                }
            }
            Err(lks_core::Error::Diverged { step }) => {
                diverged += 1;
                writeln!(table, "{rep},,{},,,,,true", step as f64 * cfg.dt)?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    table.flush()?;
    run.note("replicates", json!(reps));
    run.note("diverged", json!(diverged));
    Ok(())
}

fn holder_cmd(run: &mut Run, file: &ExperimentFile, sim: Option<&SimConfig>) -> Result<(), CliError> {
    let mut cfg = need_sim(sim)?;
    cfg.u0 = initial_field(file.initial.as_ref(), &cfg)?;
    let h = section(&file.holder, "holder")?;
    let plan = EnsemblePlan {
        replicates: file.replicates.unwrap_or(lks_core::regularity::MIN_REPLICATES),
        p: h.p,
        base_step: h.base_step,
        time_lag_steps: h.time_lag_steps.clone(),
        space_lag_cells: h.space_lag_cells.clone(),
        sampler: h.sampler,
        threads: run.threads,
    };
    let tables = structure_ensemble(&cfg, &plan)?;
    let opts = h.fit.unwrap_or_default();
    let mut fits: Vec<(String, HolderEstimate)> = Vec::new();
    let mut warnings = Vec::new();
    for (name, table) in [("structure_time.csv", &tables.time), ("structure_space.csv", &tables.space)] {
        let Some(t) = table else { continue };
        t.write_csv(run.create(name)?)?;
        warnings.extend(t.warning.clone());
        match estimate_holder(t, &opts) {
            Ok(e) => fits.push((name.to_string(), e)),
            Err(e) => warnings.push(format!("{}: {e}", t.direction.as_str())),
        }
    }
    let estimates: Vec<HolderEstimate> = fits.iter().map(|f| f.1.clone()).collect();
    HolderEstimate::write_csv(&estimates, run.create("holder.csv")?)?;
    if run.plot && !fits.is_empty() {
        run.text("holder.gp", &plot::holder(&fits))?;
    }
    run.note("estimates", json!(estimates));
    run.note("warnings", json!(warnings));
    Ok(())
}

fn ratio_cmd(
    run: &mut Run,
    file: &ExperimentFile,
    sim: Option<&SimConfig>,
    schedule: Option<&ScheduleFile>,
) -> Result<(), CliError> {
    let mut cfg = need_sim(sim)?;
    cfg.u0 = initial_field(file.initial.as_ref(), &cfg)?;
    let s = schedule.ok_or_else(|| CliError::Usage("`lks ratio` needs --schedule".into()))?;
    let points: Vec<(f64, f64)> = s.point.iter().map(|p| (p.eps1, p.eps2)).collect();
    let opts = SweepOptions {
        replicates: s.replicates.or(file.replicates).unwrap_or(SweepOptions::default().replicates),
        q: s.q,
        snapshot_count: s.snapshot_count,
        sampler: s.sampler,
        threads: run.threads,
    };
    let rows = critical_ratio_sweep(&cfg, &points, &opts)?;
    RatioExperimentResult::write_csv(&rows, run.create("ratio.csv")?)?;
    if let Some(fit) = scaling_slope(&rows, cfg.grid.dim) {
        run.note("scaling_slope", json!(fit.slope));
        run.note("scaling_slope_stderr", json!(fit.slope_se));
    }
    if run.plot {
        run.text("ratio.gp", &plot::ratio("ratio.csv"))?;
    }
    Ok(())
}

fn girsanov_cmd(run: &mut Run, file: &ExperimentFile, sim: Option<&SimConfig>) -> Result<(), CliError> {
    let mut cfg = need_sim(sim)?;
    cfg.u0 = initial_field(file.initial.as_ref(), &cfg)?;
    let g = section(&file.girsanov, "girsanov")?;
    let drift = g
        .drift_coeffs
        .clone()
        .map(DriftSpec::new)
        .unwrap_or_else(DriftSpec::swift_hohenberg_cubic);
    let reps = file.replicates.unwrap_or(1000);
    let report = martingale_check(&cfg, &drift, reps, &g.levels, run.threads)?;
    report.write_csv(run.create("girsanov_weights.csv")?, cfg.dt)?;
    let mut w = run.create("girsanov_levels.csv")?;
    writeln!(w, "level,mean,stderr,fraction_unstopped")?;
    for l in &report.levels {
        writeln!(w, "{},{},{},{}", l.level, l.mean, l.stderr, l.fraction_unstopped)?;
    }
    w.flush()?;
    run.note("weight_mean", json!(report.weight_mean));
    run.note("weight_stderr", json!(report.weight_stderr));
    if g.law_check {
        let functionals = g.functionals.clone().unwrap_or_else(Functional::standard_set);
        let opts = LawCheckOptions {
            replicates: reps,
            threads: run.threads,
            allow_higher_dim: g.allow_higher_dim,
        };
        let law = law_equivalence_check(&cfg, &drift, &functionals, &opts)?;
        law.write_csv(run.create("girsanov_law.csv")?)?;
        run.note("max_abs_z", json!(law.max_abs_z()));
        run.note("ess", json!(law.ess));
        run.note("warnings", json!(law.warnings));
    }
    Ok(())
}
