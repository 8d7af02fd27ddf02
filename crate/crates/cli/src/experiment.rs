//! Experiment files: a `[sim]` table in the simulation-config format plus
//! optional per-subcommand sections.

use std::path::Path;

use lks_core::config::SimConfigFile;
use lks_core::girsanov::Functional;
use lks_core::regularity::{FitOptions, Sampler};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub sim: Option<SimConfigFile>,
    pub replicates: Option<usize>,
    pub threads: Option<usize>,
    /// Emit gnuplot scripts next to the CSV outputs.
    pub plot: Option<bool>,
    pub initial: Option<InitialData>,
    pub kernel: Option<KernelSection>,
    pub solve: Option<SolveSection>,
    pub holder: Option<HolderSection>,
    pub girsanov: Option<GirsanovSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `exp(−|x − centre|²/width²)`; `centre` defaults to the box centre.
    Bump {
        centre: Option<Vec<f64>>,
        #[serde(default = "one")]
        width: f64,
    },
    /// `∏ sin(mode·π·x/L)` on Dirichlet grids, `∏ cos(2π·mode·x/L)` on periodic ones.
    Sine {
        #[serde(default = "one_usize")]
        mode: usize,
    },
    /// A binary snapshot on the same grid.
    File { path: String },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub times: Vec<f64>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_r_points")]
    pub r_points: usize,
}

fn default_r_max() -> f64 {
    10.0
}

fn default_r_points() -> usize {
    201
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    #[default]
    Spectral,
    Convolution,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    #[serde(default)]
    pub method: SolveMethod,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    #[serde(default = "two")]
    pub p: u32,
    #[serde(default)]
    pub base_step: usize,
    #[serde(default)]
    pub time_lag_steps: Vec<usize>,
    #[serde(default)]
    pub space_lag_cells: Vec<usize>,
    #[serde(default)]
    pub sampler: Sampler,
    pub fit: Option<FitOptions>,
}

fn two() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GirsanovSection {
    /// Defaults to `u − u³`.
    pub drift_coeffs: Option<Vec<f64>>,
    #[serde(default)]
    pub levels: Vec<f64>,
    pub functionals: Option<Vec<Functional>>,
    #[serde(default = "yes")]
    pub law_check: bool,
    #[serde(default)]
    pub allow_higher_dim: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePoint {
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default = "one_u32")]
    pub q: u32,
    #[serde(default = "default_snapshot_count")]
    pub snapshot_count: usize,
    pub replicates: Option<usize>,
    #[serde(default)]
    pub sampler: Sampler,
    pub point: Vec<SchedulePoint>,
}

fn one_u32() -> u32 {
    1
}

fn default_snapshot_count() -> usize {
    16
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Parses TOML, or JSON when the extension is `.json`. Blank input is a
/// usage error.
pub fn parse_text<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("{} is empty", path.display())));
    }
    if is_json(path) {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_text(&text, path)
}
