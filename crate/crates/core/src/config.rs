//! Simulation configuration: drift and diffusion specifications and the
//! TOML/JSON file format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};
use crate::kernel::KernelSpec;
use crate::noise::{NoisePlan, NoiseScheme};

/// Polynomial drift `b(u) = Σ c_k u^k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriftSpec {
    pub coeffs: Vec<f64>,
}

impl DriftSpec {
    pub fn new(coeffs: Vec<f64>) -> Self {
        DriftSpec { coeffs }
    }

    pub fn zero() -> Self {
        DriftSpec { coeffs: Vec::new() }
    }

    /// `b(u) = u − u³`.
    pub fn swift_hohenberg_cubic() -> Self {
        DriftSpec::new(vec![0.0, 1.0, 0.0, -1.0])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Degree ignoring trailing zero coefficients.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    /// Odd degree `2p − 1` with a negative leading coefficient.
    pub fn is_swift_hohenberg(&self) -> bool {
        match self.degree() {
            Some(n) => n % 2 == 1 && self.coeffs[n] < 0.0,
            None => false,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * u + k as f64 * c)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DriftSpec::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// Coefficients of `b(u)²`.
    pub fn squared(&self) -> Self {
        if self.coeffs.is_empty() {
            return DriftSpec::zero();
        }
        let n = self.coeffs.len();
        let mut out = vec![0.0; 2 * n - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in self.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        DriftSpec::new(out)
    }
}

/// Diffusion coefficient `a(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiffusionRepr", into = "DiffusionRepr")]
pub enum DiffusionSpec {
    Constant { kappa: f64 },
    Affine { kappa0: f64, kappa1: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffusionRepr {
    kind: String,
    params: Vec<f64>,
}

impl TryFrom<DiffusionRepr> for DiffusionSpec {
    type Error = String;

    fn try_from(r: DiffusionRepr) -> std::result::Result<Self, String> {
        let d = match (r.kind.as_str(), r.params.as_slice()) {
            ("constant", [k]) => DiffusionSpec::Constant { kappa: *k },
            ("affine", [k0, k1]) => DiffusionSpec::Affine {
                kappa0: *k0,
                kappa1: *k1,
            },
            ("constant", p) | ("affine", p) => {
                return Err(format!("wrong number of params ({}) for {}", p.len(), r.kind))
            }
            (k, _) => return Err(format!("unknown diffusion kind {k:?}")),
        };
        d.validate().map_err(|e| e.to_string())?;
        Ok(d)
    }
}

impl From<DiffusionSpec> for DiffusionRepr {
    fn from(d: DiffusionSpec) -> Self {
        match d {
            DiffusionSpec::Constant { kappa } => DiffusionRepr {
                kind: "constant".into(),
                params: vec![kappa],
            },
            DiffusionSpec::Affine { kappa0, kappa1 } => DiffusionRepr {
                kind: "affine".into(),
                params: vec![kappa0, kappa1],
            },
        }
    }
}

impl DiffusionSpec {
    pub fn constant(kappa: f64) -> Self {
        DiffusionSpec::Constant { kappa }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DiffusionSpec::Constant { kappa } if kappa == 0.0 || !kappa.is_finite() => Err(
                Error::Config(format!("constant diffusion must be finite and nonzero, got {kappa}")),
            ),
            DiffusionSpec::Affine { kappa0, kappa1 }
                if !kappa0.is_finite() || !kappa1.is_finite() || (kappa0 == 0.0 && kappa1 == 0.0) =>
            {
                Err(Error::Config("affine diffusion must be finite and not identically zero".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DiffusionSpec::Constant { kappa } => kappa,
            DiffusionSpec::Affine { kappa0, kappa1 } => kappa0 + kappa1 * u,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            DiffusionSpec::Constant { kappa } => Some(kappa),
            DiffusionSpec::Affine { kappa0, kappa1 } if kappa1 == 0.0 => Some(kappa0),
            _ => None,
        }
    }
}

/// Linear operator driving the simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Operator {
    /// `(ε·eps1/8)(Δ + 2θ)²`.
    #[default]
    Lks,
    /// `(eps1/2)(−Δ)`: the second-order heat baseline.
    Heat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub spec: KernelSpec,
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub eps1: f64,
    pub eps2: f64,
    pub seed: u64,
    pub snapshots: Vec<f64>,
    pub scheme: NoiseScheme,
    pub operator: Operator,
    /// Zero drift modes above two thirds of the Nyquist index.
    pub dealias: bool,
    pub u0: Field,
}

/// On-disk form; the keys are exactly those listed in the README.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    pub epsilon: f64,
    pub theta: f64,
    pub dim: usize,
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
    pub boundary: Boundary,
    pub dt: f64,
    pub t_end: f64,
    pub drift_coeffs: Vec<f64>,
    pub diffusion: DiffusionSpec,
    pub eps1: f64,
    pub eps2: f64,
    pub seed: u64,
    pub snapshots: Vec<f64>,
}

impl SimConfig {
    /// Zero initial data, lattice noise, L-KS operator.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        spec: KernelSpec,
        grid: Grid,
        dt: f64,
        t_end: f64,
        diffusion: DiffusionSpec,
        eps1: f64,
        eps2: f64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = SimConfig {
            u0: Field::zeros(&grid),
            spec,
            grid,
            dt,
            t_end,
            drift: DriftSpec::zero(),
            diffusion,
            eps1,
            eps2,
            seed,
            snapshots: vec![t_end],
            scheme: NoiseScheme::Lattice,
            operator: Operator::Lks,
            dealias: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.grid.validate()?;
        self.diffusion.validate()?;
        if self.spec.dim != self.grid.dim {
            return Err(Error::Config(format!(
                "dim {} does not match the grid ({} axes)",
                self.spec.dim, self.grid.dim
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be at least dt, got {}", self.t_end)));
        }
        if !(self.eps1 > 0.0 && self.eps1.is_finite()) {
            return Err(Error::Config(format!("eps1 must be positive, got {}", self.eps1)));
        }
        if !(self.eps2 >= 0.0 && self.eps2.is_finite()) {
            return Err(Error::Config(format!("eps2 must be nonnegative, got {}", self.eps2)));
        }
        if self.drift.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("drift coefficients must be finite".into()));
        }
        if self.scheme == NoiseScheme::Spectral && self.grid.boundary != Boundary::Periodic {
            return Err(Error::Config("spectral noise needs a periodic grid".into()));
        }
        if self.u0.grid != self.grid {
            return Err(Error::Config("initial field lives on a different grid".into()));
        }
        for &s in &self.snapshots {
            self.step_of(s)?;
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Step index of a time that must be a multiple of dt in `[0, t_end]`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let k = t / self.dt;
        let r = k.round();
        if !(t >= 0.0) || t > self.t_end * (1.0 + 1e-12) || (k - r).abs() > 1e-6 * r.max(1.0) {
            return Err(Error::Config(format!(
                "snapshot time {t} is not a multiple of dt in [0, t_end]"
            )));
        }
        Ok(r as usize)
    }

    pub fn noise_plan(&self) -> Result<NoisePlan> {
        NoisePlan::new(self.grid.clone(), self.dt, self.seed, self.scheme)
    }

    pub fn from_file(f: &SimConfigFile) -> Result<Self> {
        let grid = Grid::new(f.extent.clone(), f.points.clone(), f.boundary)
            .map_err(|e| Error::Config(e.to_string()))?;
        if f.dim != grid.dim {
            return Err(Error::Config(format!(
                "dim = {} but extent/points have {} entries",
                f.dim, grid.dim
            )));
        }
        let spec = KernelSpec {
            epsilon: f.epsilon,
            theta: f.theta,
            dim: f.dim,
        };
        let cfg = SimConfig {
            u0: Field::zeros(&grid),
            spec,
            grid,
            dt: f.dt,
            t_end: f.t_end,
            drift: DriftSpec::new(f.drift_coeffs.clone()),
            diffusion: f.diffusion,
            eps1: f.eps1,
            eps2: f.eps2,
            seed: f.seed,
            snapshots: f.snapshots.clone(),
            scheme: NoiseScheme::Lattice,
            operator: Operator::Lks,
            dealias: false,
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn to_file(&self) -> SimConfigFile {
        SimConfigFile {
            epsilon: self.spec.epsilon,
            theta: self.spec.theta,
            dim: self.spec.dim,
            extent: self.grid.extent.clone(),
            points: self.grid.points.clone(),
            boundary: self.grid.boundary,
            dt: self.dt,
            t_end: self.t_end,
            drift_coeffs: self.drift.coeffs.clone(),
            diffusion: self.diffusion,
            eps1: self.eps1,
            eps2: self.eps2,
            seed: self.seed,
            snapshots: self.snapshots.clone(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: SimConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        SimConfig::from_file(&f)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SimConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        SimConfig::from_file(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOML: &str = r#"
epsilon = 1.0
theta = 1.0
dim = 1
extent = [1.0]
points = [64]
boundary = "dirichlet"
dt = 0.001
t_end = 0.1
drift_coeffs = [0.0, 1.0, 0.0, -1.0]
diffusion = { kind = "constant", params = [1.0] }
eps1 = 1.0
eps2 = 1.0
seed = 42
snapshots = [0.05, 0.1]
"#;

    #[test]
    fn parses_toml_and_round_trips_json() {
        let cfg = SimConfig::from_toml(TOML).unwrap();
        assert!(cfg.drift.is_swift_hohenberg());
        assert_eq!(cfg.n_steps(), 100);
        let json = serde_json::to_string(&cfg.to_file()).unwrap();
        assert_eq!(SimConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(SimConfig::from_toml(&format!("{TOML}\nbogus = 1\n")).is_err());
        assert!(SimConfig::from_toml(&TOML.replace("dt = 0.001", "dt = -1.0")).is_err());
        assert!(SimConfig::from_toml(&TOML.replace("[0.05, 0.1]", "[0.0505]")).is_err());
        assert!(SimConfig::from_toml(&TOML.replace("params = [1.0]", "params = [0.0]")).is_err());
        assert!(SimConfig::from_toml(&TOML.replace("\"constant\"", "\"cubic\"")).is_err());
        assert!(SimConfig::from_toml("").is_err());
    }

    #[test]
    fn swift_hohenberg_flag() {
        assert!(DriftSpec::swift_hohenberg_cubic().is_swift_hohenberg());
        assert!(!DriftSpec::new(vec![0.0, 1.0, 0.0, 1.0]).is_swift_hohenberg());
        assert!(!DriftSpec::new(vec![0.0, 1.0, -1.0]).is_swift_hohenberg());
        assert!(DriftSpec::new(vec![0.0, 1.0, 0.0, 0.0, 0.0, -2.0, 0.0]).is_swift_hohenberg());
        assert!(!DriftSpec::zero().is_swift_hohenberg());
    }

    proptest! {
        #[test]
        fn squared_coefficients_match_pointwise_square(
            c in proptest::collection::vec(-3.0f64..3.0, 1..6),
            u in -2.0f64..2.0,
        ) {
            let b = DriftSpec::new(c);
            let direct = b.eval(u).powi(2);
            let expanded = b.squared().eval(u);
            prop_assert!((direct - expanded).abs() <= 1e-10 * (1.0 + direct.abs()));
        }

        #[test]
        fn derivative_matches_finite_difference(
            c in proptest::collection::vec(-3.0f64..3.0, 1..6),
            u in -2.0f64..2.0,
        ) {
            let b = DriftSpec::new(c);
            let h = 1e-6;
            let fd = (b.eval(u + h) - b.eval(u - h)) / (2.0 * h);
            prop_assert!((fd - b.derivative(u)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }
}
