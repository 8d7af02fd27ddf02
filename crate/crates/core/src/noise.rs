//! Counter-based space-time white noise.
//!
//! Every Gaussian variate is a pure function of `(seed, domain, replicate,
//! step, cell)`: the seed and domain select a ChaCha8 key, `(replicate, step)`
//! selects the stream, and the cell selects the position within it. Normals
//! come from Box–Muller on pairs of 64-bit words, evaluated with `libm` so
//! the variates are identical across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid, SpectralField};
use crate::spectral::Transform;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScheme {
    /// iid cell increments.
    #[default]
    Lattice,
    /// Hermitian Fourier coefficients, synthesized to a real field.
    Spectral,
}

/// Independent families of variates drawn from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Step,
    Aggregate,
    Bridge,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Step => 0x5354_4550,
            Domain::Aggregate => 0x4147_4752,
            Domain::Bridge => 0x4252_4447,
        }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key(seed: u64, domain: Domain) -> [u8; 32] {
    let mut state = seed ^ domain.tag().rotate_left(17);
    let mut k = [0u8; 32];
    for chunk in k.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    k
}

/// A positioned stream of standard normals for one `(replicate, step)`.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, domain: Domain, replicate: u64, step: u64) -> Result<Self> {
        if replicate >> 32 != 0 || step >> 32 != 0 {
            return Err(Error::InvalidArgument(
                "replicate and step indices must fit in 32 bits".into(),
            ));
        }
        let mut rng = ChaCha8Rng::from_seed(key(seed, domain));
        rng.set_stream((replicate << 32) | step);
        Ok(NormalStream { rng })
    }

    fn pair(&mut self) -> (f64, f64) {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(2.0 * std::f64::consts::PI * u2);
        (r * c, r * s)
    }

    /// Normals for cells `0..n`, in order.
    pub fn fill(&mut self, out: &mut [f64]) {
        self.rng.set_word_pos(0);
        let mut chunks = out.chunks_exact_mut(2);
        for c in &mut chunks {
            let (x, y) = self.pair();
            c[0] = x;
            c[1] = y;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.pair().0;
        }
    }

    /// The normal belonging to one cell, without generating its predecessors.
    pub fn at(&mut self, cell: usize) -> f64 {
        self.rng.set_word_pos(4 * (cell / 2) as u128);
        let (x, y) = self.pair();
        if cell % 2 == 0 {
            x
        } else {
            y
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub grid: Grid,
    pub dt: f64,
    pub seed: u64,
    pub scheme: NoiseScheme,
}

impl NoisePlan {
    pub fn new(grid: Grid, dt: f64, seed: u64, scheme: NoiseScheme) -> Result<Self> {
        grid.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if scheme == NoiseScheme::Spectral && grid.boundary != Boundary::Periodic {
            return Err(Error::InvalidArgument(
                "the spectral noise scheme needs a periodic grid".into(),
            ));
        }
        Ok(NoisePlan {
            grid,
            dt,
            seed,
            scheme,
        })
    }

    /// Per-cell increment variance `dt/∏Δx`.
    pub fn cell_variance(&self) -> f64 {
        self.dt / self.grid.cell_volume()
    }
}

/// Identifies the driving noise of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseKey {
    pub seed: u64,
    pub replicate: u64,
}

/// Replays increments of a plan by `(replicate, step)`.
#[derive(Clone, Debug)]
pub struct NoiseRecord {
    pub plan: NoisePlan,
}

impl NoiseRecord {
    pub fn increment(&self, replicate: u64, step: u64) -> Result<Field> {
        white_noise_increment(&self.plan, replicate, step)
    }
}

/// Standard normals of `(replicate, step)` for every cell of the plan's grid.
pub fn standard_normals(plan: &NoisePlan, domain: Domain, replicate: u64, step: u64) -> Result<Vec<f64>> {
    let mut z = vec![0.0; plan.grid.len()];
    NormalStream::new(plan.seed, domain, replicate, step)?.fill(&mut z);
    Ok(z)
}

/// Cell increments `ΔW` with variance `dt/∏Δx`; zero on the Dirichlet
/// boundary node.
pub fn white_noise_increment(plan: &NoisePlan, replicate: u64, step: u64) -> Result<Field> {
    let values = match plan.scheme {
        NoiseScheme::Lattice => lattice_increment(plan, Domain::Step, replicate, step)?,
        NoiseScheme::Spectral => {
            let mut c = spectral_increment(plan, Domain::Step, replicate, step)?.coeffs;
            let mut v = vec![0.0; plan.grid.len()];
            Transform::new(&plan.grid)?.inverse(&mut c, &mut v)?;
            v
        }
    };
    Ok(Field {
        grid: plan.grid.clone(),
        time: step as f64 * plan.dt,
        values,
    })
}

pub(crate) fn lattice_increment(plan: &NoisePlan, domain: Domain, replicate: u64, step: u64) -> Result<Vec<f64>> {
    let sd = plan.cell_variance().sqrt();
    let mut z = standard_normals(plan, domain, replicate, step)?;
    for (i, v) in z.iter_mut().enumerate() {
        *v = if plan.grid.is_interior(i) { *v * sd } else { 0.0 };
    }
    Ok(z)
}

/// Hermitian coefficients whose inverse DFT is iid `N(0, dt/∏Δx)` per cell:
/// `E|Ŵ_k|² = N·dt/∏Δx`, real on self-conjugate modes, and the real and
/// imaginary parts of paired modes built from the normals of `k` and `−k`.
pub fn spectral_increment(plan: &NoisePlan, domain: Domain, replicate: u64, step: u64) -> Result<SpectralField> {
    if plan.grid.boundary != Boundary::Periodic {
        return Err(Error::InvalidArgument("spectral increments need a periodic grid".into()));
    }
    let z = standard_normals(plan, domain, replicate, step)?;
    Ok(SpectralField {
        grid: plan.grid.clone(),
        coeffs: hermitian_from_normals(&partner_table(&plan.grid), &z, plan.cell_variance()),
    })
}

/// `partner[k]` is the flat index of `−k`.
pub fn partner_table(grid: &Grid) -> Vec<usize> {
    (0..grid.len()).map(|k| SpectralField::partner(grid, k)).collect()
}

pub(crate) fn hermitian_from_normals(partners: &[usize], z: &[f64], cell_var: f64) -> Vec<Complex64> {
    let n = partners.len() as f64;
    let full = (n * cell_var).sqrt();
    let half = (0.5 * n * cell_var).sqrt();
    let mut c = vec![Complex64::new(0.0, 0.0); partners.len()];
    for k in 0..partners.len() {
        let p = partners[k];
        c[k] = if p == k {
            Complex64::new(full * z[k], 0.0)
        } else {
            let (lo, hi) = (k.min(p), k.max(p));
            let w = Complex64::new(half * z[lo], half * z[hi]);
            if k == lo {
                w
            } else {
                w.conj()
            }
        };
    }
    c
}

/// Discrete Walsh integral `Σ φ ΔW ∏Δx`.
pub fn walsh_integral(phi: &Field, increment: &Field) -> f64 {
    phi.inner(increment)
}
