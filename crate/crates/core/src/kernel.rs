//! The (ε,θ) L-KS kernel: Fourier transform, physical-space values by radial
//! quadrature, a Gaussian-average cross-check in d=1, and the L² energy
//! quantities that drive the regularity exponents.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, integrate, integrate_to_infinity, Tolerance};
use crate::special;

/// Exponent at which integrand tails are dropped (`e^{-46} ≈ 1e-20`).
const TAIL_DECAY: f64 = 46.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub epsilon: f64,
    pub theta: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(epsilon: f64, theta: f64, dim: usize) -> Result<Self> {
        let spec = KernelSpec {
            epsilon,
            theta,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// (ε, θ) = (1, 1).
    pub fn canonical(dim: usize) -> Self {
        KernelSpec {
            epsilon: 1.0,
            theta: 1.0,
            dim,
        }
    }

    /// (ε, θ) = (1, 0): the simple fourth-order kernel.
    pub fn simple(dim: usize) -> Self {
        KernelSpec {
            epsilon: 1.0,
            theta: 0.0,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!(
                "dim must be 1, 2 or 3, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Decay rate `ε(|ξ|² − 2θ)²/8` of the Fourier multiplier.
    pub fn rate(&self, xi2: f64) -> f64 {
        let w = xi2 - 2.0 * self.theta;
        self.epsilon * w * w / 8.0
    }

    /// `(2π)^{-d} · |S^{d-1}|`: turns a radial integral into the full
    /// d-dimensional Fourier integral.
    fn radial_prefactor(&self) -> f64 {
        match self.dim {
            1 => 1.0 / PI,
            2 => 1.0 / (2.0 * PI),
            _ => 1.0 / (2.0 * PI * PI),
        }
    }

    /// Radius where the peak of `exp(−c·rate(r²))` has decayed by `e^{-decay}`.
    fn cutoff(&self, c: f64, decay: f64) -> f64 {
        let a = c * self.epsilon / 8.0;
        let floor = if self.theta < 0.0 {
            4.0 * self.theta * self.theta
        } else {
            0.0
        };
        let r2 = 2.0 * self.theta + (floor + decay / a).sqrt();
        r2.max(1e-300).sqrt()
    }

    fn peak_radius(&self) -> Option<f64> {
        (self.theta > 0.0).then(|| (2.0 * self.theta).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Radial truncation; `None` picks the radius where the integrand has
    /// decayed below `e^{-46}` of its peak.
    pub max_radius: Option<f64>,
    /// Node budget for one adaptive integral.
    pub n_points: usize,
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            max_radius: None,
            n_points: 21 * 4000,
            tol: 1e-12,
        }
    }
}

impl QuadratureConfig {
    fn tolerance(&self, abs: f64) -> Tolerance {
        Tolerance {
            abs,
            rel: self.tol,
            max_segments: (self.n_points / 21).max(1),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be positive, got {t}")))
    }
}

fn check_len(spec: &KernelSpec, v: &[f64], what: &str) -> Result<()> {
    spec.validate()?;
    if v.len() != spec.dim {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} components, expected {}",
            v.len(),
            spec.dim
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Breakpoints every `period` on `[0, r_max]`, plus the ridge radius.
fn panel_edges(spec: &KernelSpec, r_max: f64, period: Option<f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = spec.peak_radius().into_iter().collect();
    if let Some(p) = period {
        let n = (r_max / p).floor() as usize;
        pts.extend((1..=n).map(|k| k as f64 * p));
    }
    pts
}

/// `(2π)^{-d/2} exp(−εt(|ξ|² − 2θ)²/8)`.
pub fn kernel_ft(spec: &KernelSpec, t: f64, xi: &[f64]) -> Result<f64> {
    check_len(spec, xi, "xi")?;
    check_time(t)?;
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    Ok((2.0 * PI).powf(-(spec.dim as f64) / 2.0) * (-t * spec.rate(xi2)).exp())
}

pub fn kernel_value(spec: &KernelSpec, t: f64, x: &[f64]) -> Result<f64> {
    kernel_value_with(spec, t, x, &QuadratureConfig::default())
}

/// Inverse Fourier transform of the multiplier, reduced to one radial
/// integral (cosine, J₀ or sinc weight for d = 1, 2, 3).
pub fn kernel_value_with(
    spec: &KernelSpec,
    t: f64,
    x: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_len(spec, x, "x")?;
    check_time(t)?;
    let rho = norm(x);
    let r_max = cfg.max_radius.unwrap_or_else(|| spec.cutoff(t, TAIL_DECAY));
    let g = |r: f64| (-t * spec.rate(r * r)).exp();
    let dim = spec.dim;
    let weight = move |r: f64| -> f64 {
        match dim {
            1 => (r * rho).cos(),
            2 => special::j0(r * rho) * r,
            _ => special::sinc(r * rho) * r * r,
        }
    };
    let envelope = move |r: f64| -> f64 { r.powi(dim as i32 - 1) };

    let edges = panel_edges(spec, r_max, None);
    let scale = integrate(|r| g(r) * envelope(r), 0.0, r_max, &edges, cfg.tolerance(0.0))?.value;
    let period = (rho * r_max > 50.0).then(|| PI / rho);
    let edges = panel_edges(spec, r_max, period);
    let res = integrate(
        |r| g(r) * weight(r),
        0.0,
        r_max,
        &edges,
        cfg.tolerance(cfg.tol * scale),
    )?;
    Ok(spec.radial_prefactor() * res.value)
}

/// d=1 only: averages the angled Schrödinger propagator
/// `e^{iθs} e^{ix²/(2s)} (2πis)^{-1/2}` over a centred Gaussian time `s`
/// with variance εt. The two half-lines are integrated separately, so the
/// imaginary part of the result measures how well they cancel.
pub fn kernel_gaussian_average(spec: &KernelSpec, t: f64, x: f64) -> Result<Complex64> {
    spec.validate()?;
    if spec.dim != 1 {
        return Err(Error::InvalidArgument(
            "the Gaussian-average route is only defined for dim = 1".into(),
        ));
    }
    check_time(t)?;
    let var = spec.epsilon * t;
    let plus = half_line_average(spec.theta, var, x, 1.0)?;
    let minus = half_line_average(spec.theta, var, x, -1.0)?;
    Ok(plus + minus)
}

/// `∫_0^∞` of the propagator average on `s > 0` (`side = 1`) or `s < 0`
/// (`side = −1`, written as an integral over `|s|`), after `|s| = u²`.
fn half_line_average(theta: f64, var: f64, x: f64, side: f64) -> Result<Complex64> {
    let amp0 = 2.0 / (2.0 * PI).sqrt();
    let density = |s: f64| (-s * s / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    let x2 = x * x;
    let f = move |u: f64| -> Complex64 {
        if u == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let s = u * u;
        let phase = side * (theta * s + x2 / (2.0 * s) - PI / 4.0);
        Complex64::from_polar(amp0 * density(s), phase)
    };
    let u_max = (2.0 * TAIL_DECAY * var).powf(0.25);
    let tol = Tolerance::new(1e-14, 1e-13);

    if x == 0.0 {
        return complex_integral(&f, 0.0, u_max, tol);
    }
    let u0 = x.abs().powf(2.0 / 3.0).min(0.5 * u_max);
    let outer = complex_integral(&f, u0, u_max, tol)?;

    // u ∈ (0, u0] becomes v = 1/u ∈ [1/u0, ∞), where the phase x²v²/2 grows
    // without bound and the amplitude decays like v^{-2}.
    let g = move |v: f64| f(1.0 / v) / (v * v);
    let v_start = 1.0 / u0;
    let k0 = (x2 * v_start * v_start / (2.0 * PI)).floor() as usize + 1;
    let edge = |k: usize| (2.0 * PI * k as f64).sqrt() / x.abs();

    let mut re = Vec::new();
    let mut im = Vec::new();
    let mut acc = complex_integral(&g, v_start, edge(k0), tol)?;
    re.push(acc.re);
    im.push(acc.im);
    let mut last = Complex64::new(f64::NAN, f64::NAN);
    let mut agree = 0;
    for k in k0..k0 + 4000 {
        acc += complex_integral(&g, edge(k), edge(k + 1), tol)?;
        re.push(acc.re);
        im.push(acc.im);
        if re.len() < 8 {
            continue;
        }
        let w = re.len().saturating_sub(40);
        let (er, dr) = quad::wynn_epsilon(&re[w..]);
        let (ei, di) = quad::wynn_epsilon(&im[w..]);
        let est = Complex64::new(er, ei);
        let target = 1e-13;
        if (est - last).norm() <= target && dr.max(di) <= 1e3 * target {
            agree += 1;
            if agree >= 2 {
                return Ok(outer + est);
            }
        } else {
            agree = 0;
        }
        last = est;
    }
    Err(Error::Oscillatory {
        terms: re.len(),
        partial: re[re.len().saturating_sub(5)..].to_vec(),
    })
}

fn complex_integral<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Complex64> {
    let re = integrate(|u| f(u).re, a, b, &[], tol)?;
    let im = integrate(|u| f(u).im, a, b, &[], tol)?;
    Ok(Complex64::new(re.value, im.value))
}

/// `‖K_t‖²_{L²} = (2π)^{-d} ∫ exp(−εt(|ξ|² − 2θ)²/4) dξ`.
pub fn l2_energy(spec: &KernelSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let r_max = spec.cutoff(2.0 * t, TAIL_DECAY);
    let d = spec.dim as i32;
    let res = integrate(
        |r| (-2.0 * t * spec.rate(r * r)).exp() * r.powi(d - 1),
        0.0,
        r_max,
        &panel_edges(spec, r_max, None),
        Tolerance::new(0.0, 1e-14),
    )?;
    Ok(spec.radial_prefactor() * res.value)
}

/// `(1 − e^{−aq})/q`, continuous at `q = 0`.
fn relax(a: f64, q: f64) -> f64 {
    let x = a * q;
    if x < 1e-10 {
        a * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / q
    }
}

/// Radial integral over `[0, ∞)` of an integrand that behaves like
/// `tail(r)` once `r ≥ r_cut`.
fn radial_with_tail<F, G>(spec: &KernelSpec, body: F, tail: G, r_cut: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let tol = Tolerance::new(0.0, 1e-14);
    let head = integrate(&body, 0.0, r_cut, &panel_edges(spec, r_cut, None), tol)?;
    let rest = integrate_to_infinity(&tail, r_cut, tol)?;
    Ok(head.value + rest.value)
}

/// `∫_0^t ‖K_s‖²_{L²} ds`.
pub fn l2_energy_time_integrated(spec: &KernelSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let d = spec.dim as i32;
    let body = |r: f64| 0.5 * relax(2.0 * t, spec.rate(r * r)) * r.powi(d - 1);
    let tail = |r: f64| r.powi(d - 1) / (2.0 * spec.rate(r * r));
    let r_cut = spec.cutoff(2.0 * t, TAIL_DECAY);
    Ok(spec.radial_prefactor() * radial_with_tail(spec, body, tail, r_cut)?)
}

/// `∫_0^t ‖K_{t−s} − K_{r−s}‖²_{L²} ds` with `K_τ = 0` for `τ < 0`.
///
/// In Fourier variables with `q = rate(|ξ|²)` and `h = t − r` the time
/// integral is `[(1 − e^{−2rq})(1 − e^{−hq})² + (1 − e^{−2hq})]/(2q)`.
pub fn temporal_difference_l2(spec: &KernelSpec, t: f64, r: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    if r == t {
        return Ok(0.0);
    }
    if !(r > 0.0 && r < t) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r <= t, got r = {r}, t = {t}"
        )));
    }
    let h = t - r;
    let d = spec.dim as i32;
    let body = |rho: f64| {
        let q = spec.rate(rho * rho);
        let gap = -(-h * q).exp_m1();
        0.5 * (relax(2.0 * r, q) * gap * gap + relax(2.0 * h, q)) * rho.powi(d - 1)
    };
    let tail = |rho: f64| rho.powi(d - 1) / spec.rate(rho * rho);
    let r_cut = spec.cutoff(h.min(2.0 * r), TAIL_DECAY);
    Ok(spec.radial_prefactor() * radial_with_tail(spec, body, tail, r_cut)?)
}

fn oscillating_weight(dim: usize, y: f64) -> f64 {
    match dim {
        1 => y.cos(),
        2 => special::j0(y),
        _ => special::sinc(y),
    }
}

fn difference_weight(dim: usize, y: f64) -> f64 {
    match dim {
        1 => special::one_minus_cos(y),
        2 => special::one_minus_j0(y),
        _ => special::one_minus_sinc(y),
    }
}

/// `∫_0^t ‖K_s(·) − K_s(· + z)‖²_{L²} ds`.
pub fn spatial_difference_l2(spec: &KernelSpec, t: f64, z: &[f64]) -> Result<f64> {
    check_len(spec, z, "z")?;
    check_time(t)?;
    let zn = norm(z);
    if zn == 0.0 {
        return Ok(0.0);
    }
    let dim = spec.dim;
    let d = dim as i32;
    let tol = Tolerance::new(0.0, 1e-13);
    let time_factor = |rho: f64| 0.5 * relax(2.0 * t, spec.rate(rho * rho));
    let r_cut = spec.cutoff(2.0 * t, TAIL_DECAY);

    let body = |rho: f64| time_factor(rho) * difference_weight(dim, zn * rho) * rho.powi(d - 1);
    let period = (zn * r_cut > 50.0).then(|| PI / zn);
    let head = integrate(body, 0.0, r_cut, &panel_edges(spec, r_cut, period), tol)?.value;

    // Beyond r_cut the exponential is negligible and the integrand is
    // A(ρ)·w(zρ) with A = ρ^{d−1}/(2q). Integrate directly while zρ is small,
    // then split w = 1 − osc and accelerate the oscillatory panels.
    let amp = |rho: f64| rho.powi(d - 1) / (2.0 * spec.rate(rho * rho));
    let r_osc = r_cut.max(PI / zn);
    let near = integrate(
        |rho| amp(rho) * difference_weight(dim, zn * rho),
        r_cut,
        r_osc,
        &[],
        tol,
    )?
    .value;
    let smooth = integrate_to_infinity(amp, r_osc, tol)?.value;
    let step = PI / zn;
    let osc = quad::accelerated_sum(
        |k| {
            let a = r_osc + k as f64 * step;
            integrate(
                |rho| amp(rho) * oscillating_weight(dim, zn * rho),
                a,
                a + step,
                &[],
                Tolerance::new(1e-17 * smooth.abs(), 1e-12),
            )
            .map(|i| i.value)
        },
        Tolerance::new(1e-16 * smooth.abs(), 1e-13),
        5000,
    )?
    .value;
    Ok(2.0 * spec.radial_prefactor() * (head + near + smooth - osc))
}

/// Fourier transform of the Brownian-time Brownian motion density,
/// `(2π)^{-d/2} e^{t|ξ|⁴/8} erfc(√(2t)|ξ|²/4)`, evaluated through `erfcx`.
pub fn btbm_ft(t: f64, xi: &[f64], dim: usize) -> Result<f64> {
    if !(1..=3).contains(&dim) || xi.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "xi must have {dim} components with dim in 1..=3"
        )));
    }
    check_time(t)?;
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    let b = (2.0 * t).sqrt() * xi2 / 4.0;
    Ok((2.0 * PI).powf(-(dim as f64) / 2.0) * special::erfcx(b))
}

/// The time at which the d=1 L² energies of the simple (θ = 0) and canonical
/// (θ = 1) kernels cross.
pub fn critical_time_d1() -> Result<f64> {
    let diff = |t: f64| -> Result<f64> {
        Ok(l2_energy(&KernelSpec::simple(1), t)? - l2_energy(&KernelSpec::canonical(1), t)?)
    };
    let (mut lo, mut hi) = (1.0, 2.0);
    let (mut f_lo, f_hi) = (diff(lo)?, diff(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketNotFound { lo, hi });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let f_mid = diff(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Empirical `(min, max)` of `l2_energy(t)·t^{d/4}` over a log grid of
/// `t ∈ [1e-6, t_max]`.
pub fn energy_bound_constants(spec: &KernelSpec, t_max: f64, n_grid: usize) -> Result<(f64, f64)> {
    check_time(t_max)?;
    let n = n_grid.max(2);
    let (a, b) = (1e-6f64.ln(), t_max.ln());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let t = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        let v = l2_energy(spec, t)? * t.powf(spec.dim as f64 / 4.0);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// `C_d` in `‖K_t‖² = C_d (εt)^{-d/4}` for θ = 0.
pub fn theta_zero_constant(dim: usize) -> f64 {
    match dim {
        1 => 1.0 / (2.0 * special::gamma(0.75)),
        2 => 1.0 / (4.0 * PI.sqrt()),
        3 => special::gamma(0.75) / (PI * PI * 8f64.sqrt()),
        _ => f64::NAN,
    }
}

/// Closed form of the d=2 canonical energy, `(1 + erf(√t))/(4√(πt))`.
pub fn canonical_energy_d2(t: f64) -> f64 {
    (1.0 + special::erf(t.sqrt())) / (4.0 * (PI * t).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ft_examples() {
        let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
        let v = kernel_ft(&KernelSpec::canonical(1), 5.0, &[2f64.sqrt()]).unwrap();
        assert!(rel(v, inv_sqrt_2pi) < 1e-15);
        let v = kernel_ft(&KernelSpec::canonical(1), 1e-300, &[17.0]).unwrap();
        assert!(rel(v, inv_sqrt_2pi) < 1e-12);
        let v = kernel_ft(&KernelSpec::canonical(2), 1.0, &[0.0, 0.0]).unwrap();
        assert!(rel(v, 0.096_532_352_630_053_91) < 1e-14);
    }

    #[test]
    fn ft_rejects_bad_input() {
        assert!(kernel_ft(&KernelSpec::canonical(1), 0.0, &[0.0]).is_err());
        assert!(kernel_ft(&KernelSpec::canonical(1), -1.0, &[0.0]).is_err());
        assert!(kernel_ft(&KernelSpec::canonical(2), 1.0, &[0.0]).is_err());
        assert!(KernelSpec::new(0.0, 1.0, 1).is_err());
        assert!(KernelSpec::new(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn value_at_origin_simple_kernel() {
        // (1/π)∫_0^∞ e^{−r⁴/8} dr = Γ(5/4)·8^{1/4}/π.
        let v = kernel_value(&KernelSpec::simple(1), 1.0, &[0.0]).unwrap();
        assert!(rel(v, 0.485_225_602_283_038_27) < 1e-12, "{v}");
    }

    #[test]
    fn value_matches_high_precision_cosine_transform() {
        let cases = [
            (KernelSpec::canonical(1), 1.0, 0.5, 0.449_659_528_208_393_6),
            (KernelSpec::simple(1), 1.0, 1.0, 0.290_093_431_708_841_5),
            (KernelSpec::canonical(1), 2.0, 0.3, 0.411_594_130_521_802_8),
        ];
        for (spec, t, x, want) in cases {
            let v = kernel_value(&spec, t, &[x]).unwrap();
            assert!(rel(v, want) < 1e-11, "{v} vs {want}");
        }
    }

    #[test]
    fn gaussian_average_agrees_with_fourier_route() {
        let cases = [
            (KernelSpec::canonical(1), 1.0, 0.5),
            (KernelSpec::simple(1), 1.0, 1.0),
            (KernelSpec::canonical(1), 2.0, 0.3),
        ];
        for (spec, t, x) in cases {
            let avg = kernel_gaussian_average(&spec, t, x).unwrap();
            let val = kernel_value(&spec, t, &[x]).unwrap();
            assert!((avg.re - val).abs() < 1e-6, "{} vs {val}", avg.re);
            assert!(avg.im.abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_average_is_real_at_origin() {
        let avg = kernel_gaussian_average(&KernelSpec::canonical(1), 1.0, 0.0).unwrap();
        assert!(avg.im.abs() < 1e-8);
        let val = kernel_value(&KernelSpec::canonical(1), 1.0, &[0.0]).unwrap();
        assert!((avg.re - val).abs() < 1e-6);
    }

    #[test]
    fn gaussian_average_rejects_higher_dimensions() {
        assert!(kernel_gaussian_average(&KernelSpec::canonical(2), 1.0, 0.1).is_err());
    }

    #[test]
    fn energy_examples() {
        let v = l2_energy(&KernelSpec::simple(2), 4.0).unwrap();
        assert!(rel(v, 1.0 / (8.0 * PI.sqrt())) < 1e-12);
        let v = l2_energy(&KernelSpec::canonical(2), 1.0).unwrap();
        assert!(rel(v, 0.259_908_148_244_354_98) < 1e-12);
        let v = l2_energy(&KernelSpec::simple(1), 1.0).unwrap();
        assert!(rel(v, 0.408_024_469_549_131_5) < 1e-12);
    }

    #[test]
    fn energy_is_kernel_at_origin_at_double_time() {
        for d in 1..=3 {
            let spec = KernelSpec::canonical(d);
            let e = l2_energy(&spec, 0.7).unwrap();
            let k = kernel_value(&spec, 1.4, &vec![0.0; d]).unwrap();
            assert!(rel(e, k) < 1e-11);
        }
    }

    #[test]
    fn time_integrated_energy_examples() {
        let v = l2_energy_time_integrated(&KernelSpec::simple(1), 1.0).unwrap();
        assert!(rel(v, 0.544_032_626_065_508_65) < 1e-10, "{v}");
        let v = l2_energy_time_integrated(&KernelSpec::simple(3), 1.0).unwrap();
        assert!(rel(v, 0.175_589_704_486_381_42) < 1e-10, "{v}");
        let small = l2_energy_time_integrated(&KernelSpec::canonical(1), 1e-12).unwrap();
        assert!(small < 1e-8);
    }

    #[test]
    fn time_integrated_energy_matches_direct_time_quadrature() {
        let spec = KernelSpec::canonical(1);
        let t = 0.8;
        let direct = integrate(
            |s| l2_energy(&spec, s).unwrap(),
            0.0,
            t,
            &[],
            Tolerance::new(0.0, 1e-11),
        )
        .unwrap()
        .value;
        let v = l2_energy_time_integrated(&spec, t).unwrap();
        assert!(rel(v, direct) < 1e-9, "{v} vs {direct}");
    }

    #[test]
    fn temporal_difference_edges() {
        let spec = KernelSpec::canonical(1);
        assert_eq!(temporal_difference_l2(&spec, 1.0, 1.0).unwrap(), 0.0);
        assert!(temporal_difference_l2(&spec, 1.0, 1.5).is_err());
        assert!(temporal_difference_l2(&spec, 1.0, 0.0).is_err());
    }

    #[test]
    fn temporal_difference_matches_cartesian_brute_force() {
        // Independent route: ξ on a Cartesian product with per-axis
        // compactification ξ = τ/(1 − τ²), and the time integral done
        // numerically instead of in closed form.
        let spec = KernelSpec::canonical(2);
        let (t, r) = (1.0, 0.5);
        let khat = |tau: f64, q: f64| if tau < 0.0 { 0.0 } else { (-tau * q).exp() };
        // Integrate in σ = (jump time) − s so the boundary layer of width
        // 1/q sits at σ = 0, with breakpoints resolving it.
        let time_integral = |q: f64| {
            let layer: Vec<f64> = [1.0, 4.0, 16.0, 64.0].iter().map(|k| k / q).collect();
            let tol = Tolerance::new(1e-12 / (1.0 + q), 1e-10);
            let before = |sig: f64| {
                let d = khat(t - r + sig, q) - khat(sig, q);
                d * d
            };
            let after = |sig: f64| khat(sig, q) * khat(sig, q);
            integrate(before, 0.0, r, &layer, tol).unwrap().value
                + integrate(after, 0.0, t - r, &layer, tol).unwrap().value
        };
        let map = |u: f64| (u / (1.0 - u * u), (1.0 + u * u) / ((1.0 - u * u) * (1.0 - u * u)));
        let inner = |u1: f64| {
            let (x1, j1) = map(u1);
            integrate(
                |u2| {
                    let (x2, j2) = map(u2);
                    time_integral(spec.rate(x1 * x1 + x2 * x2)) * j1 * j2
                },
                0.0,
                1.0,
                &[],
                Tolerance::new(1e-12, 1e-10),
            )
            .unwrap()
            .value
        };
        let quarter = integrate(inner, 0.0, 1.0, &[], Tolerance::new(1e-12, 1e-10))
            .unwrap()
            .value;
        let brute = 4.0 * quarter / (4.0 * PI * PI);
        let v = temporal_difference_l2(&spec, t, r).unwrap();
        assert!((v - brute).abs() < 1e-6, "{v} vs {brute}");
    }

    #[test]
    fn spatial_difference_zero_shift() {
        let spec = KernelSpec::canonical(2);
        assert_eq!(spatial_difference_l2(&spec, 1.0, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn spatial_difference_matches_cosine_oracle_in_d1() {
        // Oracle: full time-integrated energy minus the cross term, the cross
        // term integrated on a long range by plain adaptive quadrature.
        let spec = KernelSpec::canonical(1);
        let (t, z) = (1.0, 0.7);
        let cross = integrate(
            |r| 0.5 * relax(2.0 * t, spec.rate(r * r)) * (z * r).cos(),
            0.0,
            4000.0,
            &(1..4000).map(|k| k as f64).collect::<Vec<_>>(),
            Tolerance::new(1e-15, 1e-13),
        )
        .unwrap()
        .value;
        let full = l2_energy_time_integrated(&spec, t).unwrap();
        // Truncation at 4000 costs at most ∫_{4000}^∞ 4/r⁴ ≈ 2e-11.
        let oracle = 2.0 * (full - cross / PI);
        let v = spatial_difference_l2(&spec, t, &[z]).unwrap();
        assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
    }

    #[test]
    fn btbm_examples() {
        let inv = 1.0 / (2.0 * PI).sqrt();
        assert!(rel(btbm_ft(2.0, &[0.0], 1).unwrap(), inv) < 1e-15);
        assert!(rel(btbm_ft(1e-300, &[3.0], 1).unwrap(), inv) < 1e-12);
        let v = btbm_ft(2.0, &[1.0], 1).unwrap();
        assert!(rel(v, 0.245_624_909_933_468_83) < 1e-14);
        // Huge t|ξ|⁴ must stay finite and positive.
        let v = btbm_ft(1e6, &[30.0, 0.0, 0.0], 3).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn critical_time_and_sides() {
        let tc = critical_time_d1().unwrap();
        assert!((tc - 1.506_185_623_569_837_6).abs() < 1e-8, "{tc}");
        let e = |s: &KernelSpec, t: f64| l2_energy(s, t).unwrap();
        assert!(e(&KernelSpec::simple(1), 1.0) < e(&KernelSpec::canonical(1), 1.0));
        assert!(e(&KernelSpec::simple(1), 2.0) >= e(&KernelSpec::canonical(1), 2.0));
    }

    #[test]
    fn canonical_d3_energy_bounded_below_by_theta_zero_constant() {
        let (lo, hi) = energy_bound_constants(&KernelSpec::canonical(3), 10.0, 40).unwrap();
        assert!(lo >= theta_zero_constant(3) * (1.0 - 1e-12));
        assert!(hi.is_finite() && hi > lo);
    }
}
