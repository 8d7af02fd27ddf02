//! Special functions used by the kernel formulas.
//!
//! `erf`, `erfc`, `gamma` and `j0` come from the pure-Rust `libm` port so the
//! results are identical on every platform. `erfcx` is built on top of them.

use std::f64::consts::PI;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Bessel function of the first kind, order zero.
pub fn j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x ≥ 0`.
///
/// Below 4 the product is formed directly; above it a Laplace continued
/// fraction is used, which never overflows.
pub fn erfcx(x: f64) -> f64 {
    assert!(x >= 0.0 || x.is_nan(), "erfcx is only implemented for x >= 0");
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 4.0 {
        return libm::exp(x * x) * libm::erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    let mut k = x;
    for n in (1..=40).rev() {
        k = x + (n as f64 * 0.5) / k;
    }
    1.0 / (PI.sqrt() * k)
}

/// `1 − J₀(y)` without cancellation for small `y`.
pub fn one_minus_j0(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let y2 = y * y;
        y2 * (0.25 - y2 * (1.0 / 64.0 - y2 * (1.0 / 2304.0 - y2 / 147_456.0)))
    } else {
        1.0 - j0(y)
    }
}

/// `1 − sin(y)/y` without cancellation for small `y`.
pub fn one_minus_sinc(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let y2 = y * y;
        y2 * (1.0 / 6.0 - y2 * (1.0 / 120.0 - y2 * (1.0 / 5040.0 - y2 / 362_880.0)))
    } else {
        1.0 - libm::sin(y) / y
    }
}

/// `sin(y)/y` with the removable singularity filled in.
pub fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y * y / 6.0
    } else {
        libm::sin(y) / y
    }
}

/// `1 − cos(y)` written as `2 sin²(y/2)`.
pub fn one_minus_cos(y: f64) -> f64 {
    let s = libm::sin(0.5 * y);
    2.0 * s * s
}
