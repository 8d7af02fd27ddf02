//! Adaptive Gauss–Kronrod quadrature, a semi-infinite transform and Wynn's
//! epsilon algorithm for oscillatory tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_521_610,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Relative accuracy below which the qk21 error estimate is pure roundoff.
const ROUNDOFF_FLOOR: f64 = 200.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_segments: 2000,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(0.0, 1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// One 21-point Gauss–Kronrod panel on `[a, b]`.
pub fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let hl = half.abs();
    let value = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * hl, res_asc * hl);
    (value, err)
}

/// Globally adaptive integration over `[a, b]` with optional interior
/// breakpoints (values outside the open interval are ignored).
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_err: 0.0,
            evals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi && p.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in edges.windows(2) {
        let (value, err) = qk21(&mut f, w[0], w[1]);
        evals += 21;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    loop {
        let (value, err) = totals(&heap);
        if err <= tol.target(value) || err <= ROUNDOFF_FLOOR * value.abs() {
            return Ok(Integral {
                value: sign * value,
                abs_err: err,
                evals,
            });
        }
        let worst = *heap.peek().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        let too_narrow = !(mid > worst.a && mid < worst.b)
            || (worst.b - worst.a) <= 1e-14 * worst.a.abs().max(worst.b.abs()).max(1e-300);
        if heap.len() >= tol.max_segments || too_narrow {
            return Err(Error::Quadrature {
                value: sign * value,
                achieved: err,
                requested: tol.target(value),
            });
        }
        heap.pop();
        for (sa, sb) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = qk21(&mut f, sa, sb);
            evals += 21;
            heap.push(Segment {
                a: sa,
                b: sb,
                value,
                err,
            });
        }
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let mut segs: Vec<&Segment> = heap.iter().collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = segs.iter().map(|s| s.value).sum();
    let err = segs.iter().map(|s| s.err).sum();
    (value, err)
}

/// Integral over `[a, ∞)` through the map `x = a + (1 − τ)/τ`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    tol: Tolerance,
) -> Result<Integral> {
    let g = |tau: f64| {
        let x = a + (1.0 - tau) / tau;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (tau * tau)
        }
    };
    integrate(g, 0.0, 1.0, &[], tol)
}

/// Wynn's epsilon extrapolation of a sequence of partial sums.
///
/// Returns the extrapolated limit and the difference between the last two
/// even-column estimates as an error proxy.
pub fn wynn_epsilon(partial: &[f64]) -> (f64, f64) {
    let n = partial.len();
    if n < 3 {
        let last = *partial.last().unwrap_or(&0.0);
        let prev = if n >= 2 { partial[n - 2] } else { 0.0 };
        return (last, (last - prev).abs());
    }
    // e[k] holds column k of the epsilon table, built diagonal by diagonal.
    let mut prev_col: Vec<f64> = vec![0.0; n + 1];
    let mut cur_col: Vec<f64> = partial.to_vec();
    let mut best = *partial.last().unwrap();
    let mut best_err = (partial[n - 1] - partial[n - 2]).abs();
    let mut col = 0;
    while cur_col.len() > 1 {
        let mut next = Vec::with_capacity(cur_col.len() - 1);
        for i in 0..cur_col.len() - 1 {
            let d = cur_col[i + 1] - cur_col[i];
            let base = prev_col.get(i + 1).copied().unwrap_or(0.0);
            if d == 0.0 || !d.is_finite() {
                next.push(f64::INFINITY);
            } else {
                next.push(base + 1.0 / d);
            }
        }
        col += 1;
        prev_col = cur_col;
        cur_col = next;
        if col % 2 == 0 && cur_col.len() >= 2 {
            let m = cur_col.len();
            let (x, y) = (cur_col[m - 1], cur_col[m - 2]);
            if x.is_finite() && y.is_finite() {
                let e = (x - y).abs();
                if e <= best_err {
                    best = x;
                    best_err = e;
                }
            }
        }
        if cur_col.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    (best, best_err)
}

/// Sums `Σ_k term(k)` for an alternating-like series of panel integrals,
/// accelerating the partial sums with Wynn's epsilon until two successive
/// extrapolations agree to `tol`.
pub fn accelerated_sum<F: FnMut(usize) -> Result<f64>>(
    mut term: F,
    tol: Tolerance,
    max_terms: usize,
) -> Result<Integral> {
    let mut partial: Vec<f64> = Vec::new();
    let mut s = 0.0;
    let mut last_est = f64::NAN;
    let mut agree = 0;
    for k in 0..max_terms {
        s += term(k)?;
        partial.push(s);
        if partial.len() < 6 {
            continue;
        }
        let window = &partial[partial.len().saturating_sub(40)..];
        let (est, err) = wynn_epsilon(window);
        let target = tol.target(est);
        if (est - last_est).abs() <= target && err <= 10.0 * target {
            agree += 1;
            if agree >= 2 {
                return Ok(Integral {
                    value: est,
                    abs_err: (est - last_est).abs().max(err),
                    evals: k + 1,
                });
            }
        } else {
            agree = 0;
        }
        last_est = est;
    }
    Err(Error::Oscillatory {
        terms: max_terms,
        partial: partial[partial.len().saturating_sub(5)..].to_vec(),
    })
}
