//! Adaptive Gauss–Kronrod quadrature (10/21-point pair) with deterministic
//! refinement order, plus a few scalar root finders.

use num_complex::Complex64;
use rayon::prelude::*;
use std::ops::{Add, Mul, Sub};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_059,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_114,
    0.562_757_134_668_604_683_339_000_099_272,
    0.433_395_394_129_247_190_799_265_943_165,
    0.294_392_862_701_460_198_131_126_603_103,
    0.148_874_338_981_631_210_884_826_001_129,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_244,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_325,
    0.123_491_976_262_065_851_077_600_525_532,
    0.134_709_217_311_473_325_928_054_001_771,
    0.142_775_938_577_060_080_797_094_273_138,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_389,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_657,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Values that can be integrated: scalars, complex numbers, small vectors.
pub trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Evaluate the 21 nodes of a panel on the rayon pool.
    pub parallel: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_intervals: 4000,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub converged: bool,
    /// Final panels, sorted by left endpoint.
    pub panels: Vec<(f64, f64)>,
}

#[derive(Clone, Copy)]
struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn eval_nodes<T, F>(f: &F, a: f64, b: f64, parallel: bool) -> [T; 21]
where
    T: QuadValue,
    F: Fn(f64) -> T + Sync,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let xs: [f64; 21] = std::array::from_fn(|i| {
        if i < 10 {
            c - h * XGK[i]
        } else if i == 10 {
            c
        } else {
            c + h * XGK[20 - i]
        }
    });
    if parallel {
        let v: Vec<T> = xs.par_iter().map(|&x| f(x)).collect();
        std::array::from_fn(|i| v[i])
    } else {
        std::array::from_fn(|i| f(xs[i]))
    }
}

fn panel<T, F>(f: &F, a: f64, b: f64, parallel: bool) -> Panel<T>
where
    T: QuadValue,
    F: Fn(f64) -> T + Sync,
{
    let fv = eval_nodes(f, a, b, parallel);
    let h = 0.5 * (b - a);
    let mut k = fv[10] * WGK[10];
    let mut g = T::zero();
    for j in 0..10 {
        let pair = fv[j] + fv[20 - j];
        k = k + pair * WGK[j];
        if j % 2 == 1 {
            g = g + pair * WG[j / 2];
        }
    }
    let mean = k * 0.5;
    let mut asc = (fv[10] - mean).magnitude() * WGK[10];
    for j in 0..10 {
        asc += WGK[j] * ((fv[j] - mean).magnitude() + (fv[20 - j] - mean).magnitude());
    }
    let value = k * h;
    let diff = (k - g).magnitude() * h.abs();
    let resasc = asc * h.abs();
    let mut error = diff;
    if resasc > 0.0 && diff > 0.0 {
        error = resasc * (200.0 * diff / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * value.magnitude();
    Panel {
        a,
        b,
        value,
        error: error.max(roundoff),
    }
}

/// Adaptive integration over `[a, b]` with interior seams at `breaks`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> QuadResult<T>
where
    T: QuadValue,
    F: Fn(f64) -> T + Sync,
{
    let mut pts: Vec<f64> = vec![a];
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if a > b {
        inner.reverse();
    }
    pts.extend(inner);
    pts.push(b);
    pts.dedup();

    let mut panels: Vec<Panel<T>> = pts
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| panel(&f, w[0], w[1], opts.parallel))
        .collect();
    if panels.is_empty() {
        return QuadResult {
            value: T::zero(),
            error: 0.0,
            converged: true,
            panels: vec![],
        };
    }
    let mut frozen = vec![false; panels.len()];
    loop {
        let total = panels.iter().fold(T::zero(), |s, p| s + p.value);
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        let done = err <= target;
        // largest-error panel that can still be split; ties resolved by position
        let mut pick: Option<usize> = None;
        for (i, p) in panels.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            match pick {
                Some(j) if panels[j].error >= p.error => {}
                _ => pick = Some(i),
            }
        }
        if done || pick.is_none() || panels.len() >= opts.max_intervals {
            let mut out: Vec<(f64, f64)> = panels.iter().map(|p| (p.a, p.b)).collect();
            out.sort_by(|x, y| x.0.min(x.1).partial_cmp(&y.0.min(y.1)).unwrap());
            return QuadResult {
                value: total,
                error: err,
                converged: done,
                panels: out,
            };
        }
        let i = pick.unwrap();
        let p = panels[i];
        let m = 0.5 * (p.a + p.b);
        let tiny = 64.0 * f64::EPSILON * p.a.abs().max(p.b.abs()).max(1e-300);
        if (p.b - p.a).abs() < tiny || m == p.a || m == p.b {
            frozen[i] = true;
            continue;
        }
        let left = panel(&f, p.a, m, opts.parallel);
        let right = panel(&f, m, p.b, opts.parallel);
        panels[i] = left;
        panels.insert(i + 1, right);
        frozen.insert(i + 1, false);
    }
}

/// Kronrod nodes and weights of one panel.
pub fn kronrod_rule(a: f64, b: f64) -> [(f64, f64); 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    std::array::from_fn(|i| {
        if i < 10 {
            (c - h * XGK[i], h * WGK[i])
        } else if i == 10 {
            (c, h * WGK[10])
        } else {
            (c + h * XGK[20 - i], h * WGK[20 - i])
        }
    })
}

/// Brent's method on a bracketing interval. Returns `None` without a sign change.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &[], &QuadOptions::default());
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], &QuadOptions::default());
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn complex_lorentzian() {
        let opts = QuadOptions::default();
        let r = integrate(
            |x: f64| Complex64::new(1.0, 0.0) / Complex64::new(-x, 0.01),
            -1.0,
            1.0,
            &[0.0],
            &opts,
        );
        let exact = Complex64::new(0.0, -2.0 * (1.0f64 / 0.01).atan());
        assert!((r.value - exact).norm() < 1e-9, "{}", r.value);
    }

    #[test]
    fn reversed_limits() {
        let o = QuadOptions::default();
        let f = integrate(|x: f64| x.exp(), 0.0, 1.0, &[], &o).value;
        let g = integrate(|x: f64| x.exp(), 1.0, 0.0, &[], &o).value;
        assert!((f + g).abs() < 1e-14);
    }

    #[test]
    fn brent_finds_root() {
        let r = brent(|x| x.cos() - x, 0.0, 1.0, 1e-15).unwrap();
        assert!((r.cos() - r).abs() < 1e-15);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn kronrod_weights_sum() {
        let s: f64 = kronrod_rule(-1.0, 1.0).iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
