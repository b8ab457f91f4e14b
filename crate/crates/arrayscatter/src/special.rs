//! Polylogarithms of low integer order and error-function helpers.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const ZETA2: f64 = PI * PI / 6.0;
pub const ZETA3: f64 = 1.202_056_903_159_594_285_399_738_161_511_449_990_764_986_292;

const SERIES_TERMS: usize = 40;

/// ζ(2m) for m = 1..=SERIES_TERMS.
fn zeta_even() -> &'static [f64; SERIES_TERMS + 1] {
    static TABLE: OnceLock<[f64; SERIES_TERMS + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; SERIES_TERMS + 1];
        let p2 = PI * PI;
        t[1] = p2 / 6.0;
        t[2] = p2 * p2 / 90.0;
        t[3] = p2 * p2 * p2 / 945.0;
        t[4] = p2.powi(4) / 9450.0;
        t[5] = p2.powi(5) / 93555.0;
        for (m, v) in t.iter_mut().enumerate().skip(6) {
            // terms beyond j = 40 are below 40^-12
            *v = (1..=40).rev().map(|j| (j as f64).powi(-2 * m as i32)).sum();
        }
        t
    })
}

fn harmonic(n: u32) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Li_s(z) for s ∈ {1, 2, 3} and |z| ≤ 1.
///
/// Uses the power series for |z| ≤ 1/2 and the expansion in μ = ln z otherwise:
/// Li_s(e^μ) = Σ_{k≠s−1} ζ(s−k) μ^k/k! + μ^{s−1}/(s−1)! [H_{s−1} − ln(−μ)].
/// Returns an infinite value at the pole z = 1 for s = 1.
pub fn polylog(s: u32, z: Complex64) -> Complex64 {
    assert!((1..=3).contains(&s), "polylog order {s} not supported");
    if s == 1 {
        return -(Complex64::new(1.0, 0.0) - z).ln();
    }
    let r = z.norm();
    if r <= 0.5 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut zk = z;
        for k in 1..200 {
            let term = zk / (k as f64).powi(s as i32);
            sum += term;
            if term.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
            zk *= z;
        }
        return sum;
    }
    let mu = z.ln();
    polylog_exp(s, mu)
}

/// Li_s(e^{iθ}) for real θ, the case needed by lattice sums.
pub fn polylog_unit(s: u32, theta: f64) -> Complex64 {
    let t = wrap_angle(theta);
    if s == 1 {
        if t == 0.0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        // −ln(1 − e^{it}) = −ln|2 sin(t/2)| + i(π − t)/2 for t ∈ (0, 2π)
        let re = -(2.0 * (0.5 * t).sin()).abs().ln();
        let im = if t > 0.0 { 0.5 * (PI - t) } else { -0.5 * (PI + t) };
        return Complex64::new(re, im);
    }
    polylog_exp(s, Complex64::new(0.0, t))
}

/// Maps θ into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * (theta / two_pi).round();
    if t <= -PI {
        t += two_pi;
    }
    if t > PI {
        t -= two_pi;
    }
    t
}

fn polylog_exp(s: u32, mu: Complex64) -> Complex64 {
    let s_i = s as i32;
    if mu.norm() == 0.0 {
        return Complex64::new(if s == 2 { ZETA2 } else { ZETA3 }, 0.0);
    }
    let zeta_pos = |n: u32| match n {
        2 => ZETA2,
        3 => ZETA3,
        _ => unreachable!(),
    };
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mu_k = Complex64::new(1.0, 0.0);
    // k = 0 ..= s−2: ζ(s−k) μ^k / k!
    for k in 0..(s - 1) {
        sum += zeta_pos(s - k) * mu_k / factorial(k);
        mu_k *= mu;
    }
    // k = s−1: logarithmic term
    let log_term = Complex64::new(harmonic(s - 1), 0.0) - (-mu).ln();
    sum += mu_k / factorial(s - 1) * log_term;
    mu_k *= mu;
    // k = s: ζ(0) = −1/2
    sum += -0.5 * mu_k / factorial(s);
    // k = s−1+2m: ζ(1−2m) μ^k/k!, ζ(1−2m) = (−1)^m 2 (2m−1)! ζ(2m)/(2π)^{2m}
    let zeta = zeta_even();
    let mu2 = mu * mu;
    let inv_two_pi_sq = 1.0 / (4.0 * PI * PI);
    let mut mu_pow = mu_k / mu * mu2; // μ^{s+1}
    let mut scale = 1.0;
    for m in 1..=SERIES_TERMS {
        scale *= -inv_two_pi_sq;
        // (2m−1)!/(s−1+2m)! = 1/[(2m)(2m+1)...(2m+s−1)]
        let mut denom = 1.0;
        for j in 0..s_i {
            denom *= (2 * m as i32 + j) as f64;
        }
        let term = mu_pow * (2.0 * zeta[m] * scale / denom);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
        mu_pow *= mu2;
    }
    sum
}

/// Complementary error function of a complex argument.
pub fn erfc_complex(z: Complex64) -> Complex64 {
    errorfunctions::ComplexErrorFunctions::erfc(z)
}

pub fn erfc(x: f64) -> f64 {
    errorfunctions::RealErrorFunctions::erfc(x)
}

pub fn erfi(x: f64) -> f64 {
    errorfunctions::RealErrorFunctions::erfi(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn special_values() {
        assert!((polylog(2, c(1.0, 0.0)).re - ZETA2).abs() < 1e-15);
        assert!((polylog(2, c(-1.0, 0.0)).re + ZETA2 / 2.0).abs() < 1e-14);
        assert!((polylog(3, c(-1.0, 0.0)).re + 0.75 * ZETA3).abs() < 1e-14);
        let half = polylog(2, c(0.5, 0.0)).re;
        let exact = PI * PI / 12.0 - 0.5 * 2f64.ln().powi(2);
        assert!((half - exact).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_polynomial_parts() {
        // Re Li2(e^{iθ}) = π²/6 − θ(2π−θ)/4, Im Li3(e^{iθ}) = (π²θ − 3πθ²/2 + θ³/2)/6 for θ∈[0,2π]
        for i in 1..40 {
            let t = 0.157 * i as f64;
            let l2 = polylog_unit(2, t);
            let l3 = polylog_unit(3, t);
            assert!((l2.re - (ZETA2 - t * (2.0 * PI - t) / 4.0)).abs() < 1e-14, "{t}");
            let im3 = (PI * PI * t - 1.5 * PI * t * t + 0.5 * t * t * t) / 6.0;
            assert!((l3.im - im3).abs() < 1e-14, "{t}");
        }
    }

    #[test]
    fn series_regions_agree() {
        // |z| slightly above 1/2 uses the log expansion; compare to direct summation
        for &(r, a) in &[(0.51, 0.3), (0.7, 2.9), (0.9, -1.2), (0.99, 3.1)] {
            let z = Complex64::from_polar(r, a);
            for s in 2..=3 {
                let mut direct = c(0.0, 0.0);
                let mut zk = z;
                for k in 1..20000 {
                    direct += zk / (k as f64).powi(s as i32);
                    zk *= z;
                }
                assert!((polylog(s, z) - direct).norm() < 1e-13, "s={s} z={z}");
            }
        }
    }

    #[test]
    fn unit_circle_matches_general() {
        for i in 0..50 {
            let t = -3.1 + 0.124 * i as f64;
            for s in 1..=3 {
                if s == 1 && t.abs() < 1e-9 {
                    continue;
                }
                let a = polylog_unit(s, t);
                let b = polylog(s, Complex64::from_polar(1.0, t));
                assert!((a - b).norm() < 1e-13, "s={s} t={t} {a} {b}");
            }
        }
    }

    #[test]
    fn derivative_relation() {
        // d/dθ Li_s(e^{iθ}) = i Li_{s−1}(e^{iθ})
        let t = 1.3;
        let h = 1e-5;
        for s in 2..=3 {
            let d = (polylog_unit(s, t + h) - polylog_unit(s, t - h)) / (2.0 * h);
            let e = c(0.0, 1.0) * polylog_unit(s - 1, t);
            assert!((d - e).norm() < 1e-9);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn erf_helpers() {
        assert!((erfc(2.0) - 0.004_677_734_981_047_266).abs() < 1e-16);
        assert!((erfi(0.3) - 0.348_949_338_758_936).abs() < 1e-14);
        let z = erfc_complex(c(1.77, 0.44));
        assert!((z - c(-0.002_712_368_391_315_24, -0.014_433_503_498_434_6)).norm() < 1e-15);
    }
}
