//! Brute-force validators: direct lattice sums, Riemann-sum propagators, sampled
//! densities of states and the finite-cutoff Lorentzian convolution identity.
//!
//! Every oracle is deterministic: sums run in a fixed order with compensated
//! accumulation and sampling uses seeded ChaCha streams.

use crate::error::{Error, Result};
use crate::lattice::{polarization_vector, ArrayConfig, Classification, Dimension, Dispersion, LatticeMomentum, Polarization, K0};
use crate::propagator::{PairPropagator, Side};
use crate::quad::{integrate, QuadOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub quantity: String,
    pub reference: Complex64,
    pub oracle: Complex64,
    /// |reference − oracle|.
    pub discrepancy: f64,
    /// discrepancy/|reference|.
    pub relative: f64,
    pub parameters: BTreeMap<String, f64>,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, reference: Complex64, oracle: Complex64) -> Self {
        let discrepancy = (reference - oracle).norm();
        OracleReport {
            quantity: quantity.into(),
            reference,
            oracle,
            discrepancy,
            relative: discrepancy / reference.norm(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.relative <= rel_tol
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: [f64; 2],
    carry: [f64; 2],
}

impl Compensated {
    fn add(&mut self, z: Complex64) {
        for (k, v) in [z.re, z.im].into_iter().enumerate() {
            let t = self.sum[k] + v;
            if self.sum[k].abs() >= v.abs() {
                self.carry[k] += (self.sum[k] - t) + v;
            } else {
                self.carry[k] += (v - t) + self.sum[k];
            }
            self.sum[k] = t;
        }
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.sum[0] + self.carry[0], self.sum[1] + self.carry[1])
    }
}

/// ê*·G(R)·ê·4πk² r³ e^{−ikr} as (isotropic, projected) polynomial weights in kr.
fn dipole_term(r: f64, ee: f64, er2: f64) -> Complex64 {
    let kr = K0 * r;
    let iso = Complex64::new(kr * kr - 1.0, kr) * ee;
    let proj = Complex64::new(3.0 - kr * kr, -3.0 * kr) * er2;
    Complex64::from_polar(1.0, kr) * (iso + proj) / (4.0 * PI * K0 * K0 * r * r * r)
}

/// |ê·R̂|² along the chain axis.
fn chain_projection(pol: Polarization) -> f64 {
    match pol {
        Polarization::ParallelToArray => 1.0,
        _ => 0.0,
    }
}

fn check_sites(n: usize) -> Result<()> {
    if n < 1000 {
        return Err(Error::InvalidInput(format!("direct sums need at least 10³ sites, got {n}")));
    }
    Ok(())
}

/// Truncated chain sum over 1 ≤ |n| ≤ n_max without tail correction.
fn chain_partial(cfg: &ArrayConfig, p: f64, n_max: usize) -> Complex64 {
    let d = cfg.spacing;
    let er2 = chain_projection(cfg.polarization);
    let mut acc = Compensated::default();
    // largest terms last would be ideal; reverse order keeps the small tail exact
    for n in (1..=n_max).rev() {
        let r = n as f64 * d;
        acc.add(dipole_term(r, 1.0, er2) * (2.0 * (p * r).cos()));
    }
    Complex64::new(0.0, -0.5) - 3.0 * PI / K0 * acc.value()
}

/// Σ_{n>N} zⁿ(c1/n + c2/n² + c3/n³) by summation by parts, five difference orders.
fn chain_tail(z: Complex64, c: [Complex64; 3], n: usize) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if (one - z).norm() < 1e-2 {
        return Complex64::new(0.0, 0.0);
    }
    let m = (n + 1) as f64;
    let f = |x: f64| c[0] / x + c[1] / (x * x) + c[2] / (x * x * x);
    let mut diffs: Vec<Complex64> = (0..6).map(|j| f(m + j as f64)).collect();
    let w = z / (one - z);
    let mut out = Complex64::new(0.0, 0.0);
    let mut wj = one;
    for _ in 0..5 {
        out += wj * diffs[0];
        for i in 0..diffs.len() - 1 {
            diffs[i] = diffs[i + 1] - diffs[i];
        }
        diffs.pop();
        wj *= w;
    }
    z.powf(m) / (one - z) * out
}

/// ε(p) from a truncated real-space dipole sum over N sites.
///
/// Chains sum |n| ≤ N/2 and add an analytic tail. Square lattices sum a
/// (2M+1)² block with a Gaussian window of width L and extrapolate L → ∞ from L
/// and L/√2, with M = √N/2 and L = M·d/6.
/// The configuration is not range-checked, so widely spaced arrays can be summed.
pub fn dispersion_direct_sum(cfg: &ArrayConfig, p: LatticeMomentum, n_sites: usize) -> Result<Complex64> {
    check_sites(n_sites)?;
    if !(cfg.spacing > 0.0) {
        return Err(Error::InvalidConfig("spacing must be positive".into()));
    }
    match cfg.dimension {
        Dimension::OneD => {
            let n = n_sites / 2;
            let d = cfg.spacing;
            let kd = K0 * d;
            let er2 = chain_projection(cfg.polarization);
            // term(n) = e^{iknd}/(4πk²d³)·[A/n + B/n² + C/n³]
            let a = Complex64::new((1.0 - er2) * kd * kd, 0.0);
            let b = Complex64::new(0.0, (1.0 - 3.0 * er2) * kd);
            let c = Complex64::new(3.0 * er2 - 1.0, 0.0);
            let scale = 1.0 / (4.0 * PI * K0 * K0 * d.powi(3));
            let coef = [a * scale, b * scale, c * scale];
            let px = p.x;
            let tail = chain_tail(Complex64::from_polar(1.0, (K0 + px) * d), coef, n)
                + chain_tail(Complex64::from_polar(1.0, (K0 - px) * d), coef, n);
            Ok(chain_partial(cfg, px, n) - 3.0 * PI / K0 * tail)
        }
        Dimension::TwoDSquare => {
            let m = ((n_sites as f64).sqrt() / 2.0).floor() as i64;
            let l = m as f64 * cfg.spacing / 6.0;
            let f1 = windowed_square_sum(cfg, p, m, l);
            let f2 = windowed_square_sum(cfg, p, m, l / 2f64.sqrt());
            Ok(2.0 * f1 - f2)
        }
    }
}

/// Chain sum without the tail estimate, for convergence ladders.
pub fn dispersion_truncated_sum(cfg: &ArrayConfig, p: LatticeMomentum, n_sites: usize) -> Result<Complex64> {
    check_sites(n_sites)?;
    if cfg.dimension != Dimension::OneD {
        return Err(Error::InvalidInput("truncated sums are defined for chains".into()));
    }
    Ok(chain_partial(cfg, p.x, n_sites / 2))
}

fn windowed_square_sum(cfg: &ArrayConfig, p: LatticeMomentum, m: i64, width: f64) -> Complex64 {
    let d = cfg.spacing;
    let e = polarization_vector(cfg.polarization);
    let ee: f64 = e.iter().map(|v| v.norm_sqr()).sum();
    let rows: Vec<Compensated> = (-m..=m)
        .into_par_iter()
        .map(|i| {
            let mut acc = Compensated::default();
            for j in -m..=m {
                if i == 0 && j == 0 {
                    continue;
                }
                let (rx, ry) = (i as f64 * d, j as f64 * d);
                let r = rx.hypot(ry);
                let er2 = (e[0] * (rx / r) + e[1] * (ry / r)).norm_sqr();
                let window = (-(r / width).powi(2)).exp();
                if window < 1e-300 {
                    continue;
                }
                acc.add(dipole_term(r, ee, er2) * Complex64::from_polar(window, p.x * rx + p.y * ry));
            }
            acc
        })
        .collect();
    let mut total = Compensated::default();
    for r in &rows {
        total.add(r.value());
    }
    Complex64::new(0.0, -0.5) - 3.0 * PI / K0 * total.value()
}

/// Closed-form versus direct-sum dispersion.
pub fn dispersion_report(disp: &Dispersion, p: LatticeMomentum, n_sites: usize) -> Result<OracleReport> {
    let reference = disp.try_epsilon(p)?;
    let oracle = dispersion_direct_sum(disp.config(), p, n_sites)?;
    Ok(OracleReport::new("epsilon", reference, oracle)
        .with("p_x", p.x)
        .with("p_y", p.y)
        .with("sites", n_sites as f64))
}

/// Midpoint Riemann sum of ½∫_BZ dp 1/(ω − ε(p) − ε(P − p)) on a uniform grid
/// (grid points per axis). Only meaningful off the real axis.
pub fn propagator_riemann(disp: &Dispersion, omega: Complex64, total: LatticeMomentum, grid: usize) -> Result<Complex64> {
    if omega.im == 0.0 {
        return Err(Error::InvalidInput("Riemann sums need Im ω ≠ 0".into()));
    }
    if grid < 2 {
        return Err(Error::InvalidInput("grid must have at least two points".into()));
    }
    let cfg = disp.config();
    let g = 2.0 * PI / cfg.spacing;
    let h = g / grid as f64;
    let node = |j: usize| -0.5 * g + (j as f64 + 0.5) * h;
    let term = |p: LatticeMomentum| 1.0 / (omega - disp.epsilon(p) - disp.epsilon(total - p));
    let rows: Vec<Compensated> = match cfg.dimension {
        Dimension::OneD => (0..grid)
            .into_par_iter()
            .map(|j| {
                let mut acc = Compensated::default();
                acc.add(term(LatticeMomentum::chain(node(j))));
                acc
            })
            .collect(),
        Dimension::TwoDSquare => (0..grid)
            .into_par_iter()
            .map(|i| {
                let mut acc = Compensated::default();
                for j in 0..grid {
                    acc.add(term(LatticeMomentum::planar(node(i), node(j))));
                }
                acc
            })
            .collect(),
    };
    let mut sum = Compensated::default();
    for r in &rows {
        sum.add(r.value());
    }
    let cell = h.powi(cfg.dimension.rank() as i32);
    let value = 0.5 * cell * sum.value();
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::LightConeSingularity { norm: K0 });
    }
    Ok(value)
}

/// Adaptive versus Riemann-sum propagator at complex ω.
pub fn propagator_report(prop: &PairPropagator, omega: Complex64, grid: usize) -> Result<OracleReport> {
    let reference = prop.evaluate(omega, Side::AboveCut)?.total_value();
    let oracle = propagator_riemann(prop.dispersion(), omega, prop.total(), grid)?;
    Ok(OracleReport::new("pair_propagator", reference, oracle)
        .with("omega_re", omega.re)
        .with("omega_im", omega.im)
        .with("grid", grid as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramOptions {
    pub samples: usize,
    pub bins: usize,
    /// Energy window; `None` takes the band extrema from a deterministic grid scan.
    pub range: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        HistogramOptions {
            samples: 10_000_000,
            bins: 200,
            range: None,
            seed: 0x5eed,
        }
    }
}

/// Sampled density of Δ⁽²⁾ over the dark-pair domain, in the propagator measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosHistogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub samples: usize,
    /// Fraction of samples that landed in D₀(P).
    pub dark_fraction: f64,
    /// Measure of D₀(P) estimated from the samples.
    pub volume: f64,
    /// Measure of dark pairs with energies outside `edges`.
    pub outside: f64,
}

impl DosHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// ∫ density dE over the binned window.
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

const CHUNK: usize = 1 << 16;

fn sample_momentum(rng: &mut ChaCha8Rng, dim: Dimension, g: f64) -> LatticeMomentum {
    let x = (rng.gen::<f64>() - 0.5) * g;
    match dim {
        Dimension::OneD => LatticeMomentum::chain(x),
        Dimension::TwoDSquare => LatticeMomentum::planar(x, (rng.gen::<f64>() - 0.5) * g),
    }
}

fn pair_energy(disp: &Dispersion, total: LatticeMomentum, p: LatticeMomentum) -> Option<f64> {
    let other = total - p;
    (disp.classify(p) == Classification::Dark && disp.classify(other) == Classification::Dark)
        .then(|| disp.delta(p) + disp.delta(other))
}

fn band_range(disp: &Dispersion, total: LatticeMomentum) -> Option<(f64, f64)> {
    let cfg = disp.config();
    let g = 2.0 * PI / cfg.spacing;
    let n = match cfg.dimension {
        Dimension::OneD => 8192,
        Dimension::TwoDSquare => 256,
    };
    let node = |j: usize| -0.5 * g + (j as f64 + 0.5) * g / n as f64;
    let pts: Vec<LatticeMomentum> = match cfg.dimension {
        Dimension::OneD => (0..n).map(|j| LatticeMomentum::chain(node(j))).collect(),
        Dimension::TwoDSquare => (0..n * n)
            .map(|k| LatticeMomentum::planar(node(k / n), node(k % n)))
            .collect(),
    };
    let energies: Vec<f64> = pts.par_iter().filter_map(|p| pair_energy(disp, total, *p)).collect();
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo < hi).then(|| {
        let pad = 0.01 * (hi - lo);
        (lo - pad, hi + pad)
    })
}

/// Histogram of Δ⁽²⁾(P, q) for q uniform in D₀(P), normalized so that Σ density·width
/// plus `outside` equals the dark-pair volume in the measure ½∫_BZ dp.
pub fn dos_histogram(disp: &Dispersion, total: LatticeMomentum, opts: &HistogramOptions) -> Result<DosHistogram> {
    if opts.samples < 1_000_000 {
        return Err(Error::InvalidInput("the histogram oracle needs at least 10⁶ samples".into()));
    }
    if opts.bins == 0 {
        return Err(Error::InvalidInput("bins must be positive".into()));
    }
    let (lo, hi) = match opts.range {
        Some(r) if r.0 < r.1 => r,
        Some(_) => return Err(Error::InvalidInput("empty histogram range".into())),
        None => band_range(disp, total).ok_or_else(|| Error::InvalidInput("no dark pairs at this momentum".into()))?,
    };
    let cfg = disp.config();
    let g = 2.0 * PI / cfg.spacing;
    let bins = opts.bins;
    let width = (hi - lo) / bins as f64;
    let chunks = opts.samples.div_ceil(CHUNK);
    let counts: Vec<(Vec<u64>, u64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(opts.samples - c * CHUNK);
            let mut hist = vec![0u64; bins];
            let (mut dark, mut outside) = (0u64, 0u64);
            for _ in 0..n {
                let p = sample_momentum(&mut rng, cfg.dimension, g);
                if let Some(e) = pair_energy(disp, total, p) {
                    dark += 1;
                    let k = ((e - lo) / width).floor();
                    if k >= 0.0 && (k as usize) < bins {
                        hist[k as usize] += 1;
                    } else {
                        outside += 1;
                    }
                }
            }
            (hist, dark, outside)
        })
        .collect();
    let mut hist = vec![0u64; bins];
    let (mut dark, mut outside) = (0u64, 0u64);
    for (h, d, o) in &counts {
        for (a, b) in hist.iter_mut().zip(h) {
            *a += b;
        }
        dark += d;
        outside += o;
    }
    let measure = 0.5 * cfg.zone_volume() / opts.samples as f64;
    Ok(DosHistogram {
        edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
        density: hist.iter().map(|&k| k as f64 * measure / width).collect(),
        samples: opts.samples,
        dark_fraction: dark as f64 / opts.samples as f64,
        volume: dark as f64 * measure,
        outside: outside as f64 * measure,
    })
}

/// (1/|bin|)∫_bin ρ₀(E) dE from the deterministic density of states.
pub fn dos_bin_average(prop: &PairPropagator, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let crit: Vec<f64> = prop
        .critical_energies()?
        .iter()
        .map(|c| c.energy)
        .filter(|e| *e > lo && *e < hi)
        .collect();
    let opts = QuadOptions {
        rel_tol,
        abs_tol: 1e-12,
        max_intervals: 400,
        ..Default::default()
    };
    let r = integrate(|e| prop.dark_pair_dos(e).unwrap_or(0.0), lo, hi, &crit, &opts);
    Ok(r.value / (hi - lo))
}

/// Worst bin of the histogram against bin-averaged ρ₀, skipping bins within
/// `exclusion` of a critical energy or the band edges.
pub fn dos_report(prop: &PairPropagator, hist: &DosHistogram, exclusion: f64) -> Result<OracleReport> {
    let crit: Vec<f64> = prop.critical_energies()?.iter().map(|c| c.energy).collect();
    let mut worst: Option<OracleReport> = None;
    let mut compared = 0usize;
    for (k, w) in hist.edges.windows(2).enumerate() {
        let near = crit.iter().any(|c| *c > w[0] - exclusion && *c < w[1] + exclusion);
        if near || hist.density[k] == 0.0 {
            continue;
        }
        let reference = dos_bin_average(prop, w[0], w[1], 1e-8)?;
        let r = OracleReport::new("dark_pair_dos", reference.into(), hist.density[k].into())
            .with("bin_lo", w[0])
            .with("bin_hi", w[1])
            .with("samples", hist.samples as f64);
        compared += 1;
        if worst.as_ref().is_none_or(|b| r.relative > b.relative) {
            worst = Some(r);
        }
    }
    worst
        .map(|r| r.with("bins_compared", compared as f64))
        .ok_or_else(|| Error::InvalidInput("no histogram bin away from critical energies".into()))
}

/// Finite-cutoff check of π^{1−β}∫∏ℓ_j(E_j) δ(E − ΣE_j) = −Im 1/(E + i0 − Σε(p_j)) with
/// ℓ_j(x) = −Im 1/(x + i0 − ε(p_j)) and photon energies restricted to [−cutoff, cutoff].
pub fn appendix_c_check(disp: &Dispersion, p_list: &[LatticeMomentum], energy: f64, cutoff: f64) -> Result<OracleReport> {
    if p_list.is_empty() || p_list.len() > 2 {
        return Err(Error::InvalidInput("the identity is checked for one or two photons".into()));
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidInput("cutoff must be positive".into()));
    }
    let mut eps = Vec::with_capacity(p_list.len());
    for p in p_list {
        if disp.classify(*p) == Classification::Dark {
            return Err(Error::DarkMomentum {
                norm: disp.config().wrap(*p).norm(),
            });
        }
        eps.push(disp.try_epsilon(*p)?);
    }
    let lor = |x: f64, e: Complex64| -(1.0 / (x - e)).im;
    let sum: Complex64 = eps.iter().sum();
    let reference = lor(energy, sum);
    let oracle = if eps.len() == 1 {
        if energy.abs() <= cutoff { lor(energy, eps[0]) } else { 0.0 }
    } else {
        let a = (-cutoff).max(energy - cutoff);
        let b = cutoff.min(energy + cutoff);
        if a >= b {
            0.0
        } else {
            let breaks: Vec<f64> = [eps[0].re, energy - eps[1].re]
                .into_iter()
                .filter(|x| *x > a && *x < b)
                .collect();
            let opts = QuadOptions {
                rel_tol: 1e-12,
                abs_tol: 0.0,
                max_intervals: 4000,
                ..Default::default()
            };
            let r = integrate(|x| lor(x, eps[0]) * lor(energy - x, eps[1]), a, b, &breaks, &opts);
            r.value / PI
        }
    };
    Ok(OracleReport::new(format!("lorentzian_identity_beta{}", p_list.len()), reference.into(), oracle.into())
        .with("energy", energy)
        .with("cutoff", cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::PropagatorOptions;

    fn chain() -> Dispersion {
        Dispersion::new(ArrayConfig::chain(0.25)).unwrap()
    }

    #[test]
    fn chain_direct_sum() {
        let d = chain();
        let p = LatticeMomentum::chain(0.9 * PI / 0.25);
        let r = dispersion_report(&d, p, 1_000_000).unwrap();
        assert!(r.relative < 1e-6, "{r:?}");
        assert!((r.reference.re - r.oracle.re).abs() < 1e-6 * r.reference.re.abs());
        let t = Dispersion::new(ArrayConfig::chain(0.3).with_polarization(Polarization::CircularInPlane)).unwrap();
        for x in [0.3, 5.0, 9.0] {
            let r = dispersion_report(&t, LatticeMomentum::chain(x), 1_000_000).unwrap();
            assert!(r.relative < 1e-6, "{x}: {r:?}");
        }
    }

    #[test]
    fn truncation_ladder_converges() {
        let d = chain();
        let p = LatticeMomentum::chain(5.0);
        let exact = d.epsilon(p);
        let errs: Vec<f64> = (0..6)
            .map(|k| (dispersion_truncated_sum(d.config(), p, 1000 << k).unwrap() - exact).norm())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn superradiant_and_decoupled_limits() {
        let d = chain();
        let e = dispersion_direct_sum(d.config(), LatticeMomentum::chain(0.0), 100_000).unwrap();
        assert!(-2.0 * e.im > 1.0);
        let e = dispersion_direct_sum(&ArrayConfig::chain(7.3), LatticeMomentum::chain(0.2), 100_000).unwrap();
        assert!(e.re.abs() < 0.05 && (-2.0 * e.im - 1.0).abs() < 0.1, "{e}");
    }

    #[test]
    fn square_direct_sum() {
        let d = Dispersion::new(ArrayConfig::square(0.3, Polarization::PerpendicularToPlane)).unwrap();
        let r = dispersion_report(&d, LatticeMomentum::planar(8.0, 3.0), 1_000_000).unwrap();
        assert!(r.relative < 1e-3, "{r:?}");
    }

    #[test]
    fn riemann_propagator() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let r = propagator_report(&prop, Complex64::new(1.4, 1.0), 4096).unwrap();
        assert!(r.relative < 1e-4, "{r:?}");
        let p = LatticeMomentum::chain(1.7);
        let a = propagator_riemann(&d, Complex64::new(0.5, 0.3), p, 2048).unwrap();
        let b = propagator_riemann(&d, Complex64::new(0.5, 0.3), -p, 2048).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
        assert!(propagator_riemann(&d, Complex64::new(0.5, 0.0), p, 64).is_err());
    }

    #[test]
    fn eta_extrapolation() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let e = 1.40737;
        let limit = prop.evaluate(Complex64::new(e, 0.0), Side::AboveCut).unwrap().value(Side::AboveCut);
        let errs: Vec<f64> = [1.0, 0.3, 0.1, 0.03]
            .iter()
            .map(|eta| (propagator_riemann(&d, Complex64::new(e, *eta), LatticeMomentum::chain(0.0), 1 << 16).unwrap() - limit).norm())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn histogram_matches_density() {
        let d = chain();
        let total = LatticeMomentum::chain(0.0);
        let prop = PairPropagator::new(&d, total, PropagatorOptions::default());
        let opts = HistogramOptions {
            samples: 2_000_000,
            bins: 40,
            ..Default::default()
        };
        let h = dos_histogram(&d, total, &opts).unwrap();
        let vol = PI / 0.25 - K0;
        assert!((h.integral() + h.outside - h.volume).abs() < 1e-12);
        assert!((h.volume - vol).abs() < 5e-3 * vol);
        let again = dos_histogram(&d, total, &opts).unwrap();
        assert_eq!(h, again);
        let r = dos_report(&prop, &h, 0.05).unwrap();
        assert!(r.relative < 0.03, "{r:?}");
        let peak = h.density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let c = h.centers()[peak];
        let width = h.edges[1] - h.edges[0];
        let crit = prop.critical_energies().unwrap();
        assert!(crit.iter().any(|p| (p.energy - c).abs() <= 1.5 * width), "{c} {crit:?}");
    }

    #[test]
    fn lorentzian_identity() {
        let d = chain();
        let p1 = LatticeMomentum::chain(1.0);
        let p2 = LatticeMomentum::chain(-3.0);
        let one = appendix_c_check(&d, &[p1], 0.4, 1e3).unwrap();
        assert!(one.discrepancy < 1e-4);
        let two = appendix_c_check(&d, &[p1, p2], 0.4, 1e3).unwrap();
        assert!(two.relative < 1e-3, "{two:?}");
        let coarse = appendix_c_check(&d, &[p1, p2], 0.4, 10.0).unwrap();
        assert!(coarse.discrepancy > two.discrepancy);
        let e = 2.0 * d.delta(p1);
        let deg = appendix_c_check(&d, &[p1, p1], e, 1e3).unwrap();
        assert!((deg.reference.re - 1.0 / d.gamma(p1)).abs() < 1e-12);
        assert!(appendix_c_check(&d, &[LatticeMomentum::chain(9.0)], 0.0, 1e3).is_err());
    }
}
