//! Two-excitation Brillouin zone, channel domains D_α(P), the local propagator
//! L(ω,P) = ∫_{BZ⁽²⁾} dq 1/(ω − ε(P/2+q) − ε(P/2−q)) and the dark-pair density of states.
//!
//! Integrals are evaluated in the ordered-pair form L = ½ ∫_BZ dp 1/(ω − ε(p) − ε(P−p)).
//! A chain is a single line in p; the square lattice is an outer integral over p_y of
//! lines in p_x. On each line the light-cone crossings are exact seams, Δ⁽²⁾ is split
//! into monotone pieces, and on the real axis the dark part is a principal value built
//! from symmetric pairs r ± t around each root plus ∓iπ/|∂Δ⁽²⁾| per root.

use crate::error::{Error, Result};
use crate::lattice::{Classification, Dimension, Dispersion, LatticeMomentum, K0};
use crate::quad::{brent, integrate, kronrod_rule, QuadOptions, QuadValue};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Mutex;

/// Which side of the real-axis branch cut of L₀ a real energy refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// E + i0
    AboveCut,
    /// E − i0
    BelowCut,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::AboveCut => -1.0,
            Side::BelowCut => 1.0,
        }
    }
}

/// Number of bright constituents of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelIndex(u8);

impl ChannelIndex {
    pub const DARK: ChannelIndex = ChannelIndex(0);
    pub const ONE_PHOTON: ChannelIndex = ChannelIndex(1);
    pub const TWO_PHOTON: ChannelIndex = ChannelIndex(2);

    pub fn new(alpha: usize) -> Result<Self> {
        if alpha > 2 {
            return Err(Error::InvalidInput(format!("channel index {alpha} > 2")));
        }
        Ok(ChannelIndex(alpha as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A pair of spin waves with total momentum P and relative momentum q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMomentum {
    pub total: LatticeMomentum,
    pub relative: LatticeMomentum,
}

impl PairMomentum {
    pub fn new(total: LatticeMomentum, relative: LatticeMomentum) -> Self {
        PairMomentum { total, relative }
    }

    /// Builds the pair from its constituents.
    pub fn from_constituents(p1: LatticeMomentum, p2: LatticeMomentum) -> Self {
        PairMomentum {
            total: p1 + p2,
            relative: (p1 - p2).scale(0.5),
        }
    }

    /// Wrapped constituent momenta P/2 ± q.
    pub fn constituents(&self, disp: &Dispersion) -> (LatticeMomentum, LatticeMomentum) {
        let cfg = disp.config();
        let half = self.total.scale(0.5);
        (cfg.wrap(half + self.relative), cfg.wrap(half - self.relative))
    }

    /// Relative momentum mapped into BZ⁽²⁾ (q ≥ 0 on a chain, q_y ≥ 0 on the plane).
    pub fn canonical_relative(&self, disp: &Dispersion) -> LatticeMomentum {
        canonical_q(disp, self.relative)
    }
}

fn canonical_q(disp: &Dispersion, q: LatticeMomentum) -> LatticeMomentum {
    let cfg = disp.config();
    let w = cfg.wrap(q);
    match cfg.dimension {
        Dimension::OneD => LatticeMomentum::chain(w.x.abs()),
        Dimension::TwoDSquare => {
            if w.y < 0.0 || (w.y == 0.0 && w.x < 0.0) {
                -w
            } else {
                w
            }
        }
    }
}

/// α = number of bright momenta among P/2 ± q.
pub fn domain_of(disp: &Dispersion, total: LatticeMomentum, q: LatticeMomentum) -> ChannelIndex {
    let (p1, p2) = PairMomentum::new(total, q).constituents(disp);
    let n = [p1, p2]
        .iter()
        .filter(|p| disp.classify(**p) == Classification::Bright)
        .count();
    ChannelIndex(n as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorOptions {
    /// Relative tolerance on each L_α.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Width of the critical-energy proximity window (Γ₀).
    pub critical_window: f64,
    /// Samples per line used to locate extrema of Δ⁽²⁾ on a chain.
    pub scan_points: usize,
    /// Samples per p_x line on the square lattice.
    pub scan_points_planar: usize,
    /// Marching-squares grid for planar level sets (cells per BZ side).
    pub contour_grid: usize,
    /// Seed grid for planar critical points (cells per BZ side).
    pub critical_seed_grid: usize,
    pub max_intervals: usize,
    /// Largest Nyström system accepted by the general T-matrix solver.
    pub max_nodes: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-13,
            critical_window: 1e-4,
            scan_points: 512,
            scan_points_planar: 48,
            contour_grid: 512,
            critical_seed_grid: 32,
            max_intervals: 2000,
            max_nodes: 4000,
        }
    }
}

impl PropagatorOptions {
    fn quad(&self, rel: f64) -> QuadOptions {
        QuadOptions {
            rel_tol: rel,
            abs_tol: self.abs_tol,
            max_intervals: self.max_intervals,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 0.1) {
            return Err(Error::InvalidConfig("rel_tol must lie in (0, 0.1)".into()));
        }
        if self.scan_points < 8 || self.scan_points_planar < 8 {
            return Err(Error::InvalidConfig("scan points must be at least 8".into()));
        }
        if self.contour_grid < 8 || self.critical_seed_grid < 4 {
            return Err(Error::InvalidConfig("grids are too coarse".into()));
        }
        if self.critical_window < 0.0 {
            return Err(Error::InvalidConfig("critical_window must be non-negative".into()));
        }
        Ok(())
    }
}

/// A stationary point of Δ⁽²⁾(P,·) inside D₀(P).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub energy: f64,
    pub q: LatticeMomentum,
    /// ‖∇_q Δ⁽²⁾‖ at the located point.
    pub gradient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalProximity {
    pub critical: f64,
    pub distance: f64,
}

/// L(ω,P) split by channel, with the derived densities of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorDecomposition {
    pub omega: Complex64,
    pub total: LatticeMomentum,
    /// Present for real ω.
    pub side: Option<Side>,
    /// L₀, L₁, L₂ (L₀ evaluated on `side` for real ω).
    pub l: [Complex64; 3],
    /// Principal value of L₀ for real ω.
    pub l0_principal: Option<f64>,
    /// ρ₀ = −Im L₀(E+i0)/π, ρ_α = |Im L_α|/π for α = 1, 2.
    pub rho: [f64; 3],
    pub critical: Option<CriticalProximity>,
    pub error_estimate: f64,
}

impl PropagatorDecomposition {
    pub fn total_value(&self) -> Complex64 {
        self.l[0] + self.l[1] + self.l[2]
    }

    /// L₀ on the requested side of the cut (real ω only).
    pub fn l0(&self, side: Side) -> Complex64 {
        match self.l0_principal {
            Some(pv) => Complex64::new(pv, side.sign() * PI * self.rho[0]),
            None => self.l[0],
        }
    }

    /// L(E ± i0) assembled from the decomposition.
    pub fn value(&self, side: Side) -> Complex64 {
        self.l0(side) + self.l[1] + self.l[2]
    }

    /// The same decomposition viewed from the other side of the cut.
    pub fn with_side(&self, side: Side) -> Self {
        let mut out = *self;
        if self.l0_principal.is_some() {
            out.side = Some(side);
            out.l[0] = self.l0(side);
        }
        out
    }
}

/// Quadrature node of the propagator grid: Σ weight·f(p) ≈ ∫_{BZ⁽²⁾} dq f(q)/(ω − ε⁽²⁾(q))
/// for smooth f. Root nodes carry the ∓iπ/|∂Δ⁽²⁾| term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub p: LatticeMomentum,
    pub weight: Complex64,
    pub alpha: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct LineValue {
    l: [Complex64; 3],
    rho: f64,
    /// Inner quadrature error, carried through the outer integral.
    err: f64,
}

impl Add for LineValue {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        LineValue {
            l: [self.l[0] + o.l[0], self.l[1] + o.l[1], self.l[2] + o.l[2]],
            rho: self.rho + o.rho,
            err: self.err + o.err,
        }
    }
}

impl Sub for LineValue {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        LineValue {
            l: [self.l[0] - o.l[0], self.l[1] - o.l[1], self.l[2] - o.l[2]],
            rho: self.rho - o.rho,
            err: self.err - o.err,
        }
    }
}

impl Mul<f64> for LineValue {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        LineValue {
            l: [self.l[0] * s, self.l[1] * s, self.l[2] * s],
            rho: self.rho * s,
            err: self.err * s,
        }
    }
}

impl QuadValue for LineValue {
    fn zero() -> Self {
        LineValue::default()
    }
    fn magnitude(&self) -> f64 {
        (self.l.iter().map(|v| v.norm_sqr()).sum::<f64>() + self.rho * self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    alpha: usize,
}

struct LineOutput {
    value: LineValue,
    error: f64,
    critical: Vec<(f64, f64)>,
}

/// Δ⁽²⁾ and friends along the line p = (x, p_y).
struct PairLine<'a> {
    disp: &'a Dispersion,
    total: LatticeMomentum,
    py: f64,
    period: f64,
    start: f64,
    segments: Vec<Segment>,
}

impl<'a> PairLine<'a> {
    fn new(disp: &'a Dispersion, total: LatticeMomentum, py: f64, e_ref: f64, scan: usize) -> Self {
        let cfg = disp.config();
        let period = 2.0 * PI / cfg.spacing;
        let mut line = PairLine {
            disp,
            total,
            py,
            period,
            start: 0.0,
            segments: vec![],
        };
        let mut cuts: Vec<f64> = Vec::new();
        let own_half = if py.abs() < K0 {
            Some((K0 * K0 - py * py).sqrt())
        } else {
            None
        };
        if let Some(a) = own_half {
            cuts.push(-a);
            cuts.push(a);
        }
        let gys: &[f64] = match cfg.dimension {
            Dimension::OneD => &[0.0],
            Dimension::TwoDSquare => &[-1.0, 0.0, 1.0],
        };
        let mut partner_centers = Vec::new();
        for &gy in gys {
            let dy = total.y - py - gy * period;
            if dy.abs() < K0 {
                let w = (K0 * K0 - dy * dy).sqrt();
                cuts.push(total.x - w);
                cuts.push(total.x + w);
                partner_centers.push(total.x);
            }
        }
        let start = if let Some(a) = own_half {
            -a
        } else if let Some(&c) = partner_centers.first() {
            c
        } else {
            // fully dark line: start at the extremum farthest from the energy of interest
            let n = scan.max(16);
            let mut best = (-PI / cfg.spacing, -1.0);
            let x0 = -PI / cfg.spacing;
            let crit = line.stationary_points(x0, x0 + period, n);
            for &x in crit.iter().chain([x0].iter()) {
                let v = (line.delta2(x) - e_ref).abs();
                if v > best.1 {
                    best = (x, v);
                }
            }
            best.0
        };
        line.start = start;
        let mut inner: Vec<f64> = cuts
            .into_iter()
            .map(|c| start + (c - start).rem_euclid(period))
            .filter(|&c| c > start + 1e-14 * period && c < start + period * (1.0 - 1e-14))
            .collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        inner.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * period);
        let mut pts = vec![start];
        pts.extend(inner);
        pts.push(start + period);
        line.segments = pts
            .windows(2)
            .map(|w| Segment {
                a: w[0],
                b: w[1],
                alpha: line.alpha(0.5 * (w[0] + w[1])),
            })
            .collect();
        line
    }

    fn p(&self, x: f64) -> LatticeMomentum {
        LatticeMomentum { x, y: self.py }
    }

    fn partner(&self, x: f64) -> LatticeMomentum {
        self.total - self.p(x)
    }

    fn alpha(&self, x: f64) -> usize {
        [self.p(x), self.partner(x)]
            .iter()
            .filter(|p| self.disp.classify(**p) == Classification::Bright)
            .count()
    }

    fn eps2(&self, x: f64) -> Complex64 {
        self.disp.epsilon(self.p(x)) + self.disp.epsilon(self.partner(x))
    }

    fn delta2(&self, x: f64) -> f64 {
        self.disp.delta(self.p(x)) + self.disp.delta(self.partner(x))
    }

    fn slope(&self, x: f64) -> f64 {
        self.disp.delta_gradient(self.p(x))[0] - self.disp.delta_gradient(self.partner(x))[0]
    }

    /// Zeros of ∂_x Δ⁽²⁾ in (a, b), located from a sign scan on `n` interior samples.
    fn stationary_points(&self, a: f64, b: f64, n: usize) -> Vec<f64> {
        let h = (b - a) / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| a + h * (i as f64 + 0.5)).collect();
        let ds: Vec<f64> = xs.iter().map(|&x| self.slope(x)).collect();
        let mut out = Vec::new();
        for i in 0..n - 1 {
            if ds[i].is_finite() && ds[i + 1].is_finite() && ds[i].signum() != ds[i + 1].signum()
            {
                if let Some(x) = brent(|x| self.slope(x), xs[i], xs[i + 1], 0.0) {
                    out.push(x);
                }
            }
        }
        out
    }

    /// Finite value of Δ⁽²⁾ at a point nudged inward from a segment end.
    fn end_value(&self, x: f64, inward: f64) -> (f64, f64) {
        let mut step = 1e-13 * self.period;
        for _ in 0..12 {
            let y = x + inward * step;
            let v = self.delta2(y);
            if v.is_finite() {
                return (y, v);
            }
            step *= 10.0;
        }
        (x + inward * step, f64::NAN)
    }

    /// Roots of Δ⁽²⁾ = e on [a, b] given the stationary points inside.
    fn roots(&self, a: f64, b: f64, crit: &[f64], e: f64) -> Vec<f64> {
        let (ya, va) = self.end_value(a, 1.0);
        let (yb, vb) = self.end_value(b, -1.0);
        let mut nodes = vec![(ya, va)];
        for &c in crit {
            nodes.push((c, self.delta2(c)));
        }
        nodes.push((yb, vb));
        let mut out = Vec::new();
        for w in nodes.windows(2) {
            let (u, fu) = (w[0].0, w[0].1 - e);
            let (v, fv) = (w[1].0, w[1].1 - e);
            if !fu.is_finite() || !fv.is_finite() {
                continue;
            }
            if fu == 0.0 {
                out.push(u);
                continue;
            }
            if fu.signum() != fv.signum() && fv != 0.0 {
                if let Some(r) = brent(|x| self.delta2(x) - e, u, v, 0.0) {
                    out.push(r);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * self.period);
        out
    }

    /// Integrates one line. `nodes` collects the quadrature grid when requested.
    fn integrate(
        &self,
        omega: Complex64,
        opts: &PropagatorOptions,
        rel: f64,
        scan: usize,
        strict: bool,
        mut nodes: Option<&mut Vec<(f64, Complex64, usize)>>,
    ) -> Result<LineOutput> {
        let e = omega.re;
        let real_axis = omega.im == 0.0;
        let q = opts.quad(rel);
        let mut value = LineValue::default();
        let mut error = 0.0;
        let mut critical = Vec::new();
        let total_len: f64 = self.period;
        for seg in &self.segments {
            let n = ((scan as f64) * (seg.b - seg.a) / total_len).ceil().max(8.0) as usize;
            let crit = self.stationary_points(seg.a, seg.b, n);
            if seg.alpha == 0 {
                for &c in &crit {
                    critical.push((c, self.delta2(c)));
                }
            }
            let roots = self.roots(seg.a, seg.b, &crit, e);
            if seg.alpha > 0 || !real_axis {
                let mut seams = roots.clone();
                seams.extend(crit.iter().copied());
                let f = |x: f64| {
                    let den = if seg.alpha > 0 {
                        omega - self.eps2(x)
                    } else {
                        omega - self.delta2(x)
                    };
                    inv(den)
                };
                let r = integrate(f, seg.a, seg.b, &seams, &q);
                if strict {
                    check(&r.error, r.converged, r.value.norm(), &q)?;
                }
                value.l[seg.alpha] += r.value;
                error += r.error;
                if let Some(ns) = nodes.as_deref_mut() {
                    for (a, b) in &r.panels {
                        for (x, w) in kronrod_rule(*a, *b) {
                            ns.push((x, w * f(x), seg.alpha));
                        }
                    }
                }
                continue;
            }
            // principal value on a dark segment
            let g = |x: f64| inv_real(e - self.delta2(x));
            let m = roots.len();
            let mut windows = Vec::with_capacity(m);
            for (j, &r) in roots.iter().enumerate() {
                let mut h = (r - seg.a).min(seg.b - r);
                if j > 0 {
                    h = h.min(0.5 * (r - roots[j - 1]));
                }
                if j + 1 < m {
                    h = h.min(0.5 * (roots[j + 1] - r));
                }
                windows.push((r, h));
            }
            let mut pv = 0.0;
            let mut cursor = seg.a;
            let mut gaps = Vec::new();
            for &(r, h) in &windows {
                gaps.push((cursor, r - h));
                cursor = r + h;
                let slope = self.slope(r);
                if slope.abs() < 1e-300 || !slope.is_finite() {
                    return Err(Error::CriticalEnergyProximity {
                        energy: e,
                        critical: self.delta2(r),
                        distance: 0.0,
                    });
                }
                value.rho += 1.0 / slope.abs();
                if h > 0.0 {
                    // below 1e-5 h the pair sum is flat and rounding in Δ⁽²⁾ dominates
                    let floor = 1e-5 * h;
                    let sym = |t: f64| {
                        let t = t.max(floor);
                        g(r + t) + g(r - t)
                    };
                    let res = integrate(sym, 0.0, h, &[], &q);
                    if strict {
                        check(&res.error, res.converged, res.value.abs(), &q)?;
                    }
                    pv += res.value;
                    error += res.error;
                    if let Some(ns) = nodes.as_deref_mut() {
                        for (a, b) in &res.panels {
                            for (t, w) in kronrod_rule(*a, *b) {
                                let tc = t.max(floor);
                                ns.push((r + t, Complex64::new(w * g(r + tc), 0.0), 0));
                                ns.push((r - t, Complex64::new(w * g(r - tc), 0.0), 0));
                            }
                        }
                    }
                }
                if let Some(ns) = nodes.as_deref_mut() {
                    // side-dependent delta term; the sign is applied by the caller
                    ns.push((r, Complex64::new(0.0, PI / slope.abs()), usize::MAX));
                }
            }
            gaps.push((cursor, seg.b));
            for (u, v) in gaps {
                if v <= u {
                    continue;
                }
                let res = integrate(g, u, v, &crit, &q);
                if strict {
                        check(&res.error, res.converged, res.value.abs(), &q)?;
                    }
                pv += res.value;
                error += res.error;
                if let Some(ns) = nodes.as_deref_mut() {
                    for (a, b) in &res.panels {
                        for (x, w) in kronrod_rule(*a, *b) {
                            ns.push((x, Complex64::new(w * g(x), 0.0), 0));
                        }
                    }
                }
            }
            value.l[0] += Complex64::new(pv, 0.0);
        }
        value.err = error;
        Ok(LineOutput {
            value,
            error,
            critical,
        })
    }
}

/// 1/den, with the light-cone divergence of ε (where the integrand vanishes) mapped to 0.
fn inv(den: Complex64) -> Complex64 {
    if den.re.is_finite() && den.im.is_finite() {
        den.inv()
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn inv_real(den: f64) -> f64 {
    if den.is_finite() {
        1.0 / den
    } else {
        0.0
    }
}

fn check(err: &f64, converged: bool, scale: f64, q: &QuadOptions) -> Result<()> {
    if converged {
        return Ok(());
    }
    let target = q.abs_tol.max(q.rel_tol * scale);
    // tolerate a modest miss after exhausting panels; flag gross failures
    if *err <= 100.0 * target {
        Ok(())
    } else {
        Err(Error::QuadratureFailure {
            estimate: *err,
            target,
        })
    }
}

/// Evaluator of L(ω,P) and related quantities at a fixed total momentum.
pub struct PairPropagator<'a> {
    disp: &'a Dispersion,
    total: LatticeMomentum,
    opts: PropagatorOptions,
}

impl<'a> PairPropagator<'a> {
    pub fn new(disp: &'a Dispersion, total: LatticeMomentum, opts: PropagatorOptions) -> Self {
        PairPropagator {
            disp,
            total: disp.config().wrap(total),
            opts,
        }
    }

    pub fn dispersion(&self) -> &Dispersion {
        self.disp
    }

    pub fn total(&self) -> LatticeMomentum {
        self.total
    }

    pub fn options(&self) -> &PropagatorOptions {
        &self.opts
    }

    /// L(E ± i0) for real E, or L(ω) for complex ω (`side` ignored).
    pub fn evaluate(&self, omega: Complex64, side: Side) -> Result<PropagatorDecomposition> {
        self.opts.validate()?;
        if !omega.re.is_finite() || !omega.im.is_finite() {
            return Err(Error::InvalidInput("ω must be finite".into()));
        }
        let (mut dec, _) = self.run(omega, false)?;
        if omega.im == 0.0 {
            dec = dec.with_side(side);
        }
        Ok(dec)
    }

    /// Decomposition together with the quadrature grid it was built on.
    pub fn evaluate_with_grid(
        &self,
        omega: Complex64,
        side: Side,
    ) -> Result<(PropagatorDecomposition, Vec<GridNode>)> {
        self.opts.validate()?;
        let (mut dec, nodes) = self.run(omega, true)?;
        let sgn = if omega.im == 0.0 { side.sign() } else { 0.0 };
        if omega.im == 0.0 {
            dec = dec.with_side(side);
        }
        let grid = nodes
            .into_iter()
            .map(|(p, w, alpha)| {
                if alpha == usize::MAX {
                    GridNode {
                        p,
                        weight: 0.5 * w * sgn,
                        alpha: 0,
                    }
                } else {
                    GridNode {
                        p,
                        weight: 0.5 * w,
                        alpha,
                    }
                }
            })
            .collect();
        Ok((dec, grid))
    }

    fn run(
        &self,
        omega: Complex64,
        want_nodes: bool,
    ) -> Result<(PropagatorDecomposition, Vec<(LatticeMomentum, Complex64, usize)>)> {
        let cfg = self.disp.config();
        let mut nodes = Vec::new();
        let (value, error, critical_values) = match cfg.dimension {
            Dimension::OneD => {
                let line = PairLine::new(self.disp, self.total, 0.0, omega.re, self.opts.scan_points);
                let mut raw = Vec::new();
                let out = line.integrate(
                    omega,
                    &self.opts,
                    self.opts.rel_tol * 0.1,
                    self.opts.scan_points,
                    true,
                    if want_nodes { Some(&mut raw) } else { None },
                )?;
                nodes.extend(
                    raw.into_iter()
                        .map(|(x, w, a)| (LatticeMomentum::chain(x), w, a)),
                );
                let crit: Vec<f64> = out.critical.iter().map(|c| c.1).collect();
                (out.value, out.error, crit)
            }
            Dimension::TwoDSquare => {
                let (v, err, ns) = self.planar(omega, want_nodes)?;
                nodes = ns;
                let crit = if omega.im == 0.0 {
                    self.critical_energies()?.iter().map(|c| c.energy).collect()
                } else {
                    vec![]
                };
                (v, err, crit)
            }
        };
        let half = value * 0.5;
        let real_axis = omega.im == 0.0;
        let critical = if real_axis {
            critical_values
                .iter()
                .map(|&c| CriticalProximity {
                    critical: c,
                    distance: (omega.re - c).abs(),
                })
                .filter(|c| c.distance < self.opts.critical_window)
                .min_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap())
        } else {
            None
        };
        let rho0 = if real_axis { half.rho } else { 0.0 };
        let dec = PropagatorDecomposition {
            omega,
            total: self.total,
            side: None,
            l: half.l,
            l0_principal: if real_axis { Some(half.l[0].re) } else { None },
            rho: [rho0, half.l[1].im.abs() / PI, half.l[2].im.abs() / PI],
            critical,
            error_estimate: 0.5 * error,
        };
        Ok((dec, nodes))
    }

    /// Number of roots of Δ⁽²⁾ = e on the dark parts of the line at p_y.
    fn line_root_count(&self, py: f64, e: f64) -> usize {
        let scan = self.opts.scan_points_planar;
        let line = PairLine::new(self.disp, self.total, py, e, scan);
        line.segments
            .iter()
            .filter(|s| s.alpha == 0)
            .map(|s| {
                let n = ((scan as f64) * (s.b - s.a) / line.period).ceil().max(8.0) as usize;
                let crit = line.stationary_points(s.a, s.b, n);
                line.roots(s.a, s.b, &crit, e).len()
            })
            .sum()
    }

    /// Outer seams: light-cone crossings of p and P − p and, on the real axis, the
    /// p_y where a line becomes tangent to the dark level set.
    fn planar_seams(&self, omega: Complex64) -> Vec<f64> {
        let edge = PI / self.disp.config().spacing;
        let period = 2.0 * edge;
        let mut seams = vec![-K0, K0];
        for gy in [-1.0, 0.0, 1.0] {
            for s in [-1.0, 1.0] {
                let y = self.total.y - gy * period + s * K0;
                seams.push(-edge + (y + edge).rem_euclid(period));
            }
        }
        if omega.im == 0.0 {
            let n = 2 * self.opts.scan_points_planar;
            let ys: Vec<f64> = (0..=n).map(|i| -edge + period * i as f64 / n as f64).collect();
            let counts: Vec<usize> = {
                use rayon::prelude::*;
                ys.par_iter().map(|&y| self.line_root_count(y, omega.re)).collect()
            };
            for i in 0..n {
                if counts[i] == counts[i + 1] {
                    continue;
                }
                let (mut lo, mut hi) = (ys[i], ys[i + 1]);
                let c_lo = counts[i];
                while hi - lo > 1e-12 * period {
                    let mid = 0.5 * (lo + hi);
                    if self.line_root_count(mid, omega.re) == c_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                seams.push(0.5 * (lo + hi));
            }
        }
        seams.retain(|&y| y > -edge && y < edge);
        seams.push(-edge);
        seams.push(edge);
        seams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seams.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * period);
        seams
    }

    /// Square lattice: outer integral over p_y of p_x lines. Each piece between seams
    /// is mapped by p_y = a + (b − a)(3s² − 2s³), which absorbs the inverse square-root
    /// edges of the line integrals at tangencies.
    #[allow(clippy::type_complexity)]
    fn planar(
        &self,
        omega: Complex64,
        want_nodes: bool,
    ) -> Result<(LineValue, f64, Vec<(LatticeMomentum, Complex64, usize)>)> {
        let seams = self.planar_seams(omega);
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        let rel = self.opts.rel_tol * 0.1;
        let scan = self.opts.scan_points_planar;
        let mut inner_opts = self.opts;
        inner_opts.max_intervals = inner_opts.max_intervals.min(200);
        let line_value = |py: f64| {
            let line = PairLine::new(self.disp, self.total, py, omega.re, scan);
            // inner misses near tangent lines carry little outer weight; they are
            // accounted for through the integrated error instead
            match line.integrate(omega, &inner_opts, rel, scan, false, None) {
                Ok(out) => out.value,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    LineValue::default()
                }
            }
        };
        let map = |a: f64, b: f64, s: f64| (a + (b - a) * s * s * (3.0 - 2.0 * s), 6.0 * (b - a) * s * (1.0 - s));
        let mut q = self.opts.quad(self.opts.rel_tol);
        q.parallel = true;
        let mut total = LineValue::default();
        let mut error = 0.0;
        let mut pieces = Vec::new();
        for w in seams.windows(2) {
            let (a, b) = (w[0], w[1]);
            let res = integrate(
                |s| {
                    let (y, jac) = map(a, b, s);
                    line_value(y) * jac
                },
                0.0,
                1.0,
                &[],
                &q,
            );
            total = total + res.value;
            error += res.error;
            pieces.push((a, b, res.panels));
        }
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        error += total.err.abs();
        let scale = total.magnitude();
        check(&error, error <= q.rel_tol * scale, scale, &q)?;
        let mut nodes = Vec::new();
        if want_nodes {
            for (a, b, panels) in &pieces {
                for (sa, sb) in panels {
                    for (s, ws) in kronrod_rule(*sa, *sb) {
                        let (py, jac) = map(*a, *b, s);
                        let line = PairLine::new(self.disp, self.total, py, omega.re, scan);
                        let mut raw = Vec::new();
                        line.integrate(omega, &inner_opts, rel, scan, false, Some(&mut raw))?;
                        nodes.extend(
                            raw.into_iter()
                                .map(|(x, w, a)| (LatticeMomentum::planar(x, py), w * ws * jac, a)),
                        );
                        if nodes.len() > self.opts.max_nodes {
                            return Err(Error::GridTooLarge {
                                nodes: nodes.len(),
                                limit: self.opts.max_nodes,
                            });
                        }
                    }
                }
            }
        }
        Ok((total, error, nodes))
    }

    /// ½∫_BZ dp f(p) restricted to pairs (p, P − p) in channel α, i.e. ∫_{D_α(P)} dq f.
    /// Roots of Δ⁽²⁾ = `seam_energy` are used as seams, so Lorentzian peaks are resolved.
    pub fn channel_integral<F>(&self, alpha: usize, f: F, seam_energy: f64, rel_tol: f64) -> Result<f64>
    where
        F: Fn(LatticeMomentum) -> f64 + Sync,
    {
        if alpha > 2 {
            return Err(Error::InvalidInput(format!("channel index {alpha} > 2")));
        }
        let q = self.opts.quad(rel_tol);
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        let line_value = |py: f64, scan: usize| -> f64 {
            let line = PairLine::new(self.disp, self.total, py, seam_energy, scan);
            let mut total = 0.0;
            for seg in line.segments.iter().filter(|s| s.alpha == alpha) {
                let n = ((scan as f64) * (seg.b - seg.a) / line.period).ceil().max(8.0) as usize;
                let crit = line.stationary_points(seg.a, seg.b, n);
                let mut seams = line.roots(seg.a, seg.b, &crit, seam_energy);
                seams.extend(crit);
                let r = integrate(|x| f(line.p(x)), seg.a, seg.b, &seams, &q);
                if check(&r.error, r.converged, r.value.abs(), &q).is_err() {
                    failure.lock().unwrap().get_or_insert(Error::QuadratureFailure {
                        estimate: r.error,
                        target: q.rel_tol * r.value.abs(),
                    });
                }
                total += r.value;
            }
            total
        };
        let value = match self.disp.config().dimension {
            Dimension::OneD => line_value(0.0, self.opts.scan_points),
            Dimension::TwoDSquare => {
                let seams = self.planar_seams(Complex64::new(seam_energy, 1.0));
                let outer = QuadOptions {
                    parallel: true,
                    ..q
                };
                let mut v = 0.0;
                for w in seams.windows(2) {
                    let r = integrate(|y| line_value(y, self.opts.scan_points_planar), w[0], w[1], &[], &outer);
                    check(&r.error, r.converged, r.value.abs(), &outer)?;
                    v += r.value;
                }
                v
            }
        };
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        Ok(0.5 * value)
    }

    /// ρ₀(E,P): co-area integral of 1/‖∇_q Δ⁽²⁾‖ over the level set in D₀(P).
    pub fn dark_pair_dos(&self, e: f64) -> Result<f64> {
        match self.disp.config().dimension {
            Dimension::OneD => self.dos_chain(e),
            Dimension::TwoDSquare => Ok(self.level_set(e)?.iter().map(|s| s.weight / s.speed).sum()),
        }
    }

    fn pair_q(&self, q: LatticeMomentum) -> (LatticeMomentum, LatticeMomentum) {
        let half = self.total.scale(0.5);
        (half + q, half - q)
    }

    fn delta2_q(&self, q: LatticeMomentum) -> f64 {
        let (a, b) = self.pair_q(q);
        self.disp.delta(a) + self.disp.delta(b)
    }

    fn grad2_q(&self, q: LatticeMomentum) -> [f64; 2] {
        let (a, b) = self.pair_q(q);
        let ga = self.disp.delta_gradient(a);
        let gb = self.disp.delta_gradient(b);
        [ga[0] - gb[0], ga[1] - gb[1]]
    }

    fn dark_q(&self, q: LatticeMomentum) -> bool {
        let (a, b) = self.pair_q(q);
        self.disp.classify(a) == Classification::Dark && self.disp.classify(b) == Classification::Dark
    }

    /// Chain: sum over roots in q ∈ (0, π/d) from a uniform sign scan.
    fn dos_chain(&self, e: f64) -> Result<f64> {
        Ok(self.chain_roots(e)?.iter().map(|r| 1.0 / r.1).sum())
    }

    /// Roots q of Δ⁽²⁾(P,q) = E in D₀(P) with |∂_q Δ⁽²⁾| (chain, q ∈ (0, π/d)).
    pub fn chain_roots(&self, e: f64) -> Result<Vec<(f64, f64)>> {
        let edge = PI / self.disp.config().spacing;
        let n = 4 * self.opts.scan_points;
        let f = |q: f64| self.delta2_q(LatticeMomentum::chain(q)) - e;
        let mut out = Vec::new();
        let xs: Vec<f64> = (0..=n).map(|i| edge * i as f64 / n as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for i in 0..n {
            if fs[i].signum() == fs[i + 1].signum() || !fs[i].is_finite() || !fs[i + 1].is_finite() {
                continue;
            }
            if let Some(r) = brent(f, xs[i], xs[i + 1], 0.0) {
                if r <= 0.0 || r >= edge || !self.dark_q(LatticeMomentum::chain(r)) {
                    continue;
                }
                let v = self.grad2_q(LatticeMomentum::chain(r))[0].abs();
                if v < 1e-12 {
                    return Err(Error::CriticalEnergyProximity {
                        energy: e,
                        critical: e,
                        distance: 0.0,
                    });
                }
                out.push((r, v));
            }
        }
        Ok(out)
    }

    /// Planar level set Δ⁽²⁾(P,q) = E in D₀(P) by marching squares over q ∈ BZ⁽²⁾,
    /// returned as points with arc-length weights and local speeds ‖∇_q Δ⁽²⁾‖.
    pub fn level_set(&self, e: f64) -> Result<Vec<LevelPoint>> {
        let cfg = self.disp.config();
        if cfg.dimension != Dimension::TwoDSquare {
            return Err(Error::InvalidInput("level_set needs a square lattice".into()));
        }
        let edge = PI / cfg.spacing;
        let nx = self.opts.contour_grid;
        let ny = nx / 2;
        let hx = 2.0 * edge / nx as f64;
        let hy = edge / ny as f64;
        let at = |i: usize, j: usize| LatticeMomentum::planar(-edge + hx * i as f64, hy * j as f64);
        let vals: Vec<f64> = {
            use rayon::prelude::*;
            (0..=ny)
                .into_par_iter()
                .flat_map_iter(|j| (0..=nx).map(move |i| (i, j)))
                .map(|(i, j)| self.delta2_q(at(i, j)) - e)
                .collect()
        };
        let v = |i: usize, j: usize| vals[j * (nx + 1) + i];
        let refine = |a: LatticeMomentum, b: LatticeMomentum| -> LatticeMomentum {
            let fa = self.delta2_q(a) - e;
            let t = brent(
                |t| self.delta2_q(a + (b - a).scale(t)) - e,
                0.0,
                1.0,
                1e-10 / (b - a).norm().max(1e-300),
            );
            let t = t.unwrap_or_else(|| {
                let fb = self.delta2_q(b) - e;
                fa / (fa - fb)
            });
            a + (b - a).scale(t)
        };
        let mut points = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
                if c.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                let mut cross = Vec::new();
                for k in 0..4 {
                    let (a, b) = (c[k], c[(k + 1) % 4]);
                    if (a < 0.0) != (b < 0.0) {
                        cross.push(refine(corners[k], corners[(k + 1) % 4]));
                    }
                }
                let pairs: Vec<(LatticeMomentum, LatticeMomentum)> = match cross.len() {
                    2 => vec![(cross[0], cross[1])],
                    4 => {
                        // saddle cell: pair edges by the sign at the cell centre
                        let mid = self.delta2_q(corners[0] + (corners[2] - corners[0]).scale(0.5)) - e;
                        if (mid < 0.0) == (c[0] < 0.0) {
                            vec![(cross[0], cross[3]), (cross[1], cross[2])]
                        } else {
                            vec![(cross[0], cross[1]), (cross[2], cross[3])]
                        }
                    }
                    _ => vec![],
                };
                for (a, b) in pairs {
                    self.clip_segment(a, b, &mut points);
                }
            }
        }
        Ok(points)
    }

    fn clip_segment(&self, a: LatticeMomentum, b: LatticeMomentum, out: &mut Vec<LevelPoint>) {
        let da = self.dark_q(a);
        let db = self.dark_q(b);
        let (a, b) = match (da, db) {
            (true, true) => (a, b),
            (false, false) => return,
            _ => {
                // bisect the light-cone crossing along the segment
                let (mut lo, mut hi) = if da { (0.0, 1.0) } else { (1.0, 0.0) };
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.dark_q(a + (b - a).scale(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let m = a + (b - a).scale(lo);
                if da {
                    (a, m)
                } else {
                    (m, b)
                }
            }
        };
        let len = (b - a).norm();
        if len == 0.0 {
            return;
        }
        for p in [a, b] {
            let g = self.grad2_q(p);
            out.push(LevelPoint {
                q: p,
                weight: 0.5 * len,
                speed: g[0].hypot(g[1]),
            });
        }
    }

    /// Stationary points of Δ⁽²⁾(P,·) inside D₀(P).
    pub fn critical_energies(&self) -> Result<Vec<CriticalPoint>> {
        match self.disp.config().dimension {
            Dimension::OneD => self.critical_chain(),
            Dimension::TwoDSquare => self.critical_planar(),
        }
    }

    fn critical_chain(&self) -> Result<Vec<CriticalPoint>> {
        let line = PairLine::new(self.disp, self.total, 0.0, 0.0, self.opts.scan_points);
        let mut out: Vec<CriticalPoint> = Vec::new();
        for seg in line.segments.iter().filter(|s| s.alpha == 0) {
            let n = ((self.opts.scan_points as f64) * (seg.b - seg.a) / line.period)
                .ceil()
                .max(8.0) as usize;
            for x in line.stationary_points(seg.a, seg.b, n) {
                let q = canonical_q(self.disp, LatticeMomentum::chain(x) - self.total.scale(0.5));
                let c = CriticalPoint {
                    energy: line.delta2(x),
                    q,
                    gradient: line.slope(x).abs(),
                };
                if !out.iter().any(|o| (o.q.x - q.x).abs() < 1e-9) {
                    out.push(c);
                }
            }
        }
        out.sort_by(|a, b| a.q.x.partial_cmp(&b.q.x).unwrap());
        Ok(out)
    }

    fn critical_planar(&self) -> Result<Vec<CriticalPoint>> {
        let edge = PI / self.disp.config().spacing;
        let n = self.opts.critical_seed_grid;
        let h = 2.0 * edge / n as f64;
        let mut seeds = Vec::new();
        let grads: Vec<Vec<f64>> = (0..=n / 2)
            .map(|j| {
                (0..=n)
                    .map(|i| {
                        let q = LatticeMomentum::planar(-edge + h * i as f64, h * j as f64);
                        let g = self.grad2_q(q);
                        g[0].hypot(g[1])
                    })
                    .collect()
            })
            .collect();
        for j in 0..=n / 2 {
            for i in 0..=n {
                let gv = grads[j][i];
                let mut is_min = true;
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let ii = i as i64 + di;
                    let jj = j as i64 + dj;
                    if ii < 0 || jj < 0 || ii > n as i64 || jj > (n / 2) as i64 {
                        continue;
                    }
                    if grads[jj as usize][ii as usize] < gv {
                        is_min = false;
                    }
                }
                if is_min {
                    seeds.push(LatticeMomentum::planar(-edge + h * i as f64, h * j as f64));
                }
            }
        }
        let mut out: Vec<CriticalPoint> = Vec::new();
        for s in seeds {
            if let Some(q) = self.newton_stationary(s, h) {
                if !self.dark_q(q) {
                    continue;
                }
                let qc = canonical_q(self.disp, q);
                let g = self.grad2_q(qc);
                let gn = g[0].hypot(g[1]);
                if gn > 1e-6 {
                    continue;
                }
                let dup = out.iter().any(|o| {
                    let d = self.disp.config().wrap(o.q - qc);
                    d.norm() < 1e-5
                });
                if !dup {
                    out.push(CriticalPoint {
                        energy: self.delta2_q(qc),
                        q: qc,
                        gradient: gn,
                    });
                }
            }
        }
        out.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
        Ok(out)
    }

    fn newton_stationary(&self, start: LatticeMomentum, cell: f64) -> Option<LatticeMomentum> {
        let mut q = start;
        let h = 1e-4;
        for _ in 0..40 {
            let g = self.grad2_q(q);
            if g[0].hypot(g[1]) < 1e-9 {
                return Some(q);
            }
            let gx1 = self.grad2_q(q + LatticeMomentum::planar(h, 0.0));
            let gx0 = self.grad2_q(q - LatticeMomentum::planar(h, 0.0));
            let gy1 = self.grad2_q(q + LatticeMomentum::planar(0.0, h));
            let gy0 = self.grad2_q(q - LatticeMomentum::planar(0.0, h));
            let hxx = (gx1[0] - gx0[0]) / (2.0 * h);
            let hxy = 0.5 * ((gx1[1] - gx0[1]) + (gy1[0] - gy0[0])) / (2.0 * h);
            let hyy = (gy1[1] - gy0[1]) / (2.0 * h);
            let det = hxx * hyy - hxy * hxy;
            if det.abs() < 1e-14 || !det.is_finite() {
                return None;
            }
            let dx = -(hyy * g[0] - hxy * g[1]) / det;
            let dy = -(-hxy * g[0] + hxx * g[1]) / det;
            let step = dx.hypot(dy);
            if step > 2.0 * cell {
                return None;
            }
            q = q + LatticeMomentum::planar(dx, dy);
        }
        let g = self.grad2_q(q);
        if g[0].hypot(g[1]) < 1e-7 {
            Some(q)
        } else {
            None
        }
    }
}

/// A point of a discretized planar level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub q: LatticeMomentum,
    /// Arc length attributed to the point.
    pub weight: f64,
    /// ‖∇_q Δ⁽²⁾‖ at the point.
    pub speed: f64,
}

/// L(ω,P) with the E ± i0 prescription selected by `side` on the real axis.
pub fn local_propagator(
    disp: &Dispersion,
    omega: Complex64,
    total: LatticeMomentum,
    side: Side,
    opts: &PropagatorOptions,
) -> Result<PropagatorDecomposition> {
    PairPropagator::new(disp, total, *opts).evaluate(omega, side)
}

/// ρ₀(E,P), the joint density of states of dark pairs.
pub fn dark_pair_dos(
    disp: &Dispersion,
    e: f64,
    total: LatticeMomentum,
    opts: &PropagatorOptions,
) -> Result<f64> {
    PairPropagator::new(disp, total, *opts).dark_pair_dos(e)
}

/// Critical energies of the dark-pair band at total momentum P.
pub fn critical_energies(
    disp: &Dispersion,
    total: LatticeMomentum,
    opts: &PropagatorOptions,
) -> Result<Vec<CriticalPoint>> {
    PairPropagator::new(disp, total, *opts).critical_energies()
}

/// Volume of BZ⁽²⁾ (half the Brillouin zone).
pub fn pair_zone_volume(disp: &Dispersion) -> f64 {
    0.5 * disp.config().zone_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ArrayConfig, Polarization};

    fn chain() -> Dispersion {
        Dispersion::new(ArrayConfig::chain(0.25)).unwrap()
    }

    #[test]
    fn domains_at_zero_momentum() {
        let d = chain();
        let p0 = LatticeMomentum::chain(0.0);
        assert_eq!(domain_of(&d, p0, LatticeMomentum::chain(8.0)), ChannelIndex::DARK);
        assert_eq!(domain_of(&d, p0, LatticeMomentum::chain(3.0)), ChannelIndex::TWO_PHOTON);
        // P/2 just inside the cone, q pushes one constituent out
        let p = LatticeMomentum::chain(2.0 * (K0 - 0.1));
        assert_eq!(domain_of(&d, p, LatticeMomentum::chain(0.5)), ChannelIndex::ONE_PHOTON);
    }

    #[test]
    fn golden_point_standard_kernel() {
        // independent prototype: PV = −3.64155, L₂ = 1.57762 − 0.83713i, ∂Δ⁽²⁾ = 0.498507
        let d = chain();
        let q = 2.0 / 3.0 * PI / 0.25;
        let e = 2.0 * d.delta(LatticeMomentum::chain(q));
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let dec = prop.evaluate(Complex64::new(e, 0.0), Side::AboveCut).unwrap();
        assert!((dec.l0_principal.unwrap() + 3.64155).abs() < 2e-5, "{dec:?}");
        assert!((dec.l[2] - Complex64::new(1.57762, -0.83713)).norm() < 2e-5);
        assert!((dec.rho[0] - 1.0 / 0.498507).abs() < 1e-5);
        assert_eq!(dec.l[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn far_off_shell() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(1.0), PropagatorOptions::default());
        let w = Complex64::new(0.7, 1e5);
        let l = prop.evaluate(w, Side::AboveCut).unwrap().total_value();
        let vol = pair_zone_volume(&d);
        assert!(((l - vol / w) / (vol / w)).norm() < 1e-3);
    }

    #[test]
    fn single_quadrature_agrees_off_axis() {
        let d = chain();
        let total = LatticeMomentum::chain(3.0);
        let prop = PairPropagator::new(&d, total, PropagatorOptions::default());
        let w = Complex64::new(0.4, 0.05);
        let l = prop.evaluate(w, Side::AboveCut).unwrap().total_value();
        let f = |p: f64| {
            let p1 = LatticeMomentum::chain(p);
            Complex64::new(0.5, 0.0) / (w - d.epsilon(p1) - d.epsilon(total - p1))
        };
        let edge = PI / 0.25;
        let opts = QuadOptions {
            rel_tol: 1e-11,
            max_intervals: 20000,
            ..Default::default()
        };
        let brute = integrate(f, -edge, edge, &[-K0, K0, 3.0 - K0, 3.0 + K0], &opts).value;
        assert!(((l - brute) / brute).norm() < 1e-8, "{l} {brute}");
    }

    #[test]
    fn conjugation_across_cut() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let e = Complex64::new(1.0, 0.0);
        let up = prop.evaluate(e, Side::AboveCut).unwrap();
        let dn = prop.evaluate(e, Side::BelowCut).unwrap();
        let lhs = dn.total_value();
        let rhs = up.l[0].conj() + up.l[1] + up.l[2];
        assert!((lhs - rhs).norm() < 1e-12);
        assert!((up.l[0].im + PI * up.rho[0]).abs() < 1e-12);
    }

    #[test]
    fn grid_reproduces_value() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.8), PropagatorOptions::default());
        for side in [Side::AboveCut, Side::BelowCut] {
            let (dec, grid) = prop.evaluate_with_grid(Complex64::new(1.1, 0.0), side).unwrap();
            let s: Complex64 = grid.iter().map(|n| n.weight).sum();
            assert!((s - dec.total_value()).norm() < 1e-9 * dec.total_value().norm());
        }
    }

    #[test]
    fn chain_dos_matches_propagator() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        for &e in &[0.0, 0.9, 1.40737, 2.2] {
            let dec = prop.evaluate(Complex64::new(e, 0.0), Side::AboveCut).unwrap();
            let rho = prop.dark_pair_dos(e).unwrap();
            assert!((rho - dec.rho[0]).abs() < 1e-9 * rho.max(1.0), "{e}: {rho} {}", dec.rho[0]);
        }
        assert_eq!(prop.dark_pair_dos(10.0).unwrap(), 0.0);
    }

    #[test]
    fn chain_critical_points() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let crit = prop.critical_energies().unwrap();
        let edge = PI / 0.25;
        let top = crit.iter().find(|c| (c.q.x - edge).abs() < 1e-6).expect("zone edge");
        assert!(top.gradient < 1e-8);
        assert!((top.energy - 2.0 * d.delta(LatticeMomentum::chain(edge))).abs() < 1e-10);
    }

    #[test]
    fn planar_level_set_and_critical_points() {
        let d = Dispersion::new(ArrayConfig::square(0.3, Polarization::PerpendicularToPlane)).unwrap();
        let opts = PropagatorOptions {
            contour_grid: 64,
            ..Default::default()
        };
        let prop = PairPropagator::new(&d, LatticeMomentum::planar(0.0, 0.0), opts);
        let crit = prop.critical_energies().unwrap();
        assert!(!crit.is_empty());
        for c in &crit {
            assert!(c.gradient < 1e-6);
        }
        let corner = PI / 0.3;
        assert!(crit
            .iter()
            .any(|c| (c.q.x.abs() - corner).abs() < 1e-4 && (c.q.y - corner).abs() < 1e-4));
    }

    #[test]
    fn planar_dos_paths_agree() {
        let d = Dispersion::new(ArrayConfig::square(0.3, Polarization::PerpendicularToPlane)).unwrap();
        let opts = PropagatorOptions {
            rel_tol: 1e-4,
            contour_grid: 128,
            ..Default::default()
        };
        let prop = PairPropagator::new(&d, LatticeMomentum::planar(0.0, 0.0), opts);
        let dec = prop.evaluate(Complex64::new(-1.0, 0.0), Side::AboveCut).unwrap();
        let rho = prop.dark_pair_dos(-1.0).unwrap();
        assert!((rho - dec.rho[0]).abs() < 1e-3 * rho, "{rho} {}", dec.rho[0]);
        assert!((dec.l[0].im + PI * dec.rho[0]).abs() < 1e-12 * dec.rho[0]);
    }
}
