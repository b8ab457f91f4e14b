//! Array geometry, light-cone classification and the collective dispersion ε(p).
//!
//! Units: Γ₀ = 1 for energies, λ₀ = 1 for lengths, so k0 = 2π.
//! The dispersion is ε(p) = −i/2 − (3π/k0) Σ_{R≠0} ê*·G(R)·ê e^{ip·R} with G the
//! free-space dyadic Green's function; a single atom decays at Γ₀ = 1.

use crate::error::{Error, Result};
use crate::special::{erfc, erfc_complex, erfi, polylog_unit};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

pub const K0: f64 = 2.0 * PI;
pub const GAMMA0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d_square")]
    TwoDSquare,
}

impl Dimension {
    pub fn rank(self) -> usize {
        match self {
            Dimension::OneD => 1,
            Dimension::TwoDSquare => 2,
        }
    }
}

/// Dipole orientation. For a chain, `CircularInPlane` means circular polarization in
/// the plane transverse to the chain axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    ParallelToArray,
    PerpendicularToPlane,
    CircularInPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub dimension: Dimension,
    /// Lattice spacing in units of λ₀.
    pub spacing: f64,
    pub polarization: Polarization,
    /// ω_eg/Γ₀, fixes the speed of light c = ω_eg/k0 in internal units.
    #[serde(default = "default_quality")]
    pub quality_factor: f64,
    /// Relative tolerance of the accelerated lattice sums.
    #[serde(default = "default_sum_tol")]
    pub sum_tolerance: f64,
    /// Ewald splitting parameter (1/λ₀); defaults to √π/d.
    #[serde(default)]
    pub ewald_eta: Option<f64>,
}

fn default_quality() -> f64 {
    1e6
}

fn default_sum_tol() -> f64 {
    1e-8
}

impl ArrayConfig {
    /// Chain with dipoles along the array axis.
    pub fn chain(spacing: f64) -> Self {
        ArrayConfig {
            dimension: Dimension::OneD,
            spacing,
            polarization: Polarization::ParallelToArray,
            quality_factor: default_quality(),
            sum_tolerance: default_sum_tol(),
            ewald_eta: None,
        }
    }

    pub fn square(spacing: f64, polarization: Polarization) -> Self {
        ArrayConfig {
            dimension: Dimension::TwoDSquare,
            polarization,
            ..Self::chain(spacing)
        }
    }

    pub fn with_polarization(mut self, polarization: Polarization) -> Self {
        self.polarization = polarization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.spacing;
        if !(d > 0.0 && d < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "spacing must lie in (0, 0.5) λ₀, got {d}"
            )));
        }
        if !(self.quality_factor > 0.0 && self.quality_factor.is_finite()) {
            return Err(Error::InvalidConfig("quality_factor must be positive".into()));
        }
        if !(self.sum_tolerance > 0.0 && self.sum_tolerance < 1e-2) {
            return Err(Error::InvalidConfig("sum_tolerance must lie in (0, 1e-2)".into()));
        }
        if let Some(eta) = self.ewald_eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidConfig("ewald_eta must be positive".into()));
            }
        }
        if self.dimension == Dimension::OneD
            && self.polarization == Polarization::PerpendicularToPlane
        {
            return Err(Error::InvalidConfig(
                "a chain has no plane: use parallel_to_array or circular_in_plane".into(),
            ));
        }
        Ok(())
    }

    pub fn k0(&self) -> f64 {
        K0
    }

    /// π/d, the half width of the Brillouin zone.
    pub fn zone_edge(&self) -> f64 {
        PI / self.spacing
    }

    /// Volume of the Brillouin zone, (2π/d)^dim.
    pub fn zone_volume(&self) -> f64 {
        (2.0 * PI / self.spacing).powi(self.dimension.rank() as i32)
    }

    /// Speed of light in units of Γ₀λ₀.
    pub fn speed_of_light(&self) -> f64 {
        self.quality_factor / K0
    }

    pub fn wrap(&self, p: LatticeMomentum) -> LatticeMomentum {
        let g = 2.0 * PI / self.spacing;
        let w = |x: f64| {
            let mut y = x - g * (x / g).round();
            let half = 0.5 * g;
            if y < -half {
                y += g;
            }
            if y > half {
                y -= g;
            }
            y
        };
        match self.dimension {
            Dimension::OneD => LatticeMomentum::chain(w(p.x)),
            Dimension::TwoDSquare => LatticeMomentum::planar(w(p.x), w(p.y)),
        }
    }

    pub fn classify(&self, p: LatticeMomentum) -> Classification {
        classify_momentum(p, self)
    }
}

/// Lattice momentum in units of 1/λ₀. Chains use `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatticeMomentum {
    pub x: f64,
    pub y: f64,
}

impl LatticeMomentum {
    pub fn chain(x: f64) -> Self {
        LatticeMomentum { x, y: 0.0 }
    }

    pub fn planar(x: f64, y: f64) -> Self {
        LatticeMomentum { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, o: &LatticeMomentum) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn scale(&self, s: f64) -> Self {
        LatticeMomentum {
            x: self.x * s,
            y: self.y * s,
        }
    }
}

impl std::ops::Add for LatticeMomentum {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        LatticeMomentum {
            x: self.x + o.x,
            y: self.y + o.y,
        }
    }
}

impl std::ops::Sub for LatticeMomentum {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        LatticeMomentum {
            x: self.x - o.x,
            y: self.y - o.y,
        }
    }
}

impl std::ops::Neg for LatticeMomentum {
    type Output = Self;
    fn neg(self) -> Self {
        LatticeMomentum {
            x: -self.x,
            y: -self.y,
        }
    }
}

impl fmt::Display for LatticeMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Dark,
    Bright,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Dark => "dark",
            Classification::Bright => "bright",
        })
    }
}

/// Bright iff ‖p‖ ≤ k0 after wrapping into the Brillouin zone; the edge counts as bright.
pub fn classify_momentum(p: LatticeMomentum, cfg: &ArrayConfig) -> Classification {
    if cfg.wrap(p).norm() <= K0 {
        Classification::Bright
    } else {
        Classification::Dark
    }
}

/// Returns the dispersion for a validated configuration.
pub fn dispersion(cfg: &ArrayConfig) -> Result<Dispersion> {
    Dispersion::new(*cfg)
}

/// Collective single-excitation dispersion over the Brillouin zone.
#[derive(Debug, Clone)]
pub struct Dispersion {
    cfg: ArrayConfig,
    ewald: Option<EwaldTable>,
}

impl Dispersion {
    pub fn new(cfg: ArrayConfig) -> Result<Self> {
        cfg.validate()?;
        let ewald = match cfg.dimension {
            Dimension::OneD => None,
            Dimension::TwoDSquare => Some(EwaldTable::new(&cfg)?),
        };
        Ok(Dispersion { cfg, ewald })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.cfg
    }

    pub fn classify(&self, p: LatticeMomentum) -> Classification {
        classify_momentum(p, &self.cfg)
    }

    /// ε(p) = Δ(p) − iΓ(p)/2. Non-finite on a divergent light-cone edge.
    pub fn epsilon(&self, p: LatticeMomentum) -> Complex64 {
        Complex64::new(self.delta(p), -0.5 * self.gamma(p))
    }

    /// Checked ε(p): reports light-cone divergences and sum non-convergence.
    pub fn try_epsilon(&self, p: LatticeMomentum) -> Result<Complex64> {
        let norm = self.cfg.wrap(p).norm();
        if let Some(t) = &self.ewald {
            let (_, remainder) = t.shift(self.cfg.wrap(p));
            if remainder > self.cfg.sum_tolerance {
                return Err(Error::NonConvergentSum {
                    remainder,
                    tolerance: self.cfg.sum_tolerance,
                });
            }
        }
        let e = self.epsilon(p);
        if !e.re.is_finite() || !e.im.is_finite() {
            return Err(Error::LightConeSingularity { norm });
        }
        Ok(e)
    }

    /// Collective frequency shift Δ(p).
    pub fn delta(&self, p: LatticeMomentum) -> f64 {
        let q = self.cfg.wrap(p);
        match &self.ewald {
            None => chain_epsilon(&self.cfg, q.x).re,
            Some(t) => t.shift(q).0,
        }
    }

    /// Collective decay rate Γ(p), exactly zero outside the light cone.
    pub fn gamma(&self, p: LatticeMomentum) -> f64 {
        let q = self.cfg.wrap(p);
        let n2 = q.x * q.x + q.y * q.y;
        if n2 > K0 * K0 {
            return 0.0;
        }
        match self.cfg.dimension {
            Dimension::OneD => (-2.0 * chain_epsilon(&self.cfg, q.x).im).max(0.0),
            Dimension::TwoDSquare => square_gamma(&self.cfg, q),
        }
    }

    /// ∇Δ(p): analytic for chains, central differences on the plane with a step of
    /// 1e-6/λ₀, shrunk so the stencil never crosses the light cone.
    pub fn delta_gradient(&self, p: LatticeMomentum) -> [f64; 2] {
        match self.cfg.dimension {
            Dimension::OneD => [chain_depsilon(&self.cfg, self.cfg.wrap(p).x).re, 0.0],
            Dimension::TwoDSquare => {
                let gap = (self.cfg.wrap(p).norm() - K0).abs();
                let h = (0.25 * gap).min(1e-6);
                if h == 0.0 {
                    return [f64::NAN, f64::NAN];
                }
                let dx = (self.delta(p + LatticeMomentum::planar(h, 0.0))
                    - self.delta(p - LatticeMomentum::planar(h, 0.0)))
                    / (2.0 * h);
                let dy = (self.delta(p + LatticeMomentum::planar(0.0, h))
                    - self.delta(p - LatticeMomentum::planar(0.0, h)))
                    / (2.0 * h);
                [dx, dy]
            }
        }
    }

    /// Imaginary part of the raw lattice sum (−Γ/2 where it is defined), used to
    /// cross-check the analytic decay rate.
    pub fn lattice_sum_decay(&self, p: LatticeMomentum) -> f64 {
        let q = self.cfg.wrap(p);
        match &self.ewald {
            None => -2.0 * chain_epsilon(&self.cfg, q.x).im,
            Some(t) => -2.0 * t.full(q).im,
        }
    }

    /// Tabulates Δ, Γ and the classification at the given momenta.
    pub fn table(&self, points: &[LatticeMomentum]) -> Vec<DispersionRow> {
        points
            .iter()
            .map(|&p| {
                let q = self.cfg.wrap(p);
                DispersionRow {
                    p: q,
                    delta: self.delta(q),
                    gamma: self.gamma(q),
                    class: self.classify(q),
                }
            })
            .collect()
    }

    /// Probes Δ and Γ on a geometric approach to ‖p‖ = k0 along `direction`
    /// (an angle in the plane, ignored for chains).
    pub fn edge_behavior(&self, direction: f64) -> EdgeReport {
        let (ux, uy) = match self.cfg.dimension {
            Dimension::OneD => (1.0, 0.0),
            Dimension::TwoDSquare => (direction.cos(), direction.sin()),
        };
        let samples: Vec<EdgeSample> = (2..=9)
            .map(|j| {
                let dist = 10f64.powi(-j);
                let r = K0 * (1.0 - dist);
                let p = LatticeMomentum::planar(r * ux, r * uy);
                EdgeSample {
                    distance: dist,
                    delta: self.delta(p),
                    gamma: self.gamma(p),
                }
            })
            .collect();
        let diverges = |f: &dyn Fn(&EdgeSample) -> f64| {
            let first = (f(&samples[1]) - f(&samples[0])).abs();
            let n = samples.len();
            let last = (f(&samples[n - 1]) - f(&samples[n - 2])).abs();
            !f(&samples[n - 1]).is_finite() || last > 0.5 * first.max(1e-12)
        };
        EdgeReport {
            delta_divergent: diverges(&|s| s.delta),
            gamma_divergent: diverges(&|s| s.gamma),
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DispersionRow {
    pub p: LatticeMomentum,
    pub delta: f64,
    pub gamma: f64,
    pub class: Classification,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeSample {
    pub distance: f64,
    pub delta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeReport {
    pub delta_divergent: bool,
    pub gamma_divergent: bool,
    pub samples: Vec<EdgeSample>,
}

/// Coupling g_p = √(Γ(p) v_g/2π) of a bright spin wave to its photon continuum,
/// with the on-shell photon speed v_g = c.
pub fn coupling_g(disp: &Dispersion, p: LatticeMomentum) -> Result<f64> {
    if disp.classify(p) == Classification::Dark {
        return Err(Error::DarkMomentum {
            norm: disp.config().wrap(p).norm(),
        });
    }
    let vg = disp.config().speed_of_light();
    Ok((disp.gamma(p) * vg / (2.0 * PI)).sqrt())
}

// Sums S_s = Li_s(e^{i(k0+p)d}) + Li_s(e^{i(k0−p)d}).
fn chain_sums(d: f64, p: f64, s: u32) -> Complex64 {
    polylog_unit(s, (K0 + p) * d) + polylog_unit(s, (K0 - p) * d)
}

fn chain_diffs(d: f64, p: f64, s: u32) -> Complex64 {
    polylog_unit(s, (K0 + p) * d) - polylog_unit(s, (K0 - p) * d)
}

fn li0_unit(theta: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, theta);
    z / (Complex64::new(1.0, 0.0) - z)
}

/// Closed-form chain dispersion.
fn chain_epsilon(cfg: &ArrayConfig, p: f64) -> Complex64 {
    let d = cfg.spacing;
    let kd = K0 * d;
    let i = Complex64::i();
    let base = Complex64::new(0.0, -0.5);
    match cfg.polarization {
        Polarization::ParallelToArray => {
            let s3 = chain_sums(d, p, 3);
            let s2 = chain_sums(d, p, 2);
            base - 1.5 / kd.powi(3) * (s3 - i * kd * s2)
        }
        _ => {
            let s3 = chain_sums(d, p, 3);
            let s2 = chain_sums(d, p, 2);
            let s1 = chain_sums(d, p, 1);
            base - 0.75 / kd.powi(3) * (kd * kd * s1 + i * kd * s2 - s3)
        }
    }
}

/// dε/dp for the chain.
fn chain_depsilon(cfg: &ArrayConfig, p: f64) -> Complex64 {
    let d = cfg.spacing;
    let kd = K0 * d;
    let i = Complex64::i();
    match cfg.polarization {
        Polarization::ParallelToArray => {
            let d2 = chain_diffs(d, p, 2);
            let d1 = chain_diffs(d, p, 1);
            -1.5 / kd.powi(3) * i * d * (d2 - i * kd * d1)
        }
        _ => {
            let d2 = chain_diffs(d, p, 2);
            let d1 = chain_diffs(d, p, 1);
            let d0 = li0_unit((K0 + p) * d) - li0_unit((K0 - p) * d);
            -0.75 / kd.powi(3) * i * d * (kd * kd * d0 + i * kd * d1 - d2)
        }
    }
}

pub(crate) fn polarization_vector(pol: Polarization) -> [Complex64; 3] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    match pol {
        Polarization::ParallelToArray => [one, z, z],
        Polarization::PerpendicularToPlane => [z, z, one],
        Polarization::CircularInPlane => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            [Complex64::new(s, 0.0), Complex64::new(0.0, s), z]
        }
    }
}

/// Γ(p) = 3π(1 − |ê·k̂|²)/(k0 d² κ), κ = √(k0² − p²), for the square lattice.
fn square_gamma(cfg: &ArrayConfig, p: LatticeMomentum) -> f64 {
    let n2 = p.x * p.x + p.y * p.y;
    let kz2 = K0 * K0 - n2;
    if kz2 < 0.0 {
        return 0.0;
    }
    let kz = kz2.sqrt();
    let e = polarization_vector(cfg.polarization);
    let proj = e[0] * p.x + e[1] * p.y + e[2] * kz;
    let f = 1.0 - proj.norm_sqr() / (K0 * K0);
    3.0 * PI * f / (K0 * cfg.spacing * cfg.spacing * kz)
}

/// Precomputed Ewald data for the square lattice with a fixed polarization.
#[derive(Debug, Clone)]
struct EwaldTable {
    d: f64,
    eta: f64,
    n_spec: i32,
    n_real: i32,
    e: [Complex64; 3],
    /// ê*·(h I + ∇∇h/k²)·ê for R = (m d, n d), row-major over m, n ∈ [−n_real, n_real].
    spatial: Vec<Complex64>,
    self_term: Complex64,
}

impl EwaldTable {
    fn new(cfg: &ArrayConfig) -> Result<Self> {
        let d = cfg.spacing;
        let eta = cfg.ewald_eta.unwrap_or(PI.sqrt() / d);
        let k = K0;
        let b = k / (2.0 * eta);
        let c = 2.0 * eta / PI.sqrt();
        let e = polarization_vector(cfg.polarization);
        // shells until the Gaussian factors fall far below the tolerance
        let target = (cfg.sum_tolerance * 1e-4).ln().abs();
        let n_real = ((target / (eta * d).powi(2)).sqrt() + 1.0).ceil() as i32;
        let g = 2.0 * PI / d;
        let n_spec = ((2.0 * eta * target.sqrt()) / g + std::f64::consts::FRAC_1_SQRT_2).ceil() as i32 + 1;
        if n_real > 60 || n_spec > 60 {
            return Err(Error::InvalidConfig(format!(
                "ewald_eta = {eta} needs too many shells ({n_real}, {n_spec})"
            )));
        }
        let side = (2 * n_real + 1) as usize;
        let mut spatial = vec![Complex64::new(0.0, 0.0); side * side];
        for m in -n_real..=n_real {
            for n in -n_real..=n_real {
                if m == 0 && n == 0 {
                    continue;
                }
                let rx = m as f64 * d;
                let ry = n as f64 * d;
                let s = rx.hypot(ry);
                let (ux, uy) = (rx / s, ry / s);
                let a = Complex64::from_polar(1.0, k * s)
                    * erfc_complex(Complex64::new(eta * s, b));
                let bb = Complex64::from_polar(1.0, -k * s)
                    * erfc_complex(Complex64::new(eta * s, -b));
                let ex = (b * b - eta * eta * s * s).exp();
                let nn = a + bb;
                let mm = a - bb;
                let n1 = Complex64::i() * k * mm - 2.0 * c * ex;
                let n2 = -k * k * nn + 4.0 * c * eta * eta * s * ex;
                let f = 8.0 * PI;
                let h = nn / (f * s);
                let h1 = n1 / (f * s) - nn / (f * s * s);
                let h2 = n2 / (f * s) - 2.0 * n1 / (f * s * s) + 2.0 * nn / (f * s * s * s);
                // ê*·∇∇h·ê with R̂ in plane: h'' |ê·R̂|² + (h'/s)(|ê|² − |ê·R̂|²)
                let er = e[0] * ux + e[1] * uy;
                let er2 = er.norm_sqr();
                let ee = e.iter().map(|v| v.norm_sqr()).sum::<f64>();
                let hess = h2 * er2 + h1 / s * (ee - er2);
                let idx = ((m + n_real) as usize) * side + (n + n_real) as usize;
                spatial[idx] = h * ee + hess / (k * k);
            }
        }
        // self term: smooth remainder h(s) − e^{iks}/(4πs) = u0 + u2 s² + …
        let eb = (b * b).exp();
        let erfi_b = erfi(b);
        let u0 = Complex64::new(
            -eta * eb / (2.0 * PI.powf(1.5)) + k * erfi_b / (4.0 * PI),
            -k / (4.0 * PI),
        );
        let u2 = Complex64::new(
            eta * (2.0 * eta * eta + k * k) * eb / (12.0 * PI.powf(1.5))
                - k.powi(3) * erfi_b / (24.0 * PI),
            k.powi(3) / (24.0 * PI),
        );
        let self_term = u0 + 2.0 * u2 / (k * k);
        Ok(EwaldTable {
            d,
            eta,
            n_spec,
            n_real,
            e,
            spatial,
            self_term,
        })
    }

    /// Full complex lattice sum ε(p), including the Ewald imaginary part.
    fn full(&self, p: LatticeMomentum) -> Complex64 {
        let (s, _) = self.sum(p);
        Complex64::new(0.0, -0.5) - 3.0 * PI / K0 * s
    }

    /// Δ(p) and the magnitude of the outermost spectral shell (relative).
    fn shift(&self, p: LatticeMomentum) -> (f64, f64) {
        let (s, rem) = self.sum(p);
        ((-3.0 * PI / K0 * s).re, rem)
    }

    fn sum(&self, p: LatticeMomentum) -> (Complex64, f64) {
        let k = K0;
        let d = self.d;
        let eta = self.eta;
        let c = 2.0 * eta / PI.sqrt();
        let area = d * d;
        let g = 2.0 * PI / d;
        let ez2 = self.e[2].norm_sqr();
        let mut spec = Complex64::new(0.0, 0.0);
        let mut outer = 0.0;
        for m in -self.n_spec..=self.n_spec {
            let kx = p.x + g * m as f64;
            for n in -self.n_spec..=self.n_spec {
                let ky = p.y + g * n as f64;
                let kt2 = kx * kx + ky * ky;
                let ke = self.e[0] * kx + self.e[1] * ky;
                let inplane = 1.0 - ke.norm_sqr() / (k * k);
                let kap2 = k * k - kt2;
                let term = if kap2 < 0.0 {
                    let kap = (-kap2).sqrt();
                    let x = kap / (2.0 * eta);
                    let ec = erfc(x);
                    let gterm = ec / kap;
                    let zz = kap * ec - c * (-x * x).exp();
                    Complex64::new(gterm * inplane + ez2 * zz / (k * k), 0.0)
                } else {
                    let kap = kap2.sqrt();
                    let x = kap / (2.0 * eta);
                    let ei = erfi(x);
                    let gterm = Complex64::new(-ei, 1.0) / kap;
                    let zz = Complex64::new(kap * ei - c * (x * x).exp(), -kap);
                    gterm * inplane + ez2 * zz / (k * k)
                };
                if m.abs() == self.n_spec || n.abs() == self.n_spec {
                    outer += term.norm();
                }
                spec += term;
            }
        }
        spec /= 2.0 * area;
        outer /= 2.0 * area;

        let side = (2 * self.n_real + 1) as usize;
        let px = Complex64::from_polar(1.0, p.x * d);
        let py = Complex64::from_polar(1.0, p.y * d);
        let mut ys = Vec::with_capacity(side);
        let mut cur = py.powi(-self.n_real);
        for _ in 0..side {
            ys.push(cur);
            cur *= py;
        }
        let mut real = Complex64::new(0.0, 0.0);
        let mut xm = px.powi(-self.n_real);
        for i in 0..side {
            let row = &self.spatial[i * side..(i + 1) * side];
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, y) in row.iter().zip(ys.iter()) {
                acc += v * y;
            }
            real += xm * acc;
            xm *= px;
        }
        let total = spec + real + self.self_term;
        (total, outer / total.norm().max(1e-300))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn classify_examples() {
        let cfg = ArrayConfig::chain(0.25);
        assert_eq!(cfg.classify(LatticeMomentum::chain(0.0)), Classification::Bright);
        let q = 2.0 / 3.0 * PI / 0.25;
        assert_eq!(cfg.classify(LatticeMomentum::chain(q)), Classification::Dark);
        assert_eq!(cfg.classify(LatticeMomentum::chain(K0)), Classification::Bright);
        // wrapping: p + 2π/d is the same point
        assert_eq!(
            cfg.classify(LatticeMomentum::chain(0.1 + 8.0 * PI)),
            Classification::Bright
        );
    }

    #[test]
    fn validation() {
        assert!(ArrayConfig::chain(0.5).validate().is_err());
        assert!(ArrayConfig::chain(0.0).validate().is_err());
        assert!(ArrayConfig::chain(0.3).validate().is_ok());
        let bad = ArrayConfig::chain(0.3).with_polarization(Polarization::PerpendicularToPlane);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn chain_reference_values() {
        // values from an independent arbitrary-precision evaluation
        let disp = Dispersion::new(ArrayConfig::chain(0.25)).unwrap();
        assert!(approx(disp.delta(LatticeMomentum::chain(0.0)), -1.026_452, 2e-6));
        assert!(approx(disp.gamma(LatticeMomentum::chain(0.0)), 3.0, 1e-12));
        assert!(approx(disp.delta(LatticeMomentum::chain(K0)), -0.116_305, 2e-6));
        let q = 2.0 / 3.0 * PI / 0.25;
        assert!(approx(disp.delta(LatticeMomentum::chain(q)), 0.703_686, 2e-6));
        assert_eq!(disp.gamma(LatticeMomentum::chain(q)), 0.0);
    }

    #[test]
    fn chain_gamma_matches_radiated_power() {
        for &d in &[0.1, 0.25, 0.45] {
            let disp = Dispersion::new(ArrayConfig::chain(d)).unwrap();
            for i in 0..20 {
                let p = -K0 + 2.0 * K0 * (i as f64 + 0.5) / 20.0;
                let exact = 3.0 * PI / (2.0 * K0 * d) * (1.0 - p * p / (K0 * K0));
                assert!(approx(disp.gamma(LatticeMomentum::chain(p)), exact, 1e-12));
            }
        }
        let disp = Dispersion::new(
            ArrayConfig::chain(0.25).with_polarization(Polarization::CircularInPlane),
        )
        .unwrap();
        for &p in &[0.0, 2.0, 5.0] {
            let exact = 3.0 * PI / (4.0 * K0 * 0.25) * (1.0 + p * p / (K0 * K0));
            assert!(approx(disp.gamma(LatticeMomentum::chain(p)), exact, 1e-12));
        }
    }

    #[test]
    fn chain_derivative_matches_differences() {
        for pol in [Polarization::ParallelToArray, Polarization::CircularInPlane] {
            let disp = Dispersion::new(ArrayConfig::chain(0.3).with_polarization(pol)).unwrap();
            for &p in &[0.5, 3.0, 7.0, 9.5] {
                let h = 1e-5;
                let fd = (disp.delta(LatticeMomentum::chain(p + h))
                    - disp.delta(LatticeMomentum::chain(p - h)))
                    / (2.0 * h);
                let an = disp.delta_gradient(LatticeMomentum::chain(p))[0];
                assert!(approx(fd, an, 1e-7), "{pol:?} p={p}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn square_gamma_matches_ewald_imaginary_part() {
        for pol in [
            Polarization::ParallelToArray,
            Polarization::PerpendicularToPlane,
            Polarization::CircularInPlane,
        ] {
            let disp = Dispersion::new(ArrayConfig::square(0.25, pol)).unwrap();
            for &(x, y) in &[(0.3, 0.2), (2.0, 3.0), (-4.0, 1.5), (7.0, 1.0), (9.0, 10.0)] {
                let p = LatticeMomentum::planar(x, y);
                let a = disp.gamma(p);
                let b = disp.lattice_sum_decay(p);
                assert!(approx(a, b, 1e-10), "{pol:?} {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ewald_independent_of_splitting() {
        for pol in [Polarization::PerpendicularToPlane, Polarization::ParallelToArray] {
            let base = ArrayConfig::square(0.25, pol);
            let a = Dispersion::new(base).unwrap();
            let mut alt = base;
            alt.ewald_eta = Some(1.6 * PI.sqrt() / 0.25);
            let b = Dispersion::new(alt).unwrap();
            for &(x, y) in &[(0.3, 0.2), (2.0, 3.0), (7.0, 1.0), (9.0, 10.0), (12.0, -3.0)] {
                let p = LatticeMomentum::planar(x, y);
                assert!(approx(a.delta(p), b.delta(p), 1e-11), "{pol:?} {p}");
            }
        }
        // reference values from an independent Ewald evaluation
        let z = Dispersion::new(ArrayConfig::square(0.25, Polarization::PerpendicularToPlane))
            .unwrap();
        assert!(approx(z.delta(LatticeMomentum::planar(0.3, 0.2)), 2.576_393_318_768_829, 1e-10));
        assert!(approx(z.delta(LatticeMomentum::planar(9.0, 10.0)), -0.294_030_932_656_350_7, 1e-10));
    }

    #[test]
    fn inversion_symmetry() {
        let disp = Dispersion::new(ArrayConfig::square(0.3, Polarization::CircularInPlane)).unwrap();
        for &(x, y) in &[(1.0, 2.0), (8.0, -3.0), (10.0, 10.0)] {
            let p = LatticeMomentum::planar(x, y);
            assert!((disp.epsilon(p) - disp.epsilon(-p)).norm() < 1e-10);
        }
    }

    #[test]
    fn edge_probe() {
        let chain = Dispersion::new(ArrayConfig::chain(0.25)).unwrap();
        let r = chain.edge_behavior(0.0);
        assert!(!r.delta_divergent && !r.gamma_divergent);
        let transverse = Dispersion::new(
            ArrayConfig::chain(0.25).with_polarization(Polarization::CircularInPlane),
        )
        .unwrap();
        assert!(transverse.edge_behavior(0.0).delta_divergent);
        let plane = Dispersion::new(ArrayConfig::square(0.25, Polarization::PerpendicularToPlane))
            .unwrap();
        assert!(plane.edge_behavior(0.3).gamma_divergent);
    }

    #[test]
    fn coupling_rules() {
        let disp = Dispersion::new(ArrayConfig::chain(0.25)).unwrap();
        assert!(matches!(
            coupling_g(&disp, LatticeMomentum::chain(9.0)),
            Err(Error::DarkMomentum { .. })
        ));
        let g = coupling_g(&disp, LatticeMomentum::chain(K0)).unwrap();
        assert!(g * g < 1e-9 * disp.config().speed_of_light());
        let g0 = coupling_g(&disp, LatticeMomentum::chain(0.0)).unwrap();
        let c = disp.config().speed_of_light();
        assert!(approx(g0 * g0, 3.0 * c / (2.0 * PI), 1e-6 * g0 * g0));
    }
}
