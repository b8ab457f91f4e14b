//! Two-excitation scattering: hard-core and general-potential T-matrices, the 3×3
//! on-shell channel S-matrix, doorway-state samplers and dark-state wavefunctions.

use crate::error::{Error, Result};
use crate::lattice::{Classification, Dimension, Dispersion, LatticeMomentum};
use crate::propagator::{
    domain_of, ChannelIndex, GridNode, PairPropagator, PropagatorDecomposition, PropagatorOptions, Side,
};
use crate::single_excitation::atomic_amplitude;
use nalgebra::DMatrix;
use rayon::prelude::*;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Hard-core T-matrix T̄ = −1/L, independent of the relative momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TMatrixContact {
    pub value: Complex64,
    pub propagator: PropagatorDecomposition,
}

impl TMatrixContact {
    pub fn near_critical(&self) -> bool {
        self.propagator.critical.is_some()
    }
}

fn contact_from(dec: PropagatorDecomposition, side: Side) -> Result<TMatrixContact> {
    let l = if dec.omega.im == 0.0 { dec.value(side) } else { dec.total_value() };
    if l.norm() == 0.0 || !l.norm().is_finite() {
        return Err(Error::PropagatorZero { energy: dec.omega.re });
    }
    Ok(TMatrixContact {
        value: -1.0 / l,
        propagator: dec,
    })
}

/// T̄(ω,P) = −1/L(ω,P), with L(E ± i0) selected by `side` on the real axis.
pub fn tmatrix_contact(
    disp: &Dispersion,
    omega: Complex64,
    side: Side,
    total: LatticeMomentum,
    opts: &PropagatorOptions,
) -> Result<TMatrixContact> {
    let dec = PairPropagator::new(disp, total, *opts).evaluate(omega, side)?;
    contact_from(dec, side)
}

/// Pair potential as a function of the momentum transfer q − q′.
pub type Potential = Arc<dyn Fn(LatticeMomentum) -> Complex64 + Send + Sync>;

/// Nyström solution of T = U + U·G·T on the propagator quadrature grid.
///
/// The kernel is the boson-symmetrized ½[U(q − q′) + U(q + q′)], so the ordered-pair
/// grid over the whole zone represents the integral over BZ⁽²⁾.
pub struct TMatrixGeneral {
    pub omega: Complex64,
    pub side: Side,
    pub total: LatticeMomentum,
    pub nodes: Vec<GridNode>,
    /// T(q_i, q_j) on the grid.
    pub values: DMatrix<Complex64>,
    /// max |T − U − U·W·T| over the grid.
    pub residual: f64,
    pub propagator: PropagatorDecomposition,
    relative: Vec<LatticeMomentum>,
    potential: Potential,
    wrap: crate::lattice::ArrayConfig,
    lu: nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl std::fmt::Debug for TMatrixGeneral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TMatrixGeneral")
            .field("omega", &self.omega)
            .field("nodes", &self.nodes.len())
            .field("residual", &self.residual)
            .finish()
    }
}

fn symmetrized(
    potential: &Potential,
    cfg: &crate::lattice::ArrayConfig,
    q: LatticeMomentum,
    qp: LatticeMomentum,
) -> Complex64 {
    0.5 * (potential(cfg.wrap(q - qp)) + potential(cfg.wrap(q + qp)))
}

impl TMatrixGeneral {
    /// Relative momentum of grid node i.
    pub fn node_relative(&self, i: usize) -> LatticeMomentum {
        self.relative[i]
    }

    /// T(·, q_in) as a cheap evaluator: one linear solve, then O(n) per point.
    pub fn column(&self, q_in: LatticeMomentum) -> TColumn<'_> {
        let n = self.relative.len();
        let col = DMatrix::from_fn(n, 1, |i, _| symmetrized(&self.potential, &self.wrap, self.relative[i], q_in));
        let solved = self.lu.solve(&col).unwrap_or(col);
        TColumn {
            t: self,
            q_in,
            weighted: (0..n).map(|k| self.nodes[k].weight * solved[k]).collect(),
        }
    }

    /// T(q, q′) anywhere, by Nyström interpolation through the grid.
    pub fn evaluate(&self, q: LatticeMomentum, qp: LatticeMomentum) -> Complex64 {
        let n = self.relative.len();
        let col = DMatrix::from_fn(n, 1, |i, _| symmetrized(&self.potential, &self.wrap, self.relative[i], qp));
        let tcol = self.lu.solve(&col).unwrap_or(col);
        let mut out = symmetrized(&self.potential, &self.wrap, q, qp);
        for k in 0..n {
            out += symmetrized(&self.potential, &self.wrap, q, self.relative[k]) * self.nodes[k].weight * tcol[k];
        }
        out
    }
}

/// T(q, q_in) for fixed q_in.
pub struct TColumn<'a> {
    t: &'a TMatrixGeneral,
    q_in: LatticeMomentum,
    weighted: Vec<Complex64>,
}

impl TColumn<'_> {
    pub fn evaluate(&self, q: LatticeMomentum) -> Complex64 {
        let t = self.t;
        let mut out = symmetrized(&t.potential, &t.wrap, q, self.q_in);
        for (k, w) in self.weighted.iter().enumerate() {
            out += symmetrized(&t.potential, &t.wrap, q, t.relative[k]) * w;
        }
        out
    }
}

/// Solves the Lippmann–Schwinger equation for a bounded potential U(q − q′).
pub fn tmatrix_general(
    disp: &Dispersion,
    omega: Complex64,
    side: Side,
    total: LatticeMomentum,
    potential: Potential,
    opts: &PropagatorOptions,
) -> Result<TMatrixGeneral> {
    let prop = PairPropagator::new(disp, total, *opts);
    let (dec, nodes) = prop.evaluate_with_grid(omega, side)?;
    if nodes.len() > opts.max_nodes {
        return Err(Error::GridTooLarge {
            nodes: nodes.len(),
            limit: opts.max_nodes,
        });
    }
    let cfg = *disp.config();
    let half = prop.total().scale(0.5);
    let relative: Vec<LatticeMomentum> = nodes.iter().map(|n| n.p - half).collect();
    let n = nodes.len();
    let u = DMatrix::from_fn(n, n, |i, j| symmetrized(&potential, &cfg, relative[i], relative[j]));
    if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidInput("potential is not finite on the grid".into()));
    }
    let a = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - u[(i, j)] * nodes[j].weight
    });
    let lu = a.clone().lu();
    let diag = lu.u().diagonal();
    let max = diag.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let min = diag.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
    if !(min > 1e-14 * max) {
        return Err(Error::SingularKernel { pivot: min / max });
    }
    let values = lu.solve(&u).ok_or(Error::SingularKernel { pivot: 0.0 })?;
    let residual = (&a * &values - &u).iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(TMatrixGeneral {
        omega,
        side,
        total: prop.total(),
        nodes,
        values,
        residual,
        propagator: dec,
        relative,
        potential,
        wrap: cfg,
        lu,
    })
}

/// The channel S-matrix s_{αβ} = δ_{αβ} + 2πi√(ρ_αρ_β)/L(E + i0) on M⁽²⁾(E,P).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnShellSMatrix {
    pub energy: f64,
    pub total: LatticeMomentum,
    /// L(E + i0).
    pub l_above: Complex64,
    pub propagator: PropagatorDecomposition,
    /// s_{αβ}; `None` when either channel is closed.
    pub s: [[Option<Complex64>; 3]; 3],
    pub open: [bool; 3],
}

impl OnShellSMatrix {
    pub fn from_decomposition(dec: PropagatorDecomposition) -> Result<Self> {
        if dec.omega.im != 0.0 {
            return Err(Error::InvalidInput("the S-matrix needs a real energy".into()));
        }
        let above = dec.with_side(Side::AboveCut);
        let l = above.value(Side::AboveCut);
        if l.norm() == 0.0 || !l.norm().is_finite() {
            return Err(Error::PropagatorZero { energy: dec.omega.re });
        }
        let open = [above.rho[0] > 0.0, above.rho[1] > 0.0, above.rho[2] > 0.0];
        let mut s = [[None; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                if open[a] && open[b] {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    let amp = (above.rho[a] * above.rho[b]).sqrt();
                    s[a][b] = Some(Complex64::new(delta, 0.0) + Complex64::new(0.0, 2.0 * PI * amp) / l);
                }
            }
        }
        Ok(OnShellSMatrix {
            energy: dec.omega.re,
            total: dec.total,
            l_above: l,
            propagator: above,
            s,
            open,
        })
    }

    pub fn element(&self, alpha: usize, beta: usize) -> Result<Complex64> {
        if alpha > 2 || beta > 2 {
            return Err(Error::InvalidInput("channel index > 2".into()));
        }
        for c in [alpha, beta] {
            if !self.open[c] {
                return Err(Error::ClosedChannel(c));
            }
        }
        Ok(self.s[alpha][beta].expect("open channels have entries"))
    }

    pub fn open_channels(&self) -> Vec<ChannelIndex> {
        (0..3)
            .filter(|&a| self.open[a])
            .map(|a| ChannelIndex::new(a).expect("index below 3"))
            .collect()
    }

    /// The open-channel block of s.
    pub fn open_block(&self) -> DMatrix<Complex64> {
        let idx: Vec<usize> = (0..3).filter(|&a| self.open[a]).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.s[idx[i]][idx[j]].expect("open"))
    }

    /// max |(s s† − 1)_{ij}| on the open block.
    pub fn unitarity_defect(&self) -> f64 {
        let s = self.open_block();
        let prod = &s * s.adjoint();
        let n = prod.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - id).norm());
            }
        }
        worst
    }

    /// 1 − |s₀₀|, zero for a perfectly dark channel.
    pub fn darkness(&self) -> Result<f64> {
        Ok(1.0 - self.element(0, 0)?.norm())
    }

    /// s₀₀ from the two sides of the cut, L(E − i0)/L(E + i0).
    pub fn s00_from_sides(&self) -> Complex64 {
        self.propagator.value(Side::BelowCut) / self.propagator.value(Side::AboveCut)
    }
}

/// Builds s_{αβ}(E,P) from the local propagator.
pub fn on_shell_smatrix(
    disp: &Dispersion,
    energy: f64,
    total: LatticeMomentum,
    opts: &PropagatorOptions,
) -> Result<OnShellSMatrix> {
    if !energy.is_finite() {
        return Err(Error::InvalidInput("energy must be finite".into()));
    }
    let dec = PairPropagator::new(disp, total, *opts).evaluate(Complex64::new(energy, 0.0), Side::AboveCut)?;
    OnShellSMatrix::from_decomposition(dec)
}

/// A point of the dark on-shell manifold with its measure and η₀ amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub q: LatticeMomentum,
    /// Measure attributed to the point (1 for isolated roots, arc length on contours).
    pub weight: f64,
    /// ‖∇_q Δ⁽²⁾‖ at the point.
    pub group_velocity: f64,
    /// Real, positive amplitude 1/√(ρ₀ v_g).
    pub amplitude: f64,
}

/// η₀ sampled on M⁽²⁾₀(E,P).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eta0 {
    pub energy: f64,
    pub total: LatticeMomentum,
    pub rho0: f64,
    pub points: Vec<ManifoldPoint>,
}

impl Eta0 {
    /// Σ weight·|amplitude|², equal to one up to quadrature error.
    pub fn normalization(&self) -> f64 {
        self.points.iter().map(|p| p.weight * p.amplitude * p.amplitude).sum()
    }
}

/// η₀(E,P) with the density of states taken from the propagator.
pub fn eta0_wavefunction(prop: &PairPropagator, energy: f64) -> Result<Eta0> {
    let dec = prop.evaluate(Complex64::new(energy, 0.0), Side::AboveCut)?;
    let rho0 = dec.rho[0];
    if !(rho0 > 0.0) {
        return Err(Error::ClosedChannel(0));
    }
    let raw: Vec<(LatticeMomentum, f64, f64)> = match prop.dispersion().config().dimension {
        Dimension::OneD => prop
            .chain_roots(energy)?
            .into_iter()
            .map(|(q, v)| (LatticeMomentum::chain(q), 1.0, v))
            .collect(),
        Dimension::TwoDSquare => prop
            .level_set(energy)?
            .into_iter()
            .map(|p| (p.q, p.weight, p.speed))
            .collect(),
    };
    let points = raw
        .into_iter()
        .map(|(q, weight, v)| ManifoldPoint {
            q,
            weight,
            group_velocity: v,
            amplitude: 1.0 / (rho0 * v).sqrt(),
        })
        .collect();
    Ok(Eta0 {
        energy,
        total: prop.total(),
        rho0,
        points,
    })
}

/// η₁(E,P): a dark spin wave and a photon, weighted by a*_{p_bright}(E − Δ(p_dark))/√ρ₁.
pub struct Eta1<'a> {
    prop: &'a PairPropagator<'a>,
    pub energy: f64,
    pub rho1: f64,
}

impl<'a> Eta1<'a> {
    fn split(&self, q: LatticeMomentum) -> Result<(LatticeMomentum, LatticeMomentum)> {
        let disp = self.prop.dispersion();
        let half = self.prop.total().scale(0.5);
        let (a, b) = (half + q, half - q);
        match (disp.classify(a), disp.classify(b)) {
            (Classification::Bright, Classification::Dark) => Ok((a, b)),
            (Classification::Dark, Classification::Bright) => Ok((b, a)),
            _ => Err(Error::InvalidInput("relative momentum lies outside D1".into())),
        }
    }

    /// η₁ amplitude at relative momentum q ∈ D₁.
    pub fn amplitude(&self, q: LatticeMomentum) -> Result<Complex64> {
        let (bright, dark) = self.split(q)?;
        let disp = self.prop.dispersion();
        let a = atomic_amplitude(disp, bright, self.energy - disp.delta(dark))?;
        Ok(a.conj() / self.rho1.sqrt())
    }

    /// η̄₁ amplitude, the complex conjugate of η₁.
    pub fn conjugate_amplitude(&self, q: LatticeMomentum) -> Result<Complex64> {
        Ok(self.amplitude(q)?.conj())
    }

    /// ∫_{D₁} dq |η₁|²/c by direct quadrature.
    pub fn normalization(&self, rel_tol: f64) -> Result<f64> {
        let disp = self.prop.dispersion();
        let c = disp.config().speed_of_light();
        let half = self.prop.total().scale(0.5);
        self.prop.channel_integral(
            1,
            |p| self.amplitude(p - half).map(|a| a.norm_sqr() / c).unwrap_or(0.0),
            self.energy,
            rel_tol,
        )
    }
}

pub fn eta1_wavefunction<'a>(prop: &'a PairPropagator<'a>, energy: f64) -> Result<Eta1<'a>> {
    let dec = prop.evaluate(Complex64::new(energy, 0.0), Side::AboveCut)?;
    if !(dec.rho[1] > 0.0) {
        return Err(Error::ClosedChannel(1));
    }
    Ok(Eta1 {
        prop,
        energy,
        rho1: dec.rho[1],
    })
}

/// η̄₂(q, Δ_ph) = a_{P/2+q}(E/2 + Δ_ph)·a_{P/2−q}(E/2 − Δ_ph)/√ρ₂ on D₂(P) × ℝ.
pub struct TwoPhotonState<'a> {
    prop: &'a PairPropagator<'a>,
    pub energy: f64,
    pub rho2: f64,
}

impl<'a> TwoPhotonState<'a> {
    pub fn new(prop: &'a PairPropagator<'a>, energy: f64) -> Result<Self> {
        let dec = prop.evaluate(Complex64::new(energy, 0.0), Side::AboveCut)?;
        if !(dec.rho[2] > 0.0) {
            return Err(Error::ClosedChannel(2));
        }
        Ok(TwoPhotonState {
            prop,
            energy,
            rho2: dec.rho[2],
        })
    }

    /// Unnormalized product a₁a₂; the 1/√ρ₂ factor is applied by `amplitude`.
    fn product(&self, q: LatticeMomentum, delta_ph: f64) -> Result<Complex64> {
        let disp = self.prop.dispersion();
        if domain_of(disp, self.prop.total(), q) != ChannelIndex::TWO_PHOTON {
            return Err(Error::OutsideD2);
        }
        let half = self.prop.total().scale(0.5);
        let a1 = atomic_amplitude(disp, half + q, 0.5 * self.energy + delta_ph)?;
        let a2 = atomic_amplitude(disp, half - q, 0.5 * self.energy - delta_ph)?;
        Ok(a1 * a2)
    }

    /// η̄₂(q, Δ_ph).
    pub fn amplitude(&self, q: LatticeMomentum, delta_ph: f64) -> Result<Complex64> {
        Ok(self.product(q, delta_ph)? / self.rho2.sqrt())
    }

    /// η₂(q, Δ_ph), the complex conjugate.
    pub fn conjugate_amplitude(&self, q: LatticeMomentum, delta_ph: f64) -> Result<Complex64> {
        Ok(self.amplitude(q, delta_ph)?.conj())
    }

    /// ∫_{D₂} dq ∫ dΔ_ph |η̄₂|²/c² with the photon-energy integral cut at ±cutoff.
    pub fn normalization(&self, cutoff: f64, rel_tol: f64) -> Result<f64> {
        use crate::quad::{integrate, QuadOptions};
        let disp = self.prop.dispersion();
        let c = disp.config().speed_of_light();
        let half = self.prop.total().scale(0.5);
        let e = self.energy;
        let inner_opts = QuadOptions {
            rel_tol: rel_tol * 0.1,
            abs_tol: 1e-300,
            max_intervals: 4000,
            parallel: false,
        };
        self.prop.channel_integral(
            2,
            |p| {
                let q = p - half;
                let d1 = disp.delta(half + q) - 0.5 * e;
                let d2 = 0.5 * e - disp.delta(half - q);
                let r = integrate(
                    |x| {
                        self.amplitude(q, x)
                            .map(|v| v.norm_sqr() / (c * c))
                            .unwrap_or(0.0)
                    },
                    -cutoff,
                    cutoff,
                    &[d1, d2],
                    &inner_opts,
                );
                r.value
            },
            e,
            rel_tol,
        )
    }
}

/// The two-photon wavefunction η̄₂ at (q, Δ_ph).
pub fn two_photon_wavefunction(
    prop: &PairPropagator,
    energy: f64,
    q: LatticeMomentum,
    delta_ph: f64,
) -> Result<Complex64> {
    TwoPhotonState::new(prop, energy)?.amplitude(q, delta_ph)
}

/// |η̄₂|/|η̄₂(0,0)| and arg η̄₂ on a (q, Δ_ph) grid along the chain direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Grid {
    pub energy: f64,
    /// Relative momenta (along x).
    pub q: Vec<f64>,
    pub delta_ph: Vec<f64>,
    /// modulus[i][j] at (q[i], delta_ph[j]), relative to the reference point (0, 0).
    pub modulus: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
}

impl Fig4Grid {
    /// q_i = i·q_max/n_q for i < n_q, Δ_ph evenly spaced over [0, Δ_max].
    pub fn compute(
        state: &TwoPhotonState,
        q_max: f64,
        n_q: usize,
        delta_max: f64,
        n_delta: usize,
    ) -> Result<Self> {
        if n_q < 2 || n_delta < 2 {
            return Err(Error::InvalidInput("grid needs at least 2×2 points".into()));
        }
        let q: Vec<f64> = (0..n_q).map(|i| q_max * i as f64 / n_q as f64).collect();
        let delta_ph: Vec<f64> = (0..n_delta)
            .map(|j| delta_max * j as f64 / (n_delta - 1) as f64)
            .collect();
        let reference = state.product(LatticeMomentum::chain(0.0), 0.0)?.norm();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = q
            .par_iter()
            .map(|&qi| {
                let mut m = Vec::with_capacity(n_delta);
                let mut ph = Vec::with_capacity(n_delta);
                for &dj in &delta_ph {
                    let v = state.product(LatticeMomentum::chain(qi), dj)?;
                    m.push(v.norm() / reference);
                    ph.push(v.arg());
                }
                Ok((m, ph))
            })
            .collect::<Result<_>>()?;
        let (modulus, phase) = rows.into_iter().unzip();
        Ok(Fig4Grid {
            energy: state.energy,
            q,
            delta_ph,
            modulus,
            phase,
        })
    }

    /// Grid indices of the largest relative modulus, skipping the last q column.
    pub fn interior_argmax(&self) -> (usize, usize) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.modulus.iter().enumerate().take(self.q.len() - 1) {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        (best.0, best.1)
    }

    /// Largest modulus in the last q column for Δ_ph within [lo, hi].
    pub fn boundary_peak(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let last = self.modulus.last()?;
        self.delta_ph
            .iter()
            .zip(last)
            .filter(|(d, _)| **d >= lo && **d <= hi)
            .map(|(d, v)| (*d, *v))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

/// ψ_{P,q}(q′) = δ(q′ − q) + T̄(E_d + i0)/(E_d + i0 − ε⁽²⁾(P,q′)), delta-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkStateWavefunction {
    pub energy: f64,
    pub total: LatticeMomentum,
    pub q_seed: LatticeMomentum,
    pub t_bar: Complex64,
    /// 1 − |s₀₀| at (E_d, P).
    pub darkness: f64,
}

impl DarkStateWavefunction {
    /// Scattered part at q′ (total momentum P′ = P; other P′ carry no amplitude).
    pub fn scattered(&self, disp: &Dispersion, qp: LatticeMomentum) -> Complex64 {
        let half = self.total.scale(0.5);
        let eps2 = disp.epsilon(half + qp) + disp.epsilon(half - qp);
        self.t_bar / (self.energy - eps2)
    }

    /// Amplitude at (P′, q′) away from the seed; zero unless P′ = P.
    pub fn amplitude(&self, disp: &Dispersion, total: LatticeMomentum, qp: LatticeMomentum) -> Complex64 {
        let cfg = disp.config();
        if cfg.wrap(total - self.total).norm() > 1e-12 {
            return Complex64::new(0.0, 0.0);
        }
        self.scattered(disp, qp)
    }

    /// ∫_{D₁∪D₂} dq′ |scattered|², the weight carried by pairs with a bright constituent.
    pub fn bright_weight(&self, prop: &PairPropagator, rel_tol: f64) -> Result<f64> {
        let disp = prop.dispersion();
        let half = self.total.scale(0.5);
        let f = |p: LatticeMomentum| self.scattered(disp, p - half).norm_sqr();
        Ok(prop.channel_integral(1, f, self.energy, rel_tol)? + prop.channel_integral(2, f, self.energy, rel_tol)?)
    }
}

/// Dark state seeded by a dark pair on the level set Δ⁽²⁾(P, q_seed) = E_d.
pub fn dark_state(
    prop: &PairPropagator,
    energy: f64,
    q_seed: LatticeMomentum,
) -> Result<DarkStateWavefunction> {
    let disp = prop.dispersion();
    let total = prop.total();
    if domain_of(disp, total, q_seed) != ChannelIndex::DARK {
        return Err(Error::InvalidInput("seed pair is not dark".into()));
    }
    let half = total.scale(0.5);
    let off = disp.delta(half + q_seed) + disp.delta(half - q_seed) - energy;
    if off.abs() > 1e-8 * energy.abs().max(1.0) {
        return Err(Error::OffShellSeed(off));
    }
    let dec = prop.evaluate(Complex64::new(energy, 0.0), Side::AboveCut)?;
    let s = OnShellSMatrix::from_decomposition(dec)?;
    let t = contact_from(dec, Side::AboveCut)?;
    Ok(DarkStateWavefunction {
        energy,
        total,
        q_seed,
        t_bar: t.value,
        darkness: s.darkness()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ArrayConfig, K0};

    fn chain() -> Dispersion {
        Dispersion::new(ArrayConfig::chain(0.25)).unwrap()
    }

    fn golden_energy(d: &Dispersion) -> f64 {
        2.0 * d.delta(LatticeMomentum::chain(2.0 / 3.0 * PI / 0.25))
    }

    #[test]
    fn smatrix_unitary_and_symmetric() {
        let d = chain();
        let opts = PropagatorOptions::default();
        for (e, p) in [(1.2, 0.0), (0.5, 2.0), (-0.3, 5.0)] {
            let s = on_shell_smatrix(&d, e, LatticeMomentum::chain(p), &opts).unwrap();
            assert!(s.unitarity_defect() < 1e-6, "{e} {p}: {}", s.unitarity_defect());
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(s.s[a][b], s.s[b][a]);
                }
            }
            if s.open[0] {
                assert!((s.element(0, 0).unwrap() - s.s00_from_sides()).norm() < 1e-6);
            }
        }
        let s = on_shell_smatrix(&d, 1.2, LatticeMomentum::chain(0.0), &opts).unwrap();
        assert!(!s.open[1]);
        assert_eq!(s.element(1, 0), Err(Error::ClosedChannel(1)));
    }

    #[test]
    fn contact_limits() {
        let d = chain();
        let opts = PropagatorOptions::default();
        let w = Complex64::new(0.0, 1e5);
        let t = tmatrix_contact(&d, w, Side::AboveCut, LatticeMomentum::chain(0.0), &opts).unwrap();
        let vol = PI / 0.25;
        assert!(((t.value + w / vol) / (w / vol)).norm() < 1e-3);
    }

    #[test]
    fn nystrom_constant_and_zero_potential() {
        let d = chain();
        let opts = PropagatorOptions {
            rel_tol: 1e-5,
            ..Default::default()
        };
        let total = LatticeMomentum::chain(0.6);
        let e = Complex64::new(0.9, 0.0);
        let zero: Potential = Arc::new(|_| Complex64::new(0.0, 0.0));
        let t0 = tmatrix_general(&d, e, Side::AboveCut, total, zero, &opts).unwrap();
        assert!(t0.values.iter().all(|v| v.norm() == 0.0));
        let u0 = 0.7;
        let cst: Potential = Arc::new(move |_| Complex64::new(u0, 0.0));
        let t = tmatrix_general(&d, e, Side::AboveCut, total, cst, &opts).unwrap();
        let l = t.propagator.value(Side::AboveCut);
        let exact = u0 / (1.0 - u0 * l);
        for v in t.values.iter() {
            assert!(((v - exact) / exact).norm() < 1e-6);
        }
        let off = t.evaluate(LatticeMomentum::chain(1.0), LatticeMomentum::chain(7.0));
        assert!(((off - exact) / exact).norm() < 1e-6);
        assert!(t.residual < 1e-10);
    }

    #[test]
    fn born_limit() {
        let d = chain();
        let opts = PropagatorOptions {
            rel_tol: 1e-5,
            ..Default::default()
        };
        let total = LatticeMomentum::chain(0.0);
        let e = Complex64::new(1.1, 0.0);
        let shape = |q: LatticeMomentum| Complex64::new((q.x * 0.25).cos(), 0.0);
        let q1 = LatticeMomentum::chain(1.5);
        let q2 = LatticeMomentum::chain(9.0);
        let born = 0.5 * (shape(q1 - q2) + shape(q1 + q2));
        let mut slopes = vec![];
        for lam in [1e-4, 2e-4] {
            let pot: Potential = Arc::new(move |q| lam * shape(q));
            let t = tmatrix_general(&d, e, Side::AboveCut, total, pot, &opts).unwrap();
            slopes.push(t.evaluate(q1, q2) / lam);
        }
        // Richardson: the first-order coefficient is the bare potential
        let extrapolated = 2.0 * slopes[0] - slopes[1];
        assert!((extrapolated - born).norm() < 1e-6, "{extrapolated} {born}");
    }

    #[test]
    fn eta_samplers() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let e = golden_energy(&d);
        let eta0 = eta0_wavefunction(&prop, e).unwrap();
        assert!((eta0.normalization() - 1.0).abs() < 1e-6);
        assert!(eta0.points.iter().all(|p| p.amplitude > 0.0));
        assert!(matches!(eta1_wavefunction(&prop, e), Err(Error::ClosedChannel(1))));
        let eta2 = TwoPhotonState::new(&prop, e).unwrap();
        let n = eta2.normalization(1e4, 1e-7).unwrap();
        assert!((n - 1.0).abs() < 1e-4, "{n}");
        let q = LatticeMomentum::chain(2.0);
        let v = eta2.amplitude(q, 0.4).unwrap();
        for (qq, dd) in [(q, -0.4), (-q, 0.4), (-q, -0.4)] {
            assert!((eta2.amplitude(qq, dd).unwrap() - v).norm() < 1e-10 * v.norm());
        }
        assert_eq!(eta2.amplitude(LatticeMomentum::chain(K0 + 0.5), 0.0), Err(Error::OutsideD2));
    }

    #[test]
    fn eta1_normalization() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(3.0), PropagatorOptions::default());
        let eta1 = eta1_wavefunction(&prop, 0.2).unwrap();
        let n = eta1.normalization(1e-8).unwrap();
        assert!((n - 1.0).abs() < 1e-5, "{n}");
        let q = LatticeMomentum::chain(6.5);
        assert_eq!(eta1.conjugate_amplitude(q).unwrap(), eta1.amplitude(q).unwrap().conj());
    }

    #[test]
    fn dark_state_seed_checks() {
        let d = chain();
        let prop = PairPropagator::new(&d, LatticeMomentum::chain(0.0), PropagatorOptions::default());
        let q = LatticeMomentum::chain(9.0);
        let e = 2.0 * d.delta(q);
        let st = dark_state(&prop, e, q).unwrap();
        assert!(st.darkness >= 0.0);
        assert_eq!(st.amplitude(&d, LatticeMomentum::chain(0.3), q), Complex64::new(0.0, 0.0));
        let free = DarkStateWavefunction {
            t_bar: Complex64::new(0.0, 0.0),
            ..st
        };
        assert_eq!(free.scattered(&d, LatticeMomentum::chain(5.0)), Complex64::new(0.0, 0.0));
        assert!(st.bright_weight(&prop, 1e-6).unwrap().is_finite());
        assert!(matches!(dark_state(&prop, e + 0.1, q), Err(Error::OffShellSeed(_))));
    }
}
