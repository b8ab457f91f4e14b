//! Two-excitation partial and total cross sections, group velocities of incoming
//! pairs and the nonlinear survival probability of a coherent beam.

use crate::error::{Error, Result};
use crate::lattice::{Classification, Dimension, Dispersion, LatticeMomentum, K0};
use crate::propagator::{ChannelIndex, PairMomentum, PairPropagator, PropagatorDecomposition, PropagatorOptions, Side};
use crate::single_excitation::atomic_amplitude;
use crate::two_excitation::TMatrixGeneral;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// An incoming two-excitation configuration in channel α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomingConfig {
    pub channel: ChannelIndex,
    pub p1: LatticeMomentum,
    pub p2: LatticeMomentum,
    /// Energies of the photon constituents, in the order of the bright momenta.
    pub photon_energies: Vec<f64>,
    energy: f64,
}

impl IncomingConfig {
    /// Validates the classification of p1, p2 against α and derives E.
    pub fn new(
        disp: &Dispersion,
        channel: ChannelIndex,
        p1: LatticeMomentum,
        p2: LatticeMomentum,
        photon_energies: Vec<f64>,
    ) -> Result<Self> {
        let bright = [p1, p2]
            .iter()
            .filter(|p| disp.classify(**p) == Classification::Bright)
            .count();
        if bright != channel.index() {
            return Err(Error::InvalidInput(format!(
                "{bright} bright momenta do not match channel {}",
                channel.index()
            )));
        }
        if photon_energies.len() != channel.index() {
            return Err(Error::InvalidInput(format!(
                "channel {} needs {} photon energies",
                channel.index(),
                channel.index()
            )));
        }
        if photon_energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("photon energies must be finite".into()));
        }
        let energy = match channel.index() {
            0 => disp.delta(p1) + disp.delta(p2),
            1 => {
                let dark = if disp.classify(p1) == Classification::Dark { p1 } else { p2 };
                photon_energies[0] + disp.delta(dark)
            }
            _ => photon_energies[0] + photon_energies[1],
        };
        Ok(IncomingConfig {
            channel,
            p1,
            p2,
            photon_energies,
            energy,
        })
    }

    /// Two dark spin waves, on shell at E = Δ(p1) + Δ(p2).
    pub fn dark_pair(disp: &Dispersion, p1: LatticeMomentum, p2: LatticeMomentum) -> Result<Self> {
        Self::new(disp, ChannelIndex::DARK, p1, p2, vec![])
    }

    /// A photon (bright momentum, energy) and a dark spin wave.
    pub fn photon_and_dark(disp: &Dispersion, bright: LatticeMomentum, e_ph: f64, dark: LatticeMomentum) -> Result<Self> {
        Self::new(disp, ChannelIndex::ONE_PHOTON, bright, dark, vec![e_ph])
    }

    /// Two photons with their energies.
    pub fn two_photons(disp: &Dispersion, p1: LatticeMomentum, e1: f64, p2: LatticeMomentum, e2: f64) -> Result<Self> {
        Self::new(disp, ChannelIndex::TWO_PHOTON, p1, p2, vec![e1, e2])
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn total(&self) -> LatticeMomentum {
        self.p1 + self.p2
    }

    pub fn pair(&self) -> PairMomentum {
        PairMomentum::from_constituents(self.p1, self.p2)
    }

    /// Product of |a_p(E_ph)|² over the photon constituents (1 for dark pairs).
    pub fn amplitude_weight(&self, disp: &Dispersion) -> Result<f64> {
        let bright: Vec<LatticeMomentum> = [self.p1, self.p2]
            .into_iter()
            .filter(|p| disp.classify(*p) == Classification::Bright)
            .collect();
        let mut w = 1.0;
        for (p, e) in bright.iter().zip(&self.photon_energies) {
            w *= atomic_amplitude(disp, *p, *e)?.norm_sqr();
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossSectionOptions {
    pub propagator: PropagatorOptions,
    /// Dark-pair group velocities below this floor are flagged as critical.
    pub velocity_floor: f64,
}

impl Default for CrossSectionOptions {
    fn default() -> Self {
        CrossSectionOptions {
            propagator: PropagatorOptions::default(),
            velocity_floor: 1e-8,
        }
    }
}

/// Incoming flux velocity v_g of a configuration.
pub fn group_velocity(disp: &Dispersion, cfg: &IncomingConfig, floor: f64) -> Result<f64> {
    let c = disp.config().speed_of_light();
    match cfg.channel.index() {
        0 => {
            let v = dark_pair_velocity(disp, cfg.p1, cfg.p2);
            if v < floor {
                return Err(Error::CriticalEnergyProximity {
                    energy: cfg.energy,
                    critical: cfg.energy,
                    distance: 0.0,
                });
            }
            Ok(v)
        }
        1 => Ok(c),
        _ => Ok(c * 2f64.sqrt() * (1.0 - cfg.p1.dot(&cfg.p2) / (K0 * K0)).max(0.0).sqrt()),
    }
}

/// ‖∇_q Δ⁽²⁾‖ = ‖∇Δ(p1) − ∇Δ(p2)‖.
fn dark_pair_velocity(disp: &Dispersion, p1: LatticeMomentum, p2: LatticeMomentum) -> f64 {
    let g1 = disp.delta_gradient(p1);
    let g2 = disp.delta_gradient(p2);
    (g1[0] - g2[0]).hypot(g1[1] - g2[1])
}

/// Length dimension of a cross section: σ ∝ λ₀^length_power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTag {
    pub length_power: i32,
}

impl UnitTag {
    pub fn for_config(dimension: Dimension, channel: ChannelIndex) -> Self {
        UnitTag {
            length_power: dimension.rank() as i32 - 1 + channel.index() as i32,
        }
    }

    pub fn is_dimensionless(&self) -> bool {
        self.length_power == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSet {
    pub energy: f64,
    pub channel: ChannelIndex,
    pub group_velocity: f64,
    /// σ_{α,β} for β = 0, 1, 2 (zero for closed channels).
    pub partial: [f64; 3],
    pub total: f64,
    pub unit: UnitTag,
    /// Set when the incoming dark pair sits at a critical point (v_g below the floor).
    pub critical: bool,
    pub propagator: PropagatorDecomposition,
}

fn prefactor(disp: &Dispersion, cfg: &IncomingConfig, opts: &CrossSectionOptions) -> Result<(f64, f64, bool)> {
    let weight = cfg.amplitude_weight(disp)?;
    match group_velocity(disp, cfg, opts.velocity_floor) {
        Ok(v) => Ok((4.0 * PI * weight / v, v, false)),
        Err(Error::CriticalEnergyProximity { .. }) => {
            let v = dark_pair_velocity(disp, cfg.p1, cfg.p2);
            Ok((4.0 * PI * weight / v, v, true))
        }
        Err(e) => Err(e),
    }
}

/// Hard-core partial and total cross sections from the local propagator.
pub fn cross_sections(disp: &Dispersion, cfg: &IncomingConfig, opts: &CrossSectionOptions) -> Result<CrossSectionSet> {
    let (pre, v, critical) = prefactor(disp, cfg, opts)?;
    let prop = PairPropagator::new(disp, cfg.total(), opts.propagator);
    let dec = prop.evaluate(Complex64::new(cfg.energy, 0.0), Side::AboveCut)?;
    let l = dec.value(Side::AboveCut);
    let l2 = l.norm_sqr();
    if l2 == 0.0 {
        return Err(Error::PropagatorZero { energy: cfg.energy });
    }
    let partial = [0, 1, 2].map(|b| pre * PI * dec.rho[b] / l2);
    let total = pre * l.im.abs() / l2;
    Ok(CrossSectionSet {
        energy: cfg.energy,
        channel: cfg.channel,
        group_velocity: v,
        partial,
        total,
        unit: UnitTag::for_config(disp.config().dimension, cfg.channel),
        critical,
        propagator: dec,
    })
}

/// σ_{α,β} for the hard-core interaction.
pub fn partial_cross_section(
    disp: &Dispersion,
    cfg: &IncomingConfig,
    beta: ChannelIndex,
    opts: &CrossSectionOptions,
) -> Result<f64> {
    Ok(cross_sections(disp, cfg, opts)?.partial[beta.index()])
}

/// σ_{α,tot} = 4π(|a|²/v_g)·|Im L|/|L|².
pub fn total_cross_section(disp: &Dispersion, cfg: &IncomingConfig, opts: &CrossSectionOptions) -> Result<f64> {
    Ok(cross_sections(disp, cfg, opts)?.total)
}

/// σ_{α,β} for a general potential: 4π(|a|²/v_g)∫_{D_β} dq |T(q, q_in)|²·Im[−1/(E + i0 − ε⁽²⁾)].
pub fn partial_cross_section_general(
    disp: &Dispersion,
    cfg: &IncomingConfig,
    beta: ChannelIndex,
    tmatrix: &TMatrixGeneral,
    opts: &CrossSectionOptions,
) -> Result<f64> {
    if tmatrix.omega.im != 0.0 || (tmatrix.omega.re - cfg.energy).abs() > 1e-12 * cfg.energy.abs().max(1.0) {
        return Err(Error::InvalidInput("T-matrix was built at a different energy".into()));
    }
    let (pre, _, _) = prefactor(disp, cfg, opts)?;
    let prop = PairPropagator::new(disp, cfg.total(), opts.propagator);
    let q_in = cfg.pair().relative;
    let col = tmatrix.column(q_in);
    let e = cfg.energy;
    let half = prop.total().scale(0.5);
    let integral = match beta.index() {
        0 => match disp.config().dimension {
            Dimension::OneD => prop
                .chain_roots(e)?
                .iter()
                .map(|(q, v)| PI * col.evaluate(LatticeMomentum::chain(*q)).norm_sqr() / v)
                .sum(),
            Dimension::TwoDSquare => prop
                .level_set(e)?
                .iter()
                .map(|p| PI * p.weight * col.evaluate(p.q).norm_sqr() / p.speed)
                .sum(),
        },
        b => prop.channel_integral(
            b,
            |p| {
                let q = p - half;
                let eps2 = disp.epsilon(half + q) + disp.epsilon(half - q);
                col.evaluate(q).norm_sqr() * (-(1.0 / (e - eps2)).im)
            },
            e,
            opts.propagator.rel_tol,
        )?,
    };
    Ok(pre * integral)
}

/// Survival and output fluxes of a weak coherent beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSurvival {
    /// Probability that a photon avoids nonlinear scattering, 1 − σ⁽²⁾R.
    pub survival: f64,
    pub transmitted: f64,
    pub reflected: f64,
}

/// Two-photon truncation of the nonlinear survival probability for flux R.
pub fn beam_survival(flux: f64, sigma2_tot: f64, t: Complex64) -> Result<BeamSurvival> {
    if !(flux >= 0.0) || !flux.is_finite() {
        return Err(Error::InvalidInput("flux must be finite and non-negative".into()));
    }
    if !(sigma2_tot >= 0.0) || !sigma2_tot.is_finite() {
        return Err(Error::InvalidInput("cross section must be finite and non-negative".into()));
    }
    let survival = 1.0 - sigma2_tot * flux;
    if survival < 0.0 {
        return Err(Error::NonPhysicalFlux(survival));
    }
    let t2 = t.norm_sqr();
    Ok(BeamSurvival {
        survival,
        transmitted: flux * t2 * survival,
        reflected: flux * (1.0 - t2).max(0.0) * survival,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ArrayConfig;
    use crate::two_excitation::{on_shell_smatrix, tmatrix_general, Potential};
    use std::sync::Arc;

    fn chain() -> Dispersion {
        Dispersion::new(ArrayConfig::chain(0.25)).unwrap()
    }

    #[test]
    fn dark_pair_identity() {
        let d = chain();
        let q = LatticeMomentum::chain(9.0);
        let cfg = IncomingConfig::dark_pair(&d, q, -q).unwrap();
        let opts = CrossSectionOptions::default();
        let set = cross_sections(&d, &cfg, &opts).unwrap();
        let s = on_shell_smatrix(&d, cfg.energy(), cfg.total(), &opts.propagator).unwrap();
        let s00 = s.element(0, 0).unwrap();
        assert!((set.partial[0] - (s00 - 1.0).norm_sqr()).abs() < 1e-6);
        assert_eq!(set.partial[1], 0.0);
        let sum: f64 = set.partial.iter().sum();
        assert!((sum - set.total).abs() < 1e-8 * set.total);
        assert!(set.unit.is_dimensionless());
        assert!(set.total <= 4.0);
        let swapped = IncomingConfig::dark_pair(&d, -q, q).unwrap();
        let other = cross_sections(&d, &swapped, &opts).unwrap();
        for b in 0..3 {
            assert!((other.partial[b] - set.partial[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn velocities() {
        let d = chain();
        let q = 2.0 / 3.0 * PI / 0.25;
        let cfg = IncomingConfig::dark_pair(&d, LatticeMomentum::chain(q), LatticeMomentum::chain(-q)).unwrap();
        let v = group_velocity(&d, &cfg, 0.0).unwrap();
        // nine-point central difference of Δ⁽²⁾(0, q) = 2Δ(q)
        let h = 1e-3;
        let c = [1.0 / 280.0, -4.0 / 105.0, 0.2, -0.8];
        let f = |x: f64| 2.0 * d.delta(LatticeMomentum::chain(x));
        let mut fd = 0.0;
        for (k, ck) in c.iter().enumerate() {
            let j = (4 - k) as f64;
            fd += ck * (f(q - j * h) - f(q + j * h));
        }
        fd /= h;
        assert!(((v - fd.abs()) / v).abs() < 1e-6, "{v} {fd}");
        let cc = d.config().speed_of_light();
        let two = IncomingConfig::two_photons(&d, LatticeMomentum::chain(0.0), 0.1, LatticeMomentum::chain(2.0), 0.1).unwrap();
        assert!((group_velocity(&d, &two, 0.0).unwrap() - cc * 2f64.sqrt()).abs() < 1e-9 * cc);
        let edge = LatticeMomentum::chain(PI / 0.25);
        let crit = IncomingConfig::dark_pair(&d, edge, edge).unwrap();
        assert!(group_velocity(&d, &crit, 0.0).unwrap() < 1e-10);
        assert!(matches!(
            cross_sections(&d, &crit, &CrossSectionOptions::default()),
            Err(Error::CriticalEnergyProximity { .. })
        ));
        let slow = CrossSectionOptions {
            velocity_floor: 10.0 * v,
            ..Default::default()
        };
        assert!(cross_sections(&d, &cfg, &slow).unwrap().critical);
    }

    #[test]
    fn validation() {
        let d = chain();
        let bright = LatticeMomentum::chain(1.0);
        let dark = LatticeMomentum::chain(9.0);
        assert!(IncomingConfig::dark_pair(&d, bright, dark).is_err());
        assert!(IncomingConfig::photon_and_dark(&d, bright, 0.3, dark).is_ok());
        assert!(IncomingConfig::new(&d, ChannelIndex::ONE_PHOTON, bright, dark, vec![]).is_err());
    }

    #[test]
    fn far_detuned_photons_decouple() {
        let d = chain();
        let opts = CrossSectionOptions::default();
        let mut last = f64::INFINITY;
        for e in [20.0, 200.0, 2000.0] {
            let cfg = IncomingConfig::two_photons(&d, LatticeMomentum::chain(1.0), e, LatticeMomentum::chain(-1.0), e).unwrap();
            let t = total_cross_section(&d, &cfg, &opts).unwrap();
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn general_path_matches_contact() {
        let d = chain();
        let opts = CrossSectionOptions {
            propagator: PropagatorOptions {
                rel_tol: 1e-7,
                ..Default::default()
            },
            ..Default::default()
        };
        let q = LatticeMomentum::chain(9.5);
        let cfg = IncomingConfig::dark_pair(&d, q, -q).unwrap();
        let pot: Potential = Arc::new(|_| Complex64::new(1e6, 0.0));
        let t = tmatrix_general(&d, Complex64::new(cfg.energy(), 0.0), Side::AboveCut, cfg.total(), pot, &opts.propagator).unwrap();
        let set = cross_sections(&d, &cfg, &opts).unwrap();
        for b in [0, 2] {
            let g = partial_cross_section_general(&d, &cfg, ChannelIndex::new(b).unwrap(), &t, &opts).unwrap();
            assert!((g - set.partial[b]).abs() < 1e-4 * set.partial[b], "{b}: {g} {}", set.partial[b]);
        }
    }

    #[test]
    fn survival() {
        let t = Complex64::from_polar(1.0, 0.3);
        assert_eq!(beam_survival(0.0, 2.0, t).unwrap().survival, 1.0);
        assert_eq!(beam_survival(5.0, 0.0, t).unwrap().survival, 1.0);
        let a = beam_survival(0.1, 2.0, t).unwrap().survival;
        let b = beam_survival(0.2, 2.0, t).unwrap().survival;
        assert!(((b - a) / 0.1 + 2.0).abs() < 1e-12);
        assert!(matches!(beam_survival(1.0, 2.0, t), Err(Error::NonPhysicalFlux(_))));
        let r = beam_survival(0.1, 1.0, Complex64::new(0.6, 0.0)).unwrap();
        assert!((r.transmitted + r.reflected - 0.1 * r.survival).abs() < 1e-15);
    }
}
