//! Single-photon scattering off a bright spin wave: atomic amplitude, transmission
//! coefficient and the dressed-photon wavefunction in the effective 1D coordinate.

use crate::error::{Error, Result};
use crate::lattice::{coupling_g, Classification, Dispersion, LatticeMomentum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A photon in the bright sector, labelled by its in-plane momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonLabel {
    pub p: LatticeMomentum,
    /// Energy relative to ω_eg, in units of Γ₀.
    pub energy: f64,
}

impl PhotonLabel {
    pub fn new(disp: &Dispersion, p: LatticeMomentum, energy: f64) -> Result<Self> {
        require_bright(disp, p)?;
        if !energy.is_finite() {
            return Err(Error::InvalidInput("photon energy must be finite".into()));
        }
        Ok(PhotonLabel { p, energy })
    }

    /// Builds the label from the transverse wavenumber χ > 0.
    pub fn from_chi(disp: &Dispersion, p: LatticeMomentum, chi: f64) -> Result<Self> {
        if !(chi > 0.0) {
            return Err(Error::InvalidInput("χ must be positive".into()));
        }
        let cfg = disp.config();
        let energy = cfg.speed_of_light() * (p.norm().powi(2) + chi * chi).sqrt() - cfg.quality_factor;
        Self::new(disp, p, energy)
    }

    /// On-shell transverse wavenumber χ with E = c√(‖p‖² + χ²) − ω_eg.
    pub fn chi(&self, disp: &Dispersion) -> Result<f64> {
        on_shell_chi(disp, self.p, self.energy)
    }
}

fn require_bright(disp: &Dispersion, p: LatticeMomentum) -> Result<()> {
    if disp.classify(p) == Classification::Dark {
        return Err(Error::DarkMomentum {
            norm: disp.config().wrap(p).norm(),
        });
    }
    Ok(())
}

/// Transverse wavenumber of a photon with in-plane momentum p and energy E.
pub fn on_shell_chi(disp: &Dispersion, p: LatticeMomentum, energy: f64) -> Result<f64> {
    let cfg = disp.config();
    let k = (energy + cfg.quality_factor) / cfg.speed_of_light();
    let chi2 = k * k - cfg.wrap(p).norm().powi(2);
    if !(chi2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "energy {energy} lies below the photon band edge at this momentum"
        )));
    }
    Ok(chi2.sqrt())
}

/// a_p(E) = g_p/(E − ε(p)).
pub fn atomic_amplitude(disp: &Dispersion, p: LatticeMomentum, energy: f64) -> Result<Complex64> {
    require_bright(disp, p)?;
    let g = coupling_g(disp, p)?;
    Ok(g / (energy - disp.epsilon(p)))
}

/// t_p(E) = (E − ε*(p))/(E − ε(p)).
pub fn transmission(disp: &Dispersion, p: LatticeMomentum, energy: f64) -> Result<Complex64> {
    require_bright(disp, p)?;
    let eps = disp.epsilon(p);
    Ok((energy - eps.conj()) / (energy - eps))
}

/// −Im 1/(E + i0 − ε(p)), the Lorentzian line shape of a bright spin wave.
pub fn lorentzian(disp: &Dispersion, p: LatticeMomentum, energy: f64) -> Result<f64> {
    require_bright(disp, p)?;
    let eps = disp.epsilon(p);
    Ok(-(1.0 / (energy - eps)).im)
}

/// Dressed photon in the effective 1D coordinate: incoming plane wave for r < 0,
/// transmitted wave for r > 0, normalized as 1/√(2π).
pub fn dressed_photon_realspace(
    disp: &Dispersion,
    p: LatticeMomentum,
    energy: f64,
    r: f64,
) -> Result<Complex64> {
    let chi = on_shell_chi(disp, p, energy)?;
    let t = transmission(disp, p, energy)?;
    let wave = Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), chi * r);
    Ok(if r < 0.0 {
        wave
    } else if r > 0.0 {
        t * wave
    } else {
        0.5 * (Complex64::new(1.0, 0.0) + t) * wave
    })
}
