//! Single-photon transmission through a chain and the two-photon depletion of a
//! weak coherent beam.

use arrayscatter::cross_section::{beam_survival, total_cross_section, CrossSectionOptions, IncomingConfig};
use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::single_excitation::transmission;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let p = LatticeMomentum::chain(1.0);
    let res = disp.delta(p);
    println!("Δ(p) = {res:.5}, Γ(p) = {:.5}", disp.gamma(p));
    println!("{:>8} {:>10}", "E − Δ", "arg t");
    for k in -4..=4 {
        let e = res + 0.5 * k as f64;
        let t = transmission(&disp, p, e)?;
        println!("{:>8.2} {:>10.5}", e - res, t.arg());
    }
    let e = res + 0.3;
    let cfg = IncomingConfig::two_photons(&disp, p, e, p, e)?;
    let sigma = total_cross_section(&disp, &cfg, &CrossSectionOptions::default())?;
    let t = transmission(&disp, p, e)?;
    println!("σ⁽²⁾ = {sigma:.4e}");
    for flux in [0.0, 0.1, 0.5, 0.9].map(|f| f / sigma) {
        let b = beam_survival(flux, sigma, t)?;
        println!("R = {flux:.3e}: survival {:.3}, transmitted {:.4e}, reflected {:.4e}", b.survival, b.transmitted, b.reflected);
    }
    match beam_survival(2.0 / sigma, sigma, t) {
        Err(e) => println!("R = 2/σ: {e}"),
        Ok(b) => println!("R = 2/σ: {b:?}"),
    }
    Ok(())
}
