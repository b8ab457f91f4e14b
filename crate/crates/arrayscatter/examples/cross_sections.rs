//! Partial and total cross sections for dark pairs, photon plus dark spin wave and
//! photon pairs.

use arrayscatter::cross_section::{cross_sections, CrossSectionOptions, IncomingConfig};
use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let opts = CrossSectionOptions::default();
    let edge = PI / 0.25;
    println!("dark pairs ±q:");
    println!("{:>8} {:>9} {:>10} {:>10} {:>10}", "q", "E", "sigma00", "sigma02", "total");
    for k in 0..8 {
        let q = LatticeMomentum::chain(edge * (0.52 + 0.06 * k as f64));
        let cfg = IncomingConfig::dark_pair(&disp, q, -q)?;
        let set = cross_sections(&disp, &cfg, &opts)?;
        println!(
            "{:>8.4} {:>9.5} {:>10.5} {:>10.5} {:>10.5}",
            q.x, set.energy, set.partial[0], set.partial[2], set.total
        );
    }
    let photon = LatticeMomentum::chain(1.0);
    let dark = LatticeMomentum::chain(9.0);
    let one = IncomingConfig::photon_and_dark(&disp, photon, disp.delta(photon), dark)?;
    let set = cross_sections(&disp, &one, &opts)?;
    println!("photon + dark spin wave: σ = {:?}, total {:.4e} λ₀^{}", set.partial, set.total, set.unit.length_power);
    let two = IncomingConfig::two_photons(&disp, photon, 0.2, -photon, 0.2)?;
    let set = cross_sections(&disp, &two, &opts)?;
    println!("two photons: σ = {:?}, total {:.4e} λ₀^{}", set.partial, set.total, set.unit.length_power);
    Ok(())
}
