//! Critical energies of the dark-pair band and the S-matrix as E approaches one.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::propagator::{PairPropagator, PropagatorOptions};
use arrayscatter::two_excitation::on_shell_smatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let total = LatticeMomentum::chain(0.0);
    let opts = PropagatorOptions {
        critical_window: 1e-12,
        ..Default::default()
    };
    let prop = PairPropagator::new(&disp, total, opts);
    let crit = prop.critical_energies()?;
    for c in &crit {
        println!("critical energy {:.9} at q = {:.6}", c.energy, c.q.x);
    }
    let top = crit.iter().map(|c| c.energy).fold(f64::NEG_INFINITY, f64::max);
    println!("{:>8} {:>12} {:>10} {:>10} {:>10} {:>10}", "δ", "rho0", "|L0|", "|s02|", "|s22-1|", "1-|s00|");
    for j in 1..=6 {
        let delta = 10f64.powi(-j);
        let s = on_shell_smatrix(&disp, top - delta, total, &opts)?;
        println!(
            "{delta:>8.0e} {:>12.4} {:>10.4} {:>10.5} {:>10.5} {:>10.3e}",
            s.propagator.rho[0],
            s.propagator.l0(arrayscatter::propagator::Side::AboveCut).norm(),
            s.element(0, 2)?.norm(),
            (s.element(2, 2)? - 1.0).norm(),
            s.darkness()?
        );
    }
    Ok(())
}
