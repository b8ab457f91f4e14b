//! Dark two-excitation scattering states: the weight leaking into bright channels
//! shrinks as the pair energy approaches the top of the dark band.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::propagator::{PairPropagator, PropagatorOptions};
use arrayscatter::two_excitation::dark_state;
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 0.25;
    let disp = Dispersion::new(ArrayConfig::chain(d))?;
    let total = LatticeMomentum::chain(0.0);
    let opts = PropagatorOptions {
        critical_window: 1e-12,
        ..Default::default()
    };
    let prop = PairPropagator::new(&disp, total, opts);
    println!("{:>8} {:>9} {:>12} {:>12} {:>12}", "q d/π", "E", "|T|", "1-|s00|", "bright");
    for x in [0.6, 0.7, 0.8, 0.9, 0.95, 0.99] {
        let q = LatticeMomentum::chain(x * PI / d);
        let e = disp.delta(q) + disp.delta(-q);
        let state = dark_state(&prop, e, q)?;
        println!(
            "{x:>8.2} {e:>9.5} {:>12.5e} {:>12.5e} {:>12.5e}",
            state.t_bar.norm(),
            state.darkness,
            state.bright_weight(&prop, 1e-6)?
        );
    }
    Ok(())
}
