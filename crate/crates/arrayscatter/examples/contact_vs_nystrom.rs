//! The Nyström T-matrix of a large constant potential approaches the hard-core
//! result −1/L; a momentum-dependent potential gives a q-dependent T.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::propagator::{PropagatorOptions, Side};
use arrayscatter::two_excitation::{tmatrix_contact, tmatrix_general, Potential};
use num_complex::Complex64;
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let total = LatticeMomentum::chain(0.0);
    let opts = PropagatorOptions::default();
    let omega = Complex64::new(1.2, 0.0);
    let contact = tmatrix_contact(&disp, omega, Side::AboveCut, total, &opts)?;
    println!("hard core: T = {:.6}", contact.value);
    for u in [1e1, 1e3, 1e6] {
        let pot: Potential = Arc::new(move |_| Complex64::new(u, 0.0));
        let t = tmatrix_general(&disp, omega, Side::AboveCut, total, pot, &opts)?;
        let v = t.evaluate(LatticeMomentum::chain(8.0), LatticeMomentum::chain(9.0));
        println!("U = {u:>7.0e}: T = {v:.6} ({} nodes, residual {:.1e})", t.nodes.len(), t.residual);
    }
    let d = disp.config().spacing;
    let pot: Potential = Arc::new(move |q| Complex64::new(2.0 + (q.x * d).cos(), 0.0));
    let t = tmatrix_general(&disp, omega, Side::AboveCut, total, pot, &opts)?;
    for q in [7.0, 9.0, 11.0] {
        println!("U = 2 + cos(qd): T({q}, 9) = {:.6}", t.evaluate(LatticeMomentum::chain(q), LatticeMomentum::chain(9.0)));
    }
    Ok(())
}
