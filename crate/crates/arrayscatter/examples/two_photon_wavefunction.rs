//! Relative modulus of the outgoing two-photon wavefunction on a (q, Δ_ph) grid.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::propagator::{PairPropagator, PropagatorOptions};
use arrayscatter::two_excitation::{Fig4Grid, TwoPhotonState};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 0.25;
    let disp = Dispersion::new(ArrayConfig::chain(d))?;
    let energy = 2.0 * disp.delta(LatticeMomentum::chain(2.0 / 3.0 * PI / d));
    let prop = PairPropagator::new(&disp, LatticeMomentum::chain(0.0), PropagatorOptions::default());
    let state = TwoPhotonState::new(&prop, energy)?;
    let grid = Fig4Grid::compute(&state, 0.5 * PI / d, 64, 3.0, 61)?;
    let (i, j) = grid.interior_argmax();
    println!("E = {energy:.5}, ρ₂ = {:.5}", state.rho2);
    println!("largest relative modulus {:.4} at q = {:.4}, Δ_ph = {:.3}", grid.modulus[i][j], grid.q[i], grid.delta_ph[j]);
    if let Some((dph, m)) = grid.boundary_peak(0.0, 3.0) {
        println!("boundary column q = {:.4}: peak {m:.3} at Δ_ph = {dph:.3}", grid.q[grid.q.len() - 1]);
    }
    println!("{:>7} modulus at q = 0, π/8d, π/4d, 3π/8d", "Δ_ph");
    for (j, dph) in grid.delta_ph.iter().enumerate().step_by(5) {
        let cols: Vec<String> = [0, 16, 32, 48].iter().map(|&i| format!("{:9.4}", grid.modulus[i][j])).collect();
        println!("{dph:>7.3} {}", cols.join(" "));
    }
    Ok(())
}
