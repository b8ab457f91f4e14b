//! Channel S-matrix for two dark spin waves at q = ±2π/(3d) on a d = λ₀/4 chain.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::propagator::PropagatorOptions;
use arrayscatter::two_excitation::on_shell_smatrix;
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let q = LatticeMomentum::chain(2.0 / 3.0 * PI / 0.25);
    let energy = 2.0 * disp.delta(q);
    let s = on_shell_smatrix(&disp, energy, LatticeMomentum::chain(0.0), &PropagatorOptions::default())?;
    println!("E = {energy:.6}, L(E + i0) = {:.6}", s.l_above);
    println!("rho = {:?}, open = {:?}", s.propagator.rho, s.open);
    for (a, row) in s.s.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            match v {
                Some(z) => println!("s{a}{b} = {:+.6} {:+.6}i", z.re, z.im),
                None => println!("s{a}{b} = closed"),
            }
        }
    }
    println!("unitarity defect {:.2e}, 1 − |s00| = {:.6}", s.unitarity_defect(), s.darkness()?);
    Ok(())
}
