//! The local pair propagator L(E + i0, P) split into dark, mixed and two-photon
//! parts, compared with a Riemann sum off the real axis.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::oracle::propagator_riemann;
use arrayscatter::propagator::{PairPropagator, PropagatorOptions, Side};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let total = LatticeMomentum::chain(0.0);
    let prop = PairPropagator::new(&disp, total, PropagatorOptions::default());
    println!("{:>8} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10}", "E", "Re L", "Im L", "Re L2", "Im L2", "rho0", "rho2");
    for k in 0..=12 {
        let e = -1.0 + 0.3 * k as f64;
        let dec = prop.evaluate(Complex64::new(e, 0.0), Side::AboveCut)?;
        let l = dec.value(Side::AboveCut);
        let flag = if dec.critical.is_some() { " critical" } else { "" };
        println!(
            "{e:>8.3} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>10.5} {:>10.5}{flag}",
            l.re, l.im, dec.l[2].re, dec.l[2].im, dec.rho[0], dec.rho[2]
        );
    }
    let omega = Complex64::new(1.4, 1.0);
    let adaptive = prop.evaluate(omega, Side::AboveCut)?.total_value();
    let riemann = propagator_riemann(&disp, omega, total, 4096)?;
    println!("# ω = {omega}: adaptive {adaptive:.8}, Riemann(4096) {riemann:.8}");
    Ok(())
}
