//! Brute-force validation of the dispersion, propagator, density of states and the
//! Lorentzian convolution identity, printed as JSON reports.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum};
use arrayscatter::oracle::{appendix_c_check, dispersion_report, dos_histogram, dos_report, propagator_report, HistogramOptions};
use arrayscatter::propagator::{PairPropagator, PropagatorOptions};
use num_complex::Complex64;
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::chain(0.25))?;
    let total = LatticeMomentum::chain(0.0);
    let prop = PairPropagator::new(&disp, total, PropagatorOptions::default());
    let hist = dos_histogram(
        &disp,
        total,
        &HistogramOptions {
            samples: 2_000_000,
            bins: 20,
            ..Default::default()
        },
    )?;
    let reports = vec![
        dispersion_report(&disp, LatticeMomentum::chain(0.9 * PI / 0.25), 1_000_000)?,
        propagator_report(&prop, Complex64::new(1.4, 1.0), 4096)?,
        dos_report(&prop, &hist, 0.05)?,
        appendix_c_check(&disp, &[LatticeMomentum::chain(1.0)], 0.4, 1e3)?,
        appendix_c_check(&disp, &[LatticeMomentum::chain(1.0), LatticeMomentum::chain(-3.0)], 0.4, 1e3)?,
    ];
    println!("{}", serde_json::to_string_pretty(&reports)?);
    Ok(())
}
