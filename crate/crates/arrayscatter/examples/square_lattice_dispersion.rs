//! Ewald-summed dispersion of a square lattice along Γ–X–M–Γ and the light-cone
//! edge behaviour of the decay rate.

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum, Polarization};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disp = Dispersion::new(ArrayConfig::square(0.3, Polarization::PerpendicularToPlane))?;
    let edge = disp.config().zone_edge();
    let path = [(0.0, 0.0), (edge, 0.0), (edge, edge), (0.0, 0.0)];
    println!("{:>9} {:>9} {:>12} {:>12}", "p_x", "p_y", "delta", "gamma");
    for leg in path.windows(2) {
        for k in 0..12 {
            let t = k as f64 / 12.0;
            let p = LatticeMomentum::planar(
                leg[0].0 + t * (leg[1].0 - leg[0].0),
                leg[0].1 + t * (leg[1].1 - leg[0].1),
            );
            let e = disp.try_epsilon(p)?;
            println!("{:>9.4} {:>9.4} {:>12.6} {:>12.6}", p.x, p.y, e.re, -2.0 * e.im);
        }
    }
    let report = disp.edge_behavior(0.3);
    println!("# approaching |p| = k0: Γ divergent = {}, Δ divergent = {}", report.gamma_divergent, report.delta_divergent);
    for s in &report.samples {
        println!("#   1 − |p|/k0 = {:.0e}  Γ = {:.4e}", s.distance, s.gamma);
    }
    Ok(())
}
