//! Collective shift and decay rate of a chain across the Brillouin zone.
//!
//! cargo run --example dispersion_curve -- 0.25

use arrayscatter::lattice::{ArrayConfig, Dispersion, LatticeMomentum, K0};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spacing: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.25);
    let disp = Dispersion::new(ArrayConfig::chain(spacing))?;
    let edge = disp.config().zone_edge();
    println!("# chain d = {spacing} λ₀, light cone at |p| = {K0:.6}");
    println!("{:>10} {:>12} {:>12} {:>6}", "p", "delta", "gamma", "class");
    for k in 0..=40 {
        let p = LatticeMomentum::chain(edge * k as f64 / 40.0);
        let class = format!("{:?}", disp.classify(p));
        println!("{:>10.5} {:>12.6} {:>12.6} {:>6}", p.x, disp.delta(p), disp.gamma(p), class);
    }
    let q = LatticeMomentum::chain(2.0 / 3.0 * edge);
    println!("# pair energy 2Δ(2π/3d) = {:.6}", 2.0 * disp.delta(q));
    Ok(())
}
