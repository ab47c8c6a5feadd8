//! Selection diversity towards the secondary receiver: per-beam mean gains,
//! the probability of each beam being strongest and the law of the
//! strongest gain.
//!
//! ```text
//! cargo run --release --example sr_beam_selection [phi_SR_deg]
//! ```

use espar_cr::antenna::BeamPatternModel;
use espar_cr::beamsel_sr::{beam_probabilities, sector_means_from_geometry};

fn main() -> espar_cr::Result<()> {
    let deg: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10.0);
    let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8)?;
    let dist = sector_means_from_geometry(&model, 3.0, deg.to_radians())?;
    let psi = beam_probabilities(&dist);

    println!("receiver at {deg} deg");
    println!("{:>5} {:>10} {:>8}", "beam", "delta", "Psi");
    for (m, (d, p)) in dist.delta().iter().zip(&psi.psi).enumerate() {
        println!("{:>5} {d:>10.5} {p:>8.5}", m + 1);
    }
    println!("sum of Psi = {:.12}", psi.total());

    println!("\nstrongest gain nu*:");
    for p in [0.01, 0.1, 0.5, 0.9, 0.99] {
        println!("  {:>4}% quantile {:.5}", p * 100.0, dist.inverse_cdf(p)?);
    }
    let x = 0.2;
    println!("  F({x}) = {:.6}, f({x}) = {:.6}", dist.cdf(x), dist.pdf(x));
    Ok(())
}
