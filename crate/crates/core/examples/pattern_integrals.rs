//! Beampattern gains and the pattern integrals used by the detector.
//!
//! ```text
//! cargo run --release --example pattern_integrals
//! ```

use espar_cr::antenna::{compute_sector_integrals, mean_gain, BeamPatternModel};

fn main() -> espar_cr::Result<()> {
    for (a0, a1) in [(1.0, 0.01), (0.97, 0.03), (2.0, 0.01)] {
        let model = BeamPatternModel::from_degrees(a0, a1, 20.0, 8)?;
        println!("A0={a0:<5} A1={a1:<5} E_A={:.4}", mean_gain(&model)?);
    }

    let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8)?;
    let ints = compute_sector_integrals(&model)?;
    println!("\nE_B = {:.5}, sum of E_mm' = {:.5}", ints.e_b, ints.cross_sum());
    println!("first row of E_mm':");
    for m in 0..model.sectors() {
        print!(" {:.2e}", ints.e_cross.get(0, m));
    }
    println!();

    // Beam 1 and its neighbour, every 5 degrees over the first sector pair.
    println!("\n{:>6} {:>9} {:>9}", "deg", "beam 1", "beam 2");
    for deg in (-25..=70).step_by(5) {
        let phi = f64::from(deg).to_radians();
        println!("{deg:>6} {:>9.5} {:>9.5}", model.gain(0, phi), model.gain(1, phi));
    }
    Ok(())
}
