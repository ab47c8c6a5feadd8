//! Which beam the transmitter believes the primary user is in. Prints the
//! orientation-averaged error matrix and how its diagonal sharpens with
//! sensing time.
//!
//! ```text
//! cargo run --release --example pu_beam_selection
//! ```

use espar_cr::antenna::BeamPatternModel;
use espar_cr::beamsel_pu::average_error_matrix;
use espar_cr::sensing::PriorModel;
use espar_cr::special::db_to_linear;

fn main() -> espar_cr::Result<()> {
    let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8)?;
    for snr_db in [0.0, -5.0] {
        let prior = PriorModel::new(0.3, db_to_linear(snr_db), 1.0, 1.0, 1.0)?;
        println!("SNR_PU = {snr_db} dB");
        for n in [20, 60, 100] {
            let d = average_error_matrix(&model, &prior, n)?;
            let col: Vec<String> = (0..model.sectors()).map(|i| format!("{:.4}", d.get(i, 0))).collect();
            println!("  N={n:<4} column 1: {}", col.join(" "));
        }
    }

    let prior = PriorModel::new(0.3, 1.0, 1.0, 1.0, 1.0)?;
    let d = average_error_matrix(&model, &prior, 60)?;
    println!("\nfull matrix at N=60, 0 dB (row = chosen beam, column = true sector):");
    print!("{}", d.to_csv());
    Ok(())
}
