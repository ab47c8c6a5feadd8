//! Multi-sector energy detector: threshold for a target detection
//! probability and the resulting false-alarm rate as sensing time grows.
//!
//! ```text
//! cargo run --release --example detector_design
//! ```

use espar_cr::antenna::{compute_sector_integrals, BeamPatternModel};
use espar_cr::sensing::{detector_statistics, FramePlan, PriorModel};

fn main() -> espar_cr::Result<()> {
    let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8)?;
    let prior = PriorModel::new(0.3, 1.0, 1.0, 1.0, 1.0)?;
    let ints = compute_sector_integrals(&model)?;

    println!(
        "{:>6} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7}",
        "N", "T_sen", "eta", "P_fa", "P_d", "alpha0", "beta0", "D_t"
    );
    for n in [5, 10, 20, 40, 60, 100, 200, 400, 1000, 2000] {
        let plan = FramePlan::with_samples(20e-3, 1e-3, 1e-6, model.sectors(), n)?;
        let stats = detector_statistics(&plan, &prior, &ints)?;
        let d = stats.threshold_for_target_pd(0.9)?;
        println!(
            "{n:>6} {:>10.3e} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>7.4}{}",
            plan.t_sen,
            d.eta,
            d.p_fa,
            d.p_d,
            d.outcome.alpha0,
            d.outcome.beta0,
            plan.data_fraction(),
            if stats.clt_warning { "  (few samples)" } else { "" }
        );
    }
    Ok(())
}
