//! Capacity gain of the ESPAR antenna over an omni-directional antenna
//! with the same mean gain, averaged over PU and SR orientations.
//!
//! ```text
//! cargo run --release --example espar_vs_omni -- [P_bar_dB ...]
//! ```
//!
//! Without arguments only P̄ = 12 dB is run; pass a list (e.g. `0 6 12 18
//! 24 30`) to trace the curve for Ī = -6, -2 and 2 dB.

use std::time::Instant;

use espar_cr::config::{ExperimentConfig, FeedbackBits};
use espar_cr::experiment::Experiment;

fn main() -> espar_cr::Result<()> {
    let p_bar: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ExperimentConfig::default();
    cfg.quantizer.n_b = FeedbackBits::Infinite;
    cfg.orientation.average = true;
    if p_bar.is_empty() {
        cfg.constraints.p_bar_db = 12.0;
        cfg.sweep.i_bar_db = vec![-6.0];
    } else {
        cfg.sweep.p_bar_db = p_bar;
        cfg.sweep.i_bar_db = vec![-6.0, -2.0, 2.0];
    }

    let exp = Experiment::new(cfg)?;
    println!(
        "{} distinct orientations from a {g}x{g} grid",
        exp.orientations().len(),
        g = exp.config.orientation.grid
    );
    println!("{:>7} {:>7} {:>9} {:>9} {:>7} {:>8}", "P_bar", "I_bar", "C_espar", "C_omni", "Lambda", "time");
    for point in exp.points() {
        let t = Instant::now();
        let r = exp.run_point(point);
        let (Some(s), Some(o)) = (&r.system, &r.omni) else {
            println!("{:>7} {:>7}  failed: {:?}", point.p_bar_db, point.i_bar_db, r.error);
            continue;
        };
        println!(
            "{:>7} {:>7} {:>9.4} {:>9.4} {:>7.3} {:>7.1?}",
            point.p_bar_db,
            point.i_bar_db,
            s.c_lb,
            o.c_lb,
            r.lambda.unwrap(),
            t.elapsed()
        );
    }
    Ok(())
}
