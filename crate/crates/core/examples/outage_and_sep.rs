//! Outage and symbol error probability along a transmit-power sweep. Once
//! the interference cap binds, raising P̄ no longer changes the policy and
//! both metrics flatten out.
//!
//! ```text
//! cargo run --release --example outage_and_sep
//! ```

use espar_cr::config::ExperimentConfig;
use espar_cr::experiment::{solve_orientation, WeightedOrientation};
use espar_cr::optimizer::search::SensingCache;
use espar_cr::optimizer::Quantizer;

fn main() -> espar_cr::Result<()> {
    let cfg = ExperimentConfig::default();
    let cache = SensingCache::new(cfg.setup()?)?;
    let wo = WeightedOrientation {
        orientation: cfg.fixed_orientation(&cache.setup().model),
        weight: 1.0,
    };
    let rho = cfg.metrics.rho;

    println!("{:>6} {:>8} {:>9} {:>10} {:>13}", "P_bar", "C_LB", "P_out", "P_e", "binding");
    for p_bar_db in (0..=30).step_by(3) {
        let caps = ExperimentConfig::caps(f64::from(p_bar_db), -6.0)?;
        let (_, r) = solve_orientation(&cache, wo, &caps, Quantizer::Bits(2), &cfg.solver, rho)?;
        println!(
            "{p_bar_db:>6} {:>8.4} {:>9.5} {:>10.3e} {:>13?}",
            r.c_lb, r.p_out, r.p_e, r.binding
        );
    }
    Ok(())
}
