//! Capacity-maximizing power policy for one orientation: quantizer
//! thresholds, power levels, sensing time and multipliers for several
//! feedback resolutions.
//!
//! ```text
//! cargo run --release --example optimize_policy [P_bar_dB] [I_bar_dB]
//! ```

use espar_cr::config::ExperimentConfig;
use espar_cr::optimizer::search::{solve_p2, SensingCache};
use espar_cr::optimizer::{PowerPolicy, Quantizer};

fn main() -> espar_cr::Result<()> {
    let mut args = std::env::args().skip(1).filter_map(|a| a.parse::<f64>().ok());
    let p_bar_db = args.next().unwrap_or(12.0);
    let i_bar_db = args.next().unwrap_or(-6.0);

    // Default parameters, PU in sector 1 and receiver on the boresight of beam 1.
    let cfg = ExperimentConfig::default();
    let cache = SensingCache::new(cfg.setup()?)?;
    let orientation = cfg.fixed_orientation(&cache.setup().model);
    let caps = ExperimentConfig::caps(p_bar_db, i_bar_db)?;
    println!("P_bar = {p_bar_db} dB, I_bar = {i_bar_db} dB, N_max = {}", cache.max_samples());

    for q in [
        Quantizer::Bits(1),
        Quantizer::Bits(2),
        Quantizer::Bits(3),
        Quantizer::Bits(4),
        Quantizer::PerfectCsi,
    ] {
        let p2 = solve_p2(&cache, orientation, &caps, q, &cfg.solver)?;
        let best = &p2.best;
        let r = &best.solution.report;
        println!(
            "\nn_b = {:<3} C_LB = {:.4}  N = {} (T_sen = {:.2e} s), {} sensing points tried",
            q.label(),
            r.c_lb,
            best.n,
            best.t_sen,
            p2.evaluations
        );
        println!(
            "  price {:.4e}  lambda {:.4e}  vartheta {:.4e}  binding {:?}",
            r.price, r.lambda, r.vartheta, r.binding
        );
        println!(
            "  slack: power {:.1e} interference {:.1e}; KKT residual {:.1e}",
            r.power_slack, r.interference_slack, r.kkt_residual
        );
        match &best.solution.policy {
            PowerPolicy::Quantized(p) => {
                let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
                println!("  mu: {}", fmt(&p.mu));
                println!("  P:  {}", fmt(&p.power));
            }
            p => println!("  continuous policy, silent below nu = {:.4}", p.cutoff()),
        }
    }
    Ok(())
}
