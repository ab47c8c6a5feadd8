//! Runs the closed-form versus Monte Carlo agreement suite at the default
//! operating point.
//!
//! ```text
//! cargo run --release --example monte_carlo_validation [trials]
//! ```

use espar_cr::config::ExperimentConfig;
use espar_cr::validation::validate;

fn main() -> espar_cr::Result<()> {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200_000);
    let mut cfg = ExperimentConfig::default();
    cfg.validation.trials = trials;
    cfg.validation.metric_trials = 10 * trials;

    let rep = validate(&cfg)?;
    println!(
        "optimal N = {}, C_LB = {:.4}, {trials} trials (x10 for outage/SEP)\n",
        rep.solve.n, rep.solve.c_lb
    );
    for c in &rep.checks {
        println!(
            "{} {:<30} closed {:>10.6}  empirical {:>10.6} +- {:.1e}  (tol {:.1e})",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            c.closed_form,
            c.empirical,
            c.std_err,
            c.tolerance
        );
    }
    Ok(())
}
