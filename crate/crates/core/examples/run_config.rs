//! Runs a TOML experiment config and writes the sweep CSV, per-point JSON
//! and manifest, the same way the command-line tool does.
//!
//! ```text
//! cargo run --release --example run_config -- configs/feedback_bits_sweep.toml out/feedback_bits
//! ```

use std::path::PathBuf;

use espar_cr::config::ExperimentConfig;
use espar_cr::experiment::Experiment;
use espar_cr::report::write_sweep;

fn main() -> espar_cr::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) => ExperimentConfig::from_file(PathBuf::from(p).as_path())?,
        None => ExperimentConfig::default(),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));

    let exp = Experiment::new(cfg)?;
    let results = exp.run();
    let manifest = write_sweep(&out, &exp.config, "sweep", &results)?;
    for r in &results {
        let c = r.system.as_ref().map_or(f64::NAN, |s| s.c_lb);
        println!("{:?}: C_LB = {c:.4}, Lambda = {:?}", r.point, r.lambda);
    }
    println!("manifest: {}", manifest.display());
    Ok(())
}
