use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use espar_cr::config::{ExperimentConfig, SweepConfig};
use espar_cr::experiment::{Experiment, PointResult};
use espar_cr::report::{self, Manifest, OutputDir};
use espar_cr::validation::validate;
use espar_cr::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// ESPAR cognitive-radio capacity optimizer.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV/JSON output.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// TOML experiment config; defaults apply when omitted.
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the configured point (sweep axes ignored).
    Solve(ConfigArg),
    /// Run every point of the sweep grid.
    Sweep(ConfigArg),
    /// Check closed forms against Monte Carlo at the configured point.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
        /// Trials for the detector, beam-selection and frame oracles.
        #[arg(long)]
        trials: Option<usize>,
        /// Trials for the outage/SEP oracle.
        #[arg(long)]
        metric_trials: Option<usize>,
    },
    /// Dump beampattern samples for plotting.
    Pattern {
        #[command(flatten)]
        config: ConfigArg,
        /// Angles over one turn.
        #[arg(long, default_value_t = 720)]
        samples: usize,
    },
}

fn load(arg: &ConfigArg, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &arg.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_SCHEMA,
        Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_FAILURE,
    }
}

fn run_sweep(cli: &Cli, cfg: ExperimentConfig, command: &str) -> Result<u8, Error> {
    let exp = Experiment::new(cfg)?;
    let results: Vec<PointResult> = exp.run();
    for r in &results {
        let p = r.point;
        match (&r.system, &r.error) {
            (Some(s), _) => println!(
                "P_bar={} dB I_bar={} dB n_b={}: C_LB={:.4} Lambda={} P_out={:.4} P_e={:.5} T_sen={:.3e}{}",
                p.p_bar_db,
                p.i_bar_db,
                p.n_b,
                s.c_lb,
                r.lambda.map_or("-".to_string(), |l| format!("{l:.3}")),
                s.p_out,
                s.p_e,
                s.t_sen,
                if r.converged { "" } else { "  [not converged]" }
            ),
            (None, e) => println!(
                "P_bar={} dB I_bar={} dB n_b={}: failed: {}",
                p.p_bar_db,
                p.i_bar_db,
                p.n_b,
                e.as_deref().unwrap_or("unknown")
            ),
        }
    }
    let manifest = report::write_sweep(&cli.out_dir, &exp.config, command, &results)?;
    eprintln!("wrote {}", manifest.display());
    Ok(if results.iter().all(|r| r.converged) {
        0
    } else {
        EXIT_NONCONVERGENCE
    })
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Solve(arg) => {
            let mut cfg = load(arg, cli.seed)?;
            cfg.sweep = SweepConfig::default();
            run_sweep(cli, cfg, "solve")
        }
        Command::Sweep(arg) => run_sweep(cli, load(arg, cli.seed)?, "sweep"),
        Command::Validate {
            config,
            trials,
            metric_trials,
        } => {
            let mut cfg = load(config, cli.seed)?;
            if let Some(t) = trials {
                cfg.validation.trials = *t;
            }
            if let Some(t) = metric_trials {
                cfg.validation.metric_trials = *t;
            }
            cfg.validate()?;
            let rep = validate(&cfg)?;
            for c in &rep.checks {
                println!(
                    "{} {}: closed form {:.6}, empirical {:.6} (se {:.1e}), tolerance {:.1e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.closed_form,
                    c.empirical,
                    c.std_err,
                    c.tolerance
                );
            }
            let mut dir = OutputDir::create(&cli.out_dir)?;
            dir.write("validation.json", &report::to_json(&rep))?;
            dir.finish(Manifest::new(&cfg, "validate", 1, usize::from(rep.solve.converged)))?;
            if !rep.passed {
                let names: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
                eprintln!("validation failed: {}", names.join(", "));
                return Ok(EXIT_VALIDATION);
            }
            Ok(0)
        }
        Command::Pattern { config, samples } => {
            let cfg = load(config, cli.seed)?;
            if *samples == 0 {
                return Err(Error::Config("--samples must be at least 1".into()));
            }
            let model = cfg.pattern()?;
            let mut dir = OutputDir::create(&cli.out_dir)?;
            let path = dir.write("pattern.csv", &report::pattern_csv(&model, *samples)?)?;
            dir.finish(Manifest::new(&cfg, "pattern", 0, 0))?;
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
