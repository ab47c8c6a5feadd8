//! Agreement suite: every closed form at one configured point against its
//! Monte Carlo estimate.

use serde::{Deserialize, Serialize};

use crate::beamsel_sr::{beam_probabilities, sector_means_from_geometry};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::{solve_orientation, SolveRecord, WeightedOrientation};
use crate::mc_oracle::{
    detector_oracle, metrics_oracle, pu_selection_oracle, run_trials, sr_selection_oracle, total_variation,
    ProtocolModel,
};
use crate::metrics;
use crate::optimizer::search::SensingCache;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub closed_form: f64,
    pub empirical: f64,
    /// Standard error of the empirical value (0 for distances).
    pub std_err: f64,
    /// Allowed `|closed_form - empirical|`, or the bound on a distance.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn difference(name: &str, closed_form: f64, empirical: f64, std_err: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            closed_form,
            empirical,
            std_err,
            tolerance,
            pass: (closed_form - empirical).abs() <= tolerance,
        }
    }

    fn distance(name: &str, distance: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            closed_form: 0.0,
            empirical: distance,
            std_err: 0.0,
            tolerance: bound,
            pass: distance <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub trials: usize,
    pub metric_trials: usize,
    pub solve: SolveRecord,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Solves the configured point (fixed orientation, sweep axes ignored)
/// and runs the oracle suite at its optimal sensing time.
pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let setup = cfg.setup()?;
    let cache = SensingCache::new(setup)?;
    let s = cache.setup().clone();
    let o = cfg.fixed_orientation(&s.model);
    let caps = ExperimentConfig::caps(cfg.constraints.p_bar_db, cfg.constraints.i_bar_db)?;
    let q = cfg.quantizer.n_b.quantizer();
    let rho = cfg.metrics.rho;
    let wo = WeightedOrientation {
        orientation: o,
        weight: 1.0,
    };
    let (p2, record) = solve_orientation(&cache, wo, &caps, q, &cfg.solver, rho)?;
    let best = &p2.best;
    let entry = cache.entry(best.n)?;
    let dist = sector_means_from_geometry(&s.model, s.gamma_ss, o.phi_sr)?;
    let policy = &best.solution.policy;
    let state = &best.state;
    let trials = cfg.validation.trials;
    let seed = cfg.seed;
    let mut checks = Vec::new();

    let det = detector_oracle(&s.prior, &s.model, &entry.plan, entry.detector.eta, trials, seed);
    checks.push(Check::difference("detector P_fa", entry.detector.p_fa, det.p_fa.mean, det.p_fa.std_err, 0.01));
    checks.push(Check::difference("detector P_d", entry.detector.p_d, det.p_d.mean, det.p_d.std_err, 0.01));

    let column: Vec<f64> = (0..s.model.sectors()).map(|i| entry.delta_bar.get(i, o.m_pu)).collect();
    let sum: f64 = column.iter().sum();
    checks.push(Check::difference("PU selection column sum", 1.0, sum, 0.0, 1e-3));
    let freq = pu_selection_oracle(&s.prior, &s.model, best.n, o.m_pu, trials, seed.wrapping_add(1));
    checks.push(Check::distance("PU selection total variation", total_variation(&column, &freq), 0.01));

    let psi = beam_probabilities(&dist);
    let psi_sum: f64 = psi.psi.iter().sum();
    checks.push(Check::difference("SR selection sum", 1.0, psi_sum, 0.0, 1e-8));
    let sr = sr_selection_oracle(&dist, trials, seed.wrapping_add(2));
    checks.push(Check::distance("SR gain KS distance", sr.ks, 0.002));
    checks.push(Check::distance("SR selection total variation", total_variation(&psi.psi, &sr.psi), 0.01));

    let closed = metrics::evaluate(policy, &dist, state, rho)?;
    let mo = metrics_oracle(policy, &dist, state, rho, cfg.validation.metric_trials, seed.wrapping_add(3));
    checks.push(Check::difference("outage probability", closed.p_out, mo.p_out.mean, mo.p_out.std_err, 0.003));
    checks.push(Check::difference("symbol error probability", closed.p_e, mo.p_e.mean, mo.p_e.std_err, 5e-4));

    let proto = ProtocolModel {
        model: s.model.clone(),
        prior: s.prior,
        gamma_ss: s.gamma_ss,
        plan: entry.plan,
        eta: entry.detector.eta,
        phi_sr: o.phi_sr,
        m_pu: o.m_pu,
        rho,
    };
    let run = run_trials(&proto, &dist, policy, state.d_t, trials, seed.wrapping_add(4))?;
    let r = &best.solution.report;
    let rel = |v: f64, se: f64| (0.02 * v.abs()).max(4.0 * se);
    checks.push(Check::difference(
        "average transmit power",
        r.power_used,
        run.power.mean,
        run.power.std_err,
        rel(r.power_used, run.power.std_err),
    ));
    checks.push(Check::difference(
        "average interference",
        r.interference_used,
        run.interference.mean,
        run.interference.std_err,
        rel(r.interference_used, run.interference.std_err),
    ));
    let bound_holds = run.capacity.mean + 4.0 * run.capacity.std_err >= r.c_lb;
    checks.push(Check {
        name: "capacity above lower bound".to_string(),
        closed_form: r.c_lb,
        empirical: run.capacity.mean,
        std_err: run.capacity.std_err,
        tolerance: 4.0 * run.capacity.std_err,
        pass: bound_holds,
    });

    let passed = checks.iter().all(|c| c.pass);
    Ok(ValidationReport {
        seed,
        trials,
        metric_trials: cfg.validation.metric_trials,
        solve: record,
        checks,
        passed,
    })
}
