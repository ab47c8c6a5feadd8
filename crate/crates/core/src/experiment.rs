//! Sweeps, orientation averaging and the ESPAR/omni comparison.
//!
//! Capacity depends on the PU angle only through the sector it falls in,
//! and on the pair of angles only through `φ_SR - κ_{m_PU}`. The averaging
//! grid is therefore collapsed to distinct relative angles (folded by
//! reflection) with multiplicities, and each is solved once.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{wrap_angle, BeamPatternModel};
use crate::beamsel_sr::sector_means_from_geometry;
use crate::config::{ExperimentConfig, FeedbackBits};
use crate::error::Result;
use crate::metrics;
use crate::optimizer::search::{solve_p2, Orientation, P2Solution, SensingCache};
use crate::optimizer::{Binding, Constraints, IterationCounts, OptimizerSettings, PowerPolicy, Quantizer};
use crate::special::pairwise_sum;

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p_bar_db: f64,
    pub i_bar_db: f64,
    pub n_b: FeedbackBits,
}

/// Sweep grid in output order: `n_b` outermost, then `Ī`, then `P̄`.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let or_single = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let p = or_single(&cfg.sweep.p_bar_db, cfg.constraints.p_bar_db);
    let i = or_single(&cfg.sweep.i_bar_db, cfg.constraints.i_bar_db);
    let nb = if cfg.sweep.n_b.is_empty() {
        vec![cfg.quantizer.n_b]
    } else {
        cfg.sweep.n_b.clone()
    };
    let mut out = Vec::with_capacity(p.len() * i.len() * nb.len());
    for &n_b in &nb {
        for &i_bar_db in &i {
            for &p_bar_db in &p {
                out.push(SweepPoint {
                    p_bar_db,
                    i_bar_db,
                    n_b,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedOrientation {
    pub orientation: Orientation,
    pub weight: f64,
}

/// Distinct relative orientations of a `grid × grid` midpoint grid over
/// `(φ_PU, φ_SR)`, with their share of the grid. Weights sum to one.
pub fn averaging_orientations(model: &BeamPatternModel, grid: usize) -> Vec<WeightedOrientation> {
    if model.sectors() == 1 || grid == 0 {
        return vec![WeightedOrientation {
            orientation: Orientation { phi_sr: 0.0, m_pu: 0 },
            weight: 1.0,
        }];
    }
    let step = std::f64::consts::TAU / grid as f64;
    let mut pu_count = vec![0usize; model.sectors()];
    for b in 0..grid {
        pu_count[model.sector_of((b as f64 + 0.5) * step)] += 1;
    }
    let mut groups: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for a in 0..grid {
        let phi_sr = (a as f64 + 0.5) * step;
        for (m, &count) in pu_count.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let rel = wrap_angle(phi_sr - model.boresight(m)).abs();
            let key = (rel * 1e9).round() as u64;
            groups.entry(key).or_insert((rel, 0)).1 += count;
        }
    }
    let total = (grid * grid) as f64;
    groups
        .into_values()
        .map(|(rel, count)| WeightedOrientation {
            orientation: Orientation { phi_sr: rel, m_pu: 0 },
            weight: count as f64 / total,
        })
        .collect()
}

/// Summary of one optimized solve, as written to the per-point JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub phi_sr_deg: f64,
    /// 1-based.
    pub m_pu: usize,
    pub weight: f64,
    pub n: usize,
    pub t_sen: f64,
    pub d_t: f64,
    pub p_fa: f64,
    pub p_d: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub b0: f64,
    /// Thresholds `μ_1..μ_{N_b}`; for perfect CSI, the single cutoff.
    pub mu: Vec<f64>,
    /// `P_0..P_{N_b}`; empty for perfect CSI.
    pub power: Vec<f64>,
    pub lambda: f64,
    pub vartheta: f64,
    pub price: f64,
    pub binding: Binding,
    pub c_lb: f64,
    pub expected_power: f64,
    pub power_slack: f64,
    pub interference_slack: f64,
    pub complementary_slackness: [f64; 2],
    pub kkt_residual: f64,
    pub terminal_residual: f64,
    pub iterations: IterationCounts,
    pub sensing_evaluations: usize,
    pub unimodal: bool,
    pub converged: bool,
    pub diagnostic: Option<String>,
    pub p_out: f64,
    pub p_e: f64,
}

/// Orientation-weighted result of one antenna system at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub c_lb: f64,
    pub p_out: f64,
    pub p_e: f64,
    /// Weighted mean of the optimal sensing durations.
    pub t_sen: f64,
    pub converged: bool,
    pub solves: Vec<SolveRecord>,
}

/// Optimizes one orientation and evaluates its metrics.
pub fn solve_orientation(
    cache: &SensingCache,
    wo: WeightedOrientation,
    caps: &Constraints,
    quantizer: Quantizer,
    settings: &OptimizerSettings,
    rho: f64,
) -> Result<(P2Solution, SolveRecord)> {
    let o = wo.orientation;
    let p2 = solve_p2(cache, o, caps, quantizer, settings)?;
    let setup = cache.setup();
    let dist = sector_means_from_geometry(&setup.model, setup.gamma_ss, o.phi_sr)?;
    let best = &p2.best;
    let m = metrics::evaluate(&best.solution.policy, &dist, &best.state, rho)?;
    let detector = cache.entry(best.n)?.detector;
    let r = &best.solution.report;
    let (mu, power) = match &best.solution.policy {
        PowerPolicy::Quantized(q) => (q.mu.clone(), q.power.clone()),
        p => (vec![p.cutoff()], Vec::new()),
    };
    let record = SolveRecord {
        phi_sr_deg: o.phi_sr.to_degrees(),
        m_pu: o.m_pu + 1,
        weight: wo.weight,
        n: best.n,
        t_sen: best.t_sen,
        d_t: best.state.d_t,
        p_fa: detector.p_fa,
        p_d: detector.p_d,
        alpha0: best.state.alpha0,
        beta0: best.state.beta0,
        b0: best.state.b0,
        mu,
        power,
        lambda: r.lambda,
        vartheta: r.vartheta,
        price: r.price,
        binding: r.binding,
        c_lb: r.c_lb,
        expected_power: r.expected_power,
        power_slack: r.power_slack,
        interference_slack: r.interference_slack,
        complementary_slackness: r.complementary_slackness,
        kkt_residual: r.kkt_residual,
        terminal_residual: r.terminal_residual,
        iterations: r.iterations,
        sensing_evaluations: p2.evaluations,
        unimodal: p2.unimodal,
        converged: p2.converged,
        diagnostic: r.diagnostic.clone(),
        p_out: m.p_out,
        p_e: m.p_e,
    };
    Ok((p2, record))
}

/// Solves every orientation (in parallel) and forms weighted averages.
pub fn solve_system(
    cache: &SensingCache,
    orientations: &[WeightedOrientation],
    caps: &Constraints,
    quantizer: Quantizer,
    settings: &OptimizerSettings,
    rho: f64,
) -> Result<SystemResult> {
    let solves = orientations
        .par_iter()
        .map(|&wo| solve_orientation(cache, wo, caps, quantizer, settings, rho).map(|(_, r)| r))
        .collect::<Result<Vec<_>>>()?;
    let avg = |f: fn(&SolveRecord) -> f64| {
        let terms: Vec<f64> = solves.iter().map(|s| s.weight * f(s)).collect();
        pairwise_sum(&terms)
    };
    Ok(SystemResult {
        c_lb: avg(|s| s.c_lb),
        p_out: avg(|s| s.p_out),
        p_e: avg(|s| s.p_e),
        t_sen: avg(|s| s.t_sen),
        converged: solves.iter().all(|s| s.converged),
        solves,
    })
}

/// Everything computed at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub system: Option<SystemResult>,
    pub omni: Option<SystemResult>,
    /// `C̄_LB / C̄_LB,omni`.
    pub lambda: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Configured experiment with its sensing caches.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    cache: SensingCache,
    omni_cache: Option<SensingCache>,
    orientations: Vec<WeightedOrientation>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let setup = config.setup()?;
        let orientations = if config.orientation.average {
            averaging_orientations(&setup.model, config.orientation.grid)
        } else {
            vec![WeightedOrientation {
                orientation: config.fixed_orientation(&setup.model),
                weight: 1.0,
            }]
        };
        let omni_cache = if config.output.omni_reference && !config.antenna.omni {
            Some(SensingCache::new(setup.omni_equivalent()?)?)
        } else {
            None
        };
        Ok(Self {
            cache: SensingCache::new(setup)?,
            omni_cache,
            orientations,
            config,
        })
    }

    pub fn cache(&self) -> &SensingCache {
        &self.cache
    }

    pub fn orientations(&self) -> &[WeightedOrientation] {
        &self.orientations
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        sweep_points(&self.config)
    }

    fn solve_point(&self, point: SweepPoint) -> Result<(SystemResult, Option<SystemResult>)> {
        let caps = ExperimentConfig::caps(point.p_bar_db, point.i_bar_db)?;
        let q = point.n_b.quantizer();
        let settings = &self.config.solver;
        let rho = self.config.metrics.rho;
        let system = solve_system(&self.cache, &self.orientations, &caps, q, settings, rho)?;
        let omni = match &self.omni_cache {
            Some(c) => Some(solve_system(c, &averaging_orientations(&c.setup().model, 1), &caps, q, settings, rho)?),
            None => None,
        };
        Ok((system, omni))
    }

    /// Runs one point. A failed solve is recorded, not propagated.
    pub fn run_point(&self, point: SweepPoint) -> PointResult {
        match self.solve_point(point) {
            Ok((system, omni)) => {
                let lambda = omni.as_ref().map(|o| system.c_lb / o.c_lb);
                let converged = system.converged && omni.as_ref().is_none_or(|o| o.converged);
                PointResult {
                    point,
                    system: Some(system),
                    omni,
                    lambda,
                    converged,
                    error: None,
                }
            }
            Err(e) => PointResult {
                point,
                system: None,
                omni: None,
                lambda: None,
                converged: false,
                error: Some(e.to_string()),
            },
        }
    }

    /// Every sweep point, in sweep order.
    pub fn run(&self) -> Vec<PointResult> {
        self.points().into_par_iter().map(|p| self.run_point(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_grid_folds_to_distinct_angles() {
        let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8).unwrap();
        let w = averaging_orientations(&model, 64);
        assert_eq!(w.len(), 32);
        let total: f64 = w.iter().map(|x| x.weight).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|x| (x.weight - 1.0 / 32.0).abs() < 1e-15));
        assert!(w.iter().all(|x| x.orientation.phi_sr > 0.0 && x.orientation.phi_sr <= std::f64::consts::PI));
    }

    #[test]
    fn uneven_grid_still_sums_to_one() {
        let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 7).unwrap();
        let w = averaging_orientations(&model, 30);
        let total: f64 = w.iter().map(|x| x.weight).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_axes_give_one_point() {
        let cfg = ExperimentConfig::default();
        let p = sweep_points(&cfg);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].p_bar_db, cfg.constraints.p_bar_db);
    }

    #[test]
    fn sweep_order_is_nb_then_i_then_p() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.p_bar_db = vec![0.0, 5.0];
        cfg.sweep.i_bar_db = vec![-6.0, 2.0];
        cfg.sweep.n_b = vec![FeedbackBits::Finite(1), FeedbackBits::Infinite];
        let p = sweep_points(&cfg);
        assert_eq!(p.len(), 8);
        assert_eq!((p[1].p_bar_db, p[1].i_bar_db), (5.0, -6.0));
        assert_eq!(p[2].i_bar_db, 2.0);
        assert_eq!(p[4].n_b, FeedbackBits::Infinite);
    }
}
