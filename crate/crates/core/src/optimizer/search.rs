//! Search over the sensing duration.
//!
//! Longer sensing gives a better detector and a better guess of the primary
//! user's beam, at the cost of data time. The duration is snapped to whole
//! samples per sector, so the search runs over the integer `N`: a coarse
//! logarithmic grid (which also audits unimodality) followed by an integer
//! golden-section search inside the best bracket.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::antenna::{compute_sector_integrals, BeamPatternModel, SectorIntegrals};
use crate::beamsel_pu::{average_error_matrix, PuErrorMatrix};
use crate::beamsel_sr::{beam_probabilities, sector_means_from_geometry, SelectionDiversityDistribution};
use crate::error::{Error, Result};
use crate::sensing::{detector_statistics, DetectorDesign, FramePlan, PriorModel};

use super::{
    interference_coefficient, solve_fixed_sensing, Constraints, FixedSensingSolution, OptimizerSettings,
    Quantizer, SensingState,
};

/// Frame timing that does not depend on the sensing duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub t_f: f64,
    pub t_train: f64,
    pub t_s: f64,
}

impl FrameTiming {
    /// Largest `N` with `N·M·T_s < T_f - T_train`.
    pub fn max_samples(&self, sectors: usize) -> usize {
        let avail = self.t_f - self.t_train;
        let step = sectors as f64 * self.t_s;
        let mut n = (avail / step).floor() as usize;
        // Same rounding as `FramePlan::with_samples`.
        while n > 0 && n as f64 * step * (1.0 + 1e-12) >= avail {
            n -= 1;
        }
        n
    }
}

/// Everything that fixes the sensing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSetup {
    pub model: BeamPatternModel,
    pub prior: PriorModel,
    pub gamma_ss: f64,
    pub target_pd: f64,
    pub timing: FrameTiming,
}

impl SystemSetup {
    /// The same system with a single omnidirectional antenna of equal mean gain.
    pub fn omni_equivalent(&self) -> Result<Self> {
        Ok(Self {
            model: self.model.make_omni_equivalent()?,
            ..self.clone()
        })
    }
}

/// Quantities that depend only on `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingEntry {
    pub plan: FramePlan,
    pub detector: DetectorDesign,
    pub delta_bar: PuErrorMatrix,
}

/// Per-`N` sensing results, shared between solves of the same system.
#[derive(Debug)]
pub struct SensingCache {
    setup: SystemSetup,
    integrals: SectorIntegrals,
    entries: Mutex<BTreeMap<usize, Arc<SensingEntry>>>,
}

impl SensingCache {
    pub fn new(setup: SystemSetup) -> Result<Self> {
        setup.prior.validate()?;
        if !(setup.target_pd > 0.0 && setup.target_pd < 1.0) {
            return Err(Error::domain(format!("target P_d {} outside (0, 1)", setup.target_pd)));
        }
        if setup.timing.max_samples(setup.model.sectors()) == 0 {
            return Err(Error::domain("frame leaves no room for sensing"));
        }
        let integrals = compute_sector_integrals(&setup.model)?;
        Ok(Self {
            setup,
            integrals,
            entries: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn setup(&self) -> &SystemSetup {
        &self.setup
    }

    pub fn integrals(&self) -> &SectorIntegrals {
        &self.integrals
    }

    pub fn max_samples(&self) -> usize {
        self.setup.timing.max_samples(self.setup.model.sectors())
    }

    /// Sensing quantities for `n` samples per sector, computed once.
    pub fn entry(&self, n: usize) -> Result<Arc<SensingEntry>> {
        if let Some(e) = self.entries.lock().unwrap().get(&n) {
            return Ok(e.clone());
        }
        let s = &self.setup;
        let t = s.timing;
        let plan = FramePlan::with_samples(t.t_f, t.t_train, t.t_s, s.model.sectors(), n)?;
        let stats = detector_statistics(&plan, &s.prior, &self.integrals)?;
        let detector = stats.threshold_for_target_pd(s.target_pd)?;
        let delta_bar = average_error_matrix(&s.model, &s.prior, n)?;
        let entry = Arc::new(SensingEntry {
            plan,
            detector,
            delta_bar,
        });
        Ok(self
            .entries
            .lock()
            .unwrap()
            .entry(n)
            .or_insert(entry)
            .clone())
    }

    /// Number of distinct `N` evaluated so far.
    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where the secondary pair and the primary user sit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    /// Angle of the secondary receiver seen from the transmitter, radians.
    pub phi_sr: f64,
    /// Sector containing the primary user (0-based).
    pub m_pu: usize,
}

impl Orientation {
    /// Receiver on the boresight of sector `m_sr`.
    pub fn on_boresight(model: &BeamPatternModel, m_sr: usize, m_pu: usize) -> Self {
        Self {
            phi_sr: model.boresight(m_sr),
            m_pu,
        }
    }
}

/// Coefficients of the fixed-sensing problem for one `N`.
pub fn sensing_state(
    cache: &SensingCache,
    entry: &SensingEntry,
    dist: &SelectionDiversityDistribution,
    m_pu: usize,
) -> Result<SensingState> {
    let s = cache.setup();
    let out = entry.detector.outcome;
    let psi = beam_probabilities(dist);
    let b0 = interference_coefficient(&psi, &entry.delta_bar, m_pu, &s.model, out.beta0, s.prior.gamma_sp)?;
    Ok(SensingState {
        alpha0: out.alpha0,
        beta0: out.beta0,
        pihat0: out.pihat0,
        b0,
        d_t: entry.plan.data_fraction(),
        sigma_w2: s.prior.sigma_w2,
        sigma_p2: s.prior.sigma_p2(),
    })
}

/// Solution at one fixed `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingPoint {
    pub n: usize,
    pub t_sen: f64,
    pub state: SensingState,
    pub solution: FixedSensingSolution,
}

pub fn solve_at_samples(
    cache: &SensingCache,
    orientation: Orientation,
    caps: &Constraints,
    quantizer: Quantizer,
    settings: &OptimizerSettings,
    n: usize,
) -> Result<SensingPoint> {
    let s = cache.setup();
    let dist = sector_means_from_geometry(&s.model, s.gamma_ss, orientation.phi_sr)?;
    let entry = cache.entry(n)?;
    let state = sensing_state(cache, &entry, &dist, orientation.m_pu)?;
    let solution = solve_fixed_sensing(&state, &dist, caps, quantizer, settings)?;
    Ok(SensingPoint {
        n,
        t_sen: entry.plan.t_sen,
        state,
        solution,
    })
}

/// Full solution with the sensing duration optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P2Solution {
    pub best: SensingPoint,
    /// `(N, C_LB)` of the coarse audit grid.
    pub grid: Vec<(usize, f64)>,
    /// False when the audit grid has more than one interior local maximum.
    pub unimodal: bool,
    pub evaluations: usize,
    pub converged: bool,
}

impl P2Solution {
    pub fn c_lb(&self) -> f64 {
        self.best.solution.report.c_lb
    }
}

fn audit_grid(n_max: usize, points: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1).max(1) as f64;
            ((n_max as f64).powf(t)).round() as usize
        })
        .map(|n| n.clamp(1, n_max))
        .collect();
    grid.dedup();
    grid
}

/// Maximizes the capacity bound over the sensing duration.
pub fn solve_p2(
    cache: &SensingCache,
    orientation: Orientation,
    caps: &Constraints,
    quantizer: Quantizer,
    settings: &OptimizerSettings,
) -> Result<P2Solution> {
    let n_max = cache.max_samples();
    let mut seen: BTreeMap<usize, SensingPoint> = BTreeMap::new();
    let eval = |n: usize, seen: &mut BTreeMap<usize, SensingPoint>| -> Result<f64> {
        if let Some(p) = seen.get(&n) {
            return Ok(p.solution.report.c_lb);
        }
        let p = solve_at_samples(cache, orientation, caps, quantizer, settings, n)?;
        let c = p.solution.report.c_lb;
        seen.insert(n, p);
        Ok(c)
    };

    let grid_n = audit_grid(n_max, settings.sensing_grid.max(3));
    let mut grid = Vec::with_capacity(grid_n.len());
    for &n in &grid_n {
        grid.push((n, eval(n, &mut seen)?));
    }
    let peaks = (0..grid.len())
        .filter(|&i| {
            let left = i == 0 || grid[i].1 > grid[i - 1].1;
            let right = i + 1 == grid.len() || grid[i].1 >= grid[i + 1].1;
            left && right
        })
        .count();
    let unimodal = peaks <= 1;
    let ib = (0..grid.len())
        .max_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1))
        .unwrap();
    let mut lo = if ib == 0 { 1 } else { grid[ib - 1].0 };
    let mut hi = if ib + 1 == grid.len() { n_max } else { grid[ib + 1].0 };

    // Integer golden-section search on [lo, hi].
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 3 {
        let span = (hi - lo) as f64;
        let mut x1 = hi - (r * span).round() as usize;
        let mut x2 = lo + (r * span).round() as usize;
        if x1 >= x2 {
            x1 = lo + (hi - lo) / 3;
            x2 = hi - (hi - lo) / 3;
        }
        if eval(x1, &mut seen)? < eval(x2, &mut seen)? {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    for n in lo..=hi {
        eval(n, &mut seen)?;
    }
    let evaluations = seen.len();
    let best = seen
        .into_values()
        .max_by(|a, b| a.solution.report.c_lb.total_cmp(&b.solution.report.c_lb))
        .unwrap();
    let converged = best.solution.report.converged;
    Ok(P2Solution {
        best,
        grid,
        unimodal,
        evaluations,
        converged,
    })
}
