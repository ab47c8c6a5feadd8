//! Multi-sector energy detector.
//!
//! The decision statistic is the average received energy over all `M·N`
//! samples collected while sweeping the sectors. Its mean and variance under
//! each hypothesis come from the central-limit approximation; the threshold
//! is set for a target detection probability and the false-alarm rate
//! follows.

use serde::{Deserialize, Serialize};

use crate::antenna::SectorIntegrals;
use crate::error::{Error, Result};
use crate::special::{q_function, q_inverse};

/// Sample counts below this make the Gaussian approximation questionable.
pub const CLT_MIN_SAMPLES: usize = 30;

/// Frame timing. All durations are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub t_f: f64,
    pub t_sen: f64,
    pub t_train: f64,
    pub t_s: f64,
    pub sectors: usize,
}

impl FramePlan {
    pub fn new(t_f: f64, t_sen: f64, t_train: f64, t_s: f64, sectors: usize) -> Result<Self> {
        let plan = Self {
            t_f,
            t_sen,
            t_train,
            t_s,
            sectors,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan whose sensing duration is exactly `n` samples per sector.
    pub fn with_samples(t_f: f64, t_train: f64, t_s: f64, sectors: usize, n: usize) -> Result<Self> {
        let t_sen = n as f64 * sectors as f64 * t_s;
        // Nudge up by a relative ulp-scale amount so the floor rule returns n.
        Self::new(t_f, t_sen * (1.0 + 1e-12), t_train, t_s, sectors)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f > 0.0 && self.t_s > 0.0 && self.t_train >= 0.0) {
            return Err(Error::domain("frame durations must be positive"));
        }
        if self.sectors == 0 {
            return Err(Error::domain("at least one sector is required"));
        }
        if !(self.t_sen > 0.0 && self.t_sen < self.t_f - self.t_train) {
            return Err(Error::domain(format!(
                "sensing time {} s outside (0, {}) s",
                self.t_sen,
                self.t_f - self.t_train
            )));
        }
        if self.samples_per_sector() == 0 {
            return Err(Error::domain("sensing time shorter than one sample per sector"));
        }
        Ok(())
    }

    /// `N = floor(T_sen / (M·T_s))`.
    pub fn samples_per_sector(&self) -> usize {
        (self.t_sen / (self.sectors as f64 * self.t_s)).floor() as usize
    }

    /// `N_eq = M·N`.
    pub fn total_samples(&self) -> usize {
        self.sectors * self.samples_per_sector()
    }

    /// Fraction of the frame left for data, `(T_f - T_sen - T_train)/T_f`.
    pub fn data_fraction(&self) -> f64 {
        (self.t_f - self.t_sen - self.t_train) / self.t_f
    }
}

/// Priors and second-order channel statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    /// Probability that the primary user is active.
    pub pi1: f64,
    /// Primary transmit power.
    pub p_p: f64,
    /// Mean of the SU_Tx–PU power gain `g`.
    pub gamma: f64,
    /// Mean of the SU_Tx–PU (interference) gain `g_sp`.
    pub gamma_sp: f64,
    pub sigma_w2: f64,
}

impl PriorModel {
    pub fn new(pi1: f64, p_p: f64, gamma: f64, gamma_sp: f64, sigma_w2: f64) -> Result<Self> {
        let prior = Self {
            pi1,
            p_p,
            gamma,
            gamma_sp,
            sigma_w2,
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi1 >= 0.0 && self.pi1 <= 1.0) {
            return Err(Error::domain(format!("pi1 must be a probability, got {}", self.pi1)));
        }
        for (name, v) in [
            ("P_p", self.p_p),
            ("gamma", self.gamma),
            ("gamma_sp", self.gamma_sp),
            ("sigma_w2", self.sigma_w2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn pi0(&self) -> f64 {
        1.0 - self.pi1
    }

    /// Mean interference power seen at the SU receiver, `P_p·γ_sp`.
    pub fn sigma_p2(&self) -> f64 {
        self.p_p * self.gamma_sp
    }

    /// `γ·P_p/σ_w²`.
    pub fn snr_pu(&self) -> f64 {
        self.gamma * self.p_p / self.sigma_w2
    }
}

/// Gaussian-approximation moments of the decision statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorStatistics {
    pub n_eq: usize,
    pub sigma_w2: f64,
    pub pi1: f64,
    /// Mean under H1.
    pub zeta: f64,
    pub var_h0: f64,
    pub var_h1: f64,
    /// Set when `N_eq` is too small for the CLT approximation.
    pub clt_warning: bool,
}

/// Joint probabilities of true state and sensing decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingOutcome {
    /// Idle and sensed idle, `π0(1 - P_fa)`.
    pub alpha0: f64,
    /// Busy but sensed idle, `π1(1 - P_d)`.
    pub beta0: f64,
    pub pihat0: f64,
    pub pihat1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorDesign {
    pub stats: DetectorStatistics,
    pub eta: f64,
    pub p_fa: f64,
    pub p_d: f64,
    pub outcome: SensingOutcome,
}

/// Mean and variance of the decision statistic under both hypotheses.
pub fn detector_statistics(
    plan: &FramePlan,
    prior: &PriorModel,
    integrals: &SectorIntegrals,
) -> Result<DetectorStatistics> {
    plan.validate()?;
    prior.validate()?;
    let m = plan.sectors;
    if integrals.e_cross.dim() != m {
        return Err(Error::domain(format!(
            "sector integrals are for {} sectors, plan has {m}",
            integrals.e_cross.dim()
        )));
    }
    let n = plan.samples_per_sector();
    let n_eq = plan.total_samples();
    let s2 = prior.sigma_w2;
    let a = prior.gamma * prior.p_p;
    let mf = m as f64;
    let zeta = a * integrals.e_a + s2;
    let var_h0 = s2 * s2 / n_eq as f64;
    let var_h1 = (s2 * s2
        + 2.0 * a * integrals.e_a * s2
        + a * a * (3.0 * integrals.e_b - mf * n as f64 * integrals.e_a * integrals.e_a))
        / n_eq as f64
        + a * a / (mf * mf) * integrals.cross_sum();
    Ok(DetectorStatistics {
        n_eq,
        sigma_w2: s2,
        pi1: prior.pi1,
        zeta,
        var_h0,
        var_h1,
        clt_warning: n_eq < CLT_MIN_SAMPLES,
    })
}

impl DetectorStatistics {
    pub fn sd_h0(&self) -> f64 {
        self.var_h0.sqrt()
    }

    pub fn sd_h1(&self) -> f64 {
        self.var_h1.sqrt()
    }

    /// False-alarm probability at threshold `eta`.
    pub fn p_fa_at(&self, eta: f64) -> f64 {
        q_function((eta - self.sigma_w2) / self.sd_h0())
    }

    /// Detection probability at threshold `eta`.
    pub fn p_d_at(&self, eta: f64) -> f64 {
        q_function((eta - self.zeta) / self.sd_h1())
    }

    /// Sets the threshold so that `P_d` equals `target_pd`.
    pub fn threshold_for_target_pd(&self, target_pd: f64) -> Result<DetectorDesign> {
        if !(target_pd > 0.0 && target_pd < 1.0) {
            return Err(Error::domain(format!(
                "target detection probability must lie in (0, 1), got {target_pd}"
            )));
        }
        let offset = self.sd_h1() * q_inverse(target_pd);
        let eta = self.zeta + offset;
        let p_fa = q_function((offset + self.zeta - self.sigma_w2) / self.sd_h0());
        let outcome = sensing_error_probabilities(p_fa, target_pd, self.pi1);
        Ok(DetectorDesign {
            stats: *self,
            eta,
            p_fa,
            p_d: target_pd,
            outcome,
        })
    }
}

/// `α0 = π0(1 - P_fa)`, `β0 = π1(1 - P_d)`, `π̂0 = α0 + β0`, `π̂1 = 1 - π̂0`.
pub fn sensing_error_probabilities(p_fa: f64, p_d: f64, pi1: f64) -> SensingOutcome {
    let alpha0 = (1.0 - pi1) * (1.0 - p_fa);
    let beta0 = pi1 * (1.0 - p_d);
    let pihat0 = alpha0 + beta0;
    SensingOutcome {
        alpha0,
        beta0,
        pihat0,
        pihat1: 1.0 - pihat0,
    }
}
