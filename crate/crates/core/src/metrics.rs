//! Outage and symbol error probabilities of a power policy.
//!
//! The SEP uses the generic form `E{Q(√(ρ·SNR))}`, with `ρ` standing for
//! the modulation. Noise is `σ_w²` when the channel is correctly sensed
//! idle and `σ_w² + σ_p²` when a busy channel is missed. Frames sensed busy
//! carry no data and do not enter the sum.

use serde::{Deserialize, Serialize};

use crate::beamsel_sr::SelectionDiversityDistribution;
use crate::error::{Error, Result};
use crate::optimizer::continuous;
use crate::optimizer::{PowerPolicy, SensingState};
use crate::quadrature::GaussLegendre;
use crate::special::q_function;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub p_out: f64,
    pub p_e: f64,
    pub rho: f64,
    /// `ρ·P_k/σ_w²` for `k = 0..N_b` (empty for a continuous policy).
    pub snr0: Vec<f64>,
    /// `ρ·P_k/(σ_w² + σ_p²)`.
    pub snr1: Vec<f64>,
}

/// `Pr{ν* < μ_1}`.
pub fn outage_probability(policy: &PowerPolicy, dist: &SelectionDiversityDistribution) -> f64 {
    dist.cdf(policy.cutoff())
}

/// `V(μ, s) = Q(√(μ(s+2A)))/√(1+2A/s) - e^{-μA}·Q(√(μs))`, so that
/// `∫_{μ_a}^{μ_b} Q(√(s·x))·A·e^{-Ax} dx = V(μ_b, s) - V(μ_a, s)`.
/// `V(∞, s) = 0` and `V(μ, 0) = -e^{-μA}/2`.
pub fn v_function(mu: f64, snr: f64, a: f64) -> f64 {
    if mu.is_infinite() {
        return 0.0;
    }
    if snr <= 0.0 {
        return -0.5 * (-mu * a).exp();
    }
    q_function((mu * (snr + 2.0 * a)).sqrt()) / (1.0 + 2.0 * a / snr).sqrt()
        - (-mu * a).exp() * q_function((mu * snr).sqrt())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("modulation constant must be positive, got {rho}")));
    }
    Ok(())
}

fn thresholds(policy: &PowerPolicy) -> Option<(Vec<f64>, Vec<f64>)> {
    match policy {
        PowerPolicy::Quantized(q) => {
            let mut edges = Vec::with_capacity(q.mu.len() + 2);
            edges.push(0.0);
            edges.extend_from_slice(&q.mu);
            edges.push(f64::INFINITY);
            Some((edges, q.power.clone()))
        }
        PowerPolicy::Silent => Some((vec![0.0, f64::INFINITY], vec![0.0])),
        PowerPolicy::Continuous(_) => None,
    }
}

/// SEP in closed form: inclusion–exclusion over beam subsets, summed over
/// quantization intervals. A continuous policy is integrated numerically.
pub fn symbol_error_probability(
    policy: &PowerPolicy,
    dist: &SelectionDiversityDistribution,
    alpha0: f64,
    beta0: f64,
    rho: f64,
    sigma_w2: f64,
    sigma_p2: f64,
) -> Result<f64> {
    check_rho(rho)?;
    let Some((edges, power)) = thresholds(policy) else {
        return symbol_error_probability_numeric(policy, dist, alpha0, beta0, rho, sigma_w2, sigma_p2);
    };
    if dist.terms().is_empty() {
        return symbol_error_probability_numeric(policy, dist, alpha0, beta0, rho, sigma_w2, sigma_p2);
    }
    let noise1 = sigma_w2 + sigma_p2;
    let mut parts = Vec::with_capacity(dist.terms().len() * power.len());
    for t in dist.terms() {
        let weight = -t.sign;
        for (k, &p) in power.iter().enumerate() {
            let (lo, hi) = (edges[k], edges[k + 1]);
            let s0 = rho * p / sigma_w2;
            let s1 = rho * p / noise1;
            let idle = v_function(hi, s0, t.rate) - v_function(lo, s0, t.rate);
            let busy = v_function(hi, s1, t.rate) - v_function(lo, s1, t.rate);
            parts.push(weight * (alpha0 * idle + beta0 * busy));
        }
    }
    Ok(crate::special::pairwise_sum(&parts).clamp(0.0, 1.0))
}

/// SEP by direct quadrature of `E{Q(√(ρ·ν*·P(ν*)/noise))}` against the
/// density of `ν*`.
pub fn symbol_error_probability_numeric(
    policy: &PowerPolicy,
    dist: &SelectionDiversityDistribution,
    alpha0: f64,
    beta0: f64,
    rho: f64,
    sigma_w2: f64,
    sigma_p2: f64,
) -> Result<f64> {
    check_rho(rho)?;
    let noise1 = sigma_w2 + sigma_p2;
    let sep = |x: f64, p: f64| {
        alpha0 * q_function((rho * x * p / sigma_w2).sqrt()) + beta0 * q_function((rho * x * p / noise1).sqrt())
    };
    let silent = 0.5 * (alpha0 + beta0) * dist.cdf(policy.cutoff());
    match policy {
        PowerPolicy::Continuous(c) => Ok(silent + continuous::expect(c, dist, sep)?),
        PowerPolicy::Silent => Ok(silent),
        PowerPolicy::Quantized(q) => {
            let top = dist.inverse_sf(1e-17)?;
            let gl = GaussLegendre::new(16);
            let mut total = silent;
            for k in 0..q.mu.len() {
                let lo = q.mu[k];
                let hi = q.mu.get(k + 1).copied().unwrap_or(top.max(lo));
                let panels = if k + 1 == q.mu.len() { 64 } else { 4 };
                for (x, w) in gl.composite(lo, hi, panels) {
                    total += w * dist.pdf(x) * sep(x, q.power[k + 1]);
                }
            }
            Ok(total)
        }
    }
}

/// Outage, SEP and per-interval SNRs.
pub fn evaluate(
    policy: &PowerPolicy,
    dist: &SelectionDiversityDistribution,
    state: &SensingState,
    rho: f64,
) -> Result<PerformanceMetrics> {
    let p_e = symbol_error_probability(
        policy,
        dist,
        state.alpha0,
        state.beta0,
        rho,
        state.sigma_w2,
        state.sigma_p2,
    )?;
    let (snr0, snr1) = match thresholds(policy) {
        Some((_, power)) if !matches!(policy, PowerPolicy::Silent) => (
            power.iter().map(|p| rho * p / state.sigma_w2).collect(),
            power
                .iter()
                .map(|p| rho * p / (state.sigma_w2 + state.sigma_p2))
                .collect(),
        ),
        _ => (Vec::new(), Vec::new()),
    };
    Ok(PerformanceMetrics {
        p_out: outage_probability(policy, dist),
        p_e,
        rho,
        snr0,
        snr1,
    })
}
