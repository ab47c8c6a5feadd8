//! Capacity maximization under average power and interference caps.
//!
//! For a fixed sensing duration the problem reduces to choosing quantizer
//! thresholds `μ_k` and power levels `P_k`. Both constraints act on the same
//! quantity `E{P}`, so the Lagrangian depends on the multipliers only through
//! the price `c = λ·π̂0 + ϑ·b0`. For a given price the powers follow from the
//! KKT conditions and the thresholds from the stationarity recurrence; the
//! price is then set so that the tighter cap binds.
//!
//! [`search`] wraps this in the search over the sensing duration.

pub mod continuous;
pub mod kkt;
pub mod search;
pub mod threshold;

use serde::{Deserialize, Serialize};

use crate::antenna::BeamPatternModel;
use crate::beamsel_pu::PuErrorMatrix;
use crate::beamsel_sr::{SelectionDiversityDistribution, SrSelectionProbabilities};
use crate::error::{Error, Result};

use continuous::ContinuousPolicy;
use kkt::{kkt_power, KktForm, RateModel};
use threshold::{solve_thresholds, RecurrenceContext};

/// Average transmit-power and interference caps, in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub p_bar: f64,
    pub i_bar: f64,
}

impl Constraints {
    pub fn new(p_bar: f64, i_bar: f64) -> Result<Self> {
        if !(p_bar > 0.0) || !(i_bar > 0.0) {
            return Err(Error::domain(format!(
                "caps must be positive, got P_bar={p_bar}, I_bar={i_bar}"
            )));
        }
        Ok(Self { p_bar, i_bar })
    }
}

/// Feedback resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantizer {
    /// `n_b` feedback bits, `2^{n_b}` intervals.
    Bits(u32),
    /// Unquantized gain at the transmitter.
    PerfectCsi,
}

impl Quantizer {
    /// Number of transmitting intervals `N_b`, if finite.
    pub fn levels(&self) -> Option<usize> {
        match self {
            Quantizer::Bits(b) => Some(1usize << b),
            Quantizer::PerfectCsi => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Quantizer::Bits(b) => b.to_string(),
            Quantizer::PerfectCsi => "inf".to_string(),
        }
    }
}

/// Sensing-dependent coefficients for one sensing duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingState {
    pub alpha0: f64,
    pub beta0: f64,
    pub pihat0: f64,
    /// Effective interference coefficient.
    pub b0: f64,
    /// Data fraction of the frame.
    pub d_t: f64,
    pub sigma_w2: f64,
    pub sigma_p2: f64,
}

impl SensingState {
    pub fn rates(&self) -> RateModel {
        RateModel {
            alpha0: self.alpha0,
            beta0: self.beta0,
            sigma_w2: self.sigma_w2,
            sigma_p2: self.sigma_p2,
        }
    }

    /// Largest admissible `E{P}` and which cap sets it.
    pub fn power_budget(&self, caps: &Constraints) -> (f64, Binding) {
        let by_power = caps.p_bar / (self.d_t * self.pihat0);
        let by_interference = if self.b0 > 0.0 {
            caps.i_bar / (self.d_t * self.b0)
        } else {
            f64::INFINITY
        };
        if by_power <= by_interference {
            (by_power, Binding::Power)
        } else {
            (by_interference, Binding::Interference)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    Power,
    Interference,
    /// Nothing can be gained by transmitting.
    None,
}

/// Tuning knobs. None of these are fixed by the model; they are numerical
/// choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub kkt_form: KktForm,
    /// Required `|1 - F(μ_{N_b+1})|`.
    pub terminal_tol: f64,
    pub max_shots: usize,
    /// Relative tolerance on the binding constraint.
    pub price_rtol: f64,
    pub max_price_iter: usize,
    /// Subgradient warm-start iterations on `(λ, ϑ)`.
    pub subgradient_iters: usize,
    /// Step scale `a` in `a/√t` (relative to the multiplier scale).
    pub subgradient_step: f64,
    pub max_bcd_sweeps: usize,
    /// Stop the block-coordinate sweeps when `C_LB` moves less than this.
    pub bcd_tol: f64,
    /// Points of the coarse audit grid over the sensing duration.
    pub sensing_grid: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            kkt_form: KktForm::Stationary,
            terminal_tol: 1e-9,
            max_shots: 600,
            price_rtol: 1e-10,
            max_price_iter: 200,
            subgradient_iters: 12,
            subgradient_step: 0.5,
            max_bcd_sweeps: 20,
            bcd_tol: 1e-6,
            sensing_grid: 12,
        }
    }
}

/// Thresholds `μ_1..μ_{N_b}` and powers `P_0..P_{N_b}` (`P_0 = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedPowerPolicy {
    pub n_b: u32,
    pub mu: Vec<f64>,
    pub power: Vec<f64>,
}

impl QuantizedPowerPolicy {
    pub fn new(n_b: u32, mu: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        let levels = 1usize << n_b;
        if mu.len() != levels || power.len() != levels + 1 {
            return Err(Error::domain(format!(
                "{n_b} bits need {levels} thresholds and {} powers, got {} and {}",
                levels + 1,
                mu.len(),
                power.len()
            )));
        }
        if power[0] != 0.0 {
            return Err(Error::domain("P_0 must be zero"));
        }
        if !(mu[0] > 0.0) || mu.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("thresholds must be positive and increasing"));
        }
        if power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::domain("powers must be finite and non-negative"));
        }
        Ok(Self { n_b, mu, power })
    }

    pub fn levels(&self) -> usize {
        self.mu.len()
    }

    /// `Pr{ν* ∈ [μ_k, μ_{k+1})}` for `k = 1..N_b`.
    pub fn interval_masses(&self, dist: &SelectionDiversityDistribution) -> Vec<f64> {
        let s: Vec<f64> = self.mu.iter().map(|&m| dist.sf(m)).collect();
        (0..s.len())
            .map(|k| s[k] - s.get(k + 1).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Either a quantized policy or the perfect-CSI continuous map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PowerPolicy {
    Quantized(QuantizedPowerPolicy),
    Continuous(ContinuousPolicy),
    /// Transmit nothing.
    Silent,
}

impl PowerPolicy {
    /// Gain below which the transmitter stays silent.
    pub fn cutoff(&self) -> f64 {
        match self {
            PowerPolicy::Quantized(q) => q.mu[0],
            PowerPolicy::Continuous(c) => c.cutoff(),
            PowerPolicy::Silent => f64::INFINITY,
        }
    }

    /// Power used when the strongest gain is `nu`.
    pub fn power_at(&self, nu: f64) -> f64 {
        match self {
            PowerPolicy::Quantized(q) => match q.mu.partition_point(|&m| m <= nu) {
                0 => 0.0,
                k => q.power[k],
            },
            PowerPolicy::Continuous(c) => c.power(nu),
            PowerPolicy::Silent => 0.0,
        }
    }

    /// Gain value the transmitter assumes for `nu` (the interval's lower
    /// threshold, or `nu` itself under perfect CSI).
    pub fn quantized_gain(&self, nu: f64) -> f64 {
        match self {
            PowerPolicy::Quantized(q) => match q.mu.partition_point(|&m| m <= nu) {
                0 => 0.0,
                k => q.mu[k - 1],
            },
            PowerPolicy::Continuous(_) => nu,
            PowerPolicy::Silent => 0.0,
        }
    }

    /// Quantization interval index of `nu` (0 = silent).
    pub fn interval_of(&self, nu: f64) -> usize {
        match self {
            PowerPolicy::Quantized(q) => q.mu.partition_point(|&m| m <= nu),
            PowerPolicy::Continuous(c) => usize::from(nu >= c.cutoff()),
            PowerPolicy::Silent => 0,
        }
    }

    /// `E{P(ν*)}`.
    pub fn expected_power(&self, dist: &SelectionDiversityDistribution) -> Result<f64> {
        match self {
            PowerPolicy::Quantized(q) => Ok(q
                .interval_masses(dist)
                .iter()
                .zip(&q.power[1..])
                .map(|(w, p)| w * p)
                .sum()),
            PowerPolicy::Continuous(c) => Ok(continuous::expectations(c, dist)?.0),
            PowerPolicy::Silent => Ok(0.0),
        }
    }
}

/// `C_LB = D_t·Σ_k (α0·R00_k + β0·R10_k)·[F(μ_{k+1}) - F(μ_k)]`, or the
/// perfect-CSI expectation for a continuous policy.
pub fn capacity_lower_bound(
    policy: &PowerPolicy,
    dist: &SelectionDiversityDistribution,
    rates: &RateModel,
    d_t: f64,
) -> Result<f64> {
    match policy {
        PowerPolicy::Quantized(q) => {
            let masses = q.interval_masses(dist);
            Ok(d_t
                * masses
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * rates.utility(q.mu[k], q.power[k + 1]))
                    .sum::<f64>())
        }
        PowerPolicy::Continuous(c) => {
            let own = ContinuousPolicy { rates: *rates, ..*c };
            Ok(d_t * continuous::expectations(&own, dist)?.1)
        }
        PowerPolicy::Silent => Ok(0.0),
    }
}

/// `b0 = β0·γ_sp·Σ_j Σ_i Ψ_j·Δ̄_{m*_PU,i}·p(κ_j - κ_i)`.
pub fn interference_coefficient(
    psi: &SrSelectionProbabilities,
    delta_bar: &PuErrorMatrix,
    m_pu: usize,
    model: &BeamPatternModel,
    beta0: f64,
    gamma_sp: f64,
) -> Result<f64> {
    let m = model.sectors();
    if psi.psi.len() != m || delta_bar.sectors() != m {
        return Err(Error::domain(format!(
            "dimension mismatch: {} sectors, Ψ has {}, Δ̄ has {}",
            m,
            psi.psi.len(),
            delta_bar.sectors()
        )));
    }
    if m_pu >= m {
        return Err(Error::domain(format!("m_PU index {m_pu} out of range")));
    }
    let mut total = 0.0;
    for (j, &pj) in psi.psi.iter().enumerate() {
        for i in 0..m {
            total += pj * delta_bar.get(m_pu, i) * model.base_gain(model.boresight(j) - model.boresight(i));
        }
    }
    Ok(beta0 * gamma_sp * total)
}

/// Iteration counts of one fixed-sensing solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationCounts {
    pub subgradient: usize,
    pub price: usize,
    pub shots: usize,
    pub bcd_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub c_lb: f64,
    /// `R00_k` and `R10_k` for `k = 1..N_b` (empty for perfect CSI).
    pub r00: Vec<f64>,
    pub r10: Vec<f64>,
    pub b0: f64,
    pub lambda: f64,
    pub vartheta: f64,
    pub price: f64,
    pub binding: Binding,
    pub expected_power: f64,
    pub power_used: f64,
    pub interference_used: f64,
    /// `(cap - used)/cap`.
    pub power_slack: f64,
    pub interference_slack: f64,
    /// `λ·|power slack|` and `ϑ·|interference slack|` in normalized units.
    pub complementary_slackness: [f64; 2],
    /// Largest normalized per-interval stationarity residual.
    pub kkt_residual: f64,
    /// `|1 - F(μ_{N_b+1})|` left by the threshold recurrence.
    pub terminal_residual: f64,
    /// Lagrangian after each block update of the coordinate-descent polish.
    pub lagrangian_trace: Vec<f64>,
    pub iterations: IterationCounts,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

/// Result of a solve at fixed sensing duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSensingSolution {
    pub policy: PowerPolicy,
    pub report: CapacityReport,
}

struct Evaluation {
    policy: PowerPolicy,
    expected_power: f64,
    shots: usize,
    terminal: f64,
}

fn evaluate_price(
    state: &SensingState,
    dist: &SelectionDiversityDistribution,
    quantizer: Quantizer,
    settings: &OptimizerSettings,
    price: f64,
) -> Result<Evaluation> {
    let rates = state.rates();
    match quantizer {
        Quantizer::PerfectCsi => {
            let policy = ContinuousPolicy {
                price,
                rates,
                form: settings.kkt_form,
            };
            let (ep, _) = continuous::expectations(&policy, dist)?;
            Ok(Evaluation {
                policy: PowerPolicy::Continuous(policy),
                expected_power: ep,
                shots: 0,
                terminal: 0.0,
            })
        }
        Quantizer::Bits(bits) => {
            let levels = 1usize << bits;
            let ctx = RecurrenceContext {
                dist,
                rates,
                price,
                form: settings.kkt_form,
            };
            let sol = solve_thresholds(&ctx, levels, settings.terminal_tol, settings.max_shots)?;
            let q = QuantizedPowerPolicy {
                n_b: bits,
                mu: sol.mu,
                power: sol.power,
            };
            let policy = PowerPolicy::Quantized(q);
            let ep = policy.expected_power(dist)?;
            Ok(Evaluation {
                policy,
                expected_power: ep,
                shots: sol.iterations,
                terminal: sol.terminal.abs(),
            })
        }
    }
}

/// `L = -C_LB + λ(D_t·π̂0·E{P} - P̄) + ϑ(D_t·b0·E{P} - Ī)`.
pub fn lagrangian(
    state: &SensingState,
    caps: &Constraints,
    c_lb: f64,
    expected_power: f64,
    lambda: f64,
    vartheta: f64,
) -> f64 {
    -c_lb
        + lambda * (state.d_t * state.pihat0 * expected_power - caps.p_bar)
        + vartheta * (state.d_t * state.b0 * expected_power - caps.i_bar)
}

fn policy_value(
    q: &QuantizedPowerPolicy,
    dist: &SelectionDiversityDistribution,
    rates: &RateModel,
    price: f64,
) -> f64 {
    let masses = q.interval_masses(dist);
    masses
        .iter()
        .enumerate()
        .map(|(k, w)| w * (rates.utility(q.mu[k], q.power[k + 1]) - price * q.power[k + 1]))
        .sum()
}

/// Block-coordinate descent on the Lagrangian at a fixed price: each sweep
/// minimizes over every threshold in turn (1-D golden-section search inside
/// its neighbours, accepted only if it lowers the Lagrangian) and then sets
/// every power to its KKT value. Returns the Lagrangian after each block
/// and the number of sweeps.
pub fn coordinate_descent(
    policy: &mut QuantizedPowerPolicy,
    state: &SensingState,
    caps: &Constraints,
    dist: &SelectionDiversityDistribution,
    multipliers: (f64, f64),
    settings: &OptimizerSettings,
) -> (Vec<f64>, usize) {
    let rates = state.rates();
    let (lambda, vartheta) = multipliers;
    let price = lambda * state.pihat0 + vartheta * state.b0;
    // L = -D_t·value + constant, where value = Σ_k w_k (U_k - c·P_k).
    let constant = -lambda * caps.p_bar - vartheta * caps.i_bar;
    let lag = |q: &QuantizedPowerPolicy| -state.d_t * policy_value(q, dist, &rates, price) + constant;
    let c_lb = |q: &QuantizedPowerPolicy| {
        capacity_lower_bound(&PowerPolicy::Quantized(q.clone()), dist, &rates, state.d_t)
            .unwrap_or(f64::NAN)
    };
    let mut trace = vec![lag(policy)];
    let levels = policy.levels();
    let mut sweeps = 0;
    let mut last_c = c_lb(policy);
    while sweeps < settings.max_bcd_sweeps {
        sweeps += 1;
        for k in 0..levels {
            let lo = if k == 0 { 0.0 } else { policy.mu[k - 1] };
            let hi = policy.mu.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let p = policy.power[k + 1];
            let prev_value = if k == 0 {
                0.0
            } else {
                rates.utility(policy.mu[k - 1], policy.power[k]) - price * policy.power[k]
            };
            let s_next = if k + 1 < levels { dist.sf(policy.mu[k + 1]) } else { 0.0 };
            let local = |mu: f64| {
                let s = dist.sf(mu);
                (rates.utility(mu, p) - price * p) * (s - s_next) - prev_value * s
            };
            let current = policy.mu[k];
            let (a, b) = (
                if lo > 0.0 { lo.ln() } else { (current * 1e-3).ln() },
                if hi.is_finite() { hi.ln() } else { (current * 1e3).ln() },
            );
            let best = golden_max(|x| local(x.exp()), a, b, 80).exp();
            if best > lo && best < hi && local(best) > local(current) {
                policy.mu[k] = best;
            }
        }
        trace.push(lag(policy));
        for k in 0..levels {
            policy.power[k + 1] = kkt_power(&rates, policy.mu[k], price, settings.kkt_form);
        }
        trace.push(lag(policy));
        let c = c_lb(policy);
        if (c - last_c).abs() < settings.bcd_tol {
            break;
        }
        last_c = c;
    }
    (trace, sweeps)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1.0) {
            break;
        }
    }
    if f1 > f2 {
        x1
    } else {
        x2
    }
}

/// Solves the fixed-sensing problem: warm-start the multipliers with a few
/// diminishing-step subgradient iterations, settle the price on the binding
/// cap by a bracketed root search in `ln c`, and (for quantized feedback)
/// polish by block-coordinate descent at the final price.
pub fn solve_fixed_sensing(
    state: &SensingState,
    dist: &SelectionDiversityDistribution,
    caps: &Constraints,
    quantizer: Quantizer,
    settings: &OptimizerSettings,
) -> Result<FixedSensingSolution> {
    if !(state.d_t > 0.0 && state.d_t <= 1.0) {
        return Err(Error::domain(format!("data fraction {} outside (0, 1]", state.d_t)));
    }
    if state.pihat0 <= 0.0 || state.alpha0 + state.beta0 <= 0.0 {
        return Ok(silent_solution(state, caps));
    }
    let (budget, binding) = state.power_budget(caps);
    let mut counts = IterationCounts::default();

    // Multiplier scale: the price at which unconstrained water-filling would
    // spend roughly the budget.
    let dmax = dist.delta().iter().cloned().fold(0.0, f64::max);
    let c0 = state.pihat0 / (std::f64::consts::LN_2 * (budget + state.sigma_w2 / dmax));
    let mut lambda = c0 / state.pihat0;
    let mut vartheta = 0.0;
    let theta_scale = if state.b0 > 0.0 { c0 / state.b0 } else { 0.0 };
    let lambda_scale = lambda;
    let mut c_low = 0.0_f64; // price known to overspend
    let mut c_high = f64::INFINITY; // price known to underspend
    let mut best: Option<(f64, Evaluation)> = None;
    for t in 1..=settings.subgradient_iters {
        let price = (lambda * state.pihat0 + vartheta * state.b0).max(c0 * 1e-12);
        let ev = evaluate_price(state, dist, quantizer, settings, price)?;
        counts.subgradient += 1;
        counts.shots += ev.shots;
        let ep = ev.expected_power;
        if ep > budget {
            c_low = c_low.max(price);
        } else {
            c_high = c_high.min(price);
        }
        let g_power = state.d_t * state.pihat0 * ep / caps.p_bar - 1.0;
        let g_interf = state.d_t * state.b0 * ep / caps.i_bar - 1.0;
        let step = settings.subgradient_step / (t as f64).sqrt();
        lambda = (lambda + step * lambda_scale * g_power.clamp(-1.0, 1.0)).max(0.0);
        vartheta = (vartheta + step * theta_scale * g_interf.clamp(-1.0, 1.0)).max(0.0);
        best = Some((price, ev));
    }

    // Bracket the price.
    let mut probe = best.as_ref().map_or(c0, |b| b.0);
    while !(c_low > 0.0 && c_high.is_finite()) {
        if c_low == 0.0 {
            probe = if c_high.is_finite() { c_high * 0.25 } else { probe * 0.25 };
        } else {
            probe = c_low * 4.0;
        }
        let ev = evaluate_price(state, dist, quantizer, settings, probe)?;
        counts.price += 1;
        counts.shots += ev.shots;
        if ev.expected_power > budget {
            c_low = probe;
        } else {
            c_high = probe;
        }
        if counts.price > settings.max_price_iter {
            return Err(Error::NonConvergence("could not bracket the constraint price".into()));
        }
    }

    // Illinois false position on h(ln c) = ln(E{P}/budget).
    let h = |ep: f64| (ep / budget).ln();
    let ev_lo = evaluate_price(state, dist, quantizer, settings, c_low)?;
    let ev_hi = evaluate_price(state, dist, quantizer, settings, c_high)?;
    counts.shots += ev_lo.shots + ev_hi.shots;
    let (mut a, mut fa) = (c_low.ln(), h(ev_lo.expected_power));
    let (mut b, mut fb) = (c_high.ln(), h(ev_hi.expected_power));
    let mut chosen = if fa.abs() < fb.abs() { (c_low, ev_lo) } else { (c_high, ev_hi) };
    let mut side = 0;
    let mut converged = false;
    while counts.price < settings.max_price_iter {
        if h(chosen.1.expected_power).abs() <= settings.price_rtol {
            converged = true;
            break;
        }
        counts.price += 1;
        let mut x = if fa.is_finite() && fb.is_finite() && fa != fb {
            a + (b - a) * fa / (fa - fb)
        } else {
            0.5 * (a + b)
        };
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let ev = evaluate_price(state, dist, quantizer, settings, x.exp())?;
        counts.shots += ev.shots;
        let fx = h(ev.expected_power);
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        chosen = (x.exp(), ev);
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
            converged = h(chosen.1.expected_power).abs() <= 1e-6;
            break;
        }
    }
    let (price, ev) = chosen;
    let (lambda, vartheta) = match binding {
        Binding::Power => (price / state.pihat0, 0.0),
        Binding::Interference => (0.0, price / state.b0),
        Binding::None => (0.0, 0.0),
    };

    let mut policy = ev.policy;
    let mut trace = Vec::new();
    if let PowerPolicy::Quantized(q) = &mut policy {
        let (t, sweeps) = coordinate_descent(q, state, caps, dist, (lambda, vartheta), settings);
        trace = t;
        counts.bcd_sweeps = sweeps;
    }
    let mut report = build_report(state, caps, dist, &policy, (lambda, vartheta), price, binding, settings)?;
    report.terminal_residual = ev.terminal;
    report.lagrangian_trace = trace;
    report.iterations = counts;
    let feasible = report.power_slack >= -1e-4 && report.interference_slack >= -1e-4;
    report.converged = converged && feasible && report.terminal_residual <= 1e-6;
    if !report.converged {
        report.diagnostic = Some(format!(
            "price search converged={converged}, slacks=({:e}, {:e}), terminal residual={:e}",
            report.power_slack, report.interference_slack, report.terminal_residual
        ));
    }
    Ok(FixedSensingSolution { policy, report })
}

fn silent_solution(state: &SensingState, caps: &Constraints) -> FixedSensingSolution {
    let _ = caps;
    FixedSensingSolution {
        policy: PowerPolicy::Silent,
        report: CapacityReport {
            c_lb: 0.0,
            r00: Vec::new(),
            r10: Vec::new(),
            b0: state.b0,
            lambda: 0.0,
            vartheta: 0.0,
            price: 0.0,
            binding: Binding::None,
            expected_power: 0.0,
            power_used: 0.0,
            interference_used: 0.0,
            power_slack: 1.0,
            interference_slack: 1.0,
            complementary_slackness: [0.0, 0.0],
            kkt_residual: 0.0,
            terminal_residual: 0.0,
            lagrangian_trace: Vec::new(),
            iterations: IterationCounts::default(),
            converged: true,
            diagnostic: None,
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    state: &SensingState,
    caps: &Constraints,
    dist: &SelectionDiversityDistribution,
    policy: &PowerPolicy,
    (lambda, vartheta): (f64, f64),
    price: f64,
    binding: Binding,
    settings: &OptimizerSettings,
) -> Result<CapacityReport> {
    let rates = state.rates();
    let c_lb = capacity_lower_bound(policy, dist, &rates, state.d_t)?;
    let ep = policy.expected_power(dist)?;
    let power_used = state.d_t * state.pihat0 * ep;
    let interference_used = state.d_t * state.b0 * ep;
    let power_slack = (caps.p_bar - power_used) / caps.p_bar;
    let interference_slack = (caps.i_bar - interference_used) / caps.i_bar;
    let (mut r00, mut r10, mut kkt_residual) = (Vec::new(), Vec::new(), 0.0_f64);
    match policy {
        PowerPolicy::Quantized(q) => {
            for (k, &mu) in q.mu.iter().enumerate() {
                let p = q.power[k + 1];
                r00.push(rates.rate_idle(mu, p));
                r10.push(rates.rate_busy(mu, p));
                let r = rates.kkt_residual(mu, p, price);
                kkt_residual = kkt_residual.max(if p > 0.0 { r.abs() } else { r.max(0.0) });
            }
        }
        PowerPolicy::Continuous(c) => {
            // Stationarity on a grid of gains above the cutoff.
            let cut = c.cutoff();
            for j in 1..=64 {
                let nu = cut * (1.0 + 0.25 * j as f64);
                let p = c.power(nu);
                let r = rates.kkt_residual(nu, p, price);
                kkt_residual = kkt_residual.max(if p > 0.0 { r.abs() } else { r.max(0.0) });
            }
        }
        PowerPolicy::Silent => {}
    }
    let _ = settings;
    Ok(CapacityReport {
        c_lb,
        r00,
        r10,
        b0: state.b0,
        lambda,
        vartheta,
        price,
        binding,
        expected_power: ep,
        power_used,
        interference_used,
        power_slack,
        interference_slack,
        complementary_slackness: [
            lambda * state.pihat0 * power_slack.abs(),
            vartheta * state.b0 * interference_slack.abs(),
        ],
        kkt_residual,
        terminal_residual: 0.0,
        lagrangian_trace: Vec::new(),
        iterations: IterationCounts::default(),
        converged: true,
        diagnostic: None,
    })
}
