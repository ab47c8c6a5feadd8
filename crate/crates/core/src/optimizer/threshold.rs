//! Threshold recurrence and the outer search on the first threshold.
//!
//! With every power at its KKT value, setting `∂L/∂μ_k = 0` gives the next
//! interval's probability mass in closed form:
//! `F(μ_{k+1}) = F(μ_k) + f(μ_k)·[(U_k - cP_k) - (U_{k-1} - cP_{k-1})] / (∂U_k/∂μ_k)`,
//! where `U_k` is the weighted rate of interval `k`. Starting from `μ_1` the
//! recurrence is unrolled to `μ_{N_b+1}`, which must land exactly at
//! `F = 1`. The recurrence is carried on the survival function so that the
//! top intervals keep their relative accuracy.

use crate::beamsel_sr::SelectionDiversityDistribution;
use crate::error::{Error, Result};

use super::kkt::{kkt_power, KktForm, RateModel};

/// Everything the recurrence needs besides the thresholds themselves.
#[derive(Debug, Clone, Copy)]
pub struct RecurrenceContext<'a> {
    pub dist: &'a SelectionDiversityDistribution,
    pub rates: RateModel,
    pub price: f64,
    pub form: KktForm,
}

/// Result of unrolling the recurrence from one `μ_1`.
#[derive(Debug, Clone)]
pub enum Shot {
    /// `μ_1` gives no positive power; it must grow.
    BelowCutoff,
    /// The mass ran out after `steps` thresholds; `μ_1` must shrink.
    Overshoot { steps: usize },
    /// All `N_b` thresholds were placed. `terminal` is `1 - F(μ_{N_b+1})`.
    Complete {
        mu: Vec<f64>,
        power: Vec<f64>,
        survival: Vec<f64>,
        terminal: f64,
    },
}

impl Shot {
    /// Positive when `μ_1` should increase, negative when it should decrease.
    pub fn direction(&self) -> f64 {
        match self {
            Shot::BelowCutoff => 1.0,
            Shot::Overshoot { .. } => -1.0,
            Shot::Complete { terminal, .. } => *terminal,
        }
    }
}

/// One step of the recurrence: returns `1 - F(μ_{k+1})` from interval `k`
/// (threshold `mu`, power `p`) and the objective of interval `k-1`.
pub fn next_survival(
    ctx: &RecurrenceContext,
    survival_k: f64,
    mu: f64,
    p: f64,
    prev_value: f64,
) -> f64 {
    let value = ctx.rates.utility(mu, p) - ctx.price * p;
    let slope = ctx.rates.utility_dmu(mu, p);
    survival_k - ctx.dist.pdf(mu) * (value - prev_value) / slope
}

/// `μ_{k+1}` from the recurrence, or `+inf` when the target CDF value is one.
///
/// Errors when the target leaves `(F(μ_k), 1]`, which tells the outer loop
/// that `μ_1` needs adjusting.
pub fn next_threshold(
    ctx: &RecurrenceContext,
    mu_prev: f64,
    p_prev: f64,
    mu: f64,
    p: f64,
) -> Result<f64> {
    let prev_value = if p_prev > 0.0 {
        ctx.rates.utility(mu_prev, p_prev) - ctx.price * p_prev
    } else {
        0.0
    };
    let s_k = ctx.dist.sf(mu);
    let s_next = next_survival(ctx, s_k, mu, p, prev_value);
    if !(s_next < s_k) || s_next < 0.0 {
        return Err(Error::domain(format!(
            "recurrence target 1 - F = {s_next:e} outside [0, {s_k:e})"
        )));
    }
    if s_next == 0.0 {
        return Ok(f64::INFINITY);
    }
    ctx.dist.inverse_sf(s_next)
}

/// Unrolls the recurrence for `levels` intervals from `mu1`.
pub fn shoot(ctx: &RecurrenceContext, mu1: f64, levels: usize) -> Result<Shot> {
    let p1 = kkt_power(&ctx.rates, mu1, ctx.price, ctx.form);
    if !(p1 > 0.0) {
        return Ok(Shot::BelowCutoff);
    }
    let mut mu = Vec::with_capacity(levels);
    let mut power = Vec::with_capacity(levels + 1);
    let mut survival = Vec::with_capacity(levels + 1);
    mu.push(mu1);
    power.push(0.0);
    power.push(p1);
    survival.push(ctx.dist.sf(mu1));
    let mut prev_value = 0.0;
    for k in 1..=levels {
        let (m, p, s) = (mu[k - 1], power[k], survival[k - 1]);
        let s_next = next_survival(ctx, s, m, p, prev_value);
        if k == levels {
            return Ok(Shot::Complete {
                mu,
                power,
                survival,
                terminal: s_next,
            });
        }
        if !(s_next > 0.0) {
            return Ok(Shot::Overshoot { steps: k });
        }
        let m_next = ctx.dist.inverse_sf(s_next)?;
        if !(m_next > m) {
            // The step fell below floating-point resolution of μ.
            return Ok(Shot::Overshoot { steps: k });
        }
        prev_value = ctx.rates.utility(m, p) - ctx.price * p;
        let p_next = kkt_power(&ctx.rates, m_next, ctx.price, ctx.form);
        mu.push(m_next);
        power.push(p_next);
        survival.push(s_next);
    }
    unreachable!("loop returns at the last level")
}

/// Converged shooting solution.
#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub mu: Vec<f64>,
    pub power: Vec<f64>,
    pub survival: Vec<f64>,
    pub terminal: f64,
    pub iterations: usize,
}

/// Finds `μ_1` so that the recurrence ends exactly at `F = 1`: bracket by
/// doubling/halving, then Illinois-style false position on the terminal
/// residual, falling back to bisection in `ln μ_1` whenever the iterate
/// leaves the region where all thresholds exist.
pub fn solve_first_threshold(
    ctx: &RecurrenceContext,
    levels: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ShootingSolution> {
    let mu_min = ctx.rates.mu_min(ctx.price);
    let mut lo = mu_min;
    let mut lo_val = 1.0;
    let mut hi = mu_min.max(1e-300) * 2.0;
    let mut iterations = 0;
    let mut best: Option<ShootingSolution> = None;
    let record = |shot: &Shot, iters: usize, best: &mut Option<ShootingSolution>| {
        if let Shot::Complete {
            mu,
            power,
            survival,
            terminal,
        } = shot
        {
            let better = best
                .as_ref()
                .map_or(true, |b| terminal.abs() < b.terminal.abs());
            if better {
                *best = Some(ShootingSolution {
                    mu: mu.clone(),
                    power: power.clone(),
                    survival: survival.clone(),
                    terminal: *terminal,
                    iterations: iters,
                });
            }
        }
    };
    let mut hi_val;
    let mut hi_complete;
    let mut lo_complete = false;
    loop {
        iterations += 1;
        let shot = shoot(ctx, hi, levels)?;
        record(&shot, iterations, &mut best);
        let d = shot.direction();
        let complete = matches!(shot, Shot::Complete { .. });
        if complete && d.abs() <= tol {
            return Ok(best.unwrap());
        }
        if d < 0.0 {
            hi_val = d;
            hi_complete = complete;
            break;
        }
        lo = hi;
        lo_val = d;
        lo_complete = complete;
        hi *= 2.0;
        if iterations > 2000 || !hi.is_finite() {
            return Err(Error::numerical("solve_first_threshold", "no upper bracket for μ_1"));
        }
    }
    let mut last_side = 0i32;
    while iterations < max_iter {
        iterations += 1;
        let mut x = if lo_complete && hi_complete {
            lo + (hi - lo) * lo_val / (lo_val - hi_val)
        } else if lo > 0.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * hi
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let shot = shoot(ctx, x, levels)?;
        record(&shot, iterations, &mut best);
        let d = shot.direction();
        let complete = matches!(shot, Shot::Complete { .. });
        if complete && d.abs() <= tol {
            return Ok(best.unwrap());
        }
        if d > 0.0 {
            lo = x;
            lo_val = d;
            lo_complete = complete;
            if last_side == 1 {
                hi_val *= 0.5;
            }
            last_side = 1;
        } else {
            hi = x;
            hi_val = d;
            hi_complete = complete;
            if last_side == -1 {
                lo_val *= 0.5;
            }
            last_side = -1;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    match best {
        Some(b) if b.terminal.abs() <= tol.max(1e-6) => Ok(b),
        Some(b) => Err(Error::NonConvergence(format!(
            "first-threshold search stalled with |1 - F(μ_(N_b+1))| = {:e} after {iterations} shots",
            b.terminal.abs()
        ))),
        None => Err(Error::NonConvergence(format!(
            "first-threshold search found no complete threshold set after {iterations} shots"
        ))),
    }
}

/// Recurrence residuals `S_pred(μ_{k+1}) - S(μ_{k+1})` for a full threshold
/// vector, with `S(μ_{N_b+1}) = 0`. All of them vanish exactly at a
/// stationary point; the last one is the terminal condition.
pub fn recurrence_residuals(ctx: &RecurrenceContext, mu: &[f64]) -> Vec<f64> {
    let l = mu.len();
    let s: Vec<f64> = mu.iter().map(|&m| ctx.dist.sf(m)).collect();
    let mut prev_value = 0.0;
    let mut out = Vec::with_capacity(l);
    for k in 0..l {
        let p = kkt_power(&ctx.rates, mu[k], ctx.price, ctx.form);
        let s_next = s.get(k + 1).copied().unwrap_or(0.0);
        if p > 0.0 {
            out.push(next_survival(ctx, s[k], mu[k], p, prev_value) - s_next);
        } else {
            out.push(s[k] - s_next);
        }
        prev_value = ctx.rates.utility(mu[k], p) - ctx.price * p;
    }
    out
}

struct Local {
    value: f64,
    slope: f64,
    density: f64,
    survival: f64,
}

fn local(ctx: &RecurrenceContext, mu: f64) -> Local {
    let p = kkt_power(&ctx.rates, mu, ctx.price, ctx.form);
    Local {
        value: ctx.rates.utility(mu, p) - ctx.price * p,
        slope: ctx.rates.utility_dmu(mu, p),
        density: ctx.dist.pdf(mu),
        survival: ctx.dist.sf(mu),
    }
}

/// `Σ_k [S(μ_k) - S(μ_{k+1})]·(U_k - c·P_k)` with every power at its KKT value.
pub fn interval_objective(ctx: &RecurrenceContext, mu: &[f64]) -> f64 {
    let loc: Vec<Local> = mu.iter().map(|&m| local(ctx, m)).collect();
    (0..loc.len())
        .map(|k| (loc[k].survival - loc.get(k + 1).map_or(0.0, |n| n.survival)) * loc[k].value)
        .sum()
}

fn gradient_at(ctx: &RecurrenceContext, mu: &[f64], k: usize, mu_k: f64) -> f64 {
    let here = local(ctx, mu_k);
    let prev_value = if k == 0 { 0.0 } else { local(ctx, mu[k - 1]).value };
    let s_next = mu.get(k + 1).map_or(0.0, |&m| ctx.dist.sf(m));
    -here.density * (here.value - prev_value) + (here.survival - s_next) * here.slope
}

fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag[0];
    if b == 0.0 {
        return None;
    }
    c[0] = if n > 1 { upper[0] / b } else { 0.0 };
    d[0] = rhs[0] / b;
    for i in 1..n {
        b = diag[i] - lower[i - 1] * c[i - 1];
        if b == 0.0 || !b.is_finite() {
            return None;
        }
        if i + 1 < n {
            c[i] = upper[i] / b;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Solves all stationarity conditions at once by damped Newton iterations.
/// The system is tridiagonal since `∂L/∂μ_k` only involves `μ_{k-1}, μ_k,
/// μ_{k+1}`. Starts from thresholds splitting the mass above the cutoff
/// evenly. Used when the shooting map is too sensitive to `μ_1`.
pub fn solve_thresholds_newton(
    ctx: &RecurrenceContext,
    levels: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ShootingSolution> {
    let cutoff = ctx.rates.mu_min(ctx.price);
    let s0 = ctx.dist.sf(cutoff);
    if !(s0 > 0.0) {
        return Err(Error::numerical("solve_thresholds_newton", "no mass above the cutoff"));
    }
    let lf = levels as f64;
    let mut mu = (0..levels)
        .map(|k| ctx.dist.inverse_sf(s0 * (lf - k as f64) / (lf + 1.0)))
        .collect::<Result<Vec<f64>>>()?;
    let feasible = |m: &[f64]| m[0] > 0.0 && m.windows(2).all(|w| w[1] > w[0]) && m.iter().all(|x| x.is_finite());
    let mut resid = recurrence_residuals(ctx, &mu);
    let mut objective = interval_objective(ctx, &mu);
    let mut iterations = 0;
    while max_abs(&resid) > tol {
        if iterations >= max_iter {
            return Err(Error::NonConvergence(format!(
                "threshold Newton iterations stalled at residual {:e}",
                max_abs(&resid)
            )));
        }
        iterations += 1;
        let loc: Vec<Local> = mu.iter().map(|&m| local(ctx, m)).collect();
        let grad: Vec<f64> = (0..levels).map(|k| gradient_at(ctx, &mu, k, mu[k])).collect();
        let mut diag = vec![0.0; levels];
        for k in 0..levels {
            let lo = if k == 0 { 0.0 } else { mu[k - 1] };
            let hi = mu.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let h = (1e-6 * mu[k]).min(0.25 * (mu[k] - lo)).min(0.25 * (hi - mu[k]));
            diag[k] = (gradient_at(ctx, &mu, k, mu[k] + h) - gradient_at(ctx, &mu, k, mu[k] - h)) / (2.0 * h);
        }
        // ∂g_k/∂μ_{k+1} = f(μ_{k+1})·∂U_k/∂μ_k, symmetric.
        let off: Vec<f64> = (0..levels.saturating_sub(1))
            .map(|k| loc[k + 1].density * loc[k].slope)
            .collect();
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut step = solve_tridiagonal(&off, &diag, &off, &neg).unwrap_or_default();
        let ascent: f64 = step.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if step.len() != levels || !(ascent > 0.0) || step.iter().any(|d| !d.is_finite()) {
            step = grad
                .iter()
                .zip(&diag)
                .zip(&mu)
                .map(|((g, h), m)| if *h < 0.0 { -g / h } else { g.signum() * 1e-3 * m })
                .collect();
        }
        let before = max_abs(&resid);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = mu.iter().zip(&step).map(|(m, d)| m + alpha * d).collect();
            if feasible(&trial) {
                let r = recurrence_residuals(ctx, &trial);
                let obj = interval_objective(ctx, &trial);
                if max_abs(&r) < before || obj > objective {
                    mu = trial;
                    resid = r;
                    objective = obj;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence(format!(
                "threshold Newton line search failed at residual {before:e}"
            )));
        }
    }
    let mut power = Vec::with_capacity(levels + 1);
    power.push(0.0);
    power.extend(mu.iter().map(|&m| kkt_power(&ctx.rates, m, ctx.price, ctx.form)));
    let survival = mu.iter().map(|&m| ctx.dist.sf(m)).collect();
    Ok(ShootingSolution {
        mu,
        power,
        survival,
        terminal: *resid.last().unwrap(),
        iterations,
    })
}

/// Largest quantizer solved by shooting before switching to Newton.
pub const SHOOTING_MAX_LEVELS: usize = 32;

/// Thresholds for `levels` intervals: shooting on `μ_1` for coarse
/// quantizers, the joint Newton solve otherwise, each falling back to the
/// other on failure.
pub fn solve_thresholds(
    ctx: &RecurrenceContext,
    levels: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ShootingSolution> {
    if levels <= SHOOTING_MAX_LEVELS {
        solve_first_threshold(ctx, levels, tol, max_iter)
            .or_else(|_| solve_thresholds_newton(ctx, levels, tol, max_iter))
    } else {
        solve_thresholds_newton(ctx, levels, tol, max_iter)
            .or_else(|_| solve_first_threshold(ctx, levels, tol, max_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(dist: &SelectionDiversityDistribution, price: f64) -> RecurrenceContext<'_> {
        RecurrenceContext {
            dist,
            rates: RateModel {
                alpha0: 0.6,
                beta0: 0.03,
                sigma_w2: 1.0,
                sigma_p2: 1.0,
            },
            price,
            form: KktForm::Stationary,
        }
    }

    #[test]
    fn shooting_and_newton_agree() {
        let dist = SelectionDiversityDistribution::new(vec![3.0, 0.5, 0.1, 0.03]).unwrap();
        let c = ctx(&dist, 0.2);
        for levels in [1, 2, 4, 8] {
            let a = solve_first_threshold(&c, levels, 1e-11, 600).unwrap();
            let b = solve_thresholds_newton(&c, levels, 1e-11, 200).unwrap();
            for (x, y) in a.mu.iter().zip(&b.mu) {
                assert!((x - y).abs() < 1e-6 * x, "levels={levels}: {x} vs {y}");
            }
            assert!(a.terminal.abs() < 1e-10);
        }
    }

    #[test]
    fn newton_handles_fine_quantizers() {
        let dist = SelectionDiversityDistribution::new(vec![3.0, 1.0, 0.2, 0.05, 0.02, 0.05, 0.2, 1.0]).unwrap();
        let c = ctx(&dist, 0.15);
        let sol = solve_thresholds(&c, 1024, 1e-9, 200).unwrap();
        assert!(sol.mu.windows(2).all(|w| w[1] > w[0]));
        assert!(max_abs(&recurrence_residuals(&c, &sol.mu)) <= 1e-9);
        assert!(sol.mu[0] >= c.rates.mu_min(0.15));
        // Each interval's power follows its lower threshold.
        assert!(sol.power.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn stationary_point_is_a_local_maximum() {
        let dist = SelectionDiversityDistribution::new(vec![2.0, 0.4]).unwrap();
        let c = ctx(&dist, 0.3);
        let sol = solve_thresholds(&c, 4, 1e-12, 600).unwrap();
        let base = interval_objective(&c, &sol.mu);
        for k in 0..4 {
            for s in [-1e-3, 1e-3] {
                let mut m = sol.mu.clone();
                m[k] *= 1.0 + s;
                assert!(interval_objective(&c, &m) <= base + 1e-15);
            }
        }
    }
}
