//! Per-interval power levels from the KKT conditions.
//!
//! For a fixed threshold `μ` and combined price `c = λ·π̂0 + ϑ·b0`, the
//! interval power maximizes `α0·log2(1 + μP/σ_w²) + β0·log2(1 + μP/(σ_w²+σ_p²)) - c·P`.
//! Stationarity is a quadratic in `P`; the larger root (clipped at zero) is
//! the maximizer.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

/// Which constant term enters the discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KktForm {
    /// `π̂0·σ_w² + α0·σ_p²`, the value that makes the stationarity condition
    /// hold exactly.
    #[default]
    Stationary,
    /// `π̂0·σ_w² + β0·σ_p²`, the alternative closed form. Kept
    /// for comparison; it does not zero the derivative when `σ_p² > 0`.
    Printed,
}

/// Coefficients shared by every interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub alpha0: f64,
    pub beta0: f64,
    pub sigma_w2: f64,
    pub sigma_p2: f64,
}

impl RateModel {
    pub fn pihat0(&self) -> f64 {
        self.alpha0 + self.beta0
    }

    fn s1(&self) -> f64 {
        self.sigma_w2 + self.sigma_p2
    }

    /// `α0·R00 + β0·R10` at threshold `mu` and power `p`.
    pub fn utility(&self, mu: f64, p: f64) -> f64 {
        if p <= 0.0 || mu <= 0.0 {
            return 0.0;
        }
        let x = mu * p;
        (self.alpha0 * (x / self.sigma_w2).ln_1p() + self.beta0 * (x / self.s1()).ln_1p()) / LN_2
    }

    /// `R00 = log2(1 + μP/σ_w²)`.
    pub fn rate_idle(&self, mu: f64, p: f64) -> f64 {
        (mu * p / self.sigma_w2).ln_1p() / LN_2
    }

    /// `R10 = log2(1 + μP/(σ_w² + σ_p²))`.
    pub fn rate_busy(&self, mu: f64, p: f64) -> f64 {
        (mu * p / self.s1()).ln_1p() / LN_2
    }

    /// `∂utility/∂P`.
    pub fn utility_dp(&self, mu: f64, p: f64) -> f64 {
        let x = mu * p;
        mu / LN_2 * (self.alpha0 / (self.sigma_w2 + x) + self.beta0 / (self.s1() + x))
    }

    /// `∂utility/∂μ`.
    pub fn utility_dmu(&self, mu: f64, p: f64) -> f64 {
        let x = mu * p;
        p / LN_2 * (self.alpha0 / (self.sigma_w2 + x) + self.beta0 / (self.s1() + x))
    }

    /// Smallest threshold at which a positive power is worthwhile,
    /// `c·ln2 / (α0/σ_w² + β0/(σ_w²+σ_p²))`.
    pub fn mu_min(&self, price: f64) -> f64 {
        price * LN_2 / (self.alpha0 / self.sigma_w2 + self.beta0 / self.s1())
    }

    /// Stationarity residual `(∂utility/∂P - c)/c` at `p`.
    pub fn kkt_residual(&self, mu: f64, p: f64, price: f64) -> f64 {
        (self.utility_dp(mu, p) - price) / price
    }
}

/// Optimal interval power for threshold `mu` and price `c`.
pub fn kkt_power(rates: &RateModel, mu: f64, price: f64, form: KktForm) -> f64 {
    if !(mu > 0.0) || !(price > 0.0) {
        return if price == 0.0 && mu > 0.0 { f64::INFINITY } else { 0.0 };
    }
    if mu.is_infinite() || price.is_infinite() {
        return if price.is_infinite() { 0.0 } else { f64::INFINITY };
    }
    let k = LN_2 * price;
    let s0 = rates.sigma_w2;
    let s1 = rates.s1();
    let constant = match form {
        KktForm::Stationary => rates.pihat0() * s0 + rates.alpha0 * rates.sigma_p2,
        KktForm::Printed => rates.pihat0() * s0 + rates.beta0 * rates.sigma_p2,
    };
    let f = rates.pihat0() / k - (s0 + s1) / mu;
    let q = (s0 * s1 / mu - constant / k) / mu;
    let ups = f * f - 4.0 * q;
    if !(ups >= 0.0) {
        return 0.0;
    }
    let root = ups.sqrt();
    let mut p = if f >= 0.0 {
        0.5 * (f + root)
    } else if f - root != 0.0 {
        2.0 * q / (f - root)
    } else {
        0.0
    };
    if !(p > 0.0) {
        return 0.0;
    }
    if form == KktForm::Stationary {
        // A couple of Newton steps on the stationarity condition remove the
        // rounding left by the closed form.
        for _ in 0..3 {
            let x = mu * p;
            let g = rates.utility_dp(mu, p) - price;
            let dg = -mu * mu / LN_2
                * (rates.alpha0 / ((s0 + x) * (s0 + x)) + rates.beta0 / ((s1 + x) * (s1 + x)));
            if dg == 0.0 {
                break;
            }
            let next = p - g / dg;
            if !(next > 0.0) {
                break;
            }
            p = next;
        }
    }
    p
}
