//! Perfect-CSI baseline: the power follows `ν*` continuously.
//!
//! With unquantized feedback the power at gain `ν` is the KKT value
//! `P(ν)`, zero below the cutoff `μ_min(c)`. Expectations over `ν*` are
//! computed by composite Gauss–Legendre quadrature from the cutoff to a
//! point where the survival function is negligible.

use crate::beamsel_sr::SelectionDiversityDistribution;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

use super::kkt::{kkt_power, KktForm, RateModel};

const PANELS: usize = 96;
const TAIL_SURVIVAL: f64 = 1e-17;

/// Continuous power map `P(ν)` for a fixed price.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContinuousPolicy {
    pub price: f64,
    pub rates: RateModel,
    pub form: KktForm,
}

impl ContinuousPolicy {
    pub fn power(&self, nu: f64) -> f64 {
        kkt_power(&self.rates, nu, self.price, self.form)
    }

    /// Gain below which nothing is transmitted.
    pub fn cutoff(&self) -> f64 {
        self.rates.mu_min(self.price)
    }
}

/// Nodes and weights covering `[cutoff, ∞)` for the density of `ν*`.
fn nodes(dist: &SelectionDiversityDistribution, cutoff: f64, panels: usize) -> Result<Vec<(f64, f64)>> {
    let upper = dist.inverse_sf(TAIL_SURVIVAL)?;
    if upper <= cutoff {
        return Ok(Vec::new());
    }
    let gl = GaussLegendre::new(8);
    Ok(gl.composite(cutoff, upper, panels))
}

/// `(E{P(ν*)}, E{α0·R00 + β0·R10})` for the continuous policy.
pub fn expectations(
    policy: &ContinuousPolicy,
    dist: &SelectionDiversityDistribution,
) -> Result<(f64, f64)> {
    expectations_with(policy, dist, PANELS)
}

pub fn expectations_with(
    policy: &ContinuousPolicy,
    dist: &SelectionDiversityDistribution,
    panels: usize,
) -> Result<(f64, f64)> {
    let mut power = 0.0;
    let mut utility = 0.0;
    for (nu, w) in nodes(dist, policy.cutoff(), panels)? {
        let f = dist.pdf(nu);
        let p = policy.power(nu);
        power += w * f * p;
        utility += w * f * policy.rates.utility(nu, p);
    }
    if !(power.is_finite() && utility.is_finite()) {
        return Err(Error::numerical("continuous expectations", "non-finite quadrature"));
    }
    Ok((power, utility))
}

/// `E{g(ν*, P(ν*))}` for an arbitrary integrand, over the transmitting region.
pub fn expect<F: FnMut(f64, f64) -> f64>(
    policy: &ContinuousPolicy,
    dist: &SelectionDiversityDistribution,
    mut g: F,
) -> Result<f64> {
    let mut total = 0.0;
    for (nu, w) in nodes(dist, policy.cutoff(), PANELS)? {
        total += w * dist.pdf(nu) * g(nu, policy.power(nu));
    }
    Ok(total)
}
