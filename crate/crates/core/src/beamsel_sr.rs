//! Strongest-beam statistics at the secondary receiver.
//!
//! The per-beam gains `ν_m` are independent exponentials with means `δ_m`.
//! `ν* = max_m ν_m` has CDF `Π_m (1 - e^{-x/δ_m})`, which expands by
//! inclusion–exclusion into signed exponentials `e^{-x·A_S}` over subsets
//! `S` of beams with `A_S = Σ_{j∈S} 1/δ_j`.

use serde::{Deserialize, Serialize};

use crate::antenna::BeamPatternModel;
use crate::error::{Error, Result};

/// Largest beam count for which subset expansions are enumerated.
pub const MAX_EXPANSION_BEAMS: usize = 20;

/// One term `sign·e^{-x·rate}` of the inclusion–exclusion expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    /// `(-1)^{|S|}`.
    pub sign: f64,
    /// `A_S`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiversityDistribution {
    delta: Vec<f64>,
    /// Nonempty-subset terms; the empty subset contributes the constant 1.
    terms: Vec<ExpTerm>,
}

fn subset_terms(rates: &[f64]) -> Vec<ExpTerm> {
    let m = rates.len();
    let mut out = Vec::with_capacity((1usize << m) - 1);
    for mask in 1usize..(1 << m) {
        let mut a = 0.0;
        for (j, r) in rates.iter().enumerate() {
            if mask & (1 << j) != 0 {
                a += r;
            }
        }
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        out.push(ExpTerm { sign, rate: a });
    }
    out
}

impl SelectionDiversityDistribution {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if delta.is_empty() {
            return Err(Error::domain("at least one beam mean is required"));
        }
        if delta.len() > MAX_EXPANSION_BEAMS {
            return Err(Error::domain(format!(
                "{} beams exceed the expansion limit of {MAX_EXPANSION_BEAMS}",
                delta.len()
            )));
        }
        if let Some(bad) = delta.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::domain(format!("beam means must be positive, got {bad}")));
        }
        let rates: Vec<f64> = delta.iter().map(|d| 1.0 / d).collect();
        let terms = subset_terms(&rates);
        Ok(Self { delta, terms })
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn beams(&self) -> usize {
        self.delta.len()
    }

    /// Inclusion–exclusion terms over nonempty subsets.
    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    /// `F_ν*(x)`; zero for `x <= 0`, computed in product form.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_nan() {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        self.delta.iter().map(|d| -(-x / d).exp_m1()).product()
    }

    /// Survival `1 - F_ν*(x)` without cancellation near one.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_nan() {
            return 1.0;
        }
        if x.is_infinite() {
            return 0.0;
        }
        let ln_f: f64 = self.delta.iter().map(|d| (-(-x / d).exp()).ln_1p()).sum();
        -ln_f.exp_m1()
    }

    /// `F_ν*(x)` from the signed-exponential expansion.
    pub fn cdf_expansion(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_nan() {
            return 0.0;
        }
        1.0 + self
            .terms
            .iter()
            .map(|t| t.sign * (-x * t.rate).exp())
            .sum::<f64>()
    }

    /// Density `f_ν*(x)`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x.is_nan() {
            return 0.0;
        }
        if x.is_infinite() {
            return 0.0;
        }
        let mut total = 0.0;
        for (m, dm) in self.delta.iter().enumerate() {
            let mut prod = (-x / dm).exp() / dm;
            for (j, dj) in self.delta.iter().enumerate() {
                if j != m {
                    prod *= -(-x / dj).exp_m1();
                }
            }
            total += prod;
        }
        total
    }

    /// Density from the expansion, `-Σ_S (-1)^{|S|} A_S e^{-x·A_S}`.
    pub fn pdf_expansion(&self, x: f64) -> f64 {
        if x < 0.0 || x.is_nan() {
            return 0.0;
        }
        -self
            .terms
            .iter()
            .map(|t| t.sign * t.rate * (-x * t.rate).exp())
            .sum::<f64>()
    }

    /// Smallest `x` with `1 - F(x) <= survival`, by bracketed Newton on
    /// `ln(1 - F)`. Returns `+inf` for `survival <= 0`.
    pub fn inverse_sf(&self, survival: f64) -> Result<f64> {
        if !(survival.is_finite()) || survival > 1.0 {
            return Err(Error::domain(format!("survival {survival} outside [0, 1]")));
        }
        if survival <= 0.0 {
            return Ok(f64::INFINITY);
        }
        if survival >= 1.0 {
            return Ok(0.0);
        }
        let target = survival.ln();
        let dmax = self.delta.iter().cloned().fold(0.0, f64::max);
        let mut lo = 0.0;
        let mut hi = dmax;
        while self.sf(hi) > survival {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::numerical("inverse_sf", "bracket expansion overflowed"));
            }
        }
        let mut x = 0.5 * (lo + hi);
        let mut width = hi - lo;
        for _ in 0..200 {
            let s = self.sf(x);
            if s > survival {
                lo = x;
            } else {
                hi = x;
            }
            let g = s.ln() - target;
            let dg = -self.pdf(x) / s;
            let mut next = if dg < 0.0 && g.is_finite() { x - g / dg } else { f64::NAN };
            // Newton can cycle across the inflection point; bisect unless the bracket halves.
            if !(next > lo && next < hi) || hi - lo > 0.5 * width {
                next = 0.5 * (lo + hi);
            }
            width = hi - lo;
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }

    /// Smallest `x` with `F(x) >= p`.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64> {
        self.inverse_sf(1.0 - p)
    }
}

/// Beam-selection probabilities `Ψ_i = Pr{argmax_m ν_m = i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrSelectionProbabilities {
    pub psi: Vec<f64>,
}

/// `Ψ_i = Σ_{S ⊆ others} (-1)^{|S|} / (1 + δ_i·B_S)`.
pub fn beam_probabilities(dist: &SelectionDiversityDistribution) -> SrSelectionProbabilities {
    let m = dist.beams();
    let mut psi = Vec::with_capacity(m);
    for i in 0..m {
        let others: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| 1.0 / dist.delta[j]).collect();
        let di = dist.delta[i];
        let mut sum = 1.0;
        for t in subset_terms(&others) {
            sum += t.sign / (1.0 + di * t.rate);
        }
        psi.push(sum.clamp(0.0, 1.0));
    }
    SrSelectionProbabilities { psi }
}

impl SrSelectionProbabilities {
    pub fn total(&self) -> f64 {
        self.psi.iter().sum()
    }
}

/// `δ_m = γ_ss·p_m(φ_SR)`.
pub fn sector_means_from_geometry(
    model: &BeamPatternModel,
    gamma_ss: f64,
    phi_sr: f64,
) -> Result<SelectionDiversityDistribution> {
    if !(gamma_ss > 0.0 && gamma_ss.is_finite()) {
        return Err(Error::domain(format!("gamma_ss must be positive, got {gamma_ss}")));
    }
    let delta = (0..model.sectors())
        .map(|m| model.pattern_gain(m, phi_sr).map(|g| gamma_ss * g))
        .collect::<Result<Vec<_>>>()?;
    SelectionDiversityDistribution::new(delta)
}
