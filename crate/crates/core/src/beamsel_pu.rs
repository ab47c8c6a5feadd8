//! Which beam the secondary transmitter believes points at the primary user.
//!
//! During sensing each sector collects `N` samples; the sector with the
//! largest average energy is declared the primary user's beam. Given the
//! fading gain `g` and the primary user's angle, sector `m`'s energy is
//! `σ²_{e_m}·Gamma(N, 1)` with `σ²_{e_m} = (g·p_m(φ)·P_p + σ_w²)/N`.
//!
//! This module computes the selection probability `Ω_i` by quadrature and by
//! the series expansion, averages it over Rayleigh fading (`Δ_i`), and over
//! the angular extent of each sector (`Δ̄`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::antenna::BeamPatternModel;
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::quadrature::{GaussLaguerre, GaussLegendre};
use crate::sensing::PriorModel;
use crate::special::{gamma_p, ln_gamma, ln_gamma_density};

const OMEGA_TOL: f64 = 1e-9;
const OMEGA_BASE_PANELS: usize = 24;
const OMEGA_MAX_PANELS: usize = 1536;
/// Gauss–Laguerre order for the fading average.
pub const FADING_NODES: usize = 64;
/// Gauss–Legendre nodes per half-sector in the angular average.
pub const ANGLE_NODES: usize = 24;
const SERIES_TAIL_TOL: f64 = 1e-8;
/// Largest total series degree attempted before giving up.
pub const SERIES_MAX_DEGREE: usize = 6000;

/// Per-sector energy scales for one realization of `g` and `φ_PU`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuSelectionContext {
    sigma_e2: Vec<f64>,
    n: usize,
}

impl PuSelectionContext {
    pub fn new(sigma_e2: Vec<f64>, n: usize) -> Result<Self> {
        if sigma_e2.is_empty() {
            return Err(Error::domain("at least one sector is required"));
        }
        if n == 0 {
            return Err(Error::domain("at least one sample per sector is required"));
        }
        if let Some(bad) = sigma_e2.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::domain(format!("energy scales must be positive, got {bad}")));
        }
        Ok(Self { sigma_e2, n })
    }

    /// Scales for fading gain `g` and primary-user angle `phi_pu`.
    pub fn from_geometry(
        model: &BeamPatternModel,
        prior: &PriorModel,
        n: usize,
        g: f64,
        phi_pu: f64,
    ) -> Result<Self> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::domain(format!("fading gain must be non-negative, got {g}")));
        }
        let nf = n as f64;
        let scales = (0..model.sectors())
            .map(|m| (g * model.gain(m, phi_pu) * prior.p_p + prior.sigma_w2) / nf)
            .collect();
        Self::new(scales, n)
    }

    pub fn sigma_e2(&self) -> &[f64] {
        &self.sigma_e2
    }

    pub fn sectors(&self) -> usize {
        self.sigma_e2.len()
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.sectors() {
            return Err(Error::domain(format!(
                "sector index {i} out of range for {} sectors",
                self.sectors()
            )));
        }
        Ok(())
    }
}

fn omega_on_rule(ctx: &PuSelectionContext, i: usize, rule: &[(f64, f64)], shape: f64) -> f64 {
    let si = ctx.sigma_e2[i];
    let mut total = 0.0;
    for &(t, w) in rule {
        let mut v = ln_gamma_density(shape, t).exp();
        if v == 0.0 {
            continue;
        }
        for (m, sm) in ctx.sigma_e2.iter().enumerate() {
            if m != i {
                v *= gamma_p(shape, si * t / sm);
                if v == 0.0 {
                    break;
                }
            }
        }
        total += w * v;
    }
    total
}

fn omega_range(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let sd = nf.sqrt();
    ((nf - 10.0 * sd).max(0.0), nf + 12.0 * sd + 30.0)
}

/// `Ω_i = ∫ f_{ε_i}(y) Π_{m≠i} F_{ε_m}(y) dy`, by composite Gauss–Legendre
/// in the normalized variable `t = y/σ²_{e_i}`, refined until two
/// resolutions agree.
pub fn selection_prob_conditional(ctx: &PuSelectionContext, i: usize) -> Result<f64> {
    ctx.check_index(i)?;
    if ctx.sectors() == 1 {
        return Ok(1.0);
    }
    let gl = GaussLegendre::new(8);
    let (a, b) = omega_range(ctx.n);
    let shape = ctx.n as f64;
    let mut panels = OMEGA_BASE_PANELS;
    let mut prev = omega_on_rule(ctx, i, &gl.composite(a, b, panels), shape);
    loop {
        panels *= 2;
        let cur = omega_on_rule(ctx, i, &gl.composite(a, b, panels), shape);
        if (cur - prev).abs() <= OMEGA_TOL {
            return Ok(cur.clamp(0.0, 1.0));
        }
        if panels >= OMEGA_MAX_PANELS {
            return Err(Error::numerical(
                "selection_prob_conditional",
                format!("{panels} panels: {cur:e} vs {prev:e}"),
            ));
        }
        prev = cur;
    }
}

/// All `Ω_i` for one context.
pub fn selection_probs_conditional(ctx: &PuSelectionContext) -> Result<Vec<f64>> {
    (0..ctx.sectors())
        .map(|i| selection_prob_conditional(ctx, i))
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// Series evaluation of `Ω_i`.
///
/// Expanding each CDF as `P(N, x) = x^N e^{-x} Σ_k x^k/Γ(N+k+1)` and
/// integrating term by term gives a sum over the total degree `K`:
/// `Ω_i = Π_m x_m^N / Γ(N) · Σ_K Γ(MN+K) c_K`, where `x_m = 1/(σ²_{e_m} G)`,
/// `G = Σ_m 1/σ²_{e_m}` and `c_K` is the degree-`K` coefficient of
/// `Π_{m≠i} Σ_k x_m^k z^k / Γ(N+k+1)`. Everything is kept in log space. The
/// sum is truncated once the geometric tail bound drops below `1e-8`.
pub fn selection_prob_series(ctx: &PuSelectionContext, i: usize) -> Result<f64> {
    ctx.check_index(i)?;
    let m = ctx.sectors();
    if m == 1 {
        return Ok(1.0);
    }
    let nf = ctx.n as f64;
    let g: f64 = ctx.sigma_e2.iter().map(|s| 1.0 / s).sum();
    let ln_x: Vec<f64> = ctx.sigma_e2.iter().map(|s| -(s * g).ln()).collect();
    let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
    let ln_prefactor = nf * ln_x.iter().sum::<f64>() - ln_gamma(nf);
    let mf = m as f64;

    // conv[j][K]: log coefficient of z^K after multiplying the first j+1 factors.
    let mut conv: Vec<Vec<f64>> = vec![Vec::new(); others.len()];
    let mut scratch = Vec::new();
    let mut ln_terms: Vec<f64> = Vec::new();
    let mut prev_ratio = f64::INFINITY;
    let mut shrinking = 0usize;
    for k_total in 0..=SERIES_MAX_DEGREE {
        let kf = k_total as f64;
        for (j, &idx) in others.iter().enumerate() {
            let own = |k: usize| k as f64 * ln_x[idx] - ln_gamma(nf + k as f64 + 1.0);
            let v = if j == 0 {
                own(k_total)
            } else {
                scratch.clear();
                for k in 0..=k_total {
                    scratch.push(own(k) + conv[j - 1][k_total - k]);
                }
                log_sum_exp(&scratch)
            };
            conv[j].push(v);
        }
        let ln_c = *conv[others.len() - 1].last().unwrap();
        let ln_term = ln_prefactor + ln_gamma(mf * nf + kf) + ln_c;
        ln_terms.push(ln_term);
        if k_total >= 1 {
            let ratio = (ln_term - ln_terms[k_total - 1]).exp();
            if ratio < prev_ratio {
                shrinking += 1;
            } else {
                shrinking = 0;
            }
            prev_ratio = ratio;
            if ratio < 1.0 && shrinking >= 3 {
                let tail = ln_term.exp() * ratio / (1.0 - ratio);
                if tail < SERIES_TAIL_TOL {
                    let total = log_sum_exp(&ln_terms).exp();
                    if !total.is_finite() {
                        return Err(Error::numerical("selection_prob_series", "non-finite sum"));
                    }
                    return Ok(total.clamp(0.0, 1.0));
                }
            }
        }
    }
    Err(Error::numerical(
        "selection_prob_series",
        format!(
            "tail bound not reached within total degree {SERIES_MAX_DEGREE}; use the quadrature path"
        ),
    ))
}

/// Fading-averaged selection probabilities `Δ_i(φ_PU) = E_g{Ω_i}` for every
/// `i`, with `g` exponential of mean `γ`.
pub fn delta_profile_all(
    model: &BeamPatternModel,
    prior: &PriorModel,
    n: usize,
    phi_pu: f64,
    lag: &GaussLaguerre,
) -> Result<Vec<f64>> {
    let m = model.sectors();
    let mut out = vec![0.0; m];
    for (&u, &w) in lag.nodes().iter().zip(lag.weights()) {
        if w < 1e-18 {
            continue;
        }
        let ctx = PuSelectionContext::from_geometry(model, prior, n, prior.gamma * u, phi_pu)?;
        for (i, o) in out.iter_mut().enumerate() {
            *o += w * selection_prob_conditional(&ctx, i)?;
        }
    }
    Ok(out)
}

/// `Δ_i(φ_PU)` for a single beam.
pub fn delta_profile(
    model: &BeamPatternModel,
    prior: &PriorModel,
    n: usize,
    i: usize,
    phi_pu: f64,
) -> Result<f64> {
    if i >= model.sectors() {
        return Err(Error::domain(format!("sector index {i} out of range")));
    }
    let lag = GaussLaguerre::new(FADING_NODES);
    let mut total = 0.0;
    for (&u, &w) in lag.nodes().iter().zip(lag.weights()) {
        if w < 1e-18 {
            continue;
        }
        let ctx = PuSelectionContext::from_geometry(model, prior, n, prior.gamma * u, phi_pu)?;
        total += w * selection_prob_conditional(&ctx, i)?;
    }
    Ok(total)
}

/// `Δ̄_{i,m}`: probability of selecting beam `i` when the primary user lies
/// uniformly within sector `m`'s angular domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuErrorMatrix {
    pub delta_bar: SquareMatrix,
    pub samples: usize,
}

impl PuErrorMatrix {
    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.delta_bar.get(i, m)
    }

    pub fn sectors(&self) -> usize {
        self.delta_bar.dim()
    }

    /// Largest deviation of a column sum from one.
    pub fn column_sum_error(&self) -> f64 {
        (0..self.sectors())
            .map(|j| (self.delta_bar.column_sum(j) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        self.delta_bar.to_csv()
    }
}

/// Builds `Δ̄` from the first column using the rotational symmetry of the
/// array, `Δ̄_{i,m} = Δ̄_{(i-m) mod M, 0}`. The first column itself uses the
/// reflection `Δ_i(φ) = Δ_{-i}(-φ)` so only half a sector is integrated.
pub fn average_error_matrix(
    model: &BeamPatternModel,
    prior: &PriorModel,
    n: usize,
) -> Result<PuErrorMatrix> {
    let m = model.sectors();
    if n == 0 {
        return Err(Error::domain("at least one sample per sector is required"));
    }
    if m == 1 {
        return Ok(PuErrorMatrix {
            delta_bar: SquareMatrix::from_fn(1, |_, _| 1.0),
            samples: n,
        });
    }
    let lag = GaussLaguerre::new(FADING_NODES);
    let gl = GaussLegendre::new(ANGLE_NODES);
    let half = PI / m as f64;
    let mut col = vec![0.0; m];
    for (phi, w) in gl.mapped(0.0, half) {
        let d = delta_profile_all(model, prior, n, phi, &lag)?;
        for i in 0..m {
            col[i] += w * (d[i] + d[(m - i) % m]);
        }
    }
    let scale = m as f64 / (2.0 * PI);
    for c in col.iter_mut() {
        *c *= scale;
    }
    let delta_bar = SquareMatrix::from_fn(m, |i, j| col[(i + m - j) % m]);
    Ok(PuErrorMatrix {
        delta_bar,
        samples: n,
    })
}

/// Direct evaluation of every column over its full sector, without using
/// symmetry. Slower; kept as a cross-check.
pub fn average_error_matrix_direct(
    model: &BeamPatternModel,
    prior: &PriorModel,
    n: usize,
    angle_nodes: usize,
) -> Result<PuErrorMatrix> {
    let m = model.sectors();
    let lag = GaussLaguerre::new(FADING_NODES);
    let gl = GaussLegendre::new(angle_nodes);
    let width = 2.0 * PI / m as f64;
    let mut delta_bar = SquareMatrix::zeros(m);
    for col in 0..m {
        let lo = width * (col as f64 - 0.5);
        let mut acc = vec![0.0; m];
        for (part_lo, part_hi) in [(lo, lo + 0.5 * width), (lo + 0.5 * width, lo + width)] {
            for (phi, w) in gl.mapped(part_lo, part_hi) {
                let d = delta_profile_all(model, prior, n, phi, &lag)?;
                for i in 0..m {
                    acc[i] += w * d[i];
                }
            }
        }
        for (i, a) in acc.iter().enumerate() {
            delta_bar.set(i, col, a / width);
        }
    }
    Ok(PuErrorMatrix {
        delta_bar,
        samples: n,
    })
}
