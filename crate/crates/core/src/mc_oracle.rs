//! Monte Carlo simulation of the sensing, feedback and data phases.
//!
//! Trials are split into fixed-size chunks. Chunk `i` draws from a ChaCha8
//! stream seeded by the master seed with stream number `i`, and chunk
//! results are merged by pairwise reduction in chunk order. Output therefore
//! does not depend on the number of worker threads.
//!
//! Each closed form is checked against draws from the model it was derived
//! under. The detector statistic uses per-sample Rayleigh fading with the
//! primary user's angle fixed per frame. Beam selection uses a fading gain
//! held over the frame. In a full frame the detector decision and the beam
//! choice are drawn independently, as the interference coefficient assumes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::BeamPatternModel;
use crate::beamsel_sr::SelectionDiversityDistribution;
use crate::error::{Error, Result};
use crate::optimizer::{PowerPolicy, SensingState};
use crate::sensing::{FramePlan, PriorModel};
use crate::special::q_function;

/// Trials per RNG stream.
pub const CHUNK: usize = 4096;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `f(rng, count)` over consecutive chunks in parallel and returns the
/// results in chunk order.
fn run_chunks<T, F>(trials: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(trials - c * CHUNK);
            f(&mut chunk_rng(seed, c), count)
        })
        .collect()
}

fn pairwise_merge<T: Clone, F: Fn(&T, &T) -> T + Copy>(items: &[T], merge: F) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        n => {
            let (a, b) = items.split_at(n / 2);
            Some(merge(&pairwise_merge(a, merge)?, &pairwise_merge(b, merge)?))
        }
    }
}

/// Running sums for a sample mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn estimate(&self) -> Estimate {
        if self.count == 0.0 {
            return Estimate {
                mean: f64::NAN,
                std_err: f64::NAN,
                count: 0,
            };
        }
        let mean = self.sum / self.count;
        let var = (self.sum_sq / self.count - mean * mean).max(0.0);
        let denom = (self.count - 1.0).max(1.0);
        Estimate {
            mean,
            std_err: (var * self.count / denom / self.count).sqrt(),
            count: self.count as u64,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub count: u64,
}

impl Estimate {
    /// `|mean - reference|` in standard errors.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / self.std_err.max(f64::MIN_POSITIVE)
    }
}

fn merge_all(parts: &[Vec<Moments>]) -> Vec<Moments> {
    pairwise_merge(parts, |a, b| a.iter().zip(b).map(|(x, y)| x.merge(y)).collect()).unwrap_or_default()
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Angle uniform over sector `m`'s angular domain (the whole circle for a
/// single beam).
pub fn draw_angle_in_sector<R: Rng>(model: &BeamPatternModel, m: usize, rng: &mut R) -> f64 {
    let width = 2.0 * PI / model.sectors() as f64;
    model.boresight(m) + width * (rng.random::<f64>() - 0.5)
}

/// Per-sector average energies `ε_m` from `N` complex Gaussian samples each,
/// with PU-to-SU gain `g` held over the window. `active` selects H1.
pub fn draw_sector_energies<R: Rng>(
    prior: &PriorModel,
    model: &BeamPatternModel,
    plan: &FramePlan,
    g: f64,
    phi_pu: f64,
    active: bool,
    rng: &mut R,
) -> Vec<f64> {
    let n = plan.samples_per_sector();
    (0..model.sectors())
        .map(|m| {
            let var = if active { g * model.gain(m, phi_pu) * prior.p_p } else { 0.0 } + prior.sigma_w2;
            let sd = (0.5 * var).sqrt();
            let mut e = 0.0;
            for _ in 0..n {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                e += sd * sd * (re * re + im * im);
            }
            e / n as f64
        })
        .collect()
}

/// Same law as [`draw_sector_energies`], drawn directly as
/// `σ²_{e_m}·Gamma(N, 1)`.
pub fn draw_sector_energies_fast<R: Rng>(
    prior: &PriorModel,
    model: &BeamPatternModel,
    n: usize,
    g: f64,
    phi_pu: f64,
    active: bool,
    rng: &mut R,
) -> Vec<f64> {
    let gamma = Gamma::new(n as f64, 1.0).expect("positive shape");
    (0..model.sectors())
        .map(|m| {
            let var = if active { g * model.gain(m, phi_pu) * prior.p_p } else { 0.0 } + prior.sigma_w2;
            var / n as f64 * gamma.sample(rng)
        })
        .collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Detector statistic `T = (1/N_eq) Σ |y|²` over all sectors. Under H1
/// every sample sees its own Rayleigh gain and the primary user's angle is
/// uniform and fixed for the frame.
pub fn draw_detector_statistic<R: Rng>(
    prior: &PriorModel,
    model: &BeamPatternModel,
    plan: &FramePlan,
    active: bool,
    rng: &mut R,
) -> f64 {
    let n = plan.samples_per_sector();
    let n_eq = plan.total_samples();
    if !active {
        let gamma = Gamma::new(n_eq as f64, 1.0).expect("positive shape");
        return prior.sigma_w2 * gamma.sample(rng) / n_eq as f64;
    }
    let phi = 2.0 * PI * rng.random::<f64>();
    let a = prior.gamma * prior.p_p;
    let mut total = 0.0;
    for m in 0..model.sectors() {
        let scale = a * model.gain(m, phi);
        for _ in 0..n {
            total += (scale * exp1(rng) + prior.sigma_w2) * exp1(rng);
        }
    }
    total / n_eq as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorOracle {
    pub p_fa: Estimate,
    pub p_d: Estimate,
}

/// Empirical false-alarm and detection rates at threshold `eta`, with
/// `trials` frames under each hypothesis.
pub fn detector_oracle(
    prior: &PriorModel,
    model: &BeamPatternModel,
    plan: &FramePlan,
    eta: f64,
    trials: usize,
    seed: u64,
) -> DetectorOracle {
    let parts = run_chunks(trials, seed, |rng, count| {
        let mut m = vec![Moments::default(); 2];
        for _ in 0..count {
            let t0 = draw_detector_statistic(prior, model, plan, false, rng);
            m[0].push(f64::from(u8::from(t0 > eta)));
            let t1 = draw_detector_statistic(prior, model, plan, true, rng);
            m[1].push(f64::from(u8::from(t1 > eta)));
        }
        m
    });
    let m = merge_all(&parts);
    DetectorOracle {
        p_fa: m[0].estimate(),
        p_d: m[1].estimate(),
    }
}

/// Empirical frequencies of the chosen PU beam when the primary user is
/// uniform within sector `m_pu` and active.
pub fn pu_selection_oracle(
    prior: &PriorModel,
    model: &BeamPatternModel,
    n: usize,
    m_pu: usize,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let m = model.sectors();
    let parts = run_chunks(trials, seed, |rng, count| {
        let mut hits = vec![Moments::default(); m];
        for _ in 0..count {
            let phi = draw_angle_in_sector(model, m_pu, rng);
            let g = prior.gamma * exp1(rng);
            let e = draw_sector_energies_fast(prior, model, n, g, phi, true, rng);
            let pick = argmax(&e);
            for (i, h) in hits.iter_mut().enumerate() {
                h.push(f64::from(u8::from(i == pick)));
            }
        }
        hits
    });
    merge_all(&parts).iter().map(|h| h.estimate().mean).collect()
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrOracle {
    /// Empirical `Ψ_i`.
    pub psi: Vec<f64>,
    /// Kolmogorov–Smirnov distance between the empirical and closed-form
    /// laws of `ν*`.
    pub ks: f64,
    pub trials: usize,
}

/// Draws per-beam exponential gains with means `δ_m` and records the
/// strongest beam and its gain.
pub fn sr_selection_oracle(dist: &SelectionDiversityDistribution, trials: usize, seed: u64) -> SrOracle {
    let m = dist.beams();
    let parts = run_chunks(trials, seed, |rng, count| {
        let mut hits = vec![0u64; m];
        let mut nus = Vec::with_capacity(count);
        for _ in 0..count {
            let (pick, nu) = draw_strongest(dist, rng);
            hits[pick] += 1;
            nus.push(nu);
        }
        (hits, nus)
    });
    let mut hits = vec![0u64; m];
    let mut nus = Vec::with_capacity(trials);
    for (h, n) in parts {
        for (a, b) in hits.iter_mut().zip(h) {
            *a += b;
        }
        nus.extend(n);
    }
    SrOracle {
        psi: hits.iter().map(|&h| h as f64 / trials as f64).collect(),
        ks: ks_distance(&mut nus, |x| dist.cdf(x)),
        trials,
    }
}

fn draw_strongest<R: Rng>(dist: &SelectionDiversityDistribution, rng: &mut R) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, d) in dist.delta().iter().enumerate() {
        let v = d * exp1(rng);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Two-sided KS distance of `samples` (sorted in place) against `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOracle {
    pub p_out: Estimate,
    pub p_e: Estimate,
}

/// Outage and SEP by simulation: draw `ν*`, the sensing outcome with
/// probabilities `(α0, β0, rest)`, and average `Q(√(ρ·ν*·P(ν*)/noise))`.
pub fn metrics_oracle(
    policy: &PowerPolicy,
    dist: &SelectionDiversityDistribution,
    state: &SensingState,
    rho: f64,
    trials: usize,
    seed: u64,
) -> MetricsOracle {
    let noise1 = state.sigma_w2 + state.sigma_p2;
    let parts = run_chunks(trials, seed, |rng, count| {
        let mut m = vec![Moments::default(); 2];
        for _ in 0..count {
            let (_, nu) = draw_strongest(dist, rng);
            let p = policy.power_at(nu);
            m[0].push(f64::from(u8::from(p == 0.0)));
            let u: f64 = rng.random();
            let sep = if u < state.alpha0 {
                q_function((rho * nu * p / state.sigma_w2).sqrt())
            } else if u < state.alpha0 + state.beta0 {
                q_function((rho * nu * p / noise1).sqrt())
            } else {
                0.0
            };
            m[1].push(sep);
        }
        m
    });
    let m = merge_all(&parts);
    MetricsOracle {
        p_out: m[0].estimate(),
        p_e: m[1].estimate(),
    }
}

/// Everything a full-frame simulation needs besides the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolModel {
    pub model: BeamPatternModel,
    pub prior: PriorModel,
    pub gamma_ss: f64,
    pub plan: FramePlan,
    /// Detector threshold.
    pub eta: f64,
    pub phi_sr: f64,
    /// True PU sector (0-based).
    pub m_pu: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub active: bool,
    pub sensed_busy: bool,
    pub m_pu: usize,
    pub m_sr: usize,
    pub nu: f64,
    /// Quantization interval (0 = silent).
    pub interval: usize,
    pub power: f64,
    pub interference: f64,
    /// Instantaneous rate in bits/s/Hz, zero when nothing is sent.
    pub rate: f64,
    /// `Q(√(ρ·SNR))` for frames sensed idle, zero otherwise.
    pub sep: f64,
}

/// One frame of the protocol.
pub fn simulate_frame<R: Rng>(
    proto: &ProtocolModel,
    dist: &SelectionDiversityDistribution,
    policy: &PowerPolicy,
    rng: &mut R,
) -> TrialRecord {
    let prior = &proto.prior;
    let active = rng.random::<f64>() < prior.pi1;
    let t = draw_detector_statistic(prior, &proto.model, &proto.plan, active, rng);
    let sensed_busy = t > proto.eta;

    let phi_pu = draw_angle_in_sector(&proto.model, proto.m_pu, rng);
    let g = prior.gamma * exp1(rng);
    let energies = draw_sector_energies_fast(
        prior,
        &proto.model,
        proto.plan.samples_per_sector(),
        g,
        phi_pu,
        active,
        rng,
    );
    let m_pu = argmax(&energies);

    let (m_sr, nu) = draw_strongest(dist, rng);
    let g_sp = prior.gamma_sp * exp1(rng);
    let g_ps = prior.sigma_p2() * exp1(rng);

    let send = !sensed_busy;
    let power = if send { policy.power_at(nu) } else { 0.0 };
    let interval = policy.interval_of(nu);
    let gain_q = policy.quantized_gain(nu);
    let model = &proto.model;
    let interference = if active {
        g_sp * model.base_gain(model.boresight(m_sr) - model.boresight(m_pu)) * power
    } else {
        0.0
    };
    let (rate, sep) = if !send {
        (0.0, 0.0)
    } else if active {
        let noise = prior.sigma_w2 + prior.sigma_p2();
        (
            (gain_q * power / (prior.sigma_w2 + g_ps)).ln_1p() / std::f64::consts::LN_2,
            q_function((proto.rho * nu * power / noise).sqrt()),
        )
    } else {
        (
            (gain_q * power / prior.sigma_w2).ln_1p() / std::f64::consts::LN_2,
            q_function((proto.rho * nu * power / prior.sigma_w2).sqrt()),
        )
    };
    TrialRecord {
        active,
        sensed_busy,
        m_pu,
        m_sr,
        nu,
        interval,
        power,
        interference,
        rate,
        sep,
    }
}

/// Frame records for small runs and inspection.
pub fn simulate_frames(
    proto: &ProtocolModel,
    dist: &SelectionDiversityDistribution,
    policy: &PowerPolicy,
    trials: usize,
    seed: u64,
) -> Vec<TrialRecord> {
    run_chunks(trials, seed, |rng, count| {
        (0..count)
            .map(|_| simulate_frame(proto, dist, policy, rng))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// `D_t`-weighted average rate over the records.
pub fn empirical_capacity(records: &[TrialRecord], d_t: f64) -> Result<Estimate> {
    if records.is_empty() {
        return Err(Error::domain("no trial records"));
    }
    let mut m = Moments::default();
    for r in records {
        m.push(d_t * r.rate);
    }
    Ok(m.estimate())
}

/// Aggregates of a full-frame run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub trials: usize,
    pub seed: u64,
    pub p_fa: Estimate,
    pub p_d: Estimate,
    /// Chosen-PU-beam frequencies over active frames.
    pub delta_bar_column: Vec<f64>,
    pub psi: Vec<f64>,
    /// KS distance of the drawn `ν*` against `F_ν*`.
    pub ks_nu: f64,
    /// `D_t·E{P·1(sensed idle)}`.
    pub power: Estimate,
    /// `D_t·E{g_sp·p(κ_SR - κ_PU)·P·1(active, sensed idle)}`.
    pub interference: Estimate,
    pub capacity: Estimate,
    pub p_out: Estimate,
    pub p_e: Estimate,
}

const STATS: usize = 7;

/// Runs `trials` frames and aggregates them.
pub fn run_trials(
    proto: &ProtocolModel,
    dist: &SelectionDiversityDistribution,
    policy: &PowerPolicy,
    d_t: f64,
    trials: usize,
    seed: u64,
) -> Result<OracleReport> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let m = proto.model.sectors();
    let parts = run_chunks(trials, seed, |rng, count| {
        // p_fa, p_d, power, interference, capacity, p_out, p_e
        let mut s = vec![Moments::default(); STATS];
        let mut pu = vec![0u64; m];
        let mut sr = vec![0u64; m];
        let mut nus = Vec::with_capacity(count);
        for _ in 0..count {
            let r = simulate_frame(proto, dist, policy, rng);
            let busy = f64::from(u8::from(r.sensed_busy));
            if r.active {
                s[1].push(busy);
                pu[r.m_pu] += 1;
            } else {
                s[0].push(busy);
            }
            sr[r.m_sr] += 1;
            nus.push(r.nu);
            s[2].push(d_t * r.power);
            s[3].push(d_t * r.interference);
            s[4].push(d_t * r.rate);
            s[5].push(f64::from(u8::from(r.interval == 0)));
            s[6].push(r.sep);
        }
        (s, pu, sr, nus)
    });
    let mut pu = vec![0u64; m];
    let mut sr = vec![0u64; m];
    let mut nus = Vec::with_capacity(trials);
    let mut stats = Vec::with_capacity(parts.len());
    for (s, p, r, n) in parts {
        stats.push(s);
        for i in 0..m {
            pu[i] += p[i];
            sr[i] += r[i];
        }
        nus.extend(n);
    }
    let s = merge_all(&stats);
    let active: u64 = pu.iter().sum();
    Ok(OracleReport {
        trials,
        seed,
        p_fa: s[0].estimate(),
        p_d: s[1].estimate(),
        delta_bar_column: pu.iter().map(|&c| c as f64 / active.max(1) as f64).collect(),
        psi: sr.iter().map(|&c| c as f64 / trials as f64).collect(),
        ks_nu: ks_distance(&mut nus, |x| dist.cdf(x)),
        power: s[2].estimate(),
        interference: s[3].estimate(),
        capacity: s[4].estimate(),
        p_out: s[5].estimate(),
        p_e: s[6].estimate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (PriorModel, BeamPatternModel, FramePlan) {
        let prior = PriorModel::new(0.3, 1.0, 1.0, 1.0, 1.0).unwrap();
        let model = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8).unwrap();
        let plan = FramePlan::with_samples(20e-3, 1e-3, 1e-6, 8, 20).unwrap();
        (prior, model, plan)
    }

    #[test]
    fn chunks_are_reproducible() {
        let a = run_chunks(10_000, 7, |rng, n| (0..n).fold(0u64, |a, _| a ^ rng.random::<u64>()));
        let b = run_chunks(10_000, 7, |rng, n| (0..n).fold(0u64, |a, _| a ^ rng.random::<u64>()));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let c = run_chunks(10_000, 8, |rng, n| (0..n).fold(0u64, |a, _| a ^ rng.random::<u64>()));
        assert_ne!(a, c);
    }

    #[test]
    fn noise_energy_mean() {
        let (prior, model, plan) = setup();
        let mut rng = chunk_rng(1, 0);
        let mut m = Moments::default();
        for _ in 0..20_000 {
            m.push(draw_sector_energies(&prior, &model, &plan, 0.0, 0.0, false, &mut rng)[3]);
        }
        assert!(m.estimate().z_score(1.0) < 4.0);
    }

    #[test]
    fn boresight_energy_mean() {
        let (prior, model, plan) = setup();
        let mut rng = chunk_rng(2, 0);
        let mut m = Moments::default();
        let g = 1.7;
        for _ in 0..20_000 {
            m.push(draw_sector_energies(&prior, &model, &plan, g, 0.0, true, &mut rng)[0]);
        }
        let expect = g * model.gain(0, 0.0) + 1.0;
        assert!(m.estimate().z_score(expect) < 4.0);
    }

    #[test]
    fn explicit_samples_follow_gamma_law() {
        let (prior, model, plan) = setup();
        let n = plan.samples_per_sector();
        let mut rng = chunk_rng(3, 0);
        let mut xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let e = draw_sector_energies(&prior, &model, &plan, 0.8, 0.3, true, &mut rng)[1];
                let var = 0.8 * model.gain(1, 0.3) + 1.0;
                e * n as f64 / var
            })
            .collect();
        let d = ks_distance(&mut xs, |x| crate::special::gamma_p(n as f64, x));
        // 1% critical value for n = 20000 is about 0.0115.
        assert!(d < 0.0115, "{d}");
    }

    #[test]
    fn moments_and_tv() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        let e = m.estimate();
        assert_eq!(e.mean, 2.5);
        assert!((e.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((total_variation(&[0.5, 0.5], &[1.0, 0.0]) - 0.5).abs() < 1e-15);
    }
}
