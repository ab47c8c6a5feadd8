//! Experiment configuration.
//!
//! A TOML file with every section optional; missing keys take the reference
//! simulation values. Unknown keys are rejected. Angles are given
//! in degrees, caps in dB and sector indices 1-based; [`ExperimentConfig`]
//! converts them on the way into the model types.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::antenna::BeamPatternModel;
use crate::error::{Error, Result};
use crate::optimizer::search::{FrameTiming, Orientation, SystemSetup};
use crate::optimizer::{Constraints, OptimizerSettings, Quantizer};
use crate::sensing::PriorModel;
use crate::special::db_to_linear;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaConfig {
    pub a0: f64,
    pub a1: f64,
    pub phi_3db_deg: f64,
    pub sectors: usize,
    /// Run the omni-directional equivalent instead of the ESPAR antenna.
    pub omni: bool,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            a0: 1.0,
            a1: 0.01,
            phi_3db_deg: 20.0,
            sectors: 8,
            omni: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub gamma: f64,
    pub gamma_ss: f64,
    pub gamma_sp: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            gamma_ss: 3.0,
            gamma_sp: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub pi1: f64,
    pub p_p: f64,
    pub sigma_w2: f64,
    /// `γ·P_p/σ_w²` in dB. When set it overrides `p_p`.
    pub snr_pu_db: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            pi1: 0.3,
            p_p: 1.0,
            sigma_w2: 1.0,
            snr_pu_db: None,
        }
    }
}

/// Durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub t_f: f64,
    pub t_train: f64,
    pub t_s: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            t_f: 20e-3,
            t_train: 1e-3,
            t_s: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub target_pd: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { target_pd: 0.9 }
    }
}

/// Feedback bits: a count or `"inf"` for perfect CSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackBits {
    Finite(u32),
    Infinite,
}

impl FeedbackBits {
    pub fn quantizer(self) -> Quantizer {
        match self {
            FeedbackBits::Finite(b) => Quantizer::Bits(b),
            FeedbackBits::Infinite => Quantizer::PerfectCsi,
        }
    }
}

impl fmt::Display for FeedbackBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackBits::Finite(b) => write!(f, "{b}"),
            FeedbackBits::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for FeedbackBits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FeedbackBits::Finite(b) => s.serialize_u32(*b),
            FeedbackBits::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for FeedbackBits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct BitsVisitor;

        impl Visitor<'_> for BitsVisitor {
            type Value = FeedbackBits;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number of feedback bits (0..=16) or \"inf\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<FeedbackBits, E> {
                if (0..=16).contains(&v) {
                    Ok(FeedbackBits::Finite(v as u32))
                } else {
                    Err(E::invalid_value(de::Unexpected::Signed(v), &self))
                }
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<FeedbackBits, E> {
                self.visit_i64(i64::try_from(v).unwrap_or(i64::MAX))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<FeedbackBits, E> {
                match v {
                    "inf" | "infinity" => Ok(FeedbackBits::Infinite),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(BitsVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    pub n_b: FeedbackBits,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            n_b: FeedbackBits::Finite(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub p_bar_db: f64,
    pub i_bar_db: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            p_bar_db: 12.0,
            i_bar_db: -6.0,
        }
    }
}

/// Sector indices are 1-based: sector 1 has its boresight at 0°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrientationConfig {
    pub m_pu: usize,
    pub m_sr: usize,
    /// Average over a `grid × grid` set of PU and SR angles instead.
    pub average: bool,
    pub grid: usize,
}

impl Default for OrientationConfig {
    fn default() -> Self {
        Self {
            m_pu: 1,
            m_sr: 1,
            average: false,
            grid: 64,
        }
    }
}

/// Sweep axes. An empty axis holds the single value of the corresponding
/// section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p_bar_db: Vec<f64>,
    pub i_bar_db: Vec<f64>,
    pub n_b: Vec<FeedbackBits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub rho: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { rho: 4.0 }
    }
}

/// Monte Carlo budgets of `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub trials: usize,
    pub metric_trials: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            metric_trials: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also solve the omni-directional equivalent and report `Λ`.
    pub omni_reference: bool,
    /// Write one JSON file per sweep point with every solve in it.
    pub solutions: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            omni_reference: true,
            solutions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub antenna: AntennaConfig,
    pub channel: ChannelConfig,
    pub prior: PriorConfig,
    pub frame: FrameConfig,
    pub detector: DetectorConfig,
    pub quantizer: QuantizerConfig,
    pub constraints: ConstraintConfig,
    pub orientation: OrientationConfig,
    pub sweep: SweepConfig,
    pub metrics: MetricsConfig,
    pub validation: ValidationConfig,
    pub output: OutputConfig,
    pub solver: OptimizerSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            antenna: AntennaConfig::default(),
            channel: ChannelConfig::default(),
            prior: PriorConfig::default(),
            frame: FrameConfig::default(),
            detector: DetectorConfig::default(),
            quantizer: QuantizerConfig::default(),
            constraints: ConstraintConfig::default(),
            orientation: OrientationConfig::default(),
            sweep: SweepConfig::default(),
            metrics: MetricsConfig::default(),
            validation: ValidationConfig::default(),
            output: OutputConfig::default(),
            solver: OptimizerSettings::default(),
        }
    }
}

fn positive(bad: &mut Vec<String>, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        bad.push(format!("{key} must be positive and finite (got {v})"));
    }
}

fn finite(bad: &mut Vec<String>, key: &str, v: f64) {
    if !v.is_finite() {
        bad.push(format!("{key} must be finite (got {v})"));
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Canonical TOML rendering, also the input of the config hash.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks value ranges; the error lists every offending key.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let a = &self.antenna;
        positive(&mut bad, "antenna.a0", a.a0);
        if !(a.a1 >= 0.0 && a.a1.is_finite()) {
            bad.push(format!("antenna.a1 must be non-negative (got {})", a.a1));
        }
        positive(&mut bad, "antenna.phi_3db_deg", a.phi_3db_deg);
        if a.sectors == 0 {
            bad.push("antenna.sectors must be at least 1".into());
        }
        positive(&mut bad, "channel.gamma", self.channel.gamma);
        positive(&mut bad, "channel.gamma_ss", self.channel.gamma_ss);
        positive(&mut bad, "channel.gamma_sp", self.channel.gamma_sp);
        let p = &self.prior;
        if !(p.pi1 > 0.0 && p.pi1 < 1.0) {
            bad.push(format!("prior.pi1 must lie in (0, 1) (got {})", p.pi1));
        }
        positive(&mut bad, "prior.p_p", p.p_p);
        positive(&mut bad, "prior.sigma_w2", p.sigma_w2);
        if let Some(s) = p.snr_pu_db {
            finite(&mut bad, "prior.snr_pu_db", s);
        }
        let f = &self.frame;
        positive(&mut bad, "frame.t_f", f.t_f);
        if !(f.t_train >= 0.0 && f.t_train < f.t_f) {
            bad.push(format!("frame.t_train must lie in [0, t_f) (got {})", f.t_train));
        }
        positive(&mut bad, "frame.t_s", f.t_s);
        if a.sectors > 0 && f.t_s > 0.0 && f.t_train < f.t_f && self.timing().max_samples(a.sectors) == 0 {
            bad.push("frame leaves no room for one sensing sample per sector".into());
        }
        let pd = self.detector.target_pd;
        if !(pd > 0.0 && pd < 1.0) {
            bad.push(format!("detector.target_pd must lie in (0, 1) (got {pd})"));
        }
        finite(&mut bad, "constraints.p_bar_db", self.constraints.p_bar_db);
        finite(&mut bad, "constraints.i_bar_db", self.constraints.i_bar_db);
        for &v in &self.sweep.p_bar_db {
            finite(&mut bad, "sweep.p_bar_db", v);
        }
        for &v in &self.sweep.i_bar_db {
            finite(&mut bad, "sweep.i_bar_db", v);
        }
        let o = &self.orientation;
        if !(1..=a.sectors.max(1)).contains(&o.m_pu) {
            bad.push(format!("orientation.m_pu must lie in 1..={} (got {})", a.sectors, o.m_pu));
        }
        if !(1..=a.sectors.max(1)).contains(&o.m_sr) {
            bad.push(format!("orientation.m_sr must lie in 1..={} (got {})", a.sectors, o.m_sr));
        }
        if o.grid == 0 {
            bad.push("orientation.grid must be at least 1".into());
        }
        positive(&mut bad, "metrics.rho", self.metrics.rho);
        if self.validation.trials == 0 {
            bad.push("validation.trials must be at least 1".into());
        }
        if self.validation.metric_trials == 0 {
            bad.push("validation.metric_trials must be at least 1".into());
        }
        if self.solver.sensing_grid < 3 {
            bad.push("solver.sensing_grid must be at least 3".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn pattern(&self) -> Result<BeamPatternModel> {
        let a = &self.antenna;
        BeamPatternModel::from_degrees(a.a0, a.a1, a.phi_3db_deg, a.sectors)
    }

    pub fn prior_model(&self) -> Result<PriorModel> {
        let p = &self.prior;
        let c = &self.channel;
        let p_p = match p.snr_pu_db {
            Some(db) => db_to_linear(db) * p.sigma_w2 / c.gamma,
            None => p.p_p,
        };
        PriorModel::new(p.pi1, p_p, c.gamma, c.gamma_sp, p.sigma_w2)
    }

    pub fn timing(&self) -> FrameTiming {
        FrameTiming {
            t_f: self.frame.t_f,
            t_train: self.frame.t_train,
            t_s: self.frame.t_s,
        }
    }

    /// Sensing setup of the configured antenna (the omni equivalent when
    /// `antenna.omni` is set).
    pub fn setup(&self) -> Result<SystemSetup> {
        let setup = SystemSetup {
            model: self.pattern()?,
            prior: self.prior_model()?,
            gamma_ss: self.channel.gamma_ss,
            target_pd: self.detector.target_pd,
            timing: self.timing(),
        };
        if self.antenna.omni {
            setup.omni_equivalent()
        } else {
            Ok(setup)
        }
    }

    /// Caps in linear units.
    pub fn caps(p_bar_db: f64, i_bar_db: f64) -> Result<Constraints> {
        Constraints::new(db_to_linear(p_bar_db), db_to_linear(i_bar_db))
    }

    /// Fixed orientation of the config (0-based sector of the PU, SR on
    /// the boresight of its sector).
    pub fn fixed_orientation(&self, model: &BeamPatternModel) -> Orientation {
        let o = &self.orientation;
        if model.sectors() == 1 {
            return Orientation { phi_sr: 0.0, m_pu: 0 };
        }
        Orientation::on_boresight(model, o.m_sr - 1, o.m_pu - 1)
    }
}
