//! Sector-based opportunistic cognitive radio with an ESPAR antenna at the
//! secondary transmitter.
//!
//! The transmitter senses each of its `M` beams, guesses the primary
//! user's sector, picks the strongest beam towards its receiver and sends
//! with a power taken from a quantized feedback table. The crate models
//! each stage, optimizes the power policy and sensing time for the ergodic
//! capacity lower bound, and checks the closed forms against Monte Carlo.
//!
//! - [`antenna`]: beampattern and pattern integrals
//! - [`sensing`]: multi-sector energy detector
//! - [`beamsel_pu`], [`beamsel_sr`]: beam-selection probabilities
//! - [`optimizer`]: constrained capacity maximization
//! - [`metrics`]: outage and symbol error probability
//! - [`mc_oracle`]: Monte Carlo reference
//! - [`config`], [`experiment`], [`report`], [`validation`]: experiment plumbing

pub mod antenna;
pub mod beamsel_pu;
pub mod beamsel_sr;
pub mod config;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod mc_oracle;
pub mod metrics;
pub mod optimizer;
pub mod quadrature;
pub mod report;
pub mod sensing;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
