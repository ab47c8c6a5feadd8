//! Sectorized Gaussian beampattern of the switched-beam (ESPAR) antenna.
//!
//! Sector `m` (0-based here, `m + 1` in reports) has boresight
//! `κ_m = 2πm/M` and gain `p(φ - κ_m)` where
//! `p(φ) = A1 + A0·exp(-ln2·(wrap(φ)/φ_3dB)²)` and `wrap` maps into `[-π, π)`.
//! The omni-directional baseline is the same type with a constant gain.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::quadrature::GaussLegendre;

const TWO_PI: f64 = 2.0 * PI;

/// Panels of the composite Gauss–Legendre rule over one full turn.
pub const QUADRATURE_PANELS: usize = 2048;
const QUADRATURE_ORDER: usize = 8;
const QUADRATURE_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PatternMode {
    Sectorized,
    /// Constant gain in every direction.
    Omni { gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPatternModel {
    a0: f64,
    a1: f64,
    phi_3db: f64,
    sectors: usize,
    mode: PatternMode,
}

/// Maps an angle into `[-π, π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    (phi + PI).rem_euclid(TWO_PI) - PI
}

impl BeamPatternModel {
    /// Sectorized model. `phi_3db` is in radians.
    pub fn new(a0: f64, a1: f64, phi_3db: f64, sectors: usize) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::domain(format!("A0 must be positive, got {a0}")));
        }
        if !(a1 >= 0.0 && a1.is_finite()) {
            return Err(Error::domain(format!("A1 must be non-negative, got {a1}")));
        }
        if !(phi_3db > 0.0 && phi_3db < PI) {
            return Err(Error::domain(format!(
                "3-dB beamwidth must lie in (0, π), got {phi_3db}"
            )));
        }
        if sectors == 0 {
            return Err(Error::domain("at least one sector is required"));
        }
        Ok(Self {
            a0,
            a1,
            phi_3db,
            sectors,
            mode: PatternMode::Sectorized,
        })
    }

    /// Same as [`BeamPatternModel::new`] with the beamwidth in degrees.
    pub fn from_degrees(a0: f64, a1: f64, phi_3db_deg: f64, sectors: usize) -> Result<Self> {
        Self::new(a0, a1, phi_3db_deg.to_radians(), sectors)
    }

    /// Omni-directional model with constant `gain` and `sectors` identical
    /// beams (normally one).
    pub fn omni(gain: f64, sectors: usize) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::domain(format!("omni gain must be positive, got {gain}")));
        }
        if sectors == 0 {
            return Err(Error::domain("at least one sector is required"));
        }
        Ok(Self {
            a0: gain,
            a1: 0.0,
            phi_3db: PI / 2.0,
            sectors,
            mode: PatternMode::Omni { gain },
        })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn phi_3db(&self) -> f64 {
        self.phi_3db
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn mode(&self) -> PatternMode {
        self.mode
    }

    pub fn is_omni(&self) -> bool {
        matches!(self.mode, PatternMode::Omni { .. })
    }

    /// Peak gain `A1 + A0` (or the omni gain).
    pub fn peak_gain(&self) -> f64 {
        match self.mode {
            PatternMode::Sectorized => self.a1 + self.a0,
            PatternMode::Omni { gain } => gain,
        }
    }

    /// Boresight of sector `m`, `2πm/M`.
    pub fn boresight(&self, m: usize) -> f64 {
        TWO_PI * m as f64 / self.sectors as f64
    }

    /// Reference pattern `p(φ)` (sector 0).
    #[inline]
    pub fn base_gain(&self, phi: f64) -> f64 {
        match self.mode {
            PatternMode::Sectorized => {
                let x = wrap_angle(phi) / self.phi_3db;
                self.a1 + self.a0 * (-LN_2 * x * x).exp()
            }
            PatternMode::Omni { gain } => gain,
        }
    }

    /// Gain of sector `m` towards angle `phi`.
    pub fn pattern_gain(&self, m: usize, phi: f64) -> Result<f64> {
        if m >= self.sectors {
            return Err(Error::domain(format!(
                "sector index {m} out of range for {} sectors",
                self.sectors
            )));
        }
        if !phi.is_finite() {
            return Err(Error::domain("angle must be finite"));
        }
        Ok(self.gain(m, phi))
    }

    /// Unchecked variant of [`pattern_gain`](Self::pattern_gain) for hot loops.
    #[inline]
    pub fn gain(&self, m: usize, phi: f64) -> f64 {
        self.base_gain(phi - self.boresight(m))
    }

    /// Index of the sector whose angular domain
    /// `[2π(m-1/2)/M, 2π(m+1/2)/M)` contains `phi`.
    pub fn sector_of(&self, phi: f64) -> usize {
        let width = TWO_PI / self.sectors as f64;
        let shifted = (phi + 0.5 * width).rem_euclid(TWO_PI);
        ((shifted / width).floor() as usize).min(self.sectors - 1)
    }

    /// Omni-directional model whose constant gain equals the mean gain `E_A`
    /// of this pattern, so both radiate the same average power. The
    /// equivalent has a single beam.
    pub fn make_omni_equivalent(&self) -> Result<Self> {
        let e_a = mean_gain(self)?;
        Self::omni(e_a, 1)
    }

    /// Same model with a different number of sectors.
    pub fn with_sectors(&self, sectors: usize) -> Result<Self> {
        if sectors == 0 {
            return Err(Error::domain("at least one sector is required"));
        }
        Ok(Self {
            sectors,
            ..self.clone()
        })
    }
}

/// Pattern integrals consumed by the detector and the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorIntegrals {
    /// `(1/2π)∫ p(θ)dθ`.
    pub e_a: f64,
    /// `E_mm`, the mean squared gain of a single sector.
    pub e_b: f64,
    /// `E_mm' = (1/2π)∫ p_m(θ) p_m'(θ) dθ`.
    pub e_cross: SquareMatrix,
}

impl SectorIntegrals {
    pub fn cross_sum(&self) -> f64 {
        self.e_cross.sum()
    }
}

fn turn_average<F: FnMut(f64) -> f64>(gl: &GaussLegendre, panels: usize, f: F) -> f64 {
    gl.integrate(0.0, TWO_PI, panels, f) / TWO_PI
}

fn checked_average<F: Fn(f64) -> f64>(gl: &GaussLegendre, what: &str, f: F) -> Result<f64> {
    let fine = turn_average(gl, QUADRATURE_PANELS, &f);
    let coarse = turn_average(gl, QUADRATURE_PANELS / 2, &f);
    let scale = fine.abs().max(f64::MIN_POSITIVE);
    if !fine.is_finite() || (fine - coarse).abs() > QUADRATURE_RTOL * scale {
        return Err(Error::numerical(
            "compute_sector_integrals",
            format!("{what}: {QUADRATURE_PANELS}-panel value {fine:e} vs half-resolution {coarse:e}"),
        ));
    }
    Ok(fine)
}

/// Mean pattern gain `E_A`.
pub fn mean_gain(model: &BeamPatternModel) -> Result<f64> {
    if let PatternMode::Omni { gain } = model.mode {
        return Ok(gain);
    }
    let gl = GaussLegendre::new(QUADRATURE_ORDER);
    checked_average(&gl, "E_A", |t| model.base_gain(t))
}

/// Computes `E_A`, `E_B` and the full `E_mm'` matrix by composite
/// Gauss–Legendre quadrature over one turn, checking each value against a
/// half-resolution recomputation.
pub fn compute_sector_integrals(model: &BeamPatternModel) -> Result<SectorIntegrals> {
    let m = model.sectors();
    if let PatternMode::Omni { gain } = model.mode {
        return Ok(SectorIntegrals {
            e_a: gain,
            e_b: gain * gain,
            e_cross: SquareMatrix::from_fn(m, |_, _| gain * gain),
        });
    }
    let gl = GaussLegendre::new(QUADRATURE_ORDER);
    let e_a = checked_average(&gl, "E_A", |t| model.base_gain(t))?;
    let mut e_cross = SquareMatrix::zeros(m);
    for i in 0..m {
        for j in i..m {
            let v = checked_average(&gl, "E_mm'", |t| model.gain(i, t) * model.gain(j, t))?;
            e_cross.set(i, j, v);
            e_cross.set(j, i, v);
        }
    }
    let e_b = e_cross.get(0, 0);
    Ok(SectorIntegrals { e_a, e_b, e_cross })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_model(a0: f64, a1: f64) -> BeamPatternModel {
        BeamPatternModel::from_degrees(a0, a1, 20.0, 8).unwrap()
    }

    #[test]
    fn boresight_gain_is_peak() {
        let m = table_model(0.97, 0.03);
        assert!((m.pattern_gain(0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        for s in 0..8 {
            let k = m.boresight(s);
            assert!((m.gain(s, k) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_power_at_beamwidth() {
        let m = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 8).unwrap();
        let g = m.pattern_gain(0, 20f64.to_radians()).unwrap();
        assert!((g - 0.51).abs() < 1e-12);
    }

    #[test]
    fn invalid_sector_is_domain_error() {
        let m = table_model(1.0, 0.01);
        assert!(matches!(m.pattern_gain(8, 0.0), Err(Error::Domain(_))));
        assert!(m.pattern_gain(0, f64::NAN).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(BeamPatternModel::new(0.0, 0.01, 0.3, 8).is_err());
        assert!(BeamPatternModel::new(1.0, -0.1, 0.3, 8).is_err());
        assert!(BeamPatternModel::new(1.0, 0.01, PI, 8).is_err());
        assert!(BeamPatternModel::new(1.0, 0.01, 0.3, 0).is_err());
    }

    #[test]
    fn wrap_is_periodic_and_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(-0.1 + 4.0 * PI) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn sector_domains_partition_the_circle() {
        let m = table_model(1.0, 0.01);
        assert_eq!(m.sector_of(0.0), 0);
        assert_eq!(m.sector_of(12f64.to_radians()), 0);
        assert_eq!(m.sector_of(-22.0f64.to_radians()), 0);
        assert_eq!(m.sector_of(22.5f64.to_radians()), 1);
        assert_eq!(m.sector_of(180f64.to_radians()), 4);
        assert_eq!(m.sector_of(-23f64.to_radians()), 7);
    }

    #[test]
    fn mean_gains_match_reported_values() {
        for (a0, a1, expected) in [(1.0, 0.01, 0.127), (0.97, 0.03, 0.145), (2.0, 0.01, 0.245)] {
            let ints = compute_sector_integrals(&table_model(a0, a1)).unwrap();
            assert!((ints.e_a - expected).abs() < 0.002, "A0={a0}: E_A={}", ints.e_a);
            assert!(ints.e_a > a1);
        }
    }

    #[test]
    fn cross_integrals_are_circulant_and_symmetric() {
        let ints = compute_sector_integrals(&table_model(1.0, 0.01)).unwrap();
        let e = &ints.e_cross;
        assert!(e.asymmetry() < 1e-15);
        for i in 0..8 {
            assert!((e.get(i, i) - ints.e_b).abs() < 1e-12 * ints.e_b);
            for j in 0..8 {
                let circ = e.get(0, (j + 8 - i) % 8);
                assert!((e.get(i, j) - circ).abs() < 1e-10 * circ.max(1e-3));
            }
        }
    }

    #[test]
    fn omni_equivalent_preserves_mean_gain() {
        let m = table_model(0.97, 0.03);
        let omni = m.make_omni_equivalent().unwrap();
        assert!(omni.is_omni());
        assert_eq!(omni.sectors(), 1);
        assert!((omni.base_gain(1.234) - 0.145).abs() < 0.002);
        let e_espar = mean_gain(&m).unwrap();
        let e_omni = compute_sector_integrals(&omni).unwrap().e_a;
        assert!((e_espar - e_omni).abs() < 1e-12);
    }

    #[test]
    fn single_sector_covers_all_angles() {
        let m = BeamPatternModel::from_degrees(1.0, 0.01, 20.0, 1).unwrap();
        for k in 0..36 {
            assert_eq!(m.sector_of(k as f64 * 10f64.to_radians()), 0);
        }
        let ints = compute_sector_integrals(&m).unwrap();
        assert_eq!(ints.e_cross.dim(), 1);
    }
}
