use std::ops::{Add, Mul};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::units::{mhz_to_angular, HYPERFINE_SPLITTING_MHZ};

/// One rectangular microwave drive segment.
///
/// The complex drive envelope is `Ω₀·C₁₂(t)` with
/// `C₁₂(t) = e^{iφ}(1 + ε·e^{i(ωt+ξ₁)} + ε·e^{−i(ωt+ξ₂)})`, where `t` is
/// measured from the start of the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveField {
    /// Carrier Rabi frequency Ω₀, rad/µs.
    pub omega0: f64,
    /// Global phase φ, rad.
    pub phase: f64,
    /// Sideband amplitude ε relative to the carrier; 0 is single tone, 1 triple tone.
    pub epsilon: f64,
    /// Phase ξ₁ of the upper sideband, rad.
    pub xi1: f64,
    /// Phase ξ₂ of the lower sideband, rad.
    pub xi2: f64,
    /// Sideband offset ω from the carrier, rad/µs.
    pub sideband_offset: f64,
}

impl DriveField {
    pub fn single_tone(omega0: f64) -> Self {
        Self {
            omega0,
            phase: 0.0,
            epsilon: 0.0,
            xi1: 0.0,
            xi2: 0.0,
            sideband_offset: mhz_to_angular(HYPERFINE_SPLITTING_MHZ),
        }
    }

    /// Carrier plus two equal sidebands at ±2π·A_hf.
    pub fn triple_tone(omega0: f64, hf: &HyperfineModel) -> Self {
        Self {
            epsilon: 1.0,
            sideband_offset: hf.angular_splitting(),
            ..Self::single_tone(omega0)
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_sideband_phases(mut self, xi1: f64, xi2: f64) -> Self {
        self.xi1 = xi1;
        self.xi2 = xi2;
        self
    }

    pub fn is_single_tone(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.omega0.is_finite() && self.omega0 >= 0.0, || {
            format!("Rabi frequency must be finite and ≥ 0, got {}", self.omega0)
        })?;
        ensure((0.0..=1.0).contains(&self.epsilon), || {
            format!("sideband amplitude must lie in [0, 1], got {}", self.epsilon)
        })?;
        ensure(self.sideband_offset.is_finite() && self.sideband_offset > 0.0, || {
            format!("sideband offset must be > 0, got {}", self.sideband_offset)
        })?;
        ensure(
            self.phase.is_finite() && self.xi1.is_finite() && self.xi2.is_finite(),
            || "drive phases must be finite".into(),
        )
    }
}

/// `C₁₂(t)` for `drive`; `C₂₁` is its conjugate.
pub fn drive_coefficient(t: f64, drive: &DriveField) -> C64 {
    Coefficient::new(drive).at(t)
}

/// `C₁₂(t)` with the constant phasors folded in, so each evaluation costs a
/// single complex exponential.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficient {
    carrier: C64,
    upper: C64,
    lower: C64,
    rate: f64,
    single: bool,
}

impl Coefficient {
    pub(crate) fn new(drive: &DriveField) -> Self {
        let carrier = C64::from_polar(1.0, drive.phase);
        Self {
            carrier,
            upper: carrier * C64::from_polar(drive.epsilon, drive.xi1),
            lower: carrier * C64::from_polar(drive.epsilon, -drive.xi2),
            rate: drive.sideband_offset,
            single: drive.is_single_tone(),
        }
    }

    #[inline]
    pub(crate) fn at(&self, t: f64) -> C64 {
        if self.single {
            return self.carrier;
        }
        let r = C64::cis(self.rate * t);
        self.carrier + self.upper * r + self.lower * r.conj()
    }
}

/// Pure dephasing γ = 1/T₂* and spin-lattice relaxation Γ = 1/T₁, both µs⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Relaxation {
    pub dephasing: f64,
    pub spin_lattice: f64,
}

impl Relaxation {
    pub fn new(dephasing: f64, spin_lattice: f64) -> Self {
        Self {
            dephasing,
            spin_lattice,
        }
    }

    /// Dephasing only; T₁ is ms-scale and negligible on µs sequences.
    pub fn dephasing(gamma: f64) -> Self {
        Self::new(gamma, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.dephasing.is_finite() && self.dephasing >= 0.0, || {
            format!("dephasing rate must be ≥ 0, got {}", self.dephasing)
        })?;
        ensure(self.spin_lattice.is_finite() && self.spin_lattice >= 0.0, || {
            format!("spin-lattice rate must be ≥ 0, got {}", self.spin_lattice)
        })
    }
}

/// Secular treatment of the ¹⁴N hyperfine triplet.
///
/// The signal is the weighted mean over the three lines at
/// `δ₀ − 2πA_hf, δ₀, δ₀ + 2πA_hf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineModel {
    /// Splitting A_hf, cyclic MHz.
    pub splitting_mhz: f64,
    /// Weights of the lower, central and upper line.
    pub weights: [f64; 3],
}

impl Default for HyperfineModel {
    fn default() -> Self {
        Self {
            splitting_mhz: HYPERFINE_SPLITTING_MHZ,
            weights: [1.0 / 3.0; 3],
        }
    }
}

impl HyperfineModel {
    /// Only the central line; turns averaging off.
    pub fn single_line() -> Self {
        Self {
            weights: [0.0, 1.0, 0.0],
            ..Self::default()
        }
    }

    pub fn with_splitting(mut self, splitting_mhz: f64) -> Self {
        self.splitting_mhz = splitting_mhz;
        self
    }

    pub fn angular_splitting(&self) -> f64 {
        mhz_to_angular(self.splitting_mhz)
    }

    /// The three line detunings for carrier detuning `delta0` (rad/µs).
    pub fn detunings(&self, delta0: f64) -> [f64; 3] {
        let w = self.angular_splitting();
        [delta0 - w, delta0, delta0 + w]
    }

    /// `(weight, detuning)` for lines with nonzero weight.
    pub fn lines(&self, delta0: f64) -> impl Iterator<Item = (f64, f64)> {
        self.weights
            .into_iter()
            .zip(self.detunings(delta0))
            .filter(|(w, _)| *w != 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.splitting_mhz.is_finite() && self.splitting_mhz > 0.0, || {
            format!("hyperfine splitting must be > 0, got {}", self.splitting_mhz)
        })?;
        ensure(self.weights.iter().all(|w| w.is_finite() && *w >= 0.0), || {
            "hyperfine weights must be nonnegative".into()
        })?;
        let sum: f64 = self.weights.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-12, || {
            format!("hyperfine weights must sum to 1, got {sum}")
        })
    }
}

/// Weighted mean of `f` over the hyperfine lines around `delta0`.
pub fn hyperfine_average<T, F>(mut f: F, delta0: f64, hf: &HyperfineModel) -> T
where
    F: FnMut(f64) -> T,
    T: Add<Output = T> + Mul<f64, Output = T>,
{
    let [a, b, c] = hf.detunings(delta0);
    let [wa, wb, wc] = hf.weights;
    f(a) * wa + f(b) * wb + f(c) * wc
}

/// Fallible [`hyperfine_average`] that skips zero-weight lines.
pub fn try_hyperfine_average<T, E, F>(mut f: F, delta0: f64, hf: &HyperfineModel) -> Result<T, E>
where
    F: FnMut(f64) -> Result<T, E>,
    T: Add<Output = T> + Mul<f64, Output = T>,
{
    let mut acc: Option<T> = None;
    for (w, delta) in hf.lines(delta0) {
        let term = f(delta)? * w;
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    // Weights sum to one, so at least one line is present for a valid model.
    Ok(acc.expect("hyperfine model has no weighted line"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn coefficient_single_tone_is_carrier_phase() {
        let d = DriveField::single_tone(1.0);
        for t in [0.0, 0.13, 7.9] {
            assert!(close(drive_coefficient(t, &d), C64::new(1.0, 0.0)));
        }
        let d = d.with_phase(PI / 2.0);
        assert!(close(drive_coefficient(0.3, &d), C64::new(0.0, 1.0)));
    }

    #[test]
    fn coefficient_triple_tone_aligned_and_opposed() {
        let hf = HyperfineModel::default();
        let d = DriveField::triple_tone(1.0, &hf);
        assert!(close(drive_coefficient(0.0, &d), C64::new(3.0, 0.0)));
        // ωt = π for both sidebands.
        let t = 1.0 / (2.0 * hf.splitting_mhz);
        assert!(close(drive_coefficient(t, &d), C64::new(-1.0, 0.0)));
    }

    #[test]
    fn average_of_constant_linear_and_quadratic() {
        let hf = HyperfineModel::default();
        let c: f64 = hyperfine_average(|_| 4.2, 0.3, &hf);
        assert!((c - 4.2).abs() < 1e-12);
        let lin: f64 = hyperfine_average(|d| d, 0.0, &hf);
        assert!(lin.abs() < 1e-12);
        let quad: f64 = hyperfine_average(|d| d * d, 0.0, &hf);
        let w = 2.0 * PI * 2.16;
        assert!((quad - 2.0 / 3.0 * w * w).abs() < 1e-9);
    }

    #[test]
    fn weights_validated() {
        assert!(HyperfineModel::default().validate().is_ok());
        assert!(HyperfineModel::single_line().validate().is_ok());
        let bad = HyperfineModel {
            weights: [0.5, 0.5, 0.5],
            ..HyperfineModel::default()
        };
        assert!(bad.validate().is_err());
        let neg = HyperfineModel {
            weights: [-0.5, 1.0, 0.5],
            ..HyperfineModel::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn drive_validation() {
        assert!(DriveField::single_tone(-1.0).validate().is_err());
        let mut d = DriveField::single_tone(1.0);
        d.epsilon = 1.5;
        assert!(d.validate().is_err());
        d.epsilon = 0.5;
        d.sideband_offset = 0.0;
        assert!(d.validate().is_err());
    }
}
