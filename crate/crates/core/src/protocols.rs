//! Pulsed-ODMR and Ramsey sequences with hyperfine averaging.
//!
//! Every protocol reports the spin-flip probability `ρ₂₂` at the end of the
//! sequence, averaged over the three hyperfine lines, together with its
//! derivative with respect to the probe frequency in 1/MHz.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    free_evolve_with_sensitivity, propagate_with_sensitivity, try_hyperfine_average, DriveField,
    HyperfineModel, Relaxation, SensitivityState,
};
use crate::error::{ensure, Error, Result};
use crate::units::{mhz_to_angular, per_angular_to_per_mhz, DEFAULT_STEP_US};

/// Number of microwave tones in each pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tones {
    Single,
    Triple,
}

impl Tones {
    pub fn epsilon(self) -> f64 {
        match self {
            Tones::Single => 0.0,
            Tones::Triple => 1.0,
        }
    }

    pub fn count(self) -> u8 {
        match self {
            Tones::Single => 1,
            Tones::Triple => 3,
        }
    }

    pub fn from_count(n: u8) -> Option<Self> {
        match n {
            1 => Some(Tones::Single),
            3 => Some(Tones::Triple),
            _ => None,
        }
    }

    fn drive(self, omega0: f64, hf: &HyperfineModel) -> DriveField {
        match self {
            Tones::Single => DriveField {
                sideband_offset: hf.angular_splitting(),
                ..DriveField::single_tone(omega0)
            },
            Tones::Triple => DriveField::triple_tone(omega0, hf),
        }
    }
}

impl std::fmt::Display for Tones {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tones::Single => f.write_str("single"),
            Tones::Triple => f.write_str("triple"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrParams {
    /// Rabi frequency Ω₀/2π, MHz.
    pub rabi_mhz: f64,
    pub pulse_duration_us: f64,
    /// Carrier detuning from the central hyperfine line, MHz.
    pub detuning_mhz: f64,
    pub tones: Tones,
    pub step_us: f64,
}

impl OdmrParams {
    pub fn new(rabi_mhz: f64, pulse_duration_us: f64, detuning_mhz: f64, tones: Tones) -> Self {
        Self {
            rabi_mhz,
            pulse_duration_us,
            detuning_mhz,
            tones,
            step_us: DEFAULT_STEP_US,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure(self.rabi_mhz.is_finite() && self.rabi_mhz > 0.0, || {
            format!("Rabi frequency must be > 0 MHz, got {}", self.rabi_mhz)
        })?;
        ensure(self.pulse_duration_us.is_finite() && self.pulse_duration_us >= 0.0, || {
            format!("pulse duration must be ≥ 0 µs, got {}", self.pulse_duration_us)
        })?;
        ensure(self.detuning_mhz.is_finite(), || "detuning must be finite".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    /// Rabi frequency Ω₀/2π, MHz.
    pub rabi_mhz: f64,
    /// Free evolution time τ, µs.
    pub tau_us: f64,
    /// Carrier detuning from the central hyperfine line, MHz.
    pub detuning_mhz: f64,
    pub tones: Tones,
    /// Pulse-length multiplier applied to both π/2 pulses.
    pub overrotation: f64,
    /// Initial sideband phases ξ₁, ξ₂ of the first pulse, rad.
    pub xi1: f64,
    pub xi2: f64,
    /// Global phase of the second pulse, rad.
    pub second_phase: f64,
    pub step_us: f64,
}

impl RamseyParams {
    pub fn new(rabi_mhz: f64, tau_us: f64, detuning_mhz: f64, tones: Tones) -> Self {
        Self {
            rabi_mhz,
            tau_us,
            detuning_mhz,
            tones,
            overrotation: 1.0,
            xi1: 0.0,
            xi2: 0.0,
            second_phase: FRAC_PI_2,
            step_us: DEFAULT_STEP_US,
        }
    }

    pub fn with_overrotation(mut self, factor: f64) -> Self {
        self.overrotation = factor;
        self
    }

    pub fn with_sideband_phases(mut self, xi1: f64, xi2: f64) -> Self {
        self.xi1 = xi1;
        self.xi2 = xi2;
        self
    }

    fn validate(&self) -> Result<()> {
        ensure(self.rabi_mhz.is_finite() && self.rabi_mhz > 0.0, || {
            format!("Rabi frequency must be > 0 MHz, got {}", self.rabi_mhz)
        })?;
        ensure(self.tau_us.is_finite() && self.tau_us >= 0.0, || {
            format!("free evolution time must be ≥ 0 µs, got {}", self.tau_us)
        })?;
        ensure(self.overrotation.is_finite() && self.overrotation >= 0.0, || {
            format!("over-rotation must be ≥ 0, got {}", self.overrotation)
        })?;
        ensure(self.detuning_mhz.is_finite(), || "detuning must be finite".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    /// Hyperfine-averaged `ρ₂₂` at the end of the sequence.
    pub signal: f64,
    /// `∂signal/∂ν`, per MHz.
    pub slope: f64,
    /// Pulse durations plus free evolution, µs.
    pub manipulation_time: f64,
}

/// Per-line response `(ρ₂₂, ∂ρ₂₂/∂δ)`.
#[derive(Debug, Clone, Copy)]
struct LineResponse {
    signal: f64,
    d_delta: f64,
}

impl Add for LineResponse {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            signal: self.signal + o.signal,
            d_delta: self.d_delta + o.d_delta,
        }
    }
}

impl Mul<f64> for LineResponse {
    type Output = Self;
    fn mul(self, w: f64) -> Self {
        Self {
            signal: self.signal * w,
            d_delta: self.d_delta * w,
        }
    }
}

impl From<SensitivityState> for LineResponse {
    fn from(s: SensitivityState) -> Self {
        Self {
            signal: s.state.rho22(),
            d_delta: s.d_rho22(),
        }
    }
}

fn check_environment(relax: &Relaxation, hf: &HyperfineModel) -> Result<()> {
    relax.validate()?;
    hf.validate()
}

/// `t_{π/2} = π/√(4Ω₀² − γ²)` in µs for `rabi_mhz = Ω₀/2π`.
///
/// Half the duration that maximises the spin-flip probability of a damped
/// two-level system.
pub fn half_pi_duration(rabi_mhz: f64, gamma: f64) -> Result<f64> {
    let omega0 = mhz_to_angular(rabi_mhz);
    let disc = 4.0 * omega0 * omega0 - gamma * gamma;
    if !(disc > 0.0) || !disc.is_finite() {
        return Err(Error::HalfPiUndefined {
            two_omega: 2.0 * omega0,
            gamma,
        });
    }
    Ok(PI / disc.sqrt())
}

/// A single rectangular pulse from the polarised state.
pub fn run_pulsed_odmr(p: &OdmrParams, relax: &Relaxation, hf: &HyperfineModel) -> Result<ProtocolResult> {
    p.validate()?;
    check_environment(relax, hf)?;
    let drive = p.tones.drive(mhz_to_angular(p.rabi_mhz), hf);
    let delta0 = mhz_to_angular(p.detuning_mhz);
    let avg: LineResponse = try_hyperfine_average(
        |delta| {
            propagate_with_sensitivity(
                &SensitivityState::ground(),
                &drive,
                relax,
                delta,
                p.pulse_duration_us,
                p.step_us,
            )
            .map(LineResponse::from)
        },
        delta0,
        hf,
    )?;
    Ok(ProtocolResult {
        signal: avg.signal,
        slope: per_angular_to_per_mhz(avg.d_delta),
        manipulation_time: p.pulse_duration_us,
    })
}

/// π/2 – τ – π/2 with the second pulse phase-shifted.
///
/// Each π/2 pulse lasts `t_{π/2}·overrotation`. The sideband phases of the
/// second pulse advance by `ω(τ + t_{π/2})` with the nominal `t_{π/2}` so the
/// sideband tones stay phase-continuous with the first pulse.
pub fn run_ramsey(p: &RamseyParams, relax: &Relaxation, hf: &HyperfineModel) -> Result<ProtocolResult> {
    p.validate()?;
    check_environment(relax, hf)?;
    let t_half = half_pi_duration(p.rabi_mhz, relax.dephasing)?;
    let pulse = t_half * p.overrotation;
    let base = p.tones.drive(mhz_to_angular(p.rabi_mhz), hf);
    let first = base.with_sideband_phases(p.xi1, p.xi2);
    let advance = base.sideband_offset * (p.tau_us + t_half);
    let second = base
        .with_phase(p.second_phase)
        .with_sideband_phases(p.xi1 + advance, p.xi2 + advance);
    let delta0 = mhz_to_angular(p.detuning_mhz);

    let avg: LineResponse = try_hyperfine_average(
        |delta| {
            let s = SensitivityState::ground();
            let s = propagate_with_sensitivity(&s, &first, relax, delta, pulse, p.step_us)?;
            let s = free_evolve_with_sensitivity(&s, relax, delta, p.tau_us)?;
            let s = propagate_with_sensitivity(&s, &second, relax, delta, pulse, p.step_us)?;
            Ok::<_, Error>(LineResponse::from(s))
        },
        delta0,
        hf,
    )?;
    Ok(ProtocolResult {
        signal: avg.signal,
        slope: per_angular_to_per_mhz(avg.d_delta),
        manipulation_time: 2.0 * pulse + p.tau_us,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub detuning_mhz: f64,
    pub signal: f64,
    pub slope: f64,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    ensure(!grid.is_empty(), || format!("{name} grid is empty"))?;
    ensure(grid.iter().all(|x| x.is_finite()), || format!("{name} grid has non-finite values"))?;
    ensure(grid.windows(2).all(|w| w[1] > w[0]), || {
        format!("{name} grid must be strictly increasing")
    })
}

/// Pulsed-ODMR signal and slope over a detuning grid (MHz).
///
/// `base.detuning_mhz` is ignored. Points are computed in parallel and
/// returned in grid order.
pub fn odmr_spectrum(
    base: &OdmrParams,
    relax: &Relaxation,
    hf: &HyperfineModel,
    detunings_mhz: &[f64],
) -> Result<Vec<SpectrumPoint>> {
    check_grid("detuning", detunings_mhz)?;
    detunings_mhz
        .par_iter()
        .map(|&d| {
            let p = OdmrParams {
                detuning_mhz: d,
                ..*base
            };
            run_pulsed_odmr(&p, relax, hf).map(|r| SpectrumPoint {
                detuning_mhz: d,
                signal: r.signal,
                slope: r.slope,
            })
        })
        .collect()
}

/// Ramsey signal and slope on a τ × detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyMap {
    pub taus_us: Vec<f64>,
    pub detunings_mhz: Vec<f64>,
    /// `signal[i][j]` at `taus_us[i]`, `detunings_mhz[j]`.
    pub signal: Vec<Vec<f64>>,
    pub slope: Vec<Vec<f64>>,
}

/// Default τ step: 20 ns.
pub const RAMSEY_TAU_STEP_US: f64 = 0.02;
/// Default detuning step: 10 kHz.
pub const RAMSEY_DETUNING_STEP_MHZ: f64 = 0.01;
/// Default detuning window for triple-tone maps, MHz.
pub const TRIPLE_TONE_DETUNING_RANGE_MHZ: (f64, f64) = (-1.1, 3.9);

/// [`run_ramsey`] at every `(τ, δ₀)`; `base.tau_us` and
/// `base.detuning_mhz` are ignored.
pub fn ramsey_map(
    base: &RamseyParams,
    relax: &Relaxation,
    hf: &HyperfineModel,
    taus_us: &[f64],
    detunings_mhz: &[f64],
) -> Result<RamseyMap> {
    check_grid("tau", taus_us)?;
    check_grid("detuning", detunings_mhz)?;
    let cols = detunings_mhz.len();
    let flat: Vec<ProtocolResult> = (0..taus_us.len() * cols)
        .into_par_iter()
        .map(|k| {
            let p = RamseyParams {
                tau_us: taus_us[k / cols],
                detuning_mhz: detunings_mhz[k % cols],
                ..*base
            };
            run_ramsey(&p, relax, hf)
        })
        .collect::<Result<_>>()?;
    let rows = |f: fn(&ProtocolResult) -> f64| -> Vec<Vec<f64>> {
        flat.chunks(cols).map(|row| row.iter().map(f).collect()).collect()
    };
    Ok(RamseyMap {
        taus_us: taus_us.to_vec(),
        detunings_mhz: detunings_mhz.to_vec(),
        signal: rows(|r| r.signal),
        slope: rows(|r| r.slope),
    })
}

/// `τₙ = n/A_hf` in µs: free evolution times at which the three hyperfine
/// fringes rephase.
pub fn revival_time(n: u32, hf: &HyperfineModel) -> Result<f64> {
    ensure(n >= 1, || "revival index must be ≥ 1".into())?;
    Ok(n as f64 / hf.splitting_mhz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_pi_durations() {
        assert!((half_pi_duration(1.0, 0.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((half_pi_duration(0.5, 0.0).unwrap() - 0.5).abs() < 1e-12);
        let omega = mhz_to_angular(1.0);
        let near = half_pi_duration(1.0, 2.0 * omega * (1.0 - 1e-9)).unwrap();
        assert!(near > 1e3);
        assert!(matches!(
            half_pi_duration(1.0, 2.0 * omega),
            Err(Error::HalfPiUndefined { .. })
        ));
    }

    #[test]
    fn revival_times() {
        let hf = HyperfineModel::default();
        assert!((revival_time(1, &hf).unwrap() - 0.462963).abs() < 1e-6);
        assert!((revival_time(2, &hf).unwrap() - 0.925926).abs() < 1e-6);
        let unit = HyperfineModel::default().with_splitting(1.0);
        assert!((revival_time(1, &unit).unwrap() - 1.0).abs() < 1e-15);
        assert!(revival_time(0, &hf).is_err());
    }

    #[test]
    fn zero_length_odmr_pulse_is_dark() {
        let p = OdmrParams::new(1.0, 0.0, 0.3, Tones::Triple);
        let r = run_pulsed_odmr(&p, &Relaxation::default(), &HyperfineModel::default()).unwrap();
        assert_eq!(r.signal, 0.0);
        assert_eq!(r.slope, 0.0);
    }

    #[test]
    fn odmr_on_side_line_flips_at_least_a_third() {
        let p = OdmrParams::new(1.0, 0.5, 2.16, Tones::Single);
        let r = run_pulsed_odmr(&p, &Relaxation::default(), &HyperfineModel::default()).unwrap();
        assert!(r.signal >= 1.0 / 3.0);
        assert_eq!(r.manipulation_time, 0.5);
    }

    #[test]
    fn ramsey_without_free_evolution_ends_on_equator() {
        let p = RamseyParams::new(20.0, 0.0, 0.0, Tones::Single);
        let r = run_ramsey(&p, &Relaxation::default(), &HyperfineModel::single_line()).unwrap();
        assert!((r.signal - 0.5).abs() < 1e-6);
    }

    #[test]
    fn ramsey_manipulation_time_is_sum_of_segments() {
        let p = RamseyParams::new(2.0, 0.37, 0.0, Tones::Triple).with_overrotation(1.4);
        let r = run_ramsey(&p, &Relaxation::dephasing(0.5), &HyperfineModel::default()).unwrap();
        let t = half_pi_duration(2.0, 0.5).unwrap();
        assert_eq!(r.manipulation_time, 2.0 * t * 1.4 + 0.37);
    }

    #[test]
    fn ramsey_rejects_overdamped_pulses() {
        let p = RamseyParams::new(0.05, 1.0, 0.0, Tones::Single);
        let err = run_ramsey(&p, &Relaxation::dephasing(1.0), &HyperfineModel::default()).unwrap_err();
        assert!(matches!(err, Error::HalfPiUndefined { .. }));
    }

    #[test]
    fn grids_must_be_increasing() {
        let p = OdmrParams::new(1.0, 0.5, 0.0, Tones::Single);
        let r = Relaxation::default();
        let hf = HyperfineModel::default();
        assert!(odmr_spectrum(&p, &r, &hf, &[]).is_err());
        assert!(odmr_spectrum(&p, &r, &hf, &[0.0, 0.0]).is_err());
        assert_eq!(odmr_spectrum(&p, &r, &hf, &[0.1]).unwrap().len(), 1);
    }
}
