//! Cyclic/angular frequency conversions and a few shared grids.
//!
//! User-facing quantities are cyclic MHz and µs. The equations of motion use
//! angular frequencies in rad/µs, so `Ω = 2π·f` with `f` in MHz.

use std::f64::consts::TAU;

/// ¹⁴N hyperfine splitting of each NV electron-spin transition.
pub const HYPERFINE_SPLITTING_MHZ: f64 = 2.16;

/// Default fixed RK4 step: 1 ns.
pub const DEFAULT_STEP_US: f64 = 1e-3;

#[inline]
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz
}

#[inline]
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// Converts ∂x/∂δ (δ in rad/µs) into ∂x/∂ν (ν in MHz).
#[inline]
pub fn per_angular_to_per_mhz(slope: f64) -> f64 {
    slope * TAU
}

#[inline]
pub fn per_mhz_to_per_angular(slope: f64) -> f64 {
    slope / TAU
}

/// Inclusive linear grid `start, start+step, …` up to `stop`.
///
/// The last point is kept when it lands within `1e-9·step` of `stop`.
/// Points are computed as `start + k·step` so no error accumulates.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return vec![];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g = linear_grid(0.0, 1.0, 0.02);
        assert_eq!(g.len(), 51);
        assert!((g[50] - 1.0).abs() < 1e-12);
        assert_eq!(linear_grid(0.3, 0.3, 0.1), vec![0.3]);
        assert!(linear_grid(1.0, 0.0, 0.1).is_empty());
    }

    #[test]
    fn slope_unit_round_trip() {
        for s in [1e-6, 0.37, -12.5, 3.0e4] {
            let back = per_angular_to_per_mhz(per_mhz_to_per_angular(s));
            assert!(((back - s) / s).abs() < 1e-12);
        }
    }
}
