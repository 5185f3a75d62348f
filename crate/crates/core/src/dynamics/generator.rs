use num_complex::Complex64 as C64;

use super::drive::{drive_coefficient, DriveField, Relaxation};

/// Dense 4×4 generator acting on `(ρ₁₁, ρ₁₂, ρ₂₁, ρ₂₂)`.
pub type Mat4 = [[C64; 4]; 4];

const ZERO: C64 = C64::new(0.0, 0.0);
const HALF_I: C64 = C64::new(0.0, 0.5);

/// Rotating-frame generator for a constant complex Rabi frequency `omega`.
///
/// ```text
///  ⎡    0        −i/2·Ω      i/2·Ω*       Γ    ⎤
///  ⎢ −i/2·Ω*    −γ − iδ        0       i/2·Ω*  ⎥
///  ⎢  i/2·Ω        0        −γ + iδ    −i/2·Ω  ⎥
///  ⎣    0         i/2·Ω     −i/2·Ω*      −Γ    ⎦
/// ```
pub fn single_tone_generator(omega: C64, relax: &Relaxation, delta: f64) -> Mat4 {
    let gamma = relax.dephasing;
    let big_gamma = relax.spin_lattice;
    let a = HALF_I * omega;
    let b = HALF_I * omega.conj();
    [
        [ZERO, -a, b, C64::new(big_gamma, 0.0)],
        [-b, C64::new(-gamma, -delta), ZERO, b],
        [a, ZERO, C64::new(-gamma, delta), -a],
        [ZERO, a, -b, C64::new(-big_gamma, 0.0)],
    ]
}

/// Generator `M(t)` for an arbitrary (single- or triple-tone) drive.
///
/// Same layout as [`single_tone_generator`] with `Ω` replaced by
/// `Ω₀·C₁₂(t)` and `Ω*` by `Ω₀·C₂₁(t)`.
pub fn generator(t: f64, drive: &DriveField, relax: &Relaxation, delta: f64) -> Mat4 {
    let c12 = drive_coefficient(t, drive);
    let c21 = c12.conj();
    let gamma = relax.dephasing;
    let big_gamma = relax.spin_lattice;
    let a = HALF_I * c12 * drive.omega0;
    let b = HALF_I * c21 * drive.omega0;
    [
        [ZERO, -a, b, C64::new(big_gamma, 0.0)],
        [-b, C64::new(-gamma, -delta), ZERO, b],
        [a, ZERO, C64::new(-gamma, delta), -a],
        [ZERO, a, -b, C64::new(-big_gamma, 0.0)],
    ]
}

#[cfg(test)]
pub(crate) fn apply(m: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HyperfineModel;

    #[test]
    fn undriven_lossless_resonant_is_zero() {
        let m = generator(0.7, &DriveField::single_tone(0.0), &Relaxation::default(), 0.0);
        assert!(m.iter().flatten().all(|z| *z == ZERO));
    }

    #[test]
    fn single_tone_matches_constant_form() {
        let relax = Relaxation::new(0.7, 0.01);
        let drive = DriveField::single_tone(3.1).with_phase(0.4);
        let omega = C64::from_polar(3.1, 0.4);
        for t in [0.0, 0.25, 3.3] {
            let m = generator(t, &drive, &relax, -1.2);
            let e = single_tone_generator(omega, &relax, -1.2);
            for (r, s) in m.iter().zip(&e) {
                for (x, y) in r.iter().zip(s) {
                    assert!((x - y).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn columns_preserve_trace_and_diagonal_holds_dephasing() {
        let hf = HyperfineModel::default();
        let relax = Relaxation::new(0.4, 0.02);
        let drive = DriveField::triple_tone(5.0, &hf).with_sideband_phases(0.3, -1.1);
        let m = generator(0.123, &drive, &relax, 2.5);
        for col in 0..4 {
            assert!((m[0][col] + m[3][col]).norm() < 1e-15);
        }
        assert_eq!(m[1][1], C64::new(-0.4, -2.5));
        assert_eq!(m[2][2], C64::new(-0.4, 2.5));
    }
}
