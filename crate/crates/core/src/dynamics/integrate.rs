//! Fixed-step classic RK4 for the (optionally augmented) Lindblad system.
//!
//! Time-dependent drives are integrated step by step with the generator
//! evaluated at `t`, `t + h/2` and `t + h`. For a single-tone drive the
//! generator is constant, the RK4 update is a fixed matrix `S`, and `n`
//! steps are applied as `Sⁿ` by repeated squaring. A triple-tone drive is
//! periodic in `2π/ω`; its step is shortened to divide the period exactly,
//! and long segments apply the one-period map by repeated squaring. In both
//! cases the fast route and the plain step-by-step route compute the same
//! discrete map.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use super::drive::{Coefficient, DriveField, Relaxation};
use super::state::{SensitivityState, SpinState};
use crate::error::{ensure, Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);
const HALF_I: C64 = C64::new(0.0, 0.5);

type Matrix<const N: usize> = [[C64; N]; N];

/// Generator entries in compact form: `a = i/2·Ω₀C₁₂`, `b = i/2·Ω₀C₂₁`,
/// diagonal coherence terms `d₁ = −γ−iδ`, `d₂ = −γ+iδ`, and `Γ`.
///
/// Rows 0 and 3 of the generator are negatives of each other, and rows 1
/// and 2 only see `ρ₁₁ − ρ₂₂`, so a product needs six complex multiplies.
#[derive(Clone, Copy)]
struct Field {
    a: C64,
    b: C64,
    d1: C64,
    d2: C64,
    big_gamma: f64,
}

impl Field {
    fn new(c12: C64, omega0: f64, relax: &Relaxation, delta: f64) -> Self {
        Field {
            a: HALF_I * c12 * omega0,
            b: HALF_I * c12.conj() * omega0,
            d1: C64::new(-relax.dephasing, -delta),
            d2: C64::new(-relax.dephasing, delta),
            big_gamma: relax.spin_lattice,
        }
    }

    #[inline]
    fn mul(&self, v: &[C64; 4]) -> [C64; 4] {
        let pd = v[0] - v[3];
        let x = self.b * v[2] - self.a * v[1] + v[3] * self.big_gamma;
        [x, self.d1 * v[1] - self.b * pd, self.d2 * v[2] + self.a * pd, -x]
    }
}

/// Right-hand side `y ↦ A·y` of a linear system of dimension `N`.
trait LinearField<const N: usize> {
    fn from_field(f: Field) -> Self;
    fn apply(&self, y: &[C64; N]) -> [C64; N];
}

struct Plain(Field);

impl LinearField<4> for Plain {
    fn from_field(f: Field) -> Self {
        Plain(f)
    }

    #[inline]
    fn apply(&self, y: &[C64; 4]) -> [C64; 4] {
        self.0.mul(y)
    }
}

/// State plus detuning derivative: `[M 0; ∂M/∂δ M]` with
/// `∂M/∂δ = diag(0, −i, +i, 0)`.
struct WithSensitivity(Field);

impl LinearField<8> for WithSensitivity {
    fn from_field(f: Field) -> Self {
        WithSensitivity(f)
    }

    #[inline]
    fn apply(&self, y: &[C64; 8]) -> [C64; 8] {
        let s = [y[0], y[1], y[2], y[3]];
        let d = [y[4], y[5], y[6], y[7]];
        let ms = self.0.mul(&s);
        let md = self.0.mul(&d);
        [
            ms[0],
            ms[1],
            ms[2],
            ms[3],
            md[0],
            md[1] - I * s[1],
            md[2] + I * s[2],
            md[3],
        ]
    }
}

#[inline]
fn axpy<const N: usize>(y: &[C64; N], h: f64, k: &[C64; N]) -> [C64; N] {
    let mut out = *y;
    for (o, ki) in out.iter_mut().zip(k) {
        *o += ki * h;
    }
    out
}

#[inline]
fn rk4_step<const N: usize, F: LinearField<N>>(
    y: &[C64; N],
    h: f64,
    start: &F,
    mid: &F,
    end: &F,
) -> [C64; N] {
    let k1 = start.apply(y);
    let k2 = mid.apply(&axpy(y, 0.5 * h, &k1));
    let k3 = mid.apply(&axpy(y, 0.5 * h, &k2));
    let k4 = end.apply(&axpy(y, h, &k3));
    let mut out = *y;
    let w = h / 6.0;
    for i in 0..N {
        out[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn mat_vec<const N: usize>(m: &Matrix<N>, v: &[C64; N]) -> [C64; N] {
    let mut out = [ZERO; N];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

fn mat_mul<const N: usize>(a: &Matrix<N>, b: &Matrix<N>) -> Matrix<N> {
    let mut out = [[ZERO; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == ZERO {
                continue;
            }
            for j in 0..N {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// The RK4 update matrix of a constant field, built column by column.
fn step_matrix<const N: usize, F: LinearField<N>>(field: &F, h: f64) -> Matrix<N> {
    let mut s = [[ZERO; N]; N];
    for j in 0..N {
        let mut e = [ZERO; N];
        e[j] = C64::new(1.0, 0.0);
        let col = rk4_step(&e, h, field, field, field);
        for i in 0..N {
            s[i][j] = col[i];
        }
    }
    s
}

/// `Sⁿ·y` by binary exponentiation.
fn power_apply<const N: usize>(mut s: Matrix<N>, mut n: u64, mut y: [C64; N]) -> [C64; N] {
    while n > 0 {
        if n & 1 == 1 {
            y = mat_vec(&s, &y);
        }
        n >>= 1;
        if n > 0 {
            s = mat_mul(&s, &s);
        }
    }
    y
}

/// Number of steps and the length of the last one.
///
/// All steps but the last have length `step`; the last is shortened so the
/// integration lands exactly on `duration`.
fn step_plan(duration: f64, step: f64) -> (u64, f64) {
    let n = (duration / step - 1e-9).ceil().max(0.0) as u64;
    if n == 0 {
        return (0, 0.0);
    }
    (n, duration - (n - 1) as f64 * step)
}

fn check_inputs(drive: &DriveField, relax: &Relaxation, delta: f64, duration: f64, step: f64) -> Result<()> {
    drive.validate()?;
    relax.validate()?;
    ensure(delta.is_finite(), || format!("detuning must be finite, got {delta}"))?;
    ensure(duration.is_finite() && duration >= 0.0, || {
        format!("duration must be finite and ≥ 0, got {duration}")
    })?;
    ensure(step.is_finite() && step > 0.0, || format!("step must be > 0, got {step}"))
}

/// Steps `k0..n` of a plan with uniform step `h` and final step `last`,
/// sampling the field at absolute times `k·h`.
fn march<const N: usize, F: LinearField<N>>(
    mut y: [C64; N],
    field_at: &impl Fn(f64) -> F,
    range: (u64, u64),
    h: f64,
    last: f64,
    duration: f64,
) -> [C64; N] {
    let (k0, n) = range;
    if k0 >= n {
        return y;
    }
    let mut start = field_at(k0 as f64 * h);
    for k in k0..n {
        let t = k as f64 * h;
        let (dt, t_end) = if k + 1 == n { (last, duration) } else { (h, (k + 1) as f64 * h) };
        let mid = field_at(t + 0.5 * dt);
        let end = field_at(t_end);
        y = rk4_step(&y, dt, &start, &mid, &end);
        start = end;
    }
    y
}

/// The RK4 map over one drive period of `m` steps of length `h`, with
/// every basis vector advanced through the same field samples.
fn period_matrix<const N: usize, F: LinearField<N>>(field_at: &impl Fn(f64) -> F, m: u64, h: f64) -> Matrix<N> {
    let mut cols = [[ZERO; N]; N];
    for (j, col) in cols.iter_mut().enumerate() {
        col[j] = C64::new(1.0, 0.0);
    }
    let mut start = field_at(0.0);
    for k in 0..m {
        let t = k as f64 * h;
        let mid = field_at(t + 0.5 * h);
        let end = field_at((k + 1) as f64 * h);
        for col in cols.iter_mut() {
            *col = rk4_step(col, h, &start, &mid, &end);
        }
        start = end;
    }
    let mut out = [[ZERO; N]; N];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..N {
            out[i][j] = col[i];
        }
    }
    out
}

/// Step length for a periodic drive: the largest `period/m` not above
/// `step`, so whole periods contain a whole number of steps.
fn commensurate_step(period: f64, step: f64) -> (u64, f64) {
    let m = (period / step - 1e-9).ceil().max(1.0) as u64;
    (m, period / m as f64)
}

fn integrate<const N: usize, F: LinearField<N>>(
    y0: [C64; N],
    drive: &DriveField,
    relax: &Relaxation,
    delta: f64,
    duration: f64,
    step: f64,
    stepwise: bool,
) -> Result<[C64; N]> {
    check_inputs(drive, relax, delta, duration, step)?;
    let coefficient = Coefficient::new(drive);
    let field_at = |t: f64| F::from_field(Field::new(coefficient.at(t), drive.omega0, relax, delta));

    let y = if drive.is_single_tone() {
        let (n, last) = step_plan(duration, step);
        if n == 0 {
            return Ok(y0);
        }
        if stepwise {
            march(y0, &field_at, (0, n), step, last, duration)
        } else {
            let field = field_at(0.0);
            let y = power_apply(step_matrix(&field, step), n - 1, y0);
            rk4_step(&y, last, &field, &field, &field)
        }
    } else {
        // C₁₂ repeats every 2π/ω, so the map over a whole period is the
        // same matrix each time; it pays off once there are more periods
        // than basis vectors.
        let period = TAU / drive.sideband_offset;
        let (m, h) = commensurate_step(period, step);
        let (n, last) = step_plan(duration, h);
        if n == 0 {
            return Ok(y0);
        }
        let periods = if stepwise { 0 } else { (n - 1) / m };
        if periods > N as u64 {
            let y = power_apply(period_matrix(&field_at, m, h), periods, y0);
            march(y, &field_at, (periods * m, n), h, last, duration)
        } else {
            march(y0, &field_at, (0, n), h, last, duration)
        }
    };

    if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(y)
    } else {
        Err(Error::IntegrationDiverged { time: duration })
    }
}

/// Advances `state` through one drive segment of length `duration` (µs).
///
/// `delta` is the detuning of the carrier from the line in rad/µs. The drive
/// phase reference `t = 0` is the start of the segment.
pub fn propagate(
    state: &SpinState,
    drive: &DriveField,
    relax: &Relaxation,
    delta: f64,
    duration: f64,
    step: f64,
) -> Result<SpinState> {
    integrate::<4, Plain>(*state.components(), drive, relax, delta, duration, step, false)
        .map(SpinState::from_components)
}

/// [`propagate`] forced through the step-by-step time-dependent route.
pub fn propagate_stepwise(
    state: &SpinState,
    drive: &DriveField,
    relax: &Relaxation,
    delta: f64,
    duration: f64,
    step: f64,
) -> Result<SpinState> {
    integrate::<4, Plain>(*state.components(), drive, relax, delta, duration, step, true)
        .map(SpinState::from_components)
}

/// Advances a state and its detuning derivative together.
pub fn propagate_with_sensitivity(
    s: &SensitivityState,
    drive: &DriveField,
    relax: &Relaxation,
    delta: f64,
    duration: f64,
    step: f64,
) -> Result<SensitivityState> {
    integrate::<8, WithSensitivity>(s.to_vector(), drive, relax, delta, duration, step, false)
        .map(SensitivityState::from_vector)
}

/// [`propagate_with_sensitivity`] forced through the step-by-step route.
pub fn propagate_with_sensitivity_stepwise(
    s: &SensitivityState,
    drive: &DriveField,
    relax: &Relaxation,
    delta: f64,
    duration: f64,
    step: f64,
) -> Result<SensitivityState> {
    integrate::<8, WithSensitivity>(s.to_vector(), drive, relax, delta, duration, step, true)
        .map(SensitivityState::from_vector)
}

fn free_factors(relax: &Relaxation, delta: f64, tau: f64) -> Result<(C64, f64)> {
    relax.validate()?;
    ensure(delta.is_finite(), || format!("detuning must be finite, got {delta}"))?;
    ensure(tau.is_finite() && tau >= 0.0, || format!("free evolution time must be ≥ 0, got {tau}"))?;
    let coherence = (C64::new(-relax.dephasing, -delta) * tau).exp();
    let population = (-relax.spin_lattice * tau).exp();
    Ok((coherence, population))
}

/// Exact evolution with the drive off.
///
/// `ρ₁₂ ↦ ρ₁₂·e^{(−γ−iδ)τ}`, `ρ₂₂ ↦ ρ₂₂·e^{−Γτ}`, and the decayed
/// population returns to `ρ₁₁`.
pub fn free_evolve(state: &SpinState, relax: &Relaxation, delta: f64, tau: f64) -> Result<SpinState> {
    let (c, p) = free_factors(relax, delta, tau)?;
    let [r11, r12, r21, r22] = *state.components();
    Ok(SpinState::from_components([
        r11 + r22 * (1.0 - p),
        r12 * c,
        r21 * c.conj(),
        r22 * p,
    ]))
}

/// [`free_evolve`] with the analytic detuning derivative.
pub fn free_evolve_with_sensitivity(
    s: &SensitivityState,
    relax: &Relaxation,
    delta: f64,
    tau: f64,
) -> Result<SensitivityState> {
    let (c, p) = free_factors(relax, delta, tau)?;
    let [r11, r12, r21, r22] = *s.state.components();
    let [d11, d12, d21, d22] = s.d_delta;
    let it = I * tau;
    Ok(SensitivityState {
        state: SpinState::from_components([r11 + r22 * (1.0 - p), r12 * c, r21 * c.conj(), r22 * p]),
        d_delta: [
            d11 + d22 * (1.0 - p),
            (d12 - it * r12) * c,
            (d21 + it * r21) * c.conj(),
            d22 * p,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HyperfineModel;
    use std::f64::consts::{PI, TAU};

    const STEP: f64 = 1e-3;

    #[test]
    fn periodic_route_matches_stepwise() {
        let hf = HyperfineModel::default();
        let drive = DriveField::triple_tone(TAU * 0.3, &hf).with_sideband_phases(0.2, 1.1);
        let relax = Relaxation::new(0.1, 0.01);
        let s = SensitivityState::ground();
        for duration in [0.3, 4.0, 7.77] {
            let fast = propagate_with_sensitivity(&s, &drive, &relax, 1.9, duration, STEP).unwrap();
            let slow = propagate_with_sensitivity_stepwise(&s, &drive, &relax, 1.9, duration, STEP).unwrap();
            let (a, b) = (fast.to_vector(), slow.to_vector());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-11, "{duration}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn commensurate_step_divides_period() {
        let period = TAU / (TAU * 2.16);
        let (m, h) = commensurate_step(period, STEP);
        assert_eq!(m, 463);
        assert!(h <= STEP && (h * m as f64 - period).abs() < 1e-15);
        assert_eq!(commensurate_step(1.0, 5.0), (1, 1.0));
    }

    #[test]
    fn compact_field_matches_dense_generator() {
        use crate::dynamics::generator::{apply, generator};
        let drive = DriveField::triple_tone(3.1, &HyperfineModel::default()).with_sideband_phases(0.4, -1.3);
        let relax = Relaxation::new(0.7, 0.2);
        let v = [C64::new(0.6, 0.1), C64::new(0.2, -0.3), C64::new(0.2, 0.3), C64::new(0.4, -0.2)];
        for t in [0.0, 0.123, 1.7] {
            let dense = apply(&generator(t, &drive, &relax, 2.5), &v);
            let field = Field::new(Coefficient::new(&drive).at(t), drive.omega0, &relax, 2.5);
            for (a, b) in dense.iter().zip(field.mul(&v)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn plan_lands_on_duration() {
        assert_eq!(step_plan(0.0, STEP), (0, 0.0));
        let (n, last) = step_plan(0.5, STEP);
        assert_eq!(n, 500);
        assert!((last - STEP).abs() < 1e-12);
        let (n, last) = step_plan(0.0105, STEP);
        assert_eq!(n, 11);
        assert!((last - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn resonant_pi_pulse_flips() {
        let drive = DriveField::single_tone(TAU);
        let s = propagate(&SpinState::ground(), &drive, &Relaxation::default(), 0.0, 0.5, STEP).unwrap();
        assert!((s.rho22() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn resonant_half_pi_pulse_reaches_equator() {
        let drive = DriveField::single_tone(TAU);
        let s = propagate(&SpinState::ground(), &drive, &Relaxation::default(), 0.0, 0.25, STEP).unwrap();
        assert!((s.rho11() - 0.5).abs() < 1e-8);
        assert!((s.rho22() - 0.5).abs() < 1e-8);
        assert!((s.rho12().norm() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn undriven_coherence_decays() {
        let relax = Relaxation::dephasing(0.8);
        let start = SpinState::new(0.5, C64::new(0.3, -0.4), 0.5);
        let s = propagate(&start, &DriveField::single_tone(0.0), &relax, 0.0, 1.3, STEP).unwrap();
        assert!((s.rho22() - 0.5).abs() < 1e-12);
        assert!((s.rho12().norm() - 0.5 * (-0.8f64 * 1.3).exp()).abs() < 1e-9);
    }

    #[test]
    fn free_evolution_identity_and_phase() {
        let relax = Relaxation::default();
        let start = SpinState::new(0.5, C64::new(0.5, 0.0), 0.5);
        assert_eq!(free_evolve(&start, &Relaxation::new(0.3, 0.1), 1.0, 0.0).unwrap(), start);
        let s = free_evolve(&start, &relax, TAU, 0.5).unwrap();
        assert!((s.rho12() - C64::new(-0.5, 0.0)).norm() < 1e-12);
        assert!(free_evolve(&start, &relax, 0.0, -1.0).is_err());
    }

    #[test]
    fn free_evolution_matches_undriven_propagation() {
        let relax = Relaxation::new(0.6, 0.05);
        let start = SpinState::new(0.3, C64::new(0.2, 0.35), 0.7);
        let exact = free_evolve(&start, &relax, 4.0, 0.9).unwrap();
        let rk = propagate_stepwise(&start, &DriveField::single_tone(0.0), &relax, 4.0, 0.9, STEP).unwrap();
        for (a, b) in exact.components().iter().zip(rk.components()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn undriven_derivative_stays_zero_without_coherence() {
        let s = propagate_with_sensitivity(
            &SensitivityState::ground(),
            &DriveField::single_tone(0.0),
            &Relaxation::dephasing(0.5),
            1.0,
            2.0,
            STEP,
        )
        .unwrap();
        assert!(s.d_delta.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn power_route_equals_stepwise_route() {
        let relax = Relaxation::new(0.9, 0.01);
        let drive = DriveField::single_tone(TAU * 1.7).with_phase(0.3);
        let fast = propagate_with_sensitivity(&SensitivityState::ground(), &drive, &relax, 2.1, 3.2345, STEP).unwrap();
        let slow =
            propagate_with_sensitivity_stepwise(&SensitivityState::ground(), &drive, &relax, 2.1, 3.2345, STEP).unwrap();
        for (a, b) in fast.to_vector().iter().zip(slow.to_vector().iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn triple_tone_preserves_trace_and_hermiticity() {
        let hf = HyperfineModel::default();
        let drive = DriveField::triple_tone(TAU * 2.5, &hf).with_sideband_phases(0.4, 1.9);
        let s = propagate_with_sensitivity(
            &SensitivityState::ground(),
            &drive,
            &Relaxation::dephasing(0.3),
            1.4,
            1.7,
            STEP,
        )
        .unwrap();
        assert!((s.state.trace() - 1.0).abs() < 1e-9);
        assert!(s.state.hermiticity_defect() < 1e-9);
        assert!(s.d_trace().abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let d = DriveField::single_tone(1.0);
        let r = Relaxation::default();
        let g = SpinState::ground();
        assert!(propagate(&g, &d, &r, 0.0, -1.0, STEP).is_err());
        assert!(propagate(&g, &d, &r, 0.0, 1.0, 0.0).is_err());
        assert!(propagate(&g, &d, &Relaxation::dephasing(-1.0), 0.0, 1.0, STEP).is_err());
    }

    #[test]
    fn non_finite_state_reports_divergence() {
        let bad = SpinState::from_components([C64::new(f64::NAN, 0.0), ZERO, ZERO, ZERO]);
        let err = propagate(&bad, &DriveField::single_tone(PI), &Relaxation::default(), 0.0, 0.1, STEP).unwrap_err();
        assert!(matches!(err, Error::IntegrationDiverged { .. }));
    }
}
