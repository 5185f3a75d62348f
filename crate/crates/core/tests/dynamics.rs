use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use tritone_core::dynamics::{
    free_evolve_with_sensitivity, propagate, propagate_stepwise, propagate_with_sensitivity, DriveField,
    HyperfineModel, Relaxation, SensitivityState, SpinState,
};
use tritone_core::units::DEFAULT_STEP_US;

fn rabi_oracle(omega: f64, delta: f64, t: f64) -> f64 {
    let w2 = omega * omega + delta * delta;
    omega * omega / w2 * (0.5 * w2.sqrt() * t).sin().powi(2)
}

fn worst_rabi_deviation(max_rabi_mhz: f64, max_detuning_mhz: f64, max_t: f64, step: f64) -> f64 {
    let relax = Relaxation::default();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let omega = TAU * (0.1 + (max_rabi_mhz - 0.1) * i as f64 / 9.0);
        let drive = DriveField::single_tone(omega);
        for j in 0..10 {
            let delta = TAU * max_detuning_mhz * (-1.0 + 2.0 * j as f64 / 9.0);
            for k in 1..=10 {
                let t = max_t * k as f64 / 10.0;
                let s = propagate(&SpinState::ground(), &drive, &relax, delta, t, step).unwrap();
                worst = worst.max((s.rho22() - rabi_oracle(omega, delta, t)).abs());
            }
        }
    }
    worst
}

#[test]
fn off_resonant_rabi_matches_closed_form() {
    let worst = worst_rabi_deviation(3.0, 3.0, 2.0, DEFAULT_STEP_US);
    assert!(worst <= 1e-7, "worst deviation {worst:e}");
}

#[test]
fn finer_step_holds_oracle_at_strong_drive() {
    let worst = worst_rabi_deviation(10.0, 6.0, 0.5, DEFAULT_STEP_US / 4.0);
    assert!(worst <= 1e-7, "worst deviation {worst:e}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let omega = TAU * 3.0;
    let drive = DriveField::single_tone(omega);
    let relax = Relaxation::default();
    let t = PI / omega;
    let run = |h: f64| {
        propagate_stepwise(&SpinState::ground(), &drive, &relax, 0.7, t, h)
            .unwrap()
            .rho22()
    };
    // Steps that divide the pulse exactly keep the step plan uniform.
    let n = 8.0;
    let (a, b, c) = (run(t / n), run(t / (2.0 * n)), run(t / (4.0 * n)));
    let order = ((a - b) / (b - c)).abs().log2();
    assert!(order >= 3.5, "observed order {order}");
}

fn finite_difference(
    drive: &DriveField,
    relax: &Relaxation,
    delta: f64,
    duration: f64,
) -> (f64, f64) {
    let h = 1e-4;
    let at = |d: f64| {
        propagate(&SpinState::ground(), drive, relax, d, duration, DEFAULT_STEP_US)
            .unwrap()
            .rho22()
    };
    let fd = (at(delta + h) - at(delta - h)) / (2.0 * h);
    let co = propagate_with_sensitivity(&SensitivityState::ground(), drive, relax, delta, duration, DEFAULT_STEP_US)
        .unwrap()
        .d_rho22();
    (co, fd)
}

#[test]
fn co_propagated_derivative_matches_finite_difference() {
    let hf = HyperfineModel::default();
    for (rabi, delta, t, gamma, eps) in [
        (0.5, 1.3, 0.9, 0.3, 0.0),
        (2.0, -4.0, 0.4, 1.0, 0.0),
        (0.4, 0.6, 1.5, 0.2, 1.0),
        (1.3, -2.1, 0.7, 2.0, 1.0),
    ] {
        let mut drive = DriveField::triple_tone(TAU * rabi, &hf);
        drive.epsilon = eps;
        let relax = Relaxation::new(gamma, 0.05);
        let (co, fd) = finite_difference(&drive, &relax, delta, t);
        assert!((co - fd).abs() <= 1e-5 * co.abs().max(1e-3), "co {co} fd {fd}");
    }
}

#[test]
fn free_evolution_derivative_matches_finite_difference() {
    let start = SpinState::new(0.6, tritone_core::C64::new(0.2, -0.3), 0.4);
    let relax = Relaxation::new(0.5, 0.1);
    let tau = 1.7;
    let at = |d: f64| {
        free_evolve_with_sensitivity(&SensitivityState::new(start), &relax, d, tau)
            .unwrap()
            .state
            .rho12()
    };
    let h = 1e-5;
    let fd = (at(1.1 + h) - at(1.1 - h)) / (2.0 * h);
    let co = free_evolve_with_sensitivity(&SensitivityState::new(start), &relax, 1.1, tau)
        .unwrap()
        .d_delta[1];
    assert!((co - fd).norm() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_and_hermiticity_preserved(
        rabi in 0.05f64..6.0,
        delta in -20.0f64..20.0,
        t in 0.0f64..1.5,
        gamma in 0.0f64..3.0,
        big_gamma in 0.0f64..0.5,
        triple in any::<bool>(),
        phase in 0.0f64..TAU,
    ) {
        let hf = HyperfineModel::default();
        let drive = if triple {
            DriveField::triple_tone(TAU * rabi, &hf)
        } else {
            DriveField::single_tone(TAU * rabi)
        }
        .with_phase(phase);
        let relax = Relaxation::new(gamma, big_gamma);
        let s = propagate(&SpinState::ground(), &drive, &relax, delta, t, DEFAULT_STEP_US).unwrap();
        prop_assert!((s.trace() - 1.0).abs() < 1e-9);
        prop_assert!(s.hermiticity_defect() < 1e-9);
        prop_assert!(s.rho22() > -1e-9 && s.rho22() < 1.0 + 1e-9);
    }

    #[test]
    fn single_tone_routes_agree(
        rabi in 0.05f64..6.0,
        delta in -20.0f64..20.0,
        t in 0.0f64..2.0,
        gamma in 0.0f64..3.0,
    ) {
        let drive = DriveField::single_tone(TAU * rabi);
        let relax = Relaxation::new(gamma, 0.0);
        let fast = propagate(&SpinState::ground(), &drive, &relax, delta, t, DEFAULT_STEP_US).unwrap();
        let slow = propagate_stepwise(&SpinState::ground(), &drive, &relax, delta, t, DEFAULT_STEP_US).unwrap();
        for (a, b) in fast.components().iter().zip(slow.components()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }
}
