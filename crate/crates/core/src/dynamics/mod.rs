//! Effective two-level Lindblad dynamics under single- and triple-tone drives.
//!
//! The density matrix is handled as the vector `(ρ₁₁, ρ₁₂, ρ₂₁, ρ₂₂)` and
//! evolves as `dρ/dt = M(t)·ρ`. Derivatives with respect to the detuning δ
//! are co-propagated through the variational equation
//! `d(∂ρ/∂δ)/dt = M(t)·∂ρ/∂δ + (∂M/∂δ)·ρ`.

mod drive;
mod generator;
mod integrate;
mod state;

pub use drive::{drive_coefficient, hyperfine_average, try_hyperfine_average, DriveField, HyperfineModel, Relaxation};
pub use generator::{generator, single_tone_generator, Mat4};
pub use integrate::{
    free_evolve, free_evolve_with_sensitivity, propagate, propagate_stepwise,
    propagate_with_sensitivity, propagate_with_sensitivity_stepwise,
};
pub use state::{SensitivityState, SpinState};
