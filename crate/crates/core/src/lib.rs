//! Effective two-level Lindblad model of an NV ensemble driven by single- or
//! triple-tone microwaves.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`] propagates the density matrix (and its derivative with
//!   respect to detuning) under a rectangular drive segment.
//! * [`protocols`] assembles pulsed-ODMR and Ramsey sequences and averages
//!   them over the three ¹⁴N hyperfine lines.
//! * [`metrics`] turns protocol outputs into slope and slope/√T figures of
//!   merit and full sensitivity estimates.
//! * [`optimize`] is a seeded differential-evolution optimiser plus the
//!   protocol-specific search drivers.
//! * [`fit`] fits multi-Lorentzian models to spectra and extracts their
//!   steepest slope.
//!
//! Frequencies are angular (rad/µs) inside [`dynamics`] and cyclic (MHz)
//! everywhere else; see [`units`].

pub mod dynamics;
pub mod error;
pub mod fit;
pub mod metrics;
pub mod optimize;
pub mod protocols;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
