use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Two-level density matrix stored as `(ρ₁₁, ρ₁₂, ρ₂₁, ρ₂₂)`.
///
/// Level 1 is `m_s = 0`, level 2 the driven `m_s = ±1` level. Populations
/// are kept complex during integration; their imaginary parts stay at
/// rounding level for Hermitian initial states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    components: [C64; 4],
}

impl SpinState {
    /// Optically initialised state, `ρ₁₁ = 1`.
    pub fn ground() -> Self {
        Self::new(1.0, C64::new(0.0, 0.0), 0.0)
    }

    /// Hermitian state with `ρ₂₁ = conj(ρ₁₂)`.
    pub fn new(rho11: f64, rho12: C64, rho22: f64) -> Self {
        Self {
            components: [rho11.into(), rho12, rho12.conj(), rho22.into()],
        }
    }

    pub fn from_components(components: [C64; 4]) -> Self {
        Self { components }
    }

    pub fn components(&self) -> &[C64; 4] {
        &self.components
    }

    pub fn rho11(&self) -> f64 {
        self.components[0].re
    }

    pub fn rho12(&self) -> C64 {
        self.components[1]
    }

    pub fn rho21(&self) -> C64 {
        self.components[2]
    }

    pub fn rho22(&self) -> f64 {
        self.components[3].re
    }

    pub fn trace(&self) -> f64 {
        (self.components[0] + self.components[3]).re
    }

    /// `|ρ₂₁ − conj(ρ₁₂)|`, zero for a Hermitian state.
    pub fn hermiticity_defect(&self) -> f64 {
        (self.components[2] - self.components[1].conj()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Default for SpinState {
    fn default() -> Self {
        Self::ground()
    }
}

/// A state together with its derivative with respect to detuning.
///
/// The derivative entries carry units of µs because δ is in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityState {
    pub state: SpinState,
    pub d_delta: [C64; 4],
}

impl SensitivityState {
    /// Wraps `state` with a zero derivative block, as at `t = 0`.
    pub fn new(state: SpinState) -> Self {
        Self {
            state,
            d_delta: [C64::new(0.0, 0.0); 4],
        }
    }

    pub fn ground() -> Self {
        Self::new(SpinState::ground())
    }

    /// `∂ρ₂₂/∂δ`, per rad/µs.
    pub fn d_rho22(&self) -> f64 {
        self.d_delta[3].re
    }

    /// `∂(ρ₁₁ + ρ₂₂)/∂δ`; zero up to rounding.
    pub fn d_trace(&self) -> f64 {
        (self.d_delta[0] + self.d_delta[3]).re
    }

    pub(crate) fn to_vector(self) -> [C64; 8] {
        let s = self.state.components;
        let d = self.d_delta;
        [s[0], s[1], s[2], s[3], d[0], d[1], d[2], d[3]]
    }

    pub(crate) fn from_vector(v: [C64; 8]) -> Self {
        Self {
            state: SpinState::from_components([v[0], v[1], v[2], v[3]]),
            d_delta: [v[4], v[5], v[6], v[7]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.state.is_finite() && self.d_delta.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
