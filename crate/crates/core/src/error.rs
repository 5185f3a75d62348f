use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integration diverged at t = {time} µs")]
    IntegrationDiverged { time: f64 },

    #[error(
        "π/2 pulse duration undefined: 2Ω₀ = {two_omega:.6} rad/µs must exceed γ = {gamma:.6} µs⁻¹"
    )]
    HalfPiUndefined { two_omega: f64, gamma: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sensitivity undefined: slope is zero")]
    ZeroSlope,

    #[error("enhancement ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("fit did not converge after {0} iterations")]
    FitNotConverged(usize),

    #[error("degenerate Jacobian in least-squares fit")]
    DegenerateJacobian,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegrationDiverged { .. }
                | Error::HalfPiUndefined { .. }
                | Error::ZeroSlope
                | Error::UndefinedRatio(_)
                | Error::FitNotConverged(_)
                | Error::DegenerateJacobian
        )
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
