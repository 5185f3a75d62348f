//! Global optimisation of the sensitivity metrics.

mod de;
mod drivers;

pub use de::{differential_evolution, Bound, DeConfig, OptResult, SearchSpace};
pub use drivers::{
    default_time_bound, dephasing_sweep, optimize_odmr, optimize_ramsey, row_seed, OdmrProblem, Protocol,
    RamseyProblem, RatioRow, SweepRow, SweepTable, DEFAULT_MAX_PULSE_AREA, MAX_RABI_MHZ,
};
