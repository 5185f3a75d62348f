use serde::{Deserialize, Serialize};
use tritone_core::units::linear_grid;

use crate::error::UsageError;

/// Inclusive axis `start, start+step, …, stop` in normalised units.
///
/// A single point is stored as `start == stop` with a unit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, UsageError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(UsageError(format!("grid step must be > 0, got {step}")));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(UsageError("grid bounds must be finite".into()));
        }
        if (stop - start) / step < 1.0 - 1e-9 {
            return Err(UsageError(format!(
                "grid {start}:{stop}:{step} must span at least one step"
            )));
        }
        Ok(Self { start, stop, step })
    }

    pub fn point(x: f64) -> Self {
        Self { start: x, stop: x, step: 1.0 }
    }

    /// `start:stop:step` or a single value, each parsed by `unit`.
    pub fn parse(s: &str, unit: impl Fn(&str) -> Result<f64, UsageError>) -> Result<Self, UsageError> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [x] => Ok(Self::point(unit(x)?)),
            [a, b, c] => Self::new(unit(a)?, unit(b)?, unit(c)?),
            _ => Err(UsageError(format!("grid '{s}' must be 'start:stop:step' or a single value"))),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.start == self.stop {
            vec![self.start]
        } else {
            linear_grid(self.start, self.stop, self.step)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{frequency_mhz, time_us};

    #[test]
    fn parses_ranges_with_units() {
        let g = GridSpec::parse("0:2us:20ns", time_us).unwrap();
        assert_eq!(g.points().len(), 101);
        let f = GridSpec::parse("-3MHz:3MHz:10kHz", frequency_mhz).unwrap();
        assert_eq!(f.points().len(), 601);
        assert_eq!(GridSpec::parse("0.5", time_us).unwrap().points(), vec![0.5]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::parse("0:1:0", time_us).is_err());
        assert!(GridSpec::parse("0:1:-0.1", time_us).is_err());
        assert!(GridSpec::parse("1:0:0.1", time_us).is_err());
        assert!(GridSpec::parse("0:0.05:0.1", time_us).is_err());
        assert!(GridSpec::parse("0:1", time_us).is_err());
    }
}
