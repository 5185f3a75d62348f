//! Sensitivity figures of merit.
//!
//! With identical readout noise across protocols, the slope `dC/dν` tracks
//! sensitivity when overhead dominates the sequence and `slope/√T` when the
//! manipulation time `T` does.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::protocols::ProtocolResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Slope,
    SlopePerSqrtT,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Slope => "slope",
            MetricKind::SlopePerSqrtT => "slope-sqrt-t",
        }
    }

    /// The figure of merit for a protocol outcome; `|slope|` or `|slope|/√T`.
    pub fn evaluate(self, r: &ProtocolResult) -> f64 {
        match self {
            MetricKind::Slope => r.slope.abs(),
            MetricKind::SlopePerSqrtT => slope_per_sqrt_t(r.slope, r.manipulation_time),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "slope" => Ok(MetricKind::Slope),
            "slope-sqrt-t" | "slope_per_sqrt_t" => Ok(MetricKind::SlopePerSqrtT),
            other => Err(format!("unknown metric '{other}' (expected slope or slope-sqrt-t)")),
        }
    }
}

fn slope_per_sqrt_t(slope: f64, t: f64) -> f64 {
    if slope == 0.0 {
        0.0
    } else {
        slope.abs() / t.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Signed slope, per MHz.
    pub slope: f64,
    /// µs.
    pub manipulation_time: f64,
    /// `|slope|/√T`, per (MHz·√µs).
    pub slope_per_sqrt_t: f64,
    pub kind: MetricKind,
}

impl MetricReport {
    pub fn new(r: &ProtocolResult, kind: MetricKind) -> Self {
        Self {
            slope: r.slope,
            manipulation_time: r.manipulation_time,
            slope_per_sqrt_t: slope_per_sqrt_t(r.slope, r.manipulation_time),
            kind,
        }
    }

    /// The selected figure of merit (always nonnegative).
    pub fn value(&self) -> f64 {
        match self.kind {
            MetricKind::Slope => self.slope.abs(),
            MetricKind::SlopePerSqrtT => self.slope_per_sqrt_t,
        }
    }
}

pub fn slope_metric(r: &ProtocolResult) -> MetricReport {
    MetricReport::new(r, MetricKind::Slope)
}

/// Default `dν/dB`: 28 MHz/mT, in MHz per tesla.
pub const DEFAULT_DNU_DB_MHZ_PER_T: f64 = 28.0e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    /// Readout noise ΔC, same units as the signal.
    pub delta_c: f64,
    /// MHz per tesla.
    pub dnu_db: f64,
    /// µs.
    pub t_overhead: f64,
    /// Total time per shot `T + T_overhead`, µs.
    pub t_total: f64,
    /// T·√Hz⁻¹ (tesla·√s).
    pub eta: f64,
}

/// `η = ΔC / (|dC/dν|·dν/dB) · √(T + T_overhead)`.
///
/// Without a calibrated `delta_c` the absolute value is only meaningful as
/// a ratio between protocols.
pub fn sensitivity(r: &ProtocolResult, delta_c: f64, dnu_db: f64, t_overhead: f64) -> Result<SensitivityEstimate> {
    if r.slope == 0.0 || !r.slope.is_finite() {
        return Err(Error::ZeroSlope);
    }
    ensure(delta_c.is_finite() && delta_c > 0.0, || format!("ΔC must be > 0, got {delta_c}"))?;
    ensure(dnu_db.is_finite() && dnu_db > 0.0, || format!("dν/dB must be > 0, got {dnu_db}"))?;
    ensure(t_overhead.is_finite() && t_overhead >= 0.0, || {
        format!("overhead time must be ≥ 0, got {t_overhead}")
    })?;
    let t_total = r.manipulation_time + t_overhead;
    let eta = delta_c / (r.slope.abs() * dnu_db) * (t_total * 1e-6).sqrt();
    Ok(SensitivityEstimate {
        delta_c,
        dnu_db,
        t_overhead,
        t_total,
        eta,
    })
}

/// Triple-tone over single-tone value of the triple report's metric.
pub fn enhancement_ratio(triple: &MetricReport, single: &MetricReport) -> Result<f64> {
    if triple.kind != single.kind {
        return Err(Error::UndefinedRatio(format!(
            "metric kinds differ ({} vs {})",
            triple.kind, single.kind
        )));
    }
    let denom = single.value();
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::UndefinedRatio("single-tone metric is zero".into()));
    }
    Ok(triple.value() / denom)
}
