//! Protocol-specific search problems and dephasing sweeps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::de::{differential_evolution, Bound, DeConfig, OptResult, SearchSpace};
use crate::dynamics::{HyperfineModel, Relaxation};
use crate::error::{ensure, Result};
use crate::metrics::{enhancement_ratio, MetricKind, MetricReport};
use crate::protocols::{half_pi_duration, run_pulsed_odmr, run_ramsey, OdmrParams, ProtocolResult, RamseyParams, Tones};
use crate::units::DEFAULT_STEP_US;

/// Upper Rabi frequency of every search, MHz.
pub const MAX_RABI_MHZ: f64 = 10.0;
const MIN_RABI_MHZ: f64 = 0.01;
const MIN_PULSE_US: f64 = 1e-3;

/// Search window for pulse lengths and free evolution: `5/γ`, kept within
/// 1–20 µs.
pub fn default_time_bound(gamma: f64) -> f64 {
    if gamma > 0.0 {
        (5.0 / gamma).clamp(1.0, 20.0)
    } else {
        20.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Odmr,
    Ramsey,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Odmr => "odmr",
            Protocol::Ramsey => "ramsey",
        })
    }
}

/// Pulsed ODMR over `(rabi_mhz, duration_us, detuning_mhz)`.
///
/// The pulse is a single π-like rotation: its resonant area `Ω₀·t` is capped
/// at `max_pulse_area` (units of π), which excludes multi-cycle Rabi fringes.
/// The search runs over `(rabi_mhz, pulse_area_pi, detuning_mhz)` so the
/// cap is a box bound; results are reported with the physical duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrProblem {
    pub gamma: f64,
    pub spin_lattice: f64,
    pub tones: Tones,
    pub metric: MetricKind,
    pub hyperfine: HyperfineModel,
    pub max_rabi_mhz: f64,
    pub max_duration_us: f64,
    /// Upper bound on `Ω₀·t`, in units of π.
    pub max_pulse_area: f64,
    /// Detuning searched over `[−span, +span]`, MHz.
    pub detuning_span_mhz: f64,
    /// Pins the Rabi frequency instead of searching it.
    pub fixed_rabi_mhz: Option<f64>,
    pub step_us: f64,
}

/// Default pulse-area cap: one full Rabi cycle.
pub const DEFAULT_MAX_PULSE_AREA: f64 = 2.0;

impl OdmrProblem {
    pub fn new(gamma: f64, tones: Tones, metric: MetricKind) -> Self {
        Self {
            gamma,
            spin_lattice: 0.0,
            tones,
            metric,
            hyperfine: HyperfineModel::default(),
            max_rabi_mhz: MAX_RABI_MHZ,
            max_duration_us: default_time_bound(gamma),
            max_pulse_area: DEFAULT_MAX_PULSE_AREA,
            detuning_span_mhz: 6.0,
            fixed_rabi_mhz: None,
            step_us: DEFAULT_STEP_US,
        }
    }

    pub fn relaxation(&self) -> Relaxation {
        Relaxation::new(self.gamma, self.spin_lattice)
    }

    /// The search space, in `(rabi_mhz, pulse_area_pi, detuning_mhz)`.
    pub fn space(&self) -> Result<SearchSpace> {
        ensure(self.gamma.is_finite() && self.gamma >= 0.0, || {
            format!("dephasing rate must be ≥ 0, got {}", self.gamma)
        })?;
        ensure(self.max_pulse_area > 0.0, || {
            format!("pulse area cap must be > 0, got {}", self.max_pulse_area)
        })?;
        ensure(self.max_duration_us > MIN_PULSE_US, || {
            format!("duration bound must exceed {MIN_PULSE_US} µs, got {}", self.max_duration_us)
        })?;
        let rabi = match self.fixed_rabi_mhz {
            Some(r) => Bound::new("rabi_mhz", r, r),
            None => Bound::new("rabi_mhz", MIN_RABI_MHZ, self.max_rabi_mhz),
        };
        SearchSpace::new(vec![
            rabi,
            Bound::new("pulse_area_pi", 0.0, self.max_pulse_area),
            Bound::new("detuning_mhz", -self.detuning_span_mhz, self.detuning_span_mhz),
        ])
    }

    /// `(rabi, area, detuning)` to `(rabi, duration, detuning)`.
    pub fn to_physical(&self, z: &[f64]) -> [f64; 3] {
        let duration = if z[0] > 0.0 { z[1] / (2.0 * z[0]) } else { 0.0 };
        [z[0], duration, z[2]]
    }

    /// Parameters at `x = (rabi_mhz, duration_us, detuning_mhz)`.
    pub fn params(&self, x: &[f64]) -> OdmrParams {
        OdmrParams {
            step_us: self.step_us,
            ..OdmrParams::new(x[0], x[1], x[2], self.tones)
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ProtocolResult> {
        run_pulsed_odmr(&self.params(x), &self.relaxation(), &self.hyperfine)
    }

    /// The metric at physical `x`, or −∞ outside the duration window or
    /// where the protocol is undefined.
    pub fn objective(&self, x: &[f64]) -> f64 {
        if !(MIN_PULSE_US..=self.max_duration_us).contains(&x[1]) {
            return f64::NEG_INFINITY;
        }
        self.evaluate(x)
            .map(|r| self.metric.evaluate(&r))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Ramsey over `(rabi_mhz, tau_us)` at zero detuning with a π/2-shifted
/// second pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyProblem {
    pub gamma: f64,
    pub spin_lattice: f64,
    pub tones: Tones,
    pub metric: MetricKind,
    pub hyperfine: HyperfineModel,
    pub max_rabi_mhz: f64,
    pub max_tau_us: f64,
    pub fixed_rabi_mhz: Option<f64>,
    pub overrotation: f64,
    pub step_us: f64,
}

impl RamseyProblem {
    pub fn new(gamma: f64, tones: Tones, metric: MetricKind) -> Self {
        Self {
            gamma,
            spin_lattice: 0.0,
            tones,
            metric,
            hyperfine: HyperfineModel::default(),
            max_rabi_mhz: MAX_RABI_MHZ,
            max_tau_us: default_time_bound(gamma),
            fixed_rabi_mhz: None,
            overrotation: 1.0,
            step_us: DEFAULT_STEP_US,
        }
    }

    pub fn with_fixed_rabi(mut self, rabi_mhz: f64) -> Self {
        self.fixed_rabi_mhz = Some(rabi_mhz);
        self
    }

    pub fn relaxation(&self) -> Relaxation {
        Relaxation::new(self.gamma, self.spin_lattice)
    }

    /// Lowest admissible Rabi frequency: `2Ω₀ > γ`.
    pub fn min_rabi_mhz(&self) -> f64 {
        (self.gamma / (4.0 * PI)).max(MIN_RABI_MHZ)
    }

    pub fn space(&self) -> Result<SearchSpace> {
        ensure(self.gamma.is_finite() && self.gamma >= 0.0, || {
            format!("dephasing rate must be ≥ 0, got {}", self.gamma)
        })?;
        let rabi = match self.fixed_rabi_mhz {
            Some(r) => Bound::new("rabi_mhz", r, r),
            None => Bound::new("rabi_mhz", self.min_rabi_mhz(), self.max_rabi_mhz),
        };
        SearchSpace::new(vec![rabi, Bound::new("tau_us", 0.0, self.max_tau_us)])
    }

    pub fn params(&self, x: &[f64]) -> RamseyParams {
        RamseyParams {
            overrotation: self.overrotation,
            step_us: self.step_us,
            ..RamseyParams::new(x[0], x[1], 0.0, self.tones)
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ProtocolResult> {
        run_ramsey(&self.params(x), &self.relaxation(), &self.hyperfine)
    }

    /// The metric at `x`, or −∞ where the π/2 pulse is undefined or longer
    /// than the free-evolution window.
    pub fn objective(&self, x: &[f64]) -> f64 {
        match half_pi_duration(x[0], self.gamma) {
            Ok(t) if t <= self.max_tau_us => {}
            _ => return f64::NEG_INFINITY,
        }
        self.evaluate(x)
            .map(|r| self.metric.evaluate(&r))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Best `(rabi_mhz, duration_us, detuning_mhz)` for `problem`.
pub fn optimize_odmr(problem: &OdmrProblem, cfg: &DeConfig) -> Result<OptResult> {
    let space = problem.space()?;
    let mut opt = differential_evolution(|z| problem.objective(&problem.to_physical(z)), &space, cfg)?;
    opt.best_params = problem.to_physical(&opt.best_params).to_vec();
    opt.names = vec!["rabi_mhz".into(), "duration_us".into(), "detuning_mhz".into()];
    Ok(opt)
}

pub fn optimize_ramsey(problem: &RamseyProblem, cfg: &DeConfig) -> Result<OptResult> {
    let space = problem.space()?;
    differential_evolution(|x| problem.objective(x), &space, cfg)
}

/// Per-row seed derived from the base seed (SplitMix64 finaliser).
pub fn row_seed(base: u64, row: usize) -> u64 {
    let mut z = base.wrapping_add((row as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub protocol: Protocol,
    pub tones: Tones,
    pub metric: MetricKind,
    pub seed: u64,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub best_value: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Protocol outcome at the optimum.
    pub result: ProtocolResult,
}

impl SweepRow {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn report(&self) -> MetricReport {
        MetricReport::new(&self.result, self.metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub gamma: f64,
    pub metric: MetricKind,
    /// Triple over single tone; `None` when the single-tone optimum is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub ratios: Vec<RatioRow>,
}

/// Optimises every `(γ, tones, metric)` combination.
///
/// Rows are ordered γ-major, then tones, then metric; row `k` uses
/// `row_seed(cfg.seed, k)`. `fixed_rabi_mhz` pins the Rabi frequency for
/// either protocol.
pub fn dephasing_sweep(
    gammas: &[f64],
    protocol: Protocol,
    tones: &[Tones],
    metrics: &[MetricKind],
    fixed_rabi_mhz: Option<f64>,
    cfg: &DeConfig,
) -> Result<SweepTable> {
    ensure(!gammas.is_empty(), || "dephasing sweep needs at least one γ".into())?;
    ensure(!tones.is_empty() && !metrics.is_empty(), || "sweep needs tones and metrics".into())?;
    let combos: Vec<(f64, Tones, MetricKind)> = gammas
        .iter()
        .flat_map(|&g| tones.iter().flat_map(move |&t| metrics.iter().map(move |&m| (g, t, m))))
        .collect();

    let rows: Vec<SweepRow> = combos
        .par_iter()
        .enumerate()
        .map(|(k, &(gamma, t, metric))| {
            let cfg = DeConfig {
                seed: row_seed(cfg.seed, k),
                ..cfg.clone()
            };
            let (opt, result) = match protocol {
                Protocol::Odmr => {
                    let mut p = OdmrProblem::new(gamma, t, metric);
                    p.fixed_rabi_mhz = fixed_rabi_mhz;
                    let opt = optimize_odmr(&p, &cfg)?;
                    let r = p.evaluate(&opt.best_params)?;
                    (opt, r)
                }
                Protocol::Ramsey => {
                    let mut p = RamseyProblem::new(gamma, t, metric);
                    p.fixed_rabi_mhz = fixed_rabi_mhz;
                    let opt = optimize_ramsey(&p, &cfg)?;
                    let r = p.evaluate(&opt.best_params)?;
                    (opt, r)
                }
            };
            Ok(SweepRow {
                gamma,
                protocol,
                tones: t,
                metric,
                seed: cfg.seed,
                names: opt.names,
                params: opt.best_params,
                best_value: opt.best_value,
                converged: opt.converged,
                evaluations: opt.evaluations,
                result,
            })
        })
        .collect::<Result<_>>()?;

    let mut ratios = Vec::new();
    if tones.contains(&Tones::Single) && tones.contains(&Tones::Triple) {
        for &gamma in gammas {
            for &metric in metrics {
                let find = |t: Tones| {
                    rows.iter()
                        .find(|r| r.gamma == gamma && r.tones == t && r.metric == metric)
                        .map(SweepRow::report)
                };
                if let (Some(triple), Some(single)) = (find(Tones::Triple), find(Tones::Single)) {
                    ratios.push(RatioRow {
                        gamma,
                        metric,
                        ratio: enhancement_ratio(&triple, &single).ok(),
                    });
                }
            }
        }
    }
    Ok(SweepTable { rows, ratios })
}
