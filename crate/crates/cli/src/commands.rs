//! Resolved command settings and their execution.
//!
//! Each command writes its CSV/JSON outputs first and then renders plots by
//! reading those files back, so plots never see unwritten state.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tritone_core::dynamics::{HyperfineModel, Relaxation};
use tritone_core::fit::{fit_lorentzians, max_slope_from_fit, FitOptions, LorentzianModel, Spectrum};
use tritone_core::metrics::MetricKind;
use tritone_core::optimize::{dephasing_sweep, DeConfig, Protocol, SweepTable};
use tritone_core::protocols::{odmr_spectrum, ramsey_map, run_pulsed_odmr, OdmrParams, RamseyParams, Tones};

use crate::grid::GridSpec;
use crate::svg::{self, Heatmap, LinePlot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub gamma_per_us: f64,
    pub spin_lattice_per_us: f64,
    pub hyperfine_mhz: f64,
    pub step_us: f64,
}

impl Physics {
    fn relaxation(&self) -> Relaxation {
        Relaxation::new(self.gamma_per_us, self.spin_lattice_per_us)
    }

    fn hyperfine(&self) -> HyperfineModel {
        HyperfineModel::default().with_splitting(self.hyperfine_mhz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrumSettings {
    pub physics: Physics,
    pub tones: Tones,
    pub rabi_mhz: f64,
    pub duration_us: f64,
    pub detuning_mhz: GridSpec,
}

/// Detuning at which each ODMR map cell is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapDetuning {
    Fixed(f64),
    /// The detuning of the steepest rising edge on this grid. Spectra are
    /// mirror symmetric, so this is also the steepest |slope|.
    Steepest(GridSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrMapSettings {
    pub physics: Physics,
    pub tones: Tones,
    pub rabi_mhz: GridSpec,
    pub duration_us: GridSpec,
    pub detuning: MapDetuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyMapSettings {
    pub physics: Physics,
    pub tones: Tones,
    pub rabi_mhz: f64,
    pub tau_us: GridSpec,
    pub detuning_mhz: GridSpec,
    pub overrotation: f64,
    pub xi1_rad: f64,
    pub xi2_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub protocol: Protocol,
    pub metrics: Vec<MetricKind>,
    pub tones: Vec<Tones>,
    pub gammas_per_us: Vec<f64>,
    pub fixed_rabi_mhz: Option<f64>,
    pub de: DeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub input: PathBuf,
    pub peaks: usize,
    pub shared_width: bool,
    pub spacing_mhz: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Settings {
    OdmrSpectrum(OdmrSpectrumSettings),
    OdmrMap(OdmrMapSettings),
    RamseyMap(RamseyMapSettings),
    Optimize(SweepSettings),
    SweepGamma(SweepSettings),
    Fit(FitSettings),
}

/// What a run produced, for the manifest.
pub struct RunOutput {
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
    pub records: serde_json::Value,
}

impl Settings {
    pub fn name(&self) -> &'static str {
        match self {
            Settings::OdmrSpectrum(_) => "odmr-spectrum",
            Settings::OdmrMap(_) => "odmr-map",
            Settings::RamseyMap(_) => "ramsey-map",
            Settings::Optimize(_) => "optimize",
            Settings::SweepGamma(_) => "sweep-gamma",
            Settings::Fit(_) => "fit",
        }
    }

    pub fn run(&self, dir: &Path) -> anyhow::Result<RunOutput> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        match self {
            Settings::OdmrSpectrum(s) => run_odmr_spectrum(s, dir),
            Settings::OdmrMap(s) => run_odmr_map(s, dir),
            Settings::RamseyMap(s) => run_ramsey_map(s, dir),
            Settings::Optimize(s) | Settings::SweepGamma(s) => run_sweep(s, dir),
            Settings::Fit(s) => run_fit(s, dir),
        }
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Header and rows of a CSV written by this tool.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(dir: &Path, name: &str) -> anyhow::Result<Self> {
        let path = dir.join(name);
        let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    fn col(&self, name: &str) -> usize {
        self.headers
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("column {name} missing"))
    }

    /// Numeric column; empty cells become NaN.
    fn values(&self, name: &str) -> Vec<f64> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect()
    }

    fn text(&self, name: &str) -> Vec<&str> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].as_str()).collect()
    }
}

/// Distinct values in first-seen order.
fn distinct(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Row-major `z[i][j]` for a CSV whose outer loop is `outer`.
fn grid_of(outer: &[f64], inner: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let (ys, xs) = (distinct(outer), distinct(inner));
    let rows = z.chunks(xs.len()).map(<[f64]>::to_vec).collect();
    (xs, ys, rows)
}

fn run_odmr_spectrum(s: &OdmrSpectrumSettings, dir: &Path) -> anyhow::Result<RunOutput> {
    let mut base = OdmrParams::new(s.rabi_mhz, s.duration_us, 0.0, s.tones);
    base.step_us = s.physics.step_us;
    let pts = odmr_spectrum(&base, &s.physics.relaxation(), &s.physics.hyperfine(), &s.detuning_mhz.points())?;

    let mut w = create(dir, "odmr_spectrum.csv")?;
    w.write_record(["detuning_mhz", "signal", "slope_per_mhz"])?;
    for p in &pts {
        w.write_record([num(p.detuning_mhz), num(p.signal), num(p.slope)])?;
    }
    w.flush()?;

    let t = Table::read(dir, "odmr_spectrum.csv")?;
    let x = t.values("detuning_mhz");
    let pair = |c: &str| x.iter().copied().zip(t.values(c)).collect();
    write_text(
        dir,
        "odmr_spectrum.svg",
        &svg::line_plot(&LinePlot {
            title: &format!("Pulsed ODMR, {} tone, {} MHz, {} µs", s.tones, s.rabi_mhz, s.duration_us),
            x_label: "detuning (MHz)",
            y_label: "spin-flip probability / slope (1/MHz)",
            log_x: false,
            series: vec![Series::line("signal", pair("signal")), Series::line("slope", pair("slope_per_mhz"))],
        }),
    )?;
    Ok(RunOutput {
        outputs: vec!["odmr_spectrum.csv".into(), "odmr_spectrum.svg".into()],
        seeds: vec![],
        records: json!({ "rows": pts.len() }),
    })
}

fn run_odmr_map(s: &OdmrMapSettings, dir: &Path) -> anyhow::Result<RunOutput> {
    let (rabis, durations) = (s.rabi_mhz.points(), s.duration_us.points());
    let (relax, hf) = (s.physics.relaxation(), s.physics.hyperfine());
    let cells: Vec<(f64, f64)> = rabis
        .iter()
        .flat_map(|&r| durations.iter().map(move |&d| (r, d)))
        .collect();
    let results: Vec<(f64, f64, f64)> = cells
        .par_iter()
        .map(|&(rabi, dur)| -> tritone_core::Result<(f64, f64, f64)> {
            let mut p = OdmrParams::new(rabi, dur, 0.0, s.tones);
            p.step_us = s.physics.step_us;
            match s.detuning {
                MapDetuning::Fixed(d) => {
                    p.detuning_mhz = d;
                    let r = run_pulsed_odmr(&p, &relax, &hf)?;
                    Ok((d, r.signal, r.slope))
                }
                MapDetuning::Steepest(g) => {
                    let pts = odmr_spectrum(&p, &relax, &hf, &g.points())?;
                    let best = pts.iter().fold(&pts[0], |b, q| if q.slope > b.slope { q } else { b });
                    Ok((best.detuning_mhz, best.signal, best.slope))
                }
            }
        })
        .collect::<tritone_core::Result<_>>()?;

    let mut w = create(dir, "odmr_map.csv")?;
    w.write_record(["rabi_mhz", "duration_us", "signal", "slope_per_mhz"])?;
    for (&(r, d), &(_, sig, slope)) in cells.iter().zip(&results) {
        w.write_record([num(r), num(d), num(sig), num(slope)])?;
    }
    w.flush()?;

    let t = Table::read(dir, "odmr_map.csv")?;
    let (xs, ys, z) = grid_of(&t.values("rabi_mhz"), &t.values("duration_us"), &t.values("slope_per_mhz"));
    let what = match s.detuning {
        MapDetuning::Fixed(d) => format!("slope at {d} MHz"),
        MapDetuning::Steepest(_) => "steepest slope".into(),
    };
    write_text(
        dir,
        "odmr_map.svg",
        &svg::heatmap(&Heatmap {
            title: &format!("Pulsed ODMR {what}, {} tone", s.tones),
            x_label: "pulse duration (µs)",
            y_label: "Rabi frequency (MHz)",
            z_label: "slope (1/MHz)",
            xs: &xs,
            ys: &ys,
            z: &z,
        }),
    )?;
    let detunings: Vec<f64> = results.iter().map(|r| r.0).collect();
    Ok(RunOutput {
        outputs: vec!["odmr_map.csv".into(), "odmr_map.svg".into()],
        seeds: vec![],
        records: json!({ "rows": cells.len(), "rabi_mhz": rabis, "duration_us": durations, "detuning_mhz": detunings }),
    })
}

fn run_ramsey_map(s: &RamseyMapSettings, dir: &Path) -> anyhow::Result<RunOutput> {
    let mut base = RamseyParams::new(s.rabi_mhz, 0.0, 0.0, s.tones)
        .with_overrotation(s.overrotation)
        .with_sideband_phases(s.xi1_rad, s.xi2_rad);
    base.step_us = s.physics.step_us;
    let (taus, dets) = (s.tau_us.points(), s.detuning_mhz.points());
    let m = ramsey_map(&base, &s.physics.relaxation(), &s.physics.hyperfine(), &taus, &dets)?;

    let mut w = create(dir, "ramsey_map.csv")?;
    w.write_record(["tau_us", "detuning_mhz", "signal"])?;
    for (i, &tau) in m.taus_us.iter().enumerate() {
        for (j, &d) in m.detunings_mhz.iter().enumerate() {
            w.write_record([num(tau), num(d), num(m.signal[i][j])])?;
        }
    }
    w.flush()?;

    let t = Table::read(dir, "ramsey_map.csv")?;
    let (xs, ys, z) = grid_of(&t.values("tau_us"), &t.values("detuning_mhz"), &t.values("signal"));
    write_text(
        dir,
        "ramsey_map.svg",
        &svg::heatmap(&Heatmap {
            title: &format!("Ramsey, {} tone, {} MHz", s.tones, s.rabi_mhz),
            x_label: "detuning (MHz)",
            y_label: "free evolution time (µs)",
            z_label: "spin-flip probability",
            xs: &xs,
            ys: &ys,
            z: &z,
        }),
    )?;
    Ok(RunOutput {
        outputs: vec!["ramsey_map.csv".into(), "ramsey_map.svg".into()],
        seeds: vec![],
        records: json!({ "rows": taus.len() * dets.len(), "tau_us": taus, "detuning_mhz": dets }),
    })
}

const OPTIMA_HEADER: [&str; 15] = [
    "gamma_per_us",
    "protocol",
    "tones",
    "metric",
    "seed",
    "rabi_mhz",
    "duration_us",
    "detuning_mhz",
    "tau_us",
    "best_value",
    "signal",
    "slope_per_mhz",
    "manipulation_time_us",
    "converged",
    "evaluations",
];

const PARAM_COLUMNS: [&str; 4] = ["rabi_mhz", "duration_us", "detuning_mhz", "tau_us"];

fn write_sweep(table: &SweepTable, dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut w = create(dir, "optima.csv")?;
    w.write_record(OPTIMA_HEADER)?;
    for r in &table.rows {
        let mut rec = vec![num(r.gamma), r.protocol.to_string(), r.tones.to_string(), r.metric.to_string(), r.seed.to_string()];
        for name in PARAM_COLUMNS {
            let v = match (r.protocol, name) {
                (Protocol::Ramsey, "detuning_mhz") => Some(0.0),
                _ => r.param(name),
            };
            rec.push(v.map(num).unwrap_or_default());
        }
        rec.extend([
            num(r.best_value),
            num(r.result.signal),
            num(r.result.slope),
            num(r.result.manipulation_time),
            r.converged.to_string(),
            r.evaluations.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut files = vec!["optima.csv".to_string()];
    if !table.ratios.is_empty() {
        let mut w = create(dir, "ratios.csv")?;
        w.write_record(["gamma_per_us", "metric", "ratio"])?;
        for r in &table.ratios {
            w.write_record([num(r.gamma), r.metric.to_string(), r.ratio.map(num).unwrap_or_default()])?;
        }
        w.flush()?;
        files.push("ratios.csv".into());
    }
    Ok(files)
}

fn plot_sweep(dir: &Path, with_ratios: bool) -> anyhow::Result<Vec<String>> {
    let t = Table::read(dir, "optima.csv")?;
    let gamma = t.values("gamma_per_us");
    let (tones, metrics) = (t.text("tones"), t.text("metric"));
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for k in tones.iter().copied().zip(metrics.iter().copied()) {
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let series_of = |col: &str| -> Vec<Series> {
        let v = t.values(col);
        keys.iter()
            .map(|&(tn, m)| {
                let pts = (0..v.len())
                    .filter(|&i| tones[i] == tn && metrics[i] == m)
                    .map(|i| (gamma[i], v[i]))
                    .collect();
                Series::line(format!("{tn} {m}"), pts)
            })
            .filter(|s| s.points.iter().any(|p| p.1.is_finite()))
            .collect()
    };
    let log_x = gamma.iter().all(|&g| g > 0.0);
    let mut files = Vec::new();
    let mut plot = |name: &str, title: &str, y_label: &str, series: Vec<Series>| -> anyhow::Result<()> {
        let x_label = "dephasing rate γ (1/µs)";
        write_text(dir, name, &svg::line_plot(&LinePlot { title, x_label, y_label, log_x, series }))?;
        files.push(name.to_string());
        Ok(())
    };
    plot("optima.svg", "Optimised sensitivity metric", "metric value", series_of("best_value"))?;
    for col in PARAM_COLUMNS {
        let s = series_of(col);
        if !s.is_empty() {
            plot(&format!("optimal_{col}.svg"), &format!("Optimal {col}"), col, s)?;
        }
    }
    if with_ratios {
        let r = Table::read(dir, "ratios.csv")?;
        let (g, ratio, m) = (r.values("gamma_per_us"), r.values("ratio"), r.text("metric"));
        let mut names: Vec<&str> = Vec::new();
        for &x in &m {
            if !names.contains(&x) {
                names.push(x);
            }
        }
        let series = names
            .iter()
            .map(|&n| {
                let pts = (0..g.len()).filter(|&i| m[i] == n).map(|i| (g[i], ratio[i])).collect();
                Series::line(n.to_string(), pts)
            })
            .collect();
        plot("ratios.svg", "Triple/single enhancement ratio", "ratio", series)?;
    }
    Ok(files)
}

fn run_sweep(s: &SweepSettings, dir: &Path) -> anyhow::Result<RunOutput> {
    let table = dephasing_sweep(&s.gammas_per_us, s.protocol, &s.tones, &s.metrics, s.fixed_rabi_mhz, &s.de)?;
    let mut outputs = write_sweep(&table, dir)?;
    outputs.extend(plot_sweep(dir, !table.ratios.is_empty())?);
    let records: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|r| {
            json!({
                "gamma_per_us": r.gamma,
                "tones": r.tones,
                "metric": r.metric,
                "seed": r.seed,
                "names": r.names,
                "params": r.params,
                "best_value": r.best_value,
                "converged": r.converged,
            })
        })
        .collect();
    Ok(RunOutput {
        outputs,
        seeds: table.rows.iter().map(|r| r.seed).collect(),
        records: json!(records),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FitFile {
    input: PathBuf,
    peaks: usize,
    shared_width: bool,
    model: LorentzianModel,
    parameter_names: Vec<String>,
    standard_errors: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    residual: f64,
    initial_residual: f64,
    iterations: usize,
    max_slope_frequency_mhz: f64,
    max_slope: f64,
}

fn run_fit(s: &FitSettings, dir: &Path) -> anyhow::Result<RunOutput> {
    let spectrum = {
        let f = File::open(&s.input).with_context(|| format!("opening {}", s.input.display()))?;
        Spectrum::from_csv(f)?
    };
    let opts = FitOptions {
        shared_width: s.shared_width,
        spacing_prior_mhz: s.spacing_mhz,
        max_iterations: s.max_iterations,
    };
    let report = fit_lorentzians(&spectrum, s.peaks, None, &opts)?;
    let extremum = max_slope_from_fit(&report.model);
    let file = FitFile {
        input: s.input.clone(),
        peaks: s.peaks,
        shared_width: s.shared_width,
        standard_errors: report.standard_errors(),
        model: report.model,
        parameter_names: report.parameters,
        covariance: report.covariance,
        residual: report.residual,
        initial_residual: report.initial_residual,
        iterations: report.iterations,
        max_slope_frequency_mhz: extremum.frequency_mhz,
        max_slope: extremum.slope,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_text(dir, "fit.json", &text)?;

    let saved: FitFile = serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json"))?)?;
    let data = Spectrum::from_csv(File::open(&saved.input)?)?;
    let pts = data.points();
    let (lo, hi) = (pts[0].frequency_mhz, pts[pts.len() - 1].frequency_mhz);
    let curve = (0..=800)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 800.0;
            (x, saved.model.evaluate(x))
        })
        .collect();
    let x0 = saved.max_slope_frequency_mhz;
    let y0 = saved.model.evaluate(x0);
    let (ylo, yhi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.signal), b.max(p.signal)));
    let half = (0.05 * (hi - lo)).min(0.15 * (yhi - ylo) / saved.max_slope.abs().max(f64::MIN_POSITIVE));
    let tangent = vec![(x0 - half, y0 - half * saved.max_slope), (x0 + half, y0 + half * saved.max_slope)];
    write_text(
        dir,
        "fit_overlay.svg",
        &svg::line_plot(&LinePlot {
            title: &format!("{}-Lorentzian fit", saved.peaks),
            x_label: "frequency (MHz)",
            y_label: "signal",
            log_x: false,
            series: vec![
                Series::scatter("data", pts.iter().map(|p| (p.frequency_mhz, p.signal)).collect()),
                Series::line("fit", curve),
                Series::line("steepest slope", tangent),
            ],
        }),
    )?;
    Ok(RunOutput {
        outputs: vec!["fit.json".into(), "fit_overlay.svg".into()],
        seeds: vec![],
        records: json!({ "parameter_names": file.parameter_names, "model": file.model, "standard_errors": file.standard_errors }),
    })
}
