//! `nv-tritone`: batch simulations, maps, optimisation sweeps and spectrum
//! fits for single- and triple-tone NV magnetometry.

mod commands;
mod config;
mod error;
mod grid;
mod manifest;
mod svg;
mod units;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tritone_core::metrics::MetricKind;
use tritone_core::optimize::{DeConfig, Protocol};
use tritone_core::protocols::{Tones, RAMSEY_DETUNING_STEP_MHZ, TRIPLE_TONE_DETUNING_RANGE_MHZ};
use tritone_core::units::{DEFAULT_STEP_US, HYPERFINE_SPLITTING_MHZ};

use commands::{
    FitSettings, MapDetuning, OdmrMapSettings, OdmrSpectrumSettings, Physics, RamseyMapSettings, Settings,
    SweepSettings,
};
use config::{Config, Resolver};
use error::{exit_code, UsageError};
use grid::GridSpec;
use manifest::{now_unix_s, RunManifest, MANIFEST_FILE, SCHEMA_VERSION};

pub const WORKERS_ENV: &str = "NV_TRITONE_WORKERS";

#[derive(Parser)]
#[command(name = "nv-tritone", version, about = "Single- vs triple-tone NV ensemble magnetometry simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pulsed-ODMR signal and slope versus detuning.
    OdmrSpectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        physics: PhysicsArgs,
        /// 1 or 3 tones.
        #[arg(long)]
        tones: Option<String>,
        /// Rabi frequency [default: 1MHz].
        #[arg(long)]
        rabi: Option<String>,
        /// Pulse duration [default: π pulse at --rabi].
        #[arg(long)]
        duration: Option<String>,
        /// Detuning grid start:stop:step [default: -5MHz:5MHz:20kHz].
        #[arg(long, allow_hyphen_values = true)]
        detuning: Option<String>,
    },
    /// Pulsed-ODMR signal and slope over Rabi frequency × pulse duration.
    OdmrMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[arg(long)]
        tones: Option<String>,
        /// Rabi grid [default: 0.1MHz:2.1MHz:0.1MHz].
        #[arg(long)]
        rabi: Option<String>,
        /// Duration grid [default: 0.05us:1.05us:0.05us].
        #[arg(long)]
        duration: Option<String>,
        /// Fixed detuning, or `steepest` to take the steepest point of
        /// --detuning-scan in each cell [default: steepest].
        #[arg(long, allow_hyphen_values = true)]
        detuning: Option<String>,
        /// Detuning scan for `steepest` [default: -4MHz:4MHz:50kHz].
        #[arg(long, allow_hyphen_values = true)]
        detuning_scan: Option<String>,
    },
    /// Ramsey signal over free evolution time × detuning.
    RamseyMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[arg(long)]
        tones: Option<String>,
        /// Rabi frequency [default: 0.34MHz].
        #[arg(long)]
        rabi: Option<String>,
        /// Free evolution grid [default: 0us:2us:20ns].
        #[arg(long)]
        tau: Option<String>,
        /// Detuning grid [default: -3MHz:3MHz:10kHz single, -1.1MHz:3.9MHz:10kHz triple].
        #[arg(long, allow_hyphen_values = true)]
        detuning: Option<String>,
        /// π/2 pulse length multiplier [default: 1].
        #[arg(long)]
        overrotation: Option<String>,
        /// Sideband phase ξ₁ in radians, `pi` suffix allowed [default: 0].
        #[arg(long, allow_hyphen_values = true)]
        xi1: Option<String>,
        /// Sideband phase ξ₂ in radians, `pi` suffix allowed [default: 0].
        #[arg(long, allow_hyphen_values = true)]
        xi2: Option<String>,
    },
    /// Optimise a protocol at one dephasing rate.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        /// Dephasing rate γ in 1/µs [default: 1].
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Optimise a protocol over a list of dephasing rates.
    SweepGamma {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        /// Comma-separated γ values in 1/µs [default: 0.05,0.1,0.2,0.5,1,2,5].
        #[arg(long)]
        gammas: Option<String>,
    },
    /// Fit a multi-Lorentzian model to a spectrum CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// CSV with columns frequency_mhz,signal[,sigma].
        #[arg(long)]
        input: Option<String>,
        /// Number of Lorentzian peaks [default: 3].
        #[arg(long)]
        peaks: Option<String>,
        /// Fit one width shared by all peaks.
        #[arg(long)]
        shared_width: bool,
        /// Expected peak spacing for the initial guess [default: 2.16MHz].
        #[arg(long)]
        spacing: Option<String>,
        /// Levenberg–Marquardt iteration cap [default: 500].
        #[arg(long)]
        max_iterations: Option<String>,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        /// Manifest to replay.
        #[arg(long = "replay", value_name = "MANIFEST")]
        manifest: PathBuf,
        /// Output directory [default: the manifest's directory].
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Worker threads [default: NV_TRITONE_WORKERS or logical cores].
        #[arg(long)]
        workers: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory [default: nv-tritone-out].
    #[arg(long, short)]
    out: Option<String>,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads [default: NV_TRITONE_WORKERS or logical cores].
    #[arg(long)]
    workers: Option<String>,
}

#[derive(Args)]
struct PhysicsArgs {
    /// Dephasing rate γ in 1/µs [default: 1].
    #[arg(long)]
    gamma: Option<String>,
    /// Population relaxation rate Γ in 1/µs [default: 0].
    #[arg(long)]
    spin_lattice: Option<String>,
    /// Hyperfine splitting [default: 2.16MHz].
    #[arg(long)]
    hyperfine: Option<String>,
    /// Integration step [default: 1ns].
    #[arg(long)]
    step: Option<String>,
}

#[derive(Args)]
struct SearchArgs {
    /// odmr or ramsey [default: odmr].
    #[arg(long)]
    protocol: Option<String>,
    /// slope, slope-sqrt-t or both [default: slope].
    #[arg(long)]
    metric: Option<String>,
    /// 1, 3 or both [default: both].
    #[arg(long)]
    tones: Option<String>,
    /// Pin the Rabi frequency instead of optimising it.
    #[arg(long)]
    fixed_rabi: Option<String>,
    /// Base seed; each row derives its own [default: 24301].
    #[arg(long)]
    seed: Option<String>,
    /// Population size [default: 40].
    #[arg(long)]
    population: Option<String>,
    /// Generation cap per run [default: 300].
    #[arg(long)]
    generations: Option<String>,
    /// Independent runs per optimisation [default: 4].
    #[arg(long)]
    restarts: Option<String>,
    /// Convergence tolerance on the population spread [default: 1e-8].
    #[arg(long)]
    tolerance: Option<String>,
    /// Differential weight F [default: 0.8].
    #[arg(long)]
    weight: Option<String>,
    /// Crossover probability CR [default: 0.9].
    #[arg(long)]
    crossover: Option<String>,
}

fn parse_tones(s: &str) -> Result<Tones, UsageError> {
    match s.trim() {
        "1" | "single" => Ok(Tones::Single),
        "3" | "triple" => Ok(Tones::Triple),
        other => Err(UsageError(format!("tones must be 1 or 3, got '{other}'"))),
    }
}

fn parse_tone_set(s: &str) -> Result<Vec<Tones>, UsageError> {
    match s.trim() {
        "both" => Ok(vec![Tones::Single, Tones::Triple]),
        other => parse_tones(other).map(|t| vec![t]),
    }
}

fn parse_metrics(s: &str) -> Result<Vec<MetricKind>, UsageError> {
    match s.trim() {
        "both" => Ok(vec![MetricKind::Slope, MetricKind::SlopePerSqrtT]),
        other => other.parse().map(|m| vec![m]).map_err(UsageError),
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, UsageError> {
    match s.trim() {
        "odmr" => Ok(Protocol::Odmr),
        "ramsey" => Ok(Protocol::Ramsey),
        other => Err(UsageError(format!("protocol must be odmr or ramsey, got '{other}'"))),
    }
}

fn parse_count(what: &'static str) -> impl Fn(&str) -> Result<usize, UsageError> {
    move |s| {
        s.trim()
            .parse()
            .map_err(|_| UsageError(format!("{what} must be a non-negative integer, got '{s}'")))
    }
}

fn positive(what: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(UsageError(format!("{what} must be > 0, got {v}")))
    }
}

fn non_negative(what: &str, v: f64) -> Result<f64, UsageError> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(UsageError(format!("{what} must be ≥ 0, got {v}")))
    }
}

fn resolve_physics(r: &mut Resolver, a: &PhysicsArgs) -> Result<Physics, UsageError> {
    Ok(Physics {
        gamma_per_us: non_negative("gamma", r.get_or("gamma", a.gamma.as_deref(), 1.0, units::rate_per_us)?)?,
        spin_lattice_per_us: non_negative(
            "spin-lattice",
            r.get_or("spin-lattice", a.spin_lattice.as_deref(), 0.0, units::rate_per_us)?,
        )?,
        hyperfine_mhz: positive(
            "hyperfine",
            r.get_or("hyperfine", a.hyperfine.as_deref(), HYPERFINE_SPLITTING_MHZ, units::frequency_mhz)?,
        )?,
        step_us: positive("step", r.get_or("step", a.step.as_deref(), DEFAULT_STEP_US, units::time_us)?)?,
    })
}

fn grid(
    r: &mut Resolver,
    key: &str,
    flag: Option<&str>,
    default: &str,
    unit: fn(&str) -> Result<f64, UsageError>,
) -> Result<GridSpec, UsageError> {
    let text = r.raw(key, flag).unwrap_or_else(|| default.to_string());
    GridSpec::parse(&text, unit).map_err(|e| UsageError(format!("--{key}: {e}")))
}

fn resolve_search(r: &mut Resolver, a: &SearchArgs, gammas: Vec<f64>) -> Result<SweepSettings, UsageError> {
    let d = DeConfig::default();
    let de = DeConfig {
        population_size: r.get_or("population", a.population.as_deref(), d.population_size, parse_count("population"))?,
        weight: r.get_or("weight", a.weight.as_deref(), d.weight, |s| units::plain(s, "weight"))?,
        crossover: r.get_or("crossover", a.crossover.as_deref(), d.crossover, |s| units::plain(s, "crossover"))?,
        max_generations: r.get_or("generations", a.generations.as_deref(), d.max_generations, parse_count("generations"))?,
        tolerance: r.get_or("tolerance", a.tolerance.as_deref(), d.tolerance, |s| units::plain(s, "tolerance"))?,
        seed: r.get_or("seed", a.seed.as_deref(), d.seed, |s| {
            s.trim().parse().map_err(|_| UsageError(format!("seed must be a u64, got '{s}'")))
        })?,
        restarts: r.get_or("restarts", a.restarts.as_deref(), d.restarts, parse_count("restarts"))?,
    };
    de.validate().map_err(|e| UsageError(e.to_string()))?;
    let fixed = r.get("fixed-rabi", a.fixed_rabi.as_deref(), units::frequency_mhz)?;
    if let Some(f) = fixed {
        positive("fixed-rabi", f)?;
    }
    for &g in &gammas {
        non_negative("gamma", g)?;
    }
    Ok(SweepSettings {
        protocol: r.get_or("protocol", a.protocol.as_deref(), Protocol::Odmr, parse_protocol)?,
        metrics: r.get_or("metric", a.metric.as_deref(), vec![MetricKind::Slope], parse_metrics)?,
        tones: r.get_or("tones", a.tones.as_deref(), vec![Tones::Single, Tones::Triple], parse_tone_set)?,
        gammas_per_us: gammas,
        fixed_rabi_mhz: fixed,
        de,
    })
}

/// Resolved settings plus the run-time knobs that do not affect results.
struct Plan {
    settings: Settings,
    out: PathBuf,
    workers: Option<usize>,
    replay_of: Option<PathBuf>,
}

fn resolve_common(r: &mut Resolver, c: &Common) -> Result<(PathBuf, Option<usize>), UsageError> {
    let out = r.raw("out", c.out.as_deref()).unwrap_or_else(|| "nv-tritone-out".into());
    let workers = r.get("workers", c.workers.as_deref(), parse_count("workers"))?;
    Ok((PathBuf::from(out), workers))
}

fn plan(cmd: Command) -> anyhow::Result<Plan> {
    let config_of = |c: &Common| -> anyhow::Result<Resolver> {
        Ok(Resolver::new(match &c.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        }))
    };
    let (settings, common_out, mut r) = match cmd {
        Command::Replay { manifest, out, workers } => {
            let m = RunManifest::read(&manifest)?;
            let dir = manifest.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            let workers = workers.as_deref().map(parse_count("workers")).transpose()?;
            return Ok(Plan {
                settings: m.settings,
                out: out.unwrap_or(if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir }),
                workers,
                replay_of: Some(manifest),
            });
        }
        Command::OdmrSpectrum { common, physics, tones, rabi, duration, detuning } => {
            let mut r = config_of(&common)?;
            let physics = resolve_physics(&mut r, &physics)?;
            let rabi = positive("rabi", r.get_or("rabi", rabi.as_deref(), 1.0, units::frequency_mhz)?)?;
            let duration = r.get("duration", duration.as_deref(), units::time_us)?.unwrap_or(0.5 / rabi);
            let s = OdmrSpectrumSettings {
                physics,
                tones: r.get_or("tones", tones.as_deref(), Tones::Single, parse_tones)?,
                rabi_mhz: rabi,
                duration_us: non_negative("duration", duration)?,
                detuning_mhz: grid(&mut r, "detuning", detuning.as_deref(), "-5:5:0.02", units::frequency_mhz)?,
            };
            (Settings::OdmrSpectrum(s), common, r)
        }
        Command::OdmrMap { common, physics, tones, rabi, duration, detuning, detuning_scan } => {
            let mut r = config_of(&common)?;
            let physics = resolve_physics(&mut r, &physics)?;
            let rabi = grid(&mut r, "rabi", rabi.as_deref(), "0.1:2.1:0.1", units::frequency_mhz)?;
            let duration = grid(&mut r, "duration", duration.as_deref(), "0.05:1.05:0.05", units::time_us)?;
            if rabi.start <= 0.0 || duration.start < 0.0 {
                return Err(UsageError("map Rabi frequencies must be > 0 and durations ≥ 0".into()).into());
            }
            let scan = grid(&mut r, "detuning-scan", detuning_scan.as_deref(), "-4:4:0.05", units::frequency_mhz)?;
            let detuning = match r.raw("detuning", detuning.as_deref()) {
                None => MapDetuning::Steepest(scan),
                Some(s) if s.trim() == "steepest" => MapDetuning::Steepest(scan),
                Some(s) => MapDetuning::Fixed(units::frequency_mhz(&s).map_err(|e| UsageError(format!("--detuning: {e}")))?),
            };
            let s = OdmrMapSettings {
                physics,
                tones: r.get_or("tones", tones.as_deref(), Tones::Single, parse_tones)?,
                rabi_mhz: rabi,
                duration_us: duration,
                detuning,
            };
            (Settings::OdmrMap(s), common, r)
        }
        Command::RamseyMap { common, physics, tones, rabi, tau, detuning, overrotation, xi1, xi2 } => {
            let mut r = config_of(&common)?;
            let physics = resolve_physics(&mut r, &physics)?;
            let tones = r.get_or("tones", tones.as_deref(), Tones::Single, parse_tones)?;
            let default_det = match tones {
                Tones::Single => format!("-3:3:{RAMSEY_DETUNING_STEP_MHZ}"),
                Tones::Triple => {
                    let (lo, hi) = TRIPLE_TONE_DETUNING_RANGE_MHZ;
                    format!("{lo}:{hi}:{RAMSEY_DETUNING_STEP_MHZ}")
                }
            };
            let s = RamseyMapSettings {
                physics,
                tones,
                rabi_mhz: positive("rabi", r.get_or("rabi", rabi.as_deref(), 0.34, units::frequency_mhz)?)?,
                tau_us: grid(&mut r, "tau", tau.as_deref(), "0:2:0.02", units::time_us)?,
                detuning_mhz: grid(&mut r, "detuning", detuning.as_deref(), &default_det, units::frequency_mhz)?,
                overrotation: positive(
                    "overrotation",
                    r.get_or("overrotation", overrotation.as_deref(), 1.0, |s| units::plain(s, "overrotation"))?,
                )?,
                xi1_rad: r.get_or("xi1", xi1.as_deref(), 0.0, units::angle_rad)?,
                xi2_rad: r.get_or("xi2", xi2.as_deref(), 0.0, units::angle_rad)?,
            };
            if s.tau_us.start < 0.0 {
                return Err(UsageError("--tau must be ≥ 0".into()).into());
            }
            (Settings::RamseyMap(s), common, r)
        }
        Command::Optimize { common, search, gamma } => {
            let mut r = config_of(&common)?;
            let g = r.get_or("gamma", gamma.as_deref(), 1.0, units::rate_per_us)?;
            let s = resolve_search(&mut r, &search, vec![g])?;
            (Settings::Optimize(s), common, r)
        }
        Command::SweepGamma { common, search, gammas } => {
            let mut r = config_of(&common)?;
            let gs = r.get_or("gammas", gammas.as_deref(), vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0], |s| {
                units::list(s, units::rate_per_us)
            })?;
            if gs.is_empty() {
                return Err(UsageError("--gammas needs at least one value".into()).into());
            }
            let s = resolve_search(&mut r, &search, gs)?;
            (Settings::SweepGamma(s), common, r)
        }
        Command::Fit { common, input, peaks, shared_width, spacing, max_iterations } => {
            let mut r = config_of(&common)?;
            let input = r
                .raw("input", input.as_deref())
                .ok_or_else(|| UsageError("fit needs --input".into()))?;
            let input = std::fs::canonicalize(&input).with_context(|| format!("opening {input}"))?;
            let shared = r.get_or("shared-width", shared_width.then_some("true"), false, |s| {
                s.trim()
                    .parse()
                    .map_err(|_| UsageError(format!("shared-width must be true or false, got '{s}'")))
            })?;
            let s = FitSettings {
                input,
                peaks: r.get_or("peaks", peaks.as_deref(), 3, parse_count("peaks"))?,
                shared_width: shared,
                spacing_mhz: positive(
                    "spacing",
                    r.get_or("spacing", spacing.as_deref(), HYPERFINE_SPLITTING_MHZ, units::frequency_mhz)?,
                )?,
                max_iterations: r.get_or("max-iterations", max_iterations.as_deref(), 500, parse_count("max-iterations"))?,
            };
            if s.peaks == 0 {
                return Err(UsageError("--peaks must be ≥ 1".into()).into());
            }
            (Settings::Fit(s), common, r)
        }
    };
    let (out, workers) = resolve_common(&mut r, &common_out)?;
    r.finish()?;
    Ok(Plan { settings, out, workers, replay_of: None })
}

fn worker_count(flag: Option<usize>) -> anyhow::Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => parse_count(WORKERS_ENV)(&v)?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(UsageError("worker count must be ≥ 1".into()).into());
    }
    Ok(n)
}

/// Runs a plan on the current worker pool and writes its manifest.
fn run_plan(plan: Plan, workers: usize) -> anyhow::Result<RunManifest> {
    let started = now_unix_s();
    let run = plan.settings.run(&plan.out)?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        command_line: std::env::args().collect(),
        settings: plan.settings,
        seeds: run.seeds,
        workers,
        started_unix_s: started,
        finished_unix_s: now_unix_s(),
        replay_of: plan.replay_of,
        outputs: run.outputs,
        records: run.records,
    };
    manifest.write(&plan.out)?;
    Ok(manifest)
}

fn execute(plan: Plan) -> anyhow::Result<()> {
    let workers = worker_count(plan.workers)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .context("starting worker pool")?;
    let out = plan.out.clone();
    let manifest = run_plan(plan, workers)?;
    eprintln!(
        "{}: wrote {} files and {} to {}",
        manifest.settings.name(),
        manifest.outputs.len(),
        MANIFEST_FILE,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match plan(cli.command).and_then(execute) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn plan_of(args: &[&str]) -> anyhow::Result<Plan> {
        let cli = Cli::try_parse_from(std::iter::once("nv-tritone").chain(args.iter().copied()))?;
        plan(cli.command)
    }

    fn run(args: &[&str]) -> anyhow::Result<RunManifest> {
        run_plan(plan_of(args)?, 1)
    }

    fn dir_arg(p: &Path) -> String {
        p.to_str().unwrap().to_string()
    }

    fn csv_rows(path: &Path) -> Vec<Vec<String>> {
        let mut r = csv::Reader::from_path(path).unwrap();
        r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
    }

    #[test]
    fn flags_beat_config_beat_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("run.conf");
        std::fs::write(&cfg, "# shared settings\nrabi = 2MHz\ngamma = 0.5\ntones = 3\n").unwrap();
        let p = plan_of(&["odmr-spectrum", "--config", cfg.to_str().unwrap(), "--rabi", "500kHz"]).unwrap();
        let Settings::OdmrSpectrum(s) = p.settings else { panic!() };
        assert_eq!(s.rabi_mhz, 0.5);
        assert_eq!(s.physics.gamma_per_us, 0.5);
        assert_eq!(s.tones, Tones::Triple);
        assert_eq!(s.duration_us, 1.0);
        assert_eq!(s.physics.step_us, DEFAULT_STEP_US);
        assert_eq!(p.out, PathBuf::from("nv-tritone-out"));
    }

    #[test]
    fn unknown_config_key_is_a_usage_error() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("run.conf");
        std::fs::write(&cfg, "rabbi = 2MHz\n").unwrap();
        let e = plan_of(&["odmr-spectrum", "--config", cfg.to_str().unwrap()]).err().unwrap();
        assert_eq!(exit_code(&e), error::EXIT_USAGE);
    }

    #[test]
    fn argument_errors_exit_with_two() {
        let e = Cli::try_parse_from(["nv-tritone", "no-such-command"]).err().unwrap();
        assert_eq!(e.exit_code(), 2);
        for bad in [
            &["odmr-map", "--rabi", "0:1:0"][..],
            &["ramsey-map", "--tones", "2"],
            &["optimize", "--metric", "contrast"],
            &["optimize", "--population", "3"],
            &["sweep-gamma", "--gammas", "0.1,-1"],
            &["odmr-spectrum", "--duration", "3MHz"],
        ] {
            let e = plan_of(bad).err().unwrap_or_else(|| panic!("{bad:?} accepted"));
            assert_eq!(exit_code(&e), error::EXIT_USAGE, "{bad:?}: {e:#}");
        }
    }

    #[test]
    fn numerical_failures_exit_with_three() {
        let tmp = tempfile::tempdir().unwrap();
        let out = dir_arg(tmp.path());
        // 2Ω₀ < γ leaves the π/2 pulse undefined.
        let e = run(&["ramsey-map", "--out", &out, "--rabi", "10kHz", "--gamma", "1", "--tau", "0.5"]).unwrap_err();
        assert_eq!(exit_code(&e), error::EXIT_NUMERICAL, "{e:#}");
    }

    #[test]
    fn io_failures_exit_with_four() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let e = run(&["odmr-spectrum", "--out", &dir_arg(&blocker.join("sub")), "--detuning", "0"]).unwrap_err();
        assert_eq!(exit_code(&e), error::EXIT_IO, "{e:#}");
        let e = plan_of(&["fit", "--input", &dir_arg(&tmp.path().join("missing.csv"))]).err().unwrap();
        assert_eq!(exit_code(&e), error::EXIT_IO, "{e:#}");
    }

    #[test]
    fn single_cell_map_writes_one_row() {
        let tmp = tempfile::tempdir().unwrap();
        let m = run(&["odmr-map", "--out", &dir_arg(tmp.path()), "--rabi", "0.5", "--duration", "1us", "--detuning", "0.3"]).unwrap();
        let rows = csv_rows(&tmp.path().join("odmr_map.csv"));
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][..2], ["0.5", "1"]);
        assert!(m.outputs.contains(&"odmr_map.svg".to_string()));
        let listed: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(listed.iter().filter(|n| n.to_str().unwrap().ends_with(".json")).count(), 1);
    }

    #[test]
    fn ramsey_map_at_zero_tau_sits_on_the_equator() {
        // Quadrature π/2 pulses on resonance end on the equator; a 1 Hz
        // splitting puts all three lines on resonance.
        let tmp = tempfile::tempdir().unwrap();
        run(&[
            "ramsey-map", "--out", &dir_arg(tmp.path()), "--rabi", "2MHz", "--gamma", "0", "--hyperfine", "1Hz",
            "--tau", "0:40ns:20ns", "--detuning=-1:1:0.5",
        ])
        .unwrap();
        let rows = csv_rows(&tmp.path().join("ramsey_map.csv"));
        assert_eq!(rows.len(), 15);
        let first = rows.iter().find(|r| r[0] == "0" && r[1] == "0").unwrap();
        assert!((first[2].parse::<f64>().unwrap() - 0.5).abs() < 1e-9, "{first:?}");
    }

    #[test]
    fn repeated_seeded_runs_write_identical_files() {
        let tmp = tempfile::tempdir().unwrap();
        let args = |d: &Path| {
            vec![
                "optimize".to_string(), "--out".into(), dir_arg(d), "--protocol".into(), "ramsey".into(),
                "--population".into(), "10".into(), "--generations".into(), "15".into(), "--restarts".into(), "2".into(),
                "--seed".into(), "7".into(),
            ]
        };
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        for d in [&a, &b] {
            let v = args(d);
            run(&v.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
        }
        for f in ["optima.csv", "ratios.csv", "optima.svg", "ratios.svg"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
        let rows = csv_rows(&a.join("optima.csv"));
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0][2].as_str(), rows[1][2].as_str()), ("single", "triple"));
    }

    #[test]
    fn replay_reproduces_outputs_and_records_its_origin() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        run(&["odmr-spectrum", "--out", &dir_arg(&a), "--tones", "3", "--rabi", "0.4", "--detuning=-3:3:0.25"]).unwrap();
        let manifest = a.join(MANIFEST_FILE);
        let m = run(&["replay", "--replay", &dir_arg(&manifest), "--out", &dir_arg(&b)]).unwrap();
        assert_eq!(m.replay_of.as_deref(), Some(manifest.as_path()));
        let f = "odmr_spectrum.csv";
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        let first = RunManifest::read(&manifest).unwrap();
        assert_eq!(first.settings, m.settings);
        assert_eq!(first.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn fit_recovers_a_synthetic_triplet() {
        let tmp = tempfile::tempdir().unwrap();
        let input = tmp.path().join("spectrum.csv");
        let mut text = String::from("frequency_mhz,signal\n");
        for k in 0..=400 {
            let x = -5.0 + 0.025 * k as f64;
            let y: f64 = [-2.16, 0.0, 2.16].iter().map(|c| -0.6 * 0.09 / ((x - c).powi(2) + 0.09)).sum();
            text.push_str(&format!("{x},{}\n", 0.2 + y));
        }
        std::fs::write(&input, text).unwrap();
        let out = tmp.path().join("fit");
        run(&["fit", "--input", &dir_arg(&input), "--out", &dir_arg(&out), "--shared-width"]).unwrap();
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
        let peaks = report["model"]["peaks"].as_array().unwrap();
        for (p, c) in peaks.iter().zip([-2.16, 0.0, 2.16]) {
            assert!((p["center_mhz"].as_f64().unwrap() - c).abs() < 1e-6);
            assert!((p["hwhm_mhz"].as_f64().unwrap() - 0.3).abs() < 1e-6);
        }
        assert!(out.join("fit_overlay.svg").exists());
    }

    #[test]
    fn worker_count_rejects_zero() {
        assert!(worker_count(Some(0)).is_err());
        assert_eq!(worker_count(Some(3)).unwrap(), 3);
    }
}
