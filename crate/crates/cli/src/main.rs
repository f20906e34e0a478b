mod output;
mod overrides;

use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use haptic_cf::error::{FilterError, GeometryError, SimError};
use haptic_cf::sim::record::{piball_points, read_rows_csv, write_piball_csv, CSV_SCHEMA};
use haptic_cf::sim::{monte_carlo, preset, run, Outcome, ScenarioConfig, PRESET_NAMES};
use serde::Serialize;
use serde_json::{json, Value};

use output::{sha256_hex, write_atomic, write_json, Manifest};

const EXIT_INTERNAL: u8 = 1;
const EXIT_MALFORMED: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_SINGULAR: u8 = 4;

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Converged => 0,
        Outcome::Stalled => 10,
        Outcome::AntiAligned => 11,
        Outcome::UnstableSetProximity => 12,
        Outcome::MaxTime => 13,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "haptic-cf",
    version,
    about = "Haptic and vision orientation filter scenarios"
)]
struct Cli {
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory.csv, summary.json and manifest.json.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario from Haar-random initial estimates.
    Montecarlo {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Convert a trajectory CSV into π-ball points (t, x, y, z).
    ExportPiball {
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List built-in scenarios, or print one as JSON.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Debug, Args)]
struct Source {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario file, JSON or TOML (by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a field, e.g. `--set gains.k_p=2` or `--set arms.0.beta=-0.5`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::new(EXIT_INTERNAL, error)
    }
}

fn sim_failure(e: SimError) -> Failure {
    let code = match &e {
        SimError::UnknownPreset(_) => EXIT_MALFORMED,
        SimError::Filter(FilterError::Geometry(GeometryError::Singularity(_))) => EXIT_SINGULAR,
        _ => EXIT_INVALID,
    };
    Failure::new(code, e)
}

fn load_config(source: &Source) -> Result<ScenarioConfig, Failure> {
    let mut value: Value = match (&source.preset, &source.config) {
        (Some(name), _) => {
            serde_json::to_value(preset(name).map_err(sim_failure)?).map_err(anyhow::Error::from)?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| Failure::new(EXIT_MALFORMED, e))?;
            let parsed = if path.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(anyhow::Error::from)
            } else {
                serde_json::from_str(&text).map_err(anyhow::Error::from)
            };
            parsed
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(|e| Failure::new(EXIT_MALFORMED, e))?
        }
        (None, None) => {
            return Err(Failure::new(
                EXIT_MALFORMED,
                anyhow!("one of --preset or --config is required"),
            ))
        }
    };
    for spec in &source.overrides {
        overrides::parse(spec)
            .and_then(|(path, v)| overrides::apply(&mut value, &path, v))
            .map_err(|e| Failure::new(EXIT_MALFORMED, e))?;
    }
    if let Some(seed) = source.seed {
        value["seed"] = json!(seed);
    }
    serde_json::from_value(value)
        .context("scenario does not match the configuration schema")
        .map_err(|e| Failure::new(EXIT_MALFORMED, e))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn prepare_out(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::from)
}

#[derive(Serialize)]
struct RunMetrics {
    final_trace_error: f64,
    peak_trace_error: f64,
    min_unstable_distance: f64,
    settle_time: Option<f64>,
    steps: u64,
}

fn cmd_run(source: &Source, out: &Path, quiet: bool) -> Result<u8, Failure> {
    let config = load_config(source)?;
    config.validate().map_err(sim_failure)?;
    let canonical = serde_json::to_string(&config).map_err(anyhow::Error::from)?;
    let started_at = now();
    let clock = Instant::now();
    let record = run(&config).map_err(sim_failure)?;
    let wall = clock.elapsed().as_secs_f64();
    let finished_at = now();

    prepare_out(out)?;
    let mut csv = Vec::new();
    record.write_csv(&mut csv).map_err(anyhow::Error::from)?;
    write_atomic(&out.join("trajectory.csv"), &csv)?;
    write_json(&out.join("summary.json"), &record.summary)?;
    write_atomic(
        &out.join("config.json"),
        format!("{canonical}\n").as_bytes(),
    )?;
    let s = &record.summary;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        trajectory_schema: CSV_SCHEMA,
        config_sha256: sha256_hex(canonical.as_bytes()),
        seed: config.seed,
        started_at,
        finished_at,
        wall_time_s: wall,
        outcome: s.outcome.to_string(),
        metrics: RunMetrics {
            final_trace_error: s.final_trace_error,
            peak_trace_error: s.peak_trace_error,
            min_unstable_distance: s.min_unstable_distance,
            settle_time: s.settle_time,
            steps: s.steps,
        },
        files: vec![
            "trajectory.csv".into(),
            "summary.json".into(),
            "config.json".into(),
        ],
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    if !quiet {
        let e = s.final_euler;
        println!(
            "{}: {} after {} steps, trace error {:.3e}, euler zyx ({:.4}, {:.4}, {:.4})",
            s.scenario, s.outcome, s.steps, s.final_trace_error, e.yaw, e.pitch, e.roll
        );
    }
    Ok(outcome_code(s.outcome))
}

#[derive(Serialize)]
struct Aggregate<'a> {
    scenario: &'a str,
    n_runs: usize,
    seed: u64,
    converged: usize,
    converged_fraction: f64,
    anti_aligned: usize,
    outcomes: &'a std::collections::BTreeMap<Outcome, usize>,
    median_settle_time: Option<f64>,
    worst_final_error: f64,
}

fn cmd_montecarlo(source: &Source, runs: usize, out: &Path, quiet: bool) -> Result<u8, Failure> {
    if runs == 0 {
        return Err(Failure::new(
            EXIT_MALFORMED,
            anyhow!("--runs must be at least 1"),
        ));
    }
    let config = load_config(source)?;
    config.validate().map_err(sim_failure)?;
    let canonical = serde_json::to_string(&config).map_err(anyhow::Error::from)?;
    let started_at = now();
    let clock = Instant::now();
    let summary = monte_carlo(&config, runs, config.seed).map_err(sim_failure)?;
    let wall = clock.elapsed().as_secs_f64();
    let finished_at = now();

    prepare_out(out)?;
    let mut w = String::new();
    w.push_str("index,outcome,final_trace_error,settle_time,r11,r12,r13,r21,r22,r23,r31,r32,r33\n");
    for r in &summary.runs {
        let settle = r
            .settle_time
            .map(|t| format!("{t:.16e}"))
            .unwrap_or_default();
        let entries: Vec<String> = r
            .r_hat0
            .to_row_major()
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect();
        w.push_str(&format!(
            "{},{},{:.16e},{settle},{}\n",
            r.index,
            r.outcome,
            r.final_trace_error,
            entries.join(",")
        ));
    }
    write_atomic(&out.join("runs.csv"), w.as_bytes())?;
    let aggregate = Aggregate {
        scenario: &summary.scenario,
        n_runs: summary.n_runs,
        seed: summary.seed,
        converged: summary.converged,
        converged_fraction: summary.converged_fraction,
        anti_aligned: summary.anti_aligned,
        outcomes: &summary.outcomes,
        median_settle_time: summary.median_settle_time,
        worst_final_error: summary.worst_final_error,
    };
    write_json(&out.join("aggregate.json"), &aggregate)?;
    write_atomic(
        &out.join("config.json"),
        format!("{canonical}\n").as_bytes(),
    )?;
    let all = summary.converged == summary.n_runs;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "montecarlo",
        trajectory_schema: CSV_SCHEMA,
        config_sha256: sha256_hex(canonical.as_bytes()),
        seed: config.seed,
        started_at,
        finished_at,
        wall_time_s: wall,
        outcome: if all {
            "all_converged"
        } else {
            "not_all_converged"
        }
        .into(),
        metrics: &aggregate,
        files: vec![
            "runs.csv".into(),
            "aggregate.json".into(),
            "config.json".into(),
        ],
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    if !quiet {
        println!(
            "{}: {}/{} converged, {} anti-aligned, worst final trace error {:.3e}",
            summary.scenario,
            summary.converged,
            summary.n_runs,
            summary.anti_aligned,
            summary.worst_final_error
        );
    }
    Ok(if all {
        0
    } else {
        outcome_code(Outcome::Stalled)
    })
}

fn cmd_export_piball(trajectory: &Path, out: &Path, quiet: bool) -> Result<u8, Failure> {
    let file = fs::File::open(trajectory)
        .with_context(|| format!("opening {}", trajectory.display()))
        .map_err(|e| Failure::new(EXIT_MALFORMED, e))?;
    let rows = read_rows_csv(file).map_err(|e| Failure::new(EXIT_MALFORMED, e))?;
    let points = piball_points(&rows).map_err(|e| Failure::new(EXIT_MALFORMED, e))?;
    let mut buf = Vec::new();
    write_piball_csv(&mut buf, &points).map_err(anyhow::Error::from)?;
    write_atomic(out, &buf)?;
    if !quiet {
        println!("wrote {} points to {}", points.len(), out.display());
    }
    Ok(0)
}

fn cmd_presets(show: Option<&str>) -> Result<u8, Failure> {
    match show {
        Some(name) => {
            let config = preset(name).map_err(sim_failure)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&config).map_err(anyhow::Error::from)?
            );
        }
        None => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
    }
    Ok(0)
}

fn init_logging(quiet: bool) {
    let mut builder =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet {
            "error"
        } else {
            "warn"
        }));
    let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
    if no_color || !std::io::stderr().is_terminal() {
        builder.write_style(env_logger::WriteStyle::Never);
    }
    builder.init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.quiet);
    let result = match &cli.command {
        Command::Run { source, out } => cmd_run(source, out, cli.quiet),
        Command::Montecarlo { source, runs, out } => cmd_montecarlo(source, *runs, out, cli.quiet),
        Command::ExportPiball { trajectory, out } => cmd_export_piball(trajectory, out, cli.quiet),
        Command::Presets { show } => cmd_presets(show.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
