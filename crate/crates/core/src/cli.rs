//! Command-line front end: `run`, `sweep`, `plot` and `metrics`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::csvlog::{read_csv, to_csv_string};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::plot::{render, PlotKind};
use crate::scenario::load_scenario;
use crate::sim::run;
use crate::types::ScenarioSpec;

pub const THREADS_ENV: &str = "MRSAFE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "mrsafe",
    version,
    about = "Multi-robot predictive barrier-function simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Patch the scenario before validation, e.g. `gains.lambda=1.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Noise RNG seed (same as `--set sim.seed=N`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integration step in seconds (same as `--set sim.dt=X`).
    #[arg(long)]
    pub dt: Option<f64>,
}

impl ScenarioArgs {
    pub fn overrides(&self) -> Vec<String> {
        let mut out = self.set.clone();
        if let Some(seed) = self.seed {
            out.push(format!("sim.seed={seed}"));
        }
        if let Some(dt) = self.dt {
            out.push(format!("sim.dt={dt}"));
        }
        out
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write the log, metrics and plots.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        args: ScenarioArgs,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// Override path, e.g. `gains.lambda`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[command(flatten)]
        args: ScenarioArgs,
    },
    /// Render a log as SVG.
    Plot {
        log: PathBuf,
        /// Scenario the log was produced from (radii and obstacles).
        #[arg(long)]
        scenario: PathBuf,
        /// `traj` or `speed`.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        args: ScenarioArgs,
    },
    /// Recompute metrics from a log.
    Metrics {
        log: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: ScenarioArgs,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub log: PathBuf,
    pub metrics: PathBuf,
    pub traj: PathBuf,
    pub speed: PathBuf,
    pub report: MetricReport,
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn cmd_run(scenario: &Path, out_dir: &Path, overrides: &[String]) -> Result<RunArtifacts> {
    let spec = load_scenario(scenario, overrides)?;
    run_spec(&spec, out_dir)
}

fn run_spec(spec: &ScenarioSpec, out_dir: &Path) -> Result<RunArtifacts> {
    let log = run(spec)?;
    let csv = to_csv_string(&log);
    // plots come from the parsed CSV so that `plot` on the file reproduces them
    let parsed = read_csv(csv.as_bytes(), spec)?;
    let report = MetricReport::compute(&log, spec);

    let art = RunArtifacts {
        log: out_dir.join("log.csv"),
        metrics: out_dir.join("metrics.json"),
        traj: out_dir.join("traj.svg"),
        speed: out_dir.join("speed.svg"),
        report,
    };
    write_atomic(&art.log, csv.as_bytes())?;
    write_atomic(&art.metrics, art.report.to_json().as_bytes())?;
    write_atomic(&art.traj, render(PlotKind::Traj, &parsed, spec).as_bytes())?;
    write_atomic(
        &art.speed,
        render(PlotKind::Speed, &parsed, spec).as_bytes(),
    )?;
    Ok(art)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    /// `ok` or the error message of a failed run.
    pub status: String,
    pub report: Option<MetricReport>,
}

pub const SWEEP_HEADER: &str =
    "value,status,min_clearance,total_variation,goals_reached,collisions,fallback_steps";

impl SweepRow {
    fn csv_line(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        let fields: Vec<String> = match &self.report {
            Some(r) => vec![
                self.value.clone(),
                self.status.clone(),
                crate::csvlog::format_g9(r.min_clearance),
                crate::csvlog::format_g9(r.velocity_total_variation),
                r.goals_reached.to_string(),
                r.collisions.to_string(),
                r.fallback_steps.to_string(),
            ],
            None => {
                let mut v = vec![self.value.clone(), self.status.clone()];
                v.extend(std::iter::repeat_n(String::new(), 5));
                v
            }
        };
        w.write_record(&fields).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Directory name for one sweep value.
fn sweep_dir(param: &str, value: &str) -> String {
    let clean = |s: &str| {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect::<String>()
    };
    format!("{}={}", clean(param), clean(value))
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

pub fn cmd_sweep(
    scenario: &Path,
    param: &str,
    values: &[String],
    out_dir: &Path,
    overrides: &[String],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    // a bad path fails the same way for every value, so reject it up front
    let probe: Vec<String> = overrides
        .iter()
        .cloned()
        .chain([format!("{param}={}", values[0])])
        .collect();
    if let Err(e @ (Error::ScenarioNotFound(_) | Error::Parse { .. } | Error::Override(_))) =
        load_scenario(scenario, &probe)
    {
        return Err(e);
    }

    let one = |value: &String| -> SweepRow {
        let mut ov = overrides.to_vec();
        ov.push(format!("{param}={value}"));
        let dir = out_dir.join(sweep_dir(param, value));
        match cmd_run(scenario, &dir, &ov) {
            Ok(art) => SweepRow {
                value: value.clone(),
                status: "ok".into(),
                report: Some(art.report),
            },
            Err(e) => SweepRow {
                value: value.clone(),
                status: format!("error: {e}"),
                report: None,
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| values.par_iter().map(one).collect());

    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&r.csv_line());
    }
    write_atomic(&out_dir.join("sweep.csv"), table.as_bytes())?;
    Ok(rows)
}

pub fn cmd_plot(
    log_path: &Path,
    scenario: &Path,
    overrides: &[String],
    kind: &str,
    out: &Path,
) -> Result<()> {
    let kind: PlotKind = kind.parse()?;
    let spec = load_scenario(scenario, overrides)?;
    let log = read_csv(fs::File::open(log_path)?, &spec)?;
    write_atomic(out, render(kind, &log, &spec).as_bytes())
}

pub fn cmd_metrics(log_path: &Path, scenario: &Path, overrides: &[String]) -> Result<MetricReport> {
    let spec = load_scenario(scenario, overrides)?;
    let log = read_csv(fs::File::open(log_path)?, &spec)?;
    Ok(MetricReport::compute(&log, &spec))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ScenarioNotFound(_) | Error::Usage(_) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            args,
        } => {
            let art = cmd_run(&scenario, &out, &args.overrides())?;
            println!("{}", art.report);
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            args,
        } => {
            let rows = cmd_sweep(&scenario, &param, &values, &out, &args.overrides())?;
            print!(
                "{SWEEP_HEADER}\n{}",
                rows.iter().map(|r| r.csv_line()).collect::<String>()
            );
        }
        Command::Plot {
            log,
            scenario,
            kind,
            out,
            args,
        } => cmd_plot(&log, &scenario, &args.overrides(), &kind, &out)?,
        Command::Metrics {
            log,
            scenario,
            out,
            args,
        } => {
            let report = cmd_metrics(&log, &scenario, &args.overrides())?;
            println!("{report}");
            if let Some(path) = out {
                write_atomic(&path, report.to_json().as_bytes())?;
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
