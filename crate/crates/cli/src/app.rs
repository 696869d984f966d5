//! Argument parsing and subcommands.

use std::env;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use polarpark::certificates::{check_envelopes, EnvelopeReport, Suite};
use polarpark::{batch_run, Scenario, Termination, Trajectory};

use crate::certify;
use crate::error::{CliError, CliResult};
use crate::presets;
use crate::scenario_file::{self, ScenarioFile};
use crate::trace;

pub const OUT_DIR_ENV: &str = "POLARPARK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "polarpark",
    version,
    about = "Simulate polar-coordinate parking controllers and check their certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a preset or scenario file and write the trajectory CSV.
    Run(RunArgs),
    /// Re-check a stored trajectory CSV.
    Check(CheckArgs),
    /// List the built-in presets.
    ListPresets,
    /// Simulate several presets or scenario files in parallel.
    Batch(BatchArgs),
    /// Randomized checks of the Lyapunov certificates.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Thm3,
    Thm4,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Thm3 => Suite::Thm3,
            SuiteArg::Thm4 => Suite::Thm4,
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in preset name (see `list-presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Integration step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon in seconds.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Cutoff radius in meters.
    #[arg(long)]
    pub cutoff: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut scn: Scenario) -> Scenario {
        if let Some(dt) = self.dt {
            scn.dt = dt;
        }
        if let Some(t) = self.tmax {
            scn.t_max = t;
        }
        if let Some(c) = self.cutoff {
            scn.cutoff_rho = c;
        }
        scn
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Trajectory CSV path; defaults to `<name>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Envelope suite to check after the run.
    #[arg(long, value_enum)]
    pub check: Option<SuiteArg>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Trajectory CSV written by `run`.
    pub csv: PathBuf,
    #[arg(long, value_enum)]
    pub suite: SuiteArg,
    /// Scenario file; defaults to the `.scenario.json` written next to the CSV.
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Single-scenario preset the CSV was produced from.
    #[arg(long)]
    pub preset: Option<String>,
    /// Report path; the report is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Preset names or scenario file paths.
    #[arg(required = true)]
    pub items: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub check: Option<SuiteArg>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random states per property.
    #[arg(long, default_value_t = 10_000)]
    pub cases: usize,
}

/// Parses `args` (including the program name) and runs the command, returning
/// the process exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                1
            } else {
                let _ = write!(out, "{rendered}");
                0
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Run(a) => run(&a, out),
        Command::Check(a) => check(&a, out),
        Command::ListPresets => emit(out, &presets::listing()),
        Command::Batch(a) => batch(&a, out),
        Command::Certify(a) => certify_cmd(&a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

/// Resolves a relative output path against `POLARPARK_OUT_DIR` when set.
pub fn output_path(path: &Path) -> PathBuf {
    match env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_owned(),
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("scenario.json")
}

pub fn report_path(csv: &Path) -> PathBuf {
    csv.with_extension("report")
}

struct Job {
    label: String,
    scenario: Scenario,
    csv: PathBuf,
}

fn resolve(name: &str) -> CliResult<(String, Vec<Scenario>)> {
    if let Some(p) = presets::find(name) {
        return Ok((p.name.to_owned(), p.scenarios));
    }
    let path = Path::new(name);
    if path.extension().is_some() || path.exists() {
        let label = path.file_stem().map_or_else(
            || "scenario".to_owned(),
            |s| s.to_string_lossy().into_owned(),
        );
        return Ok((label, vec![scenario_file::load(path)?]));
    }
    Err(CliError::Usage(format!(
        "`{name}` is neither a preset nor a scenario file (see `list-presets`)"
    )))
}

fn source_scenarios(src: &Source) -> CliResult<(String, Vec<Scenario>)> {
    match (&src.preset, &src.scenario) {
        (Some(name), _) => presets::find(name)
            .map(|p| (p.name.to_owned(), p.scenarios))
            .ok_or_else(|| {
                CliError::Usage(format!("unknown preset `{name}` (see `list-presets`)"))
            }),
        (None, Some(path)) => {
            let label = path.file_stem().map_or_else(
                || "scenario".to_owned(),
                |s| s.to_string_lossy().into_owned(),
            );
            Ok((label, vec![scenario_file::load(path)?]))
        }
        (None, None) => Err(CliError::Usage(
            "one of --preset or --scenario is required".into(),
        )),
    }
}

/// `out.csv` for a single scenario; `out-00.csv`, `out-01.csv`, ... for a grid.
fn numbered(base: &Path, index: usize, count: usize) -> PathBuf {
    if count == 1 {
        return base.to_owned();
    }
    let stem = base
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{index:02}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{index:02}"),
    };
    base.with_file_name(name)
}

fn validated(scn: Scenario) -> CliResult<Scenario> {
    scn.validate()?;
    Ok(scn)
}

fn run_report(job: &Job, traj: &Trajectory, check: Option<&EnvelopeReport>) -> String {
    let mut s = String::new();
    let last = traj.last();
    let _ = writeln!(s, "name={}", job.label);
    let _ = writeln!(s, "controller={}", traj.scenario.controller.name());
    let _ = writeln!(s, "termination={}", termination_name(traj.termination));
    let _ = writeln!(s, "t_end={:e}", last.t);
    let _ = writeln!(s, "rho_end={:e}", last.polar.rho);
    let _ = writeln!(s, "samples={}", traj.samples.len());
    let _ = writeln!(s, "csv={}", job.csv.display());
    if let Some(r) = check {
        s.push_str(&r.to_string());
    }
    s
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Cutoff => "cutoff",
        Termination::Horizon => "horizon",
        Termination::DomainExit => "domain_exit",
        Termination::NumericalFault => "numerical_fault",
    }
}

/// Integrates all jobs, writes CSV, sidecar and report for each, and returns
/// the failures (faulted runs and failed checks).
fn run_jobs(jobs: &[Job], suite: Option<SuiteArg>, out: &mut dyn Write) -> CliResult<Vec<String>> {
    let scenarios: Vec<_> = jobs.iter().map(|j| j.scenario).collect();
    let results = batch_run(&scenarios);
    let mut failures = Vec::new();
    for (job, result) in jobs.iter().zip(results) {
        let traj = result?;
        if matches!(
            traj.termination,
            Termination::DomainExit | Termination::NumericalFault
        ) {
            failures.push(format!(
                "{}: run ended with {} at t={:e}; no csv written",
                job.label,
                termination_name(traj.termination),
                traj.last().t
            ));
            continue;
        }
        let report = suite
            .map(|s| check_envelopes(&traj, s.into()))
            .transpose()?;
        trace::write_atomic(&job.csv, &trace::render(&trace::rows(&traj)))?;
        let sidecar = ScenarioFile::from_scenario(&job.scenario).to_json();
        trace::write_atomic(&sidecar_path(&job.csv), &sidecar)?;
        let text = run_report(job, &traj, report.as_ref());
        trace::write_atomic(&report_path(&job.csv), &text)?;
        emit(out, &text)?;
        if let Some(r) = report.filter(|r| !r.passed()) {
            failures.push(format!(
                "{}: {} envelope check failed",
                job.label,
                r.suite.as_str()
            ));
        }
    }
    Ok(failures)
}

fn finish(failures: Vec<String>) -> CliResult<()> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failures.join("\n")))
    }
}

fn run(a: &RunArgs, out: &mut dyn Write) -> CliResult<()> {
    let (label, scenarios) = source_scenarios(&a.source)?;
    let base = output_path(
        &a.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{label}.csv"))),
    );
    let n = scenarios.len();
    let jobs = scenarios
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Job {
                label: if n == 1 {
                    label.clone()
                } else {
                    format!("{label}-{i:02}")
                },
                scenario: validated(a.overrides.apply(s))?,
                csv: numbered(&base, i, n),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    finish(run_jobs(&jobs, a.check, out)?)
}

fn batch(a: &BatchArgs, out: &mut dyn Write) -> CliResult<()> {
    let dir = output_path(a.out_dir.as_deref().unwrap_or(Path::new(".")));
    let mut jobs = Vec::new();
    for item in &a.items {
        let (label, scenarios) = resolve(item)?;
        let n = scenarios.len();
        for (i, s) in scenarios.into_iter().enumerate() {
            let label = if n == 1 {
                label.clone()
            } else {
                format!("{label}-{i:02}")
            };
            jobs.push(Job {
                csv: dir.join(format!("{label}.csv")),
                label,
                scenario: validated(a.overrides.apply(s))?,
            });
        }
    }
    finish(run_jobs(&jobs, a.check, out)?)
}

fn check_scenario(a: &CheckArgs) -> CliResult<Scenario> {
    if let Some(name) = &a.preset {
        let p = presets::find(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`")))?;
        return match p.scenarios.as_slice() {
            [s] => Ok(*s),
            _ => Err(CliError::Usage(format!(
                "preset `{name}` has {} scenarios; pass --scenario",
                p.scenarios.len()
            ))),
        };
    }
    let path = a.scenario.clone().unwrap_or_else(|| sidecar_path(&a.csv));
    scenario_file::load(&path)
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> CliResult<()> {
    let rows = trace::read(&a.csv)?;
    let scn = check_scenario(a)?;
    let traj = trace::to_trajectory(&rows, &scn).map_err(|msg| CliError::Csv {
        path: a.csv.clone(),
        msg,
    })?;
    let report = check_envelopes(&traj, a.suite.into())?;
    let text = format!("csv={}\n{report}", a.csv.display());
    if let Some(path) = &a.out {
        trace::write_atomic(&output_path(path), &text)?;
    }
    emit(out, &text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{}: {} envelope check failed",
            a.csv.display(),
            report.suite.as_str()
        )))
    }
}

fn certify_cmd(a: &CertifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let results = certify::run_suite(a.seed, a.cases);
    let mut text = format!("seed={}\n", a.seed);
    for r in &results {
        let _ = writeln!(text, "{r}");
    }
    emit(out, &text)?;
    let failed: Vec<_> = results
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "failed properties: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_outputs_are_numbered() {
        let base = Path::new("dir/out.csv");
        assert_eq!(numbered(base, 0, 1), PathBuf::from("dir/out.csv"));
        assert_eq!(numbered(base, 3, 5), PathBuf::from("dir/out-03.csv"));
        assert_eq!(numbered(Path::new("out"), 1, 2), PathBuf::from("out-01"));
    }

    #[test]
    fn companion_files_sit_next_to_the_csv() {
        let csv = Path::new("a/traj.csv");
        assert_eq!(sidecar_path(csv), PathBuf::from("a/traj.scenario.json"));
        assert_eq!(report_path(csv), PathBuf::from("a/traj.report"));
    }

    #[test]
    fn parse_errors_map_to_usage_status() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["polarpark", "frobnicate"], &mut o, &mut e), 1);
        assert_eq!(
            main_with(
                ["polarpark", "run", "--preset", "x", "--scenario", "y"],
                &mut o,
                &mut e
            ),
            1
        );
        assert_eq!(
            main_with(
                [
                    "polarpark",
                    "run",
                    "--preset",
                    "fig3-red",
                    "--check",
                    "thm9"
                ],
                &mut o,
                &mut e
            ),
            1
        );
        assert_eq!(main_with(["polarpark", "--help"], &mut o, &mut e), 0);
        assert!(String::from_utf8(o).unwrap().contains("list-presets"));
    }

    #[test]
    fn unknown_preset_is_a_usage_error() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(
            main_with(["polarpark", "run", "--preset", "fig9"], &mut o, &mut e),
            1
        );
        assert!(String::from_utf8(e).unwrap().contains("unknown preset"));
    }
}
