//! The `softshift` command line: verification suites, trajectory runs,
//! and plot emission bound to files on disk.
//!
//! Exit codes: 0 when every sampled check satisfied its bound, 1 when at
//! least one check failed (the violating trial records go to standard
//! error), 2 on usage or configuration errors. Human-readable diagnostics
//! go to standard error; the report payload goes to `--out`, or to
//! standard output when `--out` is omitted.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::sampler::sample_gradient_instance;
use crate::harness::{run_suite, BMode, BetaMode, SampleConfig, Suite, SuiteReport};
use crate::icl::{run_trajectory, GDConfig, IclTask, StepSign, TrajectoryConfig, TrajectoryStep};
use crate::numkit::RngStream;
use crate::plot;

const DEFAULT_ETA: f64 = 1e-3;
const DEFAULT_STEPS: usize = 50;
/// How many violating records are echoed to standard error before the
/// rest collapse into a count.
const MAX_PRINTED_VIOLATIONS: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "softshift",
    version,
    about = "Softmax-regression target shifts, their certified bounds, and \
             gradient-vs-attention trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare the closed-form loss gradient against finite differences
    /// on randomly sampled instances.
    VerifyGradient(SuiteArgs),
    /// Check the elementary norm and exponential inequalities the bound
    /// chain is built from.
    VerifyFacts(SuiteArgs),
    /// Sample shift pairs and check every step of the bound chain, ending
    /// at the certificate, for one kind of shift.
    VerifyBounds {
        /// Which quantity moves: the weight vector (x) or the data
        /// matrix (a).
        #[arg(long, value_enum, default_value_t = ModeArg::X)]
        mode: ModeArg,
        /// Check the per-step chain only, skipping the end-to-end
        /// certificate; this lifts the R >= 4 requirement.
        #[arg(long)]
        lemmas: bool,
        #[command(flatten)]
        args: SuiteArgs,
    },
    /// Check that sampled softmax outputs stay above the floor
    /// exp(-R^2) used by the certified bounds.
    VerifyBeta(SuiteArgs),
    /// Run a gradient-descent trajectory and the matching attention-layer
    /// updates on one sampled task, dumping per-step records.
    Icl(IclArgs),
    /// Render a report or trajectory JSON file as an SVG scatter of
    /// measured values against their bounds.
    Plot {
        /// Report or trajectory JSON produced by the other subcommands.
        report: PathBuf,
        /// Write the SVG here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    X,
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BetaArg {
    /// Use the worst-case floor exp(-R^2).
    Floor,
    /// Use the smallest softmax entry actually observed on each pair.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Linear,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignArg {
    /// Move against the gradient, halving the step while the loss would
    /// increase.
    Descent,
    /// Apply the raw `x + eta * g` update with no safeguard.
    Plus,
}

impl From<BetaArg> for BetaMode {
    fn from(v: BetaArg) -> BetaMode {
        match v {
            BetaArg::Floor => BetaMode::Floor,
            BetaArg::Empirical => BetaMode::Empirical,
        }
    }
}

impl From<TaskArg> for IclTask {
    fn from(v: TaskArg) -> IclTask {
        match v {
            TaskArg::Linear => IclTask::Linear,
            TaskArg::Softmax => IclTask::Softmax,
        }
    }
}

impl From<SignArg> for StepSign {
    fn from(v: SignArg) -> StepSign {
        match v {
            SignArg::Descent => StepSign::Descent,
            SignArg::Plus => StepSign::Plus,
        }
    }
}

/// Options shared by every verification subcommand. Omitted values fall
/// back to the config file, then to the suite's defaults.
#[derive(Debug, Args)]
struct SuiteArgs {
    /// JSON file holding the same keys as the flags below; flags override
    /// its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Number of sampled trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed; trial i draws from an independent stream (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Region radius: spectral norm cap for matrices, l2 cap for weights.
    #[arg(long)]
    r: Option<f64>,
    /// Pin the output dimension instead of sampling it from a range.
    #[arg(long)]
    n: Option<usize>,
    /// Pin the input dimension instead of sampling it from a range.
    #[arg(long)]
    d: Option<usize>,
    /// Fraction of the admissible logit displacement each shift uses,
    /// strictly between 0 and 1.
    #[arg(long)]
    rho: Option<f64>,
    /// Softmax floor used inside the bounds.
    #[arg(long, value_enum)]
    beta: Option<BetaArg>,
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report encoding.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Also write an SVG scatter next to --out (same stem, .svg).
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Args)]
struct IclArgs {
    /// Task family to simulate.
    #[arg(long, value_enum, default_value_t = TaskArg::Linear)]
    task: TaskArg,
    /// JSON file holding the same keys as the flags below; flags override
    /// its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Step size.
    #[arg(long)]
    eta: Option<f64>,
    /// Number of steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Update rule for the gradient side.
    #[arg(long, value_enum, default_value_t = SignArg::Descent)]
    sign: SignArg,
    /// Pin the number of context examples (rows).
    #[arg(long)]
    n: Option<usize>,
    /// Pin the input dimension (columns).
    #[arg(long)]
    d: Option<usize>,
    /// Region radius for the sampled task and the per-step bounds.
    #[arg(long)]
    r: Option<f64>,
    /// Master seed for the sampled task.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the trajectory JSON here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write an SVG scatter next to --out (same stem, .svg).
    #[arg(long)]
    plot: bool,
}

/// The file-config mirror of the numeric flags. Unknown keys are
/// rejected so a typo cannot silently fall back to a default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    d: Option<usize>,
    #[serde(rename = "R", alias = "r")]
    r: Option<f64>,
    trials: Option<u64>,
    eta: Option<f64>,
    steps: Option<usize>,
    rho: Option<f64>,
    seed: Option<u64>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
    }
}

fn build_sample_config(suite: Suite, file: &FileConfig, args: &SuiteArgs) -> SampleConfig {
    let mut config = suite.default_config();
    if let Some(n) = args.n.or(file.n) {
        config.n_range = (n, n);
    }
    if let Some(d) = args.d.or(file.d) {
        config.d_range = (d, d);
    }
    if let Some(r) = args.r.or(file.r) {
        config.r = r;
    }
    if let Some(trials) = args.trials.or(file.trials) {
        config.trials = trials;
    }
    if let Some(seed) = args.seed.or(file.seed) {
        config.master_seed = seed;
    }
    if let Some(rho) = args.rho.or(file.rho) {
        config.step_fraction = rho;
    }
    if let Some(beta) = args.beta {
        config.beta_mode = beta.into();
    }
    config
}

fn write_payload(out: Option<&Path>, payload: &str) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, payload)?),
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}

/// Where the companion SVG goes: the report path with its extension
/// swapped for `.svg`. Requires `--out`, and refuses to overwrite the
/// report itself.
fn plot_path(out: Option<&Path>) -> Result<PathBuf> {
    let out = out.ok_or_else(|| {
        Error::InvalidConfig("--plot needs --out so the SVG has somewhere to go".into())
    })?;
    let svg = out.with_extension("svg");
    if svg == out {
        return Err(Error::InvalidConfig(format!(
            "--plot would overwrite the report {}; give --out a non-.svg extension",
            out.display()
        )));
    }
    Ok(svg)
}

fn run_verify(suite: Suite, args: &SuiteArgs) -> Result<i32> {
    let file = load_file_config(args.config.as_deref())?;
    let config = build_sample_config(suite, &file, args);
    let report = run_suite(suite, &config)?;

    let payload = match args.format {
        FormatArg::Json => report.to_json()?,
        FormatArg::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv writer emits utf-8")
        }
    };
    write_payload(args.out.as_deref(), &payload)?;
    if args.plot {
        let svg_path = plot_path(args.out.as_deref())?;
        fs::write(&svg_path, plot::emit_plot(&report))?;
        eprintln!("plot: {}", svg_path.display());
    }

    let s = &report.summary;
    eprintln!(
        "{}: trials={} violations={}{}",
        report.suite,
        report.records.len(),
        s.total_violations,
        s.max_rel_err
            .map(|e| format!(" max_rel_err={e:.3e}"))
            .unwrap_or_default(),
    );
    for (key, slack) in &s.min_slack_log {
        eprintln!("  min slack [{key}] = {slack:.6}");
    }

    if report.is_clean() {
        Ok(0)
    } else {
        let violators = report.violating_records();
        eprintln!("{} violating trial(s):", violators.len());
        for rec in violators.iter().take(MAX_PRINTED_VIOLATIONS) {
            eprintln!("{}", serde_json::to_string(rec)?);
        }
        if violators.len() > MAX_PRINTED_VIOLATIONS {
            eprintln!(
                "  ... and {} more",
                violators.len() - MAX_PRINTED_VIOLATIONS
            );
        }
        Ok(1)
    }
}

fn run_icl(args: &IclArgs) -> Result<i32> {
    let file = load_file_config(args.config.as_deref())?;
    let task: IclTask = args.task.into();

    let mut sample = SampleConfig::bounds_default();
    if let Some(n) = args.n.or(file.n) {
        sample.n_range = (n, n);
    }
    if let Some(d) = args.d.or(file.d) {
        sample.d_range = (d, d);
    }
    if let Some(r) = args.r.or(file.r) {
        sample.r = r;
    }
    if let Some(seed) = args.seed.or(file.seed) {
        sample.master_seed = seed;
    }
    sample.b_mode = match task {
        IclTask::Linear => BMode::Gaussian,
        IclTask::Softmax => BMode::Simplex,
    };
    sample.validate()?;

    let eta = args.eta.or(file.eta).unwrap_or(DEFAULT_ETA);
    let steps = args.steps.or(file.steps).unwrap_or(DEFAULT_STEPS);
    let sign: StepSign = args.sign.into();
    // Backtracking guards the descent rule; the raw plus rule is kept
    // observable, safeguards off.
    let gd = GDConfig::new(eta, steps, sign, sign == StepSign::Descent)?;
    let config = TrajectoryConfig {
        task,
        gd,
        r: sample.r,
    };

    let mut stream = RngStream::new(sample.master_seed, 0);
    let (a, x0, b) = sample_gradient_instance(&sample, &mut stream)?;
    let trajectory = run_trajectory(&a, &b, &x0, &config)?;

    let payload = serde_json::to_string_pretty(&trajectory)?;
    write_payload(args.out.as_deref(), &payload)?;
    if args.plot {
        let svg_path = plot_path(args.out.as_deref())?;
        fs::write(&svg_path, plot::emit_trajectory_plot(&trajectory))?;
        eprintln!("plot: {}", svg_path.display());
    }

    let last = trajectory.last().expect("trajectory includes step 0");
    eprintln!(
        "icl: task={:?} n={} d={} steps={} initial_loss={:.6e} final_loss={:.6e}",
        task,
        a.rows(),
        a.cols(),
        trajectory.len() - 1,
        trajectory[0].loss,
        last.loss,
    );

    let violators: Vec<&TrajectoryStep> = trajectory
        .iter()
        .filter(|s| match s.log_bound {
            Some(bound) => s.delta_b_norm > 0.0 && s.delta_b_norm.ln() > bound,
            None => false,
        })
        .collect();
    if violators.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} step(s) exceeded their bound:", violators.len());
        for step in violators.iter().take(MAX_PRINTED_VIOLATIONS) {
            eprintln!("{}", serde_json::to_string(step)?);
        }
        Ok(1)
    }
}

fn run_plot(report: &Path, out: Option<&Path>) -> Result<i32> {
    let text = fs::read_to_string(report)?;
    let svg = if text.trim_start().starts_with('[') {
        let steps: Vec<TrajectoryStep> = serde_json::from_str(&text)?;
        plot::emit_trajectory_plot(&steps)
    } else {
        plot::emit_plot(&SuiteReport::from_json(&text)?)
    };
    write_payload(out, &svg)?;
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::VerifyGradient(args) => run_verify(Suite::Gradient, args),
        Command::VerifyFacts(args) => run_verify(Suite::Facts, args),
        Command::VerifyBounds { mode, lemmas, args } => {
            let suite = match (mode, lemmas) {
                (ModeArg::X, false) => Suite::TheoremX,
                (ModeArg::A, false) => Suite::TheoremA,
                (ModeArg::X, true) => Suite::LemmasX,
                (ModeArg::A, true) => Suite::LemmasA,
            };
            run_verify(suite, args)
        }
        Command::VerifyBeta(args) => run_verify(Suite::Beta, args),
        Command::Icl(args) => run_icl(args),
        Command::Plot { report, out } => run_plot(report, out.as_deref()),
    }
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code. Factored off `run` so tests can drive the full binary logic
/// in-process.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

/// Entry point for `main`.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let file = FileConfig {
            trials: Some(5),
            seed: Some(9),
            r: Some(6.0),
            ..FileConfig::default()
        };
        let cli = parse(&["softshift", "verify-bounds", "--trials", "3", "--n", "4"]);
        let Command::VerifyBounds { args, .. } = &cli.command else {
            panic!("wrong subcommand");
        };
        let config = build_sample_config(Suite::TheoremX, &file, args);
        assert_eq!(config.trials, 3);
        assert_eq!(config.master_seed, 9);
        assert_eq!(config.r, 6.0);
        assert_eq!(config.n_range, (4, 4));
        assert_eq!(config.d_range, (1, 8));
    }

    #[test]
    fn file_config_rejects_unknown_keys_and_accepts_both_radius_spellings() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"trails": 3}"#).is_err());
        let upper: FileConfig = serde_json::from_str(r#"{"R": 5.0}"#).unwrap();
        let lower: FileConfig = serde_json::from_str(r#"{"r": 5.0}"#).unwrap();
        assert_eq!(upper.r, Some(5.0));
        assert_eq!(lower.r, Some(5.0));
    }

    #[test]
    fn radius_below_certificate_minimum_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("rpt.json");
        let code = run_from([
            "softshift",
            "verify-bounds",
            "--r",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }

    #[test]
    fn lemma_mode_accepts_small_radii() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("rpt.json");
        let code = run_from([
            "softshift",
            "verify-bounds",
            "--lemmas",
            "--r",
            "3",
            "--trials",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let report = SuiteReport::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report.suite, "lemmas_x");
        assert_eq!(report.records.len(), 4);
    }

    #[test]
    fn usage_errors_exit_2_and_help_exits_0() {
        assert_eq!(run_from(["softshift", "verify-bounds", "--bogus"]), 2);
        assert_eq!(run_from(["softshift", "frobnicate"]), 2);
        assert_eq!(run_from(["softshift", "--help"]), 0);
        assert_eq!(run_from(["softshift", "verify-bounds", "--help"]), 0);
    }

    #[test]
    fn gradient_report_and_companion_plot_land_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("grad.json");
        let code = run_from([
            "softshift",
            "verify-gradient",
            "--trials",
            "5",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
            "--plot",
        ]);
        assert_eq!(code, 0);
        let report = SuiteReport::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(report.summary.max_rel_err.unwrap() <= 1e-6);
        let svg = fs::read_to_string(dir.path().join("grad.svg")).unwrap();
        assert!(svg.starts_with("<?xml"));
    }

    #[test]
    fn plot_requires_out() {
        assert_eq!(
            run_from(["softshift", "verify-gradient", "--trials", "2", "--plot"]),
            2
        );
    }

    #[test]
    fn csv_format_writes_a_header() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("facts.csv");
        let code = run_from([
            "softshift",
            "verify-facts",
            "--trials",
            "3",
            "--format",
            "csv",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("trial_index,n,d,R,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn icl_linear_trajectory_dumps_and_plots() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("traj.json");
        let code = run_from([
            "softshift",
            "icl",
            "--task",
            "softmax",
            "--steps",
            "3",
            "--n",
            "4",
            "--d",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = fs::read_to_string(&out).unwrap();
        let steps: Vec<TrajectoryStep> = serde_json::from_str(&text).unwrap();
        assert_eq!(steps.len(), 4);
        let svg_out = dir.path().join("traj.svg");
        let code = run_from([
            "softshift",
            "plot",
            out.to_str().unwrap(),
            "--out",
            svg_out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(fs::read_to_string(&svg_out).unwrap().starts_with("<?xml"));
    }

    #[test]
    fn plot_subcommand_reads_suite_reports_too() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("beta.json");
        assert_eq!(
            run_from([
                "softshift",
                "verify-beta",
                "--trials",
                "3",
                "--out",
                out.to_str().unwrap(),
            ]),
            0
        );
        let svg_out = dir.path().join("beta.svg");
        assert_eq!(
            run_from([
                "softshift",
                "plot",
                out.to_str().unwrap(),
                "--out",
                svg_out.to_str().unwrap(),
            ]),
            0
        );
        let svg = fs::read_to_string(&svg_out).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn missing_report_file_is_a_config_error() {
        assert_eq!(run_from(["softshift", "plot", "/nonexistent/rpt.json"]), 2);
        assert_eq!(
            run_from([
                "softshift",
                "verify-beta",
                "--config",
                "/nonexistent/c.json"
            ]),
            2
        );
    }
}
