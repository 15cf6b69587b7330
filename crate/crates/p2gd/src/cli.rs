//! Command-line front end: run scenarios to machine-readable trace files,
//! compare the two variants, and execute the verification suite.
//!
//! Exit codes follow the trace outcome for `run` (0 when the ε-test
//! stopped the iteration, 2 on the step budget, 3 on a line-search
//! failure), 64 for invalid flags or parameter overrides, and 66 for an
//! unwritable output path. The `LOWRANK_SEED` environment variable is
//! reserved for future randomized scenarios; the built-in ones are fully
//! deterministic and ignore it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checks;
use crate::error::{Error, Result};
use crate::experiments::{run_comparison_with, scenario, ComparisonReport, Scenario, Variant};
use crate::solver::{RunTrace, Termination};
use crate::variety::{delta_rank, numerical_rank};
use crate::Matrix;

const EXIT_OK: i32 = 0;
const EXIT_INTERNAL: i32 = 1;
const EXIT_MAX_ITERS: i32 = 2;
const EXIT_BACKTRACK: i32 = 3;
const EXIT_USAGE: i32 = 64;
const EXIT_UNWRITABLE: i32 = 66;

#[derive(Debug, Parser)]
#[command(
    name = "p2gd",
    about = "Low-rank projected gradient descent with and without rank reduction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write a per-iteration trace file per variant.
    Run(RunArgs),
    /// Run both variants and print a side-by-side summary.
    Compare(CompareArgs),
    /// Execute the verification suite and print pass/fail per criterion.
    Check(CheckArgs),
}

/// Overrides for the scenario's documented parameters.
#[derive(Debug, Args, Default, Clone)]
struct Overrides {
    /// Rank-reduction threshold Δ (0 disables reduction).
    #[arg(long)]
    delta: Option<f64>,
    /// Stationarity stopping threshold ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Constant initial step size (sets both line-search bounds).
    #[arg(long)]
    alpha: Option<f64>,
    /// Backtracking reduction factor in (0, 1).
    #[arg(long)]
    beta: Option<f64>,
    /// Sufficient-decrease constant in (0, 1).
    #[arg(long)]
    c: Option<f64>,
    /// Step budget for the driver.
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario name: levin3x3, apoc2x2, side_a, or side_b.
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value_t = VariantChoice::Both)]
    variant: VariantChoice,
    #[command(flatten)]
    overrides: Overrides,
    /// Output path; defaults to `<scenario>.<variant>.<format>`. With
    /// `--variant both` the variant name is inserted before the extension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    overrides: Overrides,
    /// Optional path for the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Restrict to one scenario's criteria (default: the whole suite).
    #[arg(long)]
    scenario: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantChoice {
    P2gd,
    P2gdr,
    Both,
}

impl VariantChoice {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::P2gd => vec![Variant::P2gd],
            VariantChoice::P2gdr => vec![Variant::P2gdr],
            VariantChoice::Both => vec![Variant::P2gd, Variant::P2gdr],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Parse `args` (excluding the program name handling of clap: pass the full
/// argv) and execute; returns the process exit code.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Check(args) => cmd_check(&args),
    }
}

fn load_scenario(name: &str, overrides: &Overrides) -> Result<Scenario> {
    let mut s = scenario(name)?;
    if let Some(alpha) = overrides.alpha {
        s.params.alpha_lo = alpha;
        s.params.alpha_hi = alpha;
    }
    if let Some(beta) = overrides.beta {
        s.params.beta = beta;
    }
    if let Some(c) = overrides.c {
        s.params.c = c;
    }
    if let Some(delta) = overrides.delta {
        s.params.delta = delta;
    }
    if let Some(epsilon) = overrides.epsilon {
        s.params.epsilon = epsilon;
    }
    if let Some(max_iters) = overrides.max_iters {
        s.params.max_iters = max_iters;
    }
    s.params.validate()?;
    Ok(s)
}

fn usage_error(err: &Error) -> i32 {
    eprintln!("error: {err}");
    EXIT_USAGE
}

fn cmd_run(args: &RunArgs) -> i32 {
    let scenario = match load_scenario(&args.scenario, &args.overrides) {
        Ok(s) => s,
        Err(err) => return usage_error(&err),
    };
    let variants = args.variant.variants();
    let mut exit = EXIT_OK;
    for variant in variants.iter().copied() {
        let trace = match scenario.run(variant) {
            Ok(trace) => trace,
            Err(err) => {
                eprintln!("error: {err}");
                return EXIT_INTERNAL;
            }
        };
        let path = output_path(
            args.out.as_deref(),
            &scenario,
            variant,
            args.format,
            variants.len(),
        );
        let rendered = match render_trace(&scenario, variant, &trace, args.format) {
            Ok(text) => text,
            Err(err) => {
                eprintln!("error: {err}");
                return EXIT_INTERNAL;
            }
        };
        if let Err(io) = std::fs::write(&path, rendered) {
            eprintln!("error: cannot write {}: {io}", path.display());
            return EXIT_UNWRITABLE;
        }
        println!(
            "{} {}: {} iterates, {}, final s_f {:.3e} -> {}",
            scenario.name(),
            variant,
            trace.num_iterates(),
            trace.termination.as_str(),
            trace.final_s_f,
            path.display()
        );
        exit = exit.max(match trace.termination {
            Termination::EpsilonReached => EXIT_OK,
            Termination::MaxIters => EXIT_MAX_ITERS,
            Termination::BacktrackFailed => EXIT_BACKTRACK,
        });
    }
    exit
}

fn output_path(
    out: Option<&Path>,
    scenario: &Scenario,
    variant: Variant,
    format: Format,
    variant_count: usize,
) -> PathBuf {
    match out {
        None => PathBuf::from(format!(
            "{}.{}.{}",
            scenario.name(),
            variant,
            format.extension()
        )),
        Some(path) if variant_count == 1 => path.to_path_buf(),
        Some(path) => {
            // Insert the variant tag before the extension.
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| scenario.name().to_string());
            let ext = path
                .extension()
                .map(|e| e.to_string_lossy().into_owned())
                .unwrap_or_else(|| format.extension().to_string());
            path.with_file_name(format!("{stem}.{variant}.{ext}"))
        }
    }
}

/// One trace row; `alpha`, `backtracks`, and `branch_j` describe the step
/// that produced iterate `i` and are zero on the initial row.
struct Row {
    i: usize,
    f: f64,
    f_gap: f64,
    s_f: f64,
    dist_to_xstar: f64,
    rank: usize,
    delta_rank: usize,
    alpha: f64,
    backtracks: usize,
    branch_j: usize,
}

fn trace_rows(scenario: &Scenario, variant: Variant, trace: &RunTrace) -> Result<Vec<Row>> {
    let params = scenario.params_for(variant);
    let f_star = scenario.objective.known_min_value();
    let x_star = scenario.objective.known_minimizer();
    let mut rows = Vec::with_capacity(trace.num_iterates());
    for (i, x) in trace.iterates().enumerate() {
        let f = trace.f_at(i);
        let step = if i == 0 {
            None
        } else {
            Some(&trace.records[i - 1])
        };
        rows.push(Row {
            i,
            f,
            f_gap: f_star.map_or(f64::NAN, |fs| f - fs),
            s_f: trace.s_f_at(i),
            dist_to_xstar: x_star.map_or(f64::NAN, |xs| (x - xs).norm()),
            rank: numerical_rank(x, &scenario.spec)?,
            delta_rank: delta_rank(x, params.delta)?,
            alpha: step.map_or(0.0, |s| s.accepted_alpha),
            backtracks: step.map_or(0, |s| s.backtrack_count),
            branch_j: step.map_or(0, |s| s.branch_j),
        });
    }
    Ok(rows)
}

/// 17 significant decimal digits: enough to round-trip an `f64` exactly,
/// so traces can be diffed bit-for-bit by external tools.
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

pub const CSV_HEADER: &str =
    "i,f,f_gap,s_f,dist_to_xstar,rank,delta_rank,alpha,backtracks,branch_j";

fn render_trace(
    scenario: &Scenario,
    variant: Variant,
    trace: &RunTrace,
    format: Format,
) -> Result<String> {
    let rows = trace_rows(scenario, variant, trace)?;
    match format {
        Format::Csv => {
            let mut out = String::new();
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.i,
                    full_precision(r.f),
                    full_precision(r.f_gap),
                    full_precision(r.s_f),
                    full_precision(r.dist_to_xstar),
                    r.rank,
                    r.delta_rank,
                    full_precision(r.alpha),
                    r.backtracks,
                    r.branch_j
                );
            }
            Ok(out)
        }
        Format::Json => {
            let params = scenario.params_for(variant);
            let records: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "i": r.i,
                        "f": r.f,
                        "f_gap": r.f_gap,
                        "s_f": r.s_f,
                        "dist_to_xstar": r.dist_to_xstar,
                        "rank": r.rank,
                        "delta_rank": r.delta_rank,
                        "alpha": r.alpha,
                        "backtracks": r.backtracks,
                        "branch_j": r.branch_j,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "scenario": scenario.name(),
                "variant": variant.as_str(),
                "params": {
                    "alpha_lo": params.alpha_lo,
                    "alpha_hi": params.alpha_hi,
                    "beta": params.beta,
                    "c": params.c,
                    "delta": params.delta,
                    "epsilon": params.epsilon,
                    "max_iters": params.max_iters,
                    "max_backtracks": params.max_backtracks,
                },
                "termination": trace.termination.as_str(),
                "final_s_f": trace.final_s_f,
                "reduced_final_s_f": trace.reduced_final_s_f,
                "records": records,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
            text.push('\n');
            Ok(text)
        }
    }
}

fn matrix_line(m: &Matrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| format!("{}", m[(r, c)]))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

fn comparison_json(report: &ComparisonReport) -> serde_json::Value {
    let side = |o: &crate::experiments::VariantOutcome| {
        serde_json::json!({
            "variant": o.variant.as_str(),
            "iterates": o.trace.num_iterates(),
            "termination": o.trace.termination.as_str(),
            "limit_estimate": (0..o.limit_estimate.nrows())
                .map(|r| (0..o.limit_estimate.ncols())
                    .map(|c| o.limit_estimate[(r, c)])
                    .collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "limit_cost": o.limit_cost,
            "limit_s_f": o.limit_s_f,
            "reduced_limit_s_f": o.trace.reduced_final_s_f,
            "apocalypse": o.apocalypse_flag,
        })
    };
    serde_json::json!({
        "scenario": report.scenario,
        "p2gd": side(&report.p2gd),
        "p2gdr": side(&report.p2gdr),
    })
}

fn cmd_compare(args: &CompareArgs) -> i32 {
    let scenario = match load_scenario(&args.scenario, &args.overrides) {
        Ok(s) => s,
        Err(err) => return usage_error(&err),
    };
    let report = match run_comparison_with(&scenario) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_INTERNAL;
        }
    };
    println!("scenario: {}", report.scenario);
    println!(
        "limit costs: p2gd={} p2gdr={}",
        report.p2gd.limit_cost, report.p2gdr.limit_cost
    );
    println!(
        "limit s_f: p2gd={:e} p2gdr={:e}",
        report.p2gd.limit_s_f, report.p2gdr.limit_s_f
    );
    println!(
        "apocalypse: p2gd={} p2gdr={}",
        report.p2gd.apocalypse_flag, report.p2gdr.apocalypse_flag
    );
    for outcome in [&report.p2gd, &report.p2gdr] {
        println!(
            "{}: {} iterates, {}, limit {}",
            outcome.variant,
            outcome.trace.num_iterates(),
            outcome.trace.termination.as_str(),
            matrix_line(&outcome.limit_estimate)
        );
    }
    if let Some(path) = &args.out {
        let mut text =
            serde_json::to_string_pretty(&comparison_json(&report)).expect("serializable");
        text.push('\n');
        if let Err(io) = std::fs::write(path, text) {
            eprintln!("error: cannot write {}: {io}", path.display());
            return EXIT_UNWRITABLE;
        }
    }
    EXIT_OK
}

fn cmd_check(args: &CheckArgs) -> i32 {
    let results = match &args.scenario {
        Some(name) => {
            let scenario = match load_scenario(name, &args.overrides) {
                Ok(s) => s,
                Err(err) => return usage_error(&err),
            };
            checks::checks_for(&scenario, args.overrides.delta)
        }
        None => {
            // Overrides make no sense without a scenario to apply them to.
            let o = &args.overrides;
            if o.delta.is_some()
                || o.epsilon.is_some()
                || o.alpha.is_some()
                || o.beta.is_some()
                || o.c.is_some()
                || o.max_iters.is_some()
            {
                eprintln!("error: parameter overrides require --scenario");
                return EXIT_USAGE;
            }
            checks::run_all()
        }
    };
    let results = match results {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_INTERNAL;
        }
    };
    let mut first_failure = None;
    for c in &results {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} — {}", c.name, c.detail);
        if !c.passed && first_failure.is_none() {
            first_failure = Some(c.name.clone());
        }
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    match first_failure {
        None => EXIT_OK,
        Some(name) => {
            eprintln!("first failing criterion: {name}");
            EXIT_INTERNAL
        }
    }
}
