use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ccs::report::{report_csv, report_json, to_json};
use ccs::scenario::{parse_scenario, Scenario, Suite};
use ccs::suite::{compute_quantity, convergence_study, run_suite, RunOptions, RunReport, Status};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Chern–Weil, transgression and character checks on discretized tori.
#[derive(Parser)]
#[command(name = "ccs", version)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads for running checks.
    #[arg(long, global = true, env = "CCS_WORKERS")]
    workers: Option<usize>,
    /// Include wall-clock timings in reports (makes them non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check of a scenario and print a summary.
    Verify {
        scenario: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single check and print its result as JSON.
    Compute {
        scenario: PathBuf,
        /// Suite name, e.g. `tertiary` or `chern_closedness`.
        #[arg(long)]
        quantity: String,
        #[arg(long)]
        p: Option<usize>,
    },
    /// Rerun every residual check over a refinement ladder.
    Converge {
        scenario: PathBuf,
        /// Comma-separated resolutions, at least three.
        #[arg(long, value_delimiter = ',', required = true)]
        ladder: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario and write the full report.
    Report {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("loading scenario {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
}

fn summary(report: &RunReport) {
    println!("scenario {} ({})", report.scenario.name, &report.config_hash[..12]);
    for c in &report.checks {
        let tag = match c.status {
            Status::Passed => "PASS",
            Status::Failed => "FAIL",
            Status::Recorded => "INFO",
            Status::Error => "ERR ",
        };
        let order = c
            .order
            .map(|o| match o.value() {
                Some(q) => format!(" order {q:.3}"),
                None => " order exact".into(),
            })
            .unwrap_or_default();
        print!(
            "{tag} [{}] {} p={} residual {} tol {:.1e}{order}",
            c.index,
            c.suite.name(),
            c.p,
            fmt_opt(c.residual),
            c.tolerance
        );
        if let Some(e) = &c.error {
            print!(" error: {e}");
        }
        println!();
    }
    println!(
        "{}",
        if report.all_passed {
            "all asserted checks passed"
        } else {
            "some asserted checks failed"
        }
    );
}

fn exit(report: &RunReport) -> ExitCode {
    if report.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let opts = RunOptions {
        workers: cli.run.workers,
        include_timings: cli.run.timings,
    };
    match cli.command {
        Command::Verify { scenario, out } => {
            let report = run_suite(&load(&scenario)?, &opts)?;
            summary(&report);
            if let Some(path) = out {
                write_out(Some(&path), &report_json(&report)?)?;
            }
            Ok(exit(&report))
        }
        Command::Compute { scenario, quantity, p } => {
            let Some(suite) = Suite::from_name(&quantity) else {
                let names: Vec<String> = Suite::ALL.iter().map(Suite::name).collect();
                bail!("unknown quantity '{quantity}'; expected one of: {}", names.join(", "));
            };
            let result = compute_quantity(&load(&scenario)?, suite, p, &opts)?;
            print!("{}", to_json(&result)?);
            Ok(if !result.asserted || result.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Converge { scenario, ladder, out } => {
            let report = convergence_study(&load(&scenario)?, &ladder, &opts)?;
            summary(&report);
            if let Some(path) = out {
                write_out(Some(&path), &report_json(&report)?)?;
            }
            Ok(exit(&report))
        }
        Command::Report { scenario, format, out } => {
            let report = run_suite(&load(&scenario)?, &opts)?;
            let text = match format {
                Format::Json => report_json(&report)?,
                Format::Csv => report_csv(&report)?,
            };
            write_out(out.as_deref(), &text)?;
            Ok(exit(&report))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
