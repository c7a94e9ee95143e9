//! Experiment runner CLI.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clra_core::harness::{self, ExperimentConfig, NmseReport, ReportFormat};

#[derive(Parser)]
#[command(
    name = "clra",
    about = "Cascaded-channel estimation experiments for RIS-assisted MU-MIMO",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write a report.
    Run {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output report path.
        #[arg(long)]
        out: PathBuf,
        /// Report format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for trial execution (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file against the schema without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in noiseless exact-recovery check and print pass/fail.
    Demo {
        /// Trials per channel category.
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
            threads,
        } => run(config, out, &format, seed, threads),
        Command::Validate { config } => validate(config),
        Command::Demo { trials } => demo(trials),
    }
}

fn run(
    config_path: PathBuf,
    out: PathBuf,
    format: &str,
    seed: Option<u64>,
    threads: Option<usize>,
) -> ExitCode {
    let format: ReportFormat = match format.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut cfg = match ExperimentConfig::from_toml_file(&config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let report = match harness::run(&cfg) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    print_summary(&report);
    if let Err(e) = report.emit(format, &out) {
        eprintln!("write failed: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    println!("report written to {}", out.display());
    ExitCode::SUCCESS
}

fn print_summary(report: &NmseReport) {
    for point in &report.points {
        for stats in &point.estimators {
            println!(
                "{:>12}  {:7}  mean NMSE {:.4e}  (stderr {:.2e}, {} trials, rank recovery {:.1}%)",
                point.axis_label,
                stats.estimator.name(),
                stats.mean_nmse,
                stats.stderr_nmse,
                stats.trials,
                100.0 * stats.rank_recovery_rate
            );
        }
        if point.failed_trials > 0 {
            println!("{:>12}  {} failed trials", point.axis_label, point.failed_trials);
        }
    }
    if let Some(tp) = &report.two_phase {
        println!(
            "two-phase: {} slots/window, overhead {} + {} x {} = {} subframes/window",
            tp.slots_per_window,
            tp.full_training_subframes,
            tp.slots_per_window - 1,
            tp.reduced_training_subframes,
            tp.cumulative_overhead_per_window
        );
    }
}

fn validate(config_path: PathBuf) -> ExitCode {
    match ExperimentConfig::from_toml_file(&config_path) {
        Ok(cfg) => {
            let points = cfg.sweep.len();
            println!(
                "ok: {} sweep point(s), {} trials/point, estimators: {}",
                points,
                cfg.trials,
                cfg.estimators
                    .iter()
                    .map(|e| e.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn demo(trials: usize) -> ExitCode {
    match harness::demo_check(trials) {
        Ok(outcome) => {
            for (label, worst) in &outcome.per_category {
                println!(
                    "{:>10}: worst noiseless NMSE {:.3e}  [{}]",
                    label,
                    worst,
                    if *worst < 1e-12 { "pass" } else { "FAIL" }
                );
            }
            if outcome.pass {
                println!("demo: PASS");
                ExitCode::SUCCESS
            } else {
                println!("demo: FAIL");
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(e) => {
            eprintln!("demo failed: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
