use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heatctl::cost_lab::{
    fit_cost_curve, linear_leg, load_config, read_csv, run_linear, run_selftest, run_semilinear, write_plot_data,
    write_report, write_resolved_config, ExperimentConfig, SweepReport, CONFIG_HELP,
};
use heatctl::Error;

/// Approximate control of the 1D semilinear heat equation and ε-sweeps of
/// the control cost.
#[derive(Parser)]
#[command(name = "heatctl", version, after_long_help = CONFIG_HELP)]
#[command(after_help = "Run `heatctl --help` for the configuration key reference.\n\
Exit codes: 0 success, 1 input or validation error, 2 numerical failure \
(including non-converged rows; all outputs are still written).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ε-sweep of the linear controller (the nonlinearity must be zero).
    Linear {
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ε-sweep of the semilinear controller.
    Semilinear {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both sweeps: linear/ (config with f = 0) and semilinear/ subdirectories.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the cost-growth models to a sweep CSV.
    Fit {
        csv: PathBuf,
        /// Where fit_<model>.dat go; defaults to the CSV's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invariant checks on small seeded problems.
    Selftest,
}

enum Outcome {
    Done,
    NumericalFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NumericalFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn prepare(config: &Path, out: Option<PathBuf>) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out {
        cfg.output.directory = dir.display().to_string();
    }
    let dir = PathBuf::from(&cfg.output.directory);
    write_resolved_config(&dir, &cfg)?;
    Ok((cfg, dir))
}

fn finish(dir: &Path, cfg: &ExperimentConfig, report: &SweepReport) -> Result<bool, Error> {
    let files = write_report(dir, cfg, report)?;
    println!("{} sweep: {} rows -> {}", report.kind.name(), report.rows.len(), files.csv.display());
    for (row, line) in report.rows.iter().zip(&report.log) {
        println!("  [{}] {line}", if row.converged { "ok" } else { "FAIL" });
    }
    for p in &files.plots {
        println!("  plot data {}", p.display());
    }
    if let Some(why) = &files.fit_note {
        println!("  no fit: {why}");
    }
    Ok(report.all_converged())
}

fn run(command: Command) -> Result<Outcome, Error> {
    let ok = match command {
        Command::Linear { config, out } => {
            let (cfg, dir) = prepare(&config, out)?;
            let report = run_linear(&cfg)?;
            finish(&dir, &cfg, &report)?
        }
        Command::Semilinear { config, out } => {
            let (cfg, dir) = prepare(&config, out)?;
            let report = run_semilinear(&cfg)?;
            finish(&dir, &cfg, &report)?
        }
        Command::Sweep { config, out } => {
            let (cfg, dir) = prepare(&config, out)?;
            let lin_cfg = linear_leg(&cfg);
            let lin = run_linear(&lin_cfg)?;
            let a = finish(&dir.join("linear"), &lin_cfg, &lin)?;
            let semi = run_semilinear(&cfg)?;
            let b = finish(&dir.join("semilinear"), &cfg, &semi)?;
            a && b
        }
        Command::Fit { csv, out } => {
            let rows = read_csv(&csv)?;
            let report = fit_cost_curve(&rows).map_err(|e| match e {
                Error::InsufficientData(m) => Error::Validation(vec![m]),
                e => e,
            })?;
            let dir = out.unwrap_or_else(|| csv.parent().map(Path::to_path_buf).unwrap_or_default());
            let files = write_plot_data(&report, &dir)?;
            print!("{report}");
            for p in files {
                println!("plot data {}", p.display());
            }
            true
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            checks.iter().all(|c| c.passed)
        }
    };
    Ok(if ok { Outcome::Done } else { Outcome::NumericalFailure })
}
