use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use locest_cli::config::{parse_unvalidated, ExperimentConfig, Num};
use locest_cli::{run, CliError, Command, Format, Report};

#[derive(Parser, Debug)]
#[command(name = "locest", version, about = "Worst-case threshold-quality location estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Per-θ quality and its worst case for the configured estimators.
    Quality(Flags),
    /// The S and T bounds applicable to the configured distribution.
    Bounds(Flags),
    /// Sumset averaging check for one-sample estimators on atoms.
    LemmaCheck(Flags),
    /// Truncation vs translation estimators on the trivalent tree.
    TreeDemo(Flags),
    /// Averaging an estimator on the circle into shift-invariant ones.
    CircleAvg {
        #[command(flatten)]
        flags: Flags,
        /// Density table, two columns `x,density` on [0, 1].
        #[arg(long)]
        density: Option<PathBuf>,
        #[arg(long)]
        gamma_grid: Option<usize>,
    },
    /// Every built-in scenario compared with its closed form or bound.
    PaperSuite(Flags),
}

#[derive(clap::Args, Debug, Default)]
struct Flags {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads for Monte Carlo; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Threshold; accepts decimals or `p/q`.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Count |e(x) - θ| = δ as a success.
    #[arg(long)]
    closed_interval: bool,
}

/// Config file, then flag overrides, then validation of the merged result.
fn load(command: Command, flags: &Flags, circle: Option<(&Option<PathBuf>, Option<usize>)>) -> Result<ExperimentConfig, CliError> {
    let source = match &flags.config {
        Some(path) => Some(
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut config = match &source {
        Some(text) => parse_unvalidated(text)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = config.command {
        if c != command {
            return Err(CliError::Io(format!("config is for `{c}` but `{command}` was requested")));
        }
    }
    config.command = Some(command);
    if let Some(s) = flags.seed {
        config.mc.seed = s;
    }
    if let Some(t) = flags.trials {
        config.mc.trials = t;
    }
    if let Some(t) = flags.threads {
        config.mc.parallelism = t;
    }
    if let Some(d) = &flags.delta {
        config.delta = Some(match d.parse::<f64>() {
            Ok(v) => Num::Float(v),
            Err(_) => Num::Text(d.clone()),
        });
    }
    if let Some(n) = flags.n {
        config.n = n;
    }
    if let Some(p) = &flags.out {
        config.output.path = Some(p.clone());
    }
    if let Some(f) = flags.format {
        config.output.format = f;
    }
    config.closed_interval |= flags.closed_interval;
    if let Some((density, gamma_grid)) = circle {
        if let Some(p) = density {
            config.circle.density = None;
            config.circle.density_file = Some(p.clone());
        }
        if let Some(g) = gamma_grid {
            config.circle.gamma_grid = g;
        }
    }
    match &source {
        Some(text) => config.validate_with_source(text)?,
        None => config.validate()?,
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let config = match &cli.command {
        Sub::Quality(f) => load(Command::Quality, f, None)?,
        Sub::Bounds(f) => load(Command::Bounds, f, None)?,
        Sub::LemmaCheck(f) => load(Command::LemmaCheck, f, None)?,
        Sub::TreeDemo(f) => load(Command::TreeDemo, f, None)?,
        Sub::CircleAvg { flags, density, gamma_grid } => load(Command::CircleAvg, flags, Some((density, *gamma_grid)))?,
        Sub::PaperSuite(f) => load(Command::PaperSuite, f, None)?,
    };

    let report = run(&config)?;
    let text = report.render(config.output.format);
    match &config.output.path {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            print!("{}", report.summary());
        }
        None => {
            print!("{text}");
            eprint!("{}", report.summary());
        }
    }
    Ok(match &report {
        Report::Suite(s) => s.all_pass,
        Report::Circle(c) => c.holds,
        Report::Lemma(l) => l.iter().all(|r| r.check.holds),
        _ => true,
    })
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        // ran fine, but a checked inequality failed
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
