use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use duplex_qkd::duplex::FailurePolicy;
use duplex_qkd_cli::commands::{
    aggregate_table, cmd_compare, cmd_replay, cmd_run, cmd_sweep, render_table, sessions_table,
    to_json, write_run_outputs,
};
use duplex_qkd_cli::config::{
    FailurePolicyArg, OutputFormat, RunOverrides, SweepConfig, VariantArg,
};

#[derive(Debug, Parser)]
#[command(name = "dqkd", version, about = "Duplex and baseline BB84 simulations")]
struct Cli {
    /// Worker threads for session dispatch (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte Carlo sessions and report per-session and aggregate results.
    Run {
        #[command(flatten)]
        run: RunOverrides,
        /// Run only this session index (same seed stream as in a full run).
        #[arg(long)]
        session: Option<u32>,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
        /// Also write report.json, sessions.csv and aggregate.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Replay a recorded duplex transcript through filtering, pairing,
    /// verification and key extraction.
    Replay {
        transcript: PathBuf,
        #[arg(long, value_enum, default_value = "flip_triples")]
        variant: VariantArg,
        #[arg(long, value_enum, default_value = "abort_on_any")]
        failure_policy: FailurePolicyArg,
        #[arg(long, default_value_t = 0.0)]
        failure_threshold: f64,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Cross product of parameter lists, one aggregate row per cell.
    /// `--config` names a TOML file with base run settings and a [grid] table.
    Sweep {
        /// Intercept fractions to sweep, comma separated.
        #[arg(long = "grid-intercept", value_delimiter = ',')]
        grid_intercept: Vec<f64>,
        #[arg(long = "grid-flip", value_delimiter = ',')]
        grid_flip: Vec<f64>,
        #[arg(long = "grid-loss", value_delimiter = ',')]
        grid_loss: Vec<f64>,
        #[arg(long = "grid-timeslots", value_delimiter = ',')]
        grid_timeslots: Vec<usize>,
        #[command(flatten)]
        run: RunOverrides,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run duplex and BB84 with the same settings and compare key yield and
    /// detection.
    Compare {
        #[command(flatten)]
        run: RunOverrides,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
}

fn table_or_json<T: serde::Serialize>(
    format: OutputFormat,
    value: &T,
    table: impl FnOnce() -> duplex_qkd::stats::Table,
) -> Result<String> {
    match format.delimiter() {
        None => to_json(value),
        Some(d) => render_table(&table(), d),
    }
}

fn sweep_config(
    intercept: Vec<f64>,
    flip: Vec<f64>,
    loss: Vec<f64>,
    n_timeslots: Vec<usize>,
    run: RunOverrides,
) -> Result<SweepConfig> {
    let mut cfg = match &run.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading sweep config {}", path.display()))?;
            toml::from_str::<SweepConfig>(&text)
                .with_context(|| format!("parsing sweep config {}", path.display()))?
        }
        None => SweepConfig::default(),
    };
    cfg.base = run.apply(cfg.base)?;
    if !intercept.is_empty() {
        cfg.grid.intercept_fractions = intercept;
    }
    if !flip.is_empty() {
        cfg.grid.flip_probabilities = flip;
    }
    if !loss.is_empty() {
        cfg.grid.loss_probabilities = loss;
    }
    if !n_timeslots.is_empty() {
        cfg.grid.n_timeslots = n_timeslots;
    }
    cfg.fill_empty_axes();
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Run {
            run,
            session,
            format,
            out_dir,
        } => {
            let cfg = run.resolve()?;
            let report = cmd_run(&cfg, session)?;
            if let Some(dir) = out_dir {
                write_run_outputs(&report, &dir)?;
            }
            let out = match format.delimiter() {
                None => to_json(&report)?,
                Some(d) => {
                    let mut s = render_table(&aggregate_table(&[&report.aggregate]), d)?;
                    s.push('\n');
                    s.push_str(&render_table(&sessions_table(&report.sessions), d)?);
                    s
                }
            };
            print!("{out}");
        }
        Command::Replay {
            transcript,
            variant,
            failure_policy,
            failure_threshold,
            json,
        } => {
            let policy = match failure_policy {
                FailurePolicyArg::AbortOnAny => FailurePolicy::AbortOnAny,
                FailurePolicyArg::Threshold => FailurePolicy::Threshold(failure_threshold),
            };
            let report = cmd_replay(&transcript, variant, policy)?;
            if json {
                print!("{}", to_json(&report)?);
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Sweep {
            grid_intercept,
            grid_flip,
            grid_loss,
            grid_timeslots,
            run,
            format,
        } => {
            let cfg = sweep_config(grid_intercept, grid_flip, grid_loss, grid_timeslots, run)?;
            let result = cmd_sweep(&cfg)?;
            print!("{}", table_or_json(format, &result, || result.to_table())?);
        }
        Command::Compare { run, format } => {
            let cfg = run.resolve()?;
            let table = cmd_compare(&cfg)?;
            print!("{}", table_or_json(format, &table, || table.to_table())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
