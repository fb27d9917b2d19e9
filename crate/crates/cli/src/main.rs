mod artifacts;
mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use tsxai_core::analytics::SignalPreset;

use artifacts::{RunDir, RunManifest};
use commands::{Context, ExplainKind};
use config::{ConfigFile, PipelineConfig, Strategy};
use failure::Failure;

/// Trains random-net ensembles on a price series, explains them along the
/// time axis and backtests the resulting signals.
#[derive(Debug, Parser)]
#[command(name = "tsxai", version)]
struct Cli {
    /// Flat TOML config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $TSXAI_OUT or ./tsxai-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Price column in the input CSV.
    #[arg(long, global = true)]
    column: Option<String>,
    /// Use the column as is instead of taking log-returns.
    #[arg(long, global = true)]
    no_transform: bool,
    #[arg(long, global = true)]
    lags: Option<usize>,
    /// Last in-sample date (YYYY-MM-DD).
    #[arg(long, global = true)]
    split: Option<NaiveDate>,
    /// Hidden layer sizes, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, global = true)]
    members: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read prices, build the lagged dataset and its scaling.
    Ingest,
    /// Train the ensemble on the in-sample rows.
    Train,
    /// Write per-member sensitivities and their ensemble mean, sigma and t-statistic.
    Explain {
        #[arg(long, value_enum)]
        kind: ExplainKind,
    },
    /// Exit signals and drift report from the mean LPD.
    Signals {
        /// btc-rm, fraud or sp-crisis.
        #[arg(long)]
        preset: Option<SignalPreset>,
    },
    /// Member, mean and buy-and-hold curves with metrics.
    Backtest {
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
        #[arg(long)]
        preset: Option<SignalPreset>,
    },
    /// Summary of fits, heuristic weights, correlations and backtests.
    Report,
}

impl Cli {
    fn overrides(&self) -> ConfigFile {
        let (preset, strategy) = match &self.command {
            Command::Signals { preset } => (*preset, None),
            Command::Backtest { strategy, preset } => (*preset, *strategy),
            _ => (None, None),
        };
        ConfigFile {
            data: self.data.clone(),
            column: self.column.clone(),
            transform: self.no_transform.then_some(config::Transform::None),
            lags: self.lags,
            split: self.split,
            hidden: self.hidden.clone(),
            max_epochs: self.max_epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
            members: self.members,
            preset,
            strategy,
            out: self.out.clone(),
            ..ConfigFile::default()
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = PipelineConfig::resolve(file.overlay(cli.overrides()))?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let ctx = Context {
        dir: RunDir::new(cfg.out.clone()),
        cfg,
    };
    std::fs::create_dir_all(ctx.dir.root())?;

    let previous = RunManifest::load(&ctx.dir);
    let mut recorded = None;
    let name = match &cli.command {
        Command::Ingest => {
            commands::ingest(&ctx)?;
            "ingest"
        }
        Command::Train => {
            commands::train(&ctx)?;
            "train"
        }
        Command::Explain { kind } => {
            commands::explain(&ctx, *kind)?;
            "explain"
        }
        Command::Signals { .. } => {
            recorded = Some(commands::signals(&ctx)?);
            "signals"
        }
        Command::Backtest { .. } => {
            commands::backtest(&ctx)?;
            "backtest"
        }
        Command::Report => {
            commands::report(&ctx)?;
            "report"
        }
    };

    let mut signal_presets = previous.map(|m| m.signal_presets).unwrap_or_default();
    if let Some((preset, signal)) = recorded {
        signal_presets.insert(preset, signal);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: ctx.cfg.hash(),
        seeds: commands::seeds(&ctx).unwrap_or_default(),
        signal_presets,
        artifacts: ctx.dir.artifact_hashes()?,
        last_command: name.to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    ctx.dir.write_json(artifacts::MANIFEST, &manifest)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { failure::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
