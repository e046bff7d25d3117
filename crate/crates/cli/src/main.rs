//! `fecg` — simulate multichannel maternal-abdominal recordings, map the
//! mutual information of every electrode against maternal/fetal references,
//! run the greedy channel-selection rules, and extract fetal components with
//! JADE.
//!
//! Exit codes: 0 success, 1 validation (arguments, config, malformed or
//! missing inputs), 2 runtime failure.

mod config;
mod manifest;
mod stages;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::ExperimentConfig;
use fecg_core::FecgError;
use manifest::RunRecorder;

#[derive(Parser)]
#[command(name = "fecg", version, about = "Abdominal ECG simulation, MI-based channel selection, and fetal extraction")]
struct Cli {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Montage override: monopolar or neighbor-differential.
    #[arg(long, global = true)]
    montage: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the abdominal mixture; writes recordings, per-channel
    /// maternal/fetal references, true VCGs, and true beat trains.
    Simulate,
    /// MI maps of each channel against its references.
    Mimap {
        #[arg(long)]
        recordings: PathBuf,
        #[arg(long)]
        maternal_refs: PathBuf,
        #[arg(long)]
        fetal_refs: Option<PathBuf>,
    },
    /// Run the configured maternal selection rule (and the fetal rule when
    /// selection.m > 0).
    Select {
        #[arg(long)]
        recordings: PathBuf,
    },
    /// Whiten + JADE on the selected channels and rank fetal components.
    Extract {
        #[arg(long)]
        recordings: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        /// Ground-truth fetal peak train (CSV) for F1 ranking.
        #[arg(long)]
        fetal_peaks: Option<PathBuf>,
        /// Shared fetal reference trace (CSV) for MI ranking.
        #[arg(long)]
        fetal_ref: Option<PathBuf>,
    },
    /// Detect maternal R-peaks and synthesize Frank reference leads.
    SynthRef {
        #[arg(long)]
        recordings: PathBuf,
        /// Detect on this channel instead of auto-picking.
        #[arg(long)]
        channel: Option<usize>,
        /// Frank template CSV (three columns); synthetic templates when
        /// omitted.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Chain simulate, mimap, select, extract.
    Pipeline {
        /// Comma-separated subset of stages to run.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(fe) = err.downcast_ref::<FecgError>() {
        return match fe {
            FecgError::InvalidParameter(_)
            | FecgError::DimensionMismatch(_)
            | FecgError::Parse(_) => 1,
            _ => 2,
        };
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    if let Ok(threads) = std::env::var("FECG_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not cap thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring invalid FECG_THREADS={threads:?}"),
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version print and exit cleanly; bad arguments are a
            // validation failure.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    // Configuration phase: any failure here is a validation error.
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(montage) = &cli.montage {
        cfg.simulation.montage = match montage.as_str() {
            "monopolar" => fecg_core::forward::Montage::Monopolar,
            "neighbor-differential" => fecg_core::forward::Montage::NeighborDifferential,
            other => anyhow::bail!("unknown montage {other:?}"),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_files(paths: &[&PathBuf]) -> anyhow::Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(
                FecgError::Parse(format!("input file {} does not exist", p.display())).into(),
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    let resolved = serde_json::to_value(cfg)?;
    let mut rec = RunRecorder::new(&out_dir, cfg.hash(), cfg.seed(), resolved)?;

    let result = match &cli.command {
        Command::Simulate => stages::stage_simulate(cfg, &mut rec).map(|_| ()),
        Command::Mimap {
            recordings,
            maternal_refs,
            fetal_refs,
        } => require_files(&[recordings, maternal_refs]).and_then(|()| {
            stages::stage_mimap(
                cfg,
                &mut rec,
                recordings,
                maternal_refs,
                fetal_refs.as_deref(),
            )
        }),
        Command::Select { recordings } => require_files(&[recordings])
            .and_then(|()| stages::stage_select(cfg, &mut rec, recordings).map(|_| ())),
        Command::Extract {
            recordings,
            selection,
            fetal_peaks,
            fetal_ref,
        } => require_files(&[recordings, selection]).and_then(|()| {
            stages::stage_extract(
                cfg,
                &mut rec,
                recordings,
                selection,
                fetal_peaks.as_deref(),
                fetal_ref.as_deref(),
            )
        }),
        Command::SynthRef {
            recordings,
            channel,
            templates,
        } => require_files(&[recordings]).and_then(|()| {
            stages::stage_synth_ref(cfg, &mut rec, recordings, *channel, templates.as_deref())
        }),
        Command::Pipeline { stages: list } => {
            let all: Vec<String> = stages::ALL_STAGES.iter().map(|s| s.to_string()).collect();
            let list = list.clone().unwrap_or(all);
            stages::stage_pipeline(cfg, &mut rec, &list)
        }
    };

    match result {
        Ok(()) => {
            let manifest = rec.finish(None)?;
            log::info!("manifest hash {}", manifest.manifest_hash);
            Ok(())
        }
        Err(e) => {
            // Halt with a partial manifest naming the failure.
            let _ = rec.finish(Some(format!("{e:#}")));
            Err(e)
        }
    }
}
