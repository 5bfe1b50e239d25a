use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stormbench::commands::{self, RunArgs};
use stormbench::config::{ServiceConfig, RUN_DIR_ENV};
use stormbench_engine::registry::DescriptorError;

#[derive(Parser)]
#[command(name = "stormbench", version, about = "Software-defined interference test bench")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the control service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Listen address, overriding the config.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Record a scheduled link trial without the service.
    Run {
        /// Scene file or preset name (scenario1, scenario2, scenario3).
        #[arg(long)]
        scene: String,
        #[arg(long)]
        schedule: PathBuf,
        /// Link settings file; defaults to QPSK framing.
        #[arg(long)]
        link: Option<PathBuf>,
        #[arg(long, env = RUN_DIR_ENV, default_value = "runs")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Store per-window symbol captures.
        #[arg(long)]
        capture: bool,
    },
    /// Check a waveform descriptor file.
    Validate { descriptor: PathBuf },
    /// Recompute ASER and KLD of a recorded run from its captures.
    Metrics {
        #[arg(long)]
        run: String,
        #[arg(long, env = RUN_DIR_ENV, default_value = "runs")]
        runs: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        // a closed pipe (e.g. `| head`) is not an error
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Cmd) -> anyhow::Result<ExitCode> {
    let mut out = std::io::stdout().lock();
    match command {
        Cmd::Serve { config, bind } => {
            let mut cfg = match config {
                Some(path) => ServiceConfig::load(&path)?,
                None => ServiceConfig::default(),
            }
            .with_env();
            if let Some(bind) = bind {
                cfg.bind = bind;
            }
            tokio::runtime::Runtime::new()?.block_on(stormbench::api::serve(cfg))?;
        }
        Cmd::Run { scene, schedule, link, out: dir, seed, capture } => {
            let args = RunArgs { scene: &scene, schedule: &schedule, link: link.as_deref(), out: &dir, seed, capture };
            let manifest = commands::run(&args)?;
            let metrics = stormbench_engine::datalog::load_metrics(&dir, &manifest.run_id)?;
            for r in &metrics {
                writeln!(
                    out,
                    "t={:>8} throughput={:>10.1} bit/s aser={:.4} kld={} on={:?}",
                    r.timestamp,
                    r.throughput,
                    r.aser,
                    r.kld.map_or("-".into(), |k| format!("{k:.4}")),
                    r.context.waveform_ids
                )?;
            }
            writeln!(out, "{}", dir.join(&manifest.run_id).display())?;
        }
        Cmd::Validate { descriptor } => match commands::validate(&descriptor)? {
            Ok(d) => writeln!(out, "ok: {} ({} parameters)", d.waveform_name, d.parameters.len())?,
            Err(DescriptorError::Parse(msg)) => {
                eprintln!("parse error: {msg}");
                return Ok(ExitCode::FAILURE);
            }
            Err(DescriptorError::Invalid(report)) => {
                for v in &report.violations {
                    writeln!(out, "{:?} at '{}': {}", v.code, v.path, v.message)?;
                }
                return Ok(ExitCode::FAILURE);
            }
        },
        Cmd::Metrics { run, runs } => {
            for w in commands::metrics(&runs, &run)? {
                writeln!(out, "{}", serde_json::to_string(&w)?)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
