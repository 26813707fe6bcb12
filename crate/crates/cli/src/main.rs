use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uvms_cli::commands;
use uvms_cli::server::{self, ServeOptions};
use uvms_cli::Failure;

#[derive(Parser)]
#[command(name = "uvms", version, about = "Bimanual UVMS teleoperation: server, scenarios, replay, analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the WebSocket session server until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record inbound messages to this input log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        telemetry: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this many ticks.
        #[arg(long)]
        max_ticks: Option<u64>,
    },
    /// Run a scripted scenario headless and write telemetry.
    Scenario {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        telemetry: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a recorded input log and write telemetry.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        telemetry: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize commanded-versus-actual tracking error in a telemetry file.
    Analyze {
        #[arg(long)]
        telemetry: PathBuf,
        /// Writes report.txt, report.json and time-series CSVs here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve {
            config,
            log,
            telemetry,
            port,
            seed,
            max_ticks,
        } => {
            let cfg = commands::load_config(config.as_deref(), seed)?;
            let telemetry = telemetry.or_else(|| cfg.telemetry.clone());
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::internal)?;
            runtime.block_on(async {
                let srv = server::start(
                    cfg,
                    ServeOptions {
                        port,
                        log,
                        telemetry,
                        max_ticks,
                    },
                )
                .await
                .map_err(Failure::BadInput)?;
                println!("listening on ws://{}/", srv.addr);
                let stop = srv.stop_handle();
                tokio::spawn(async move {
                    if tokio::signal::ctrl_c().await.is_ok() {
                        stop.stop();
                    }
                });
                let outcome = srv.join().await.map_err(Failure::Internal)?;
                println!(
                    "stopped after {} ticks ({} samples, {} dropped)",
                    outcome.ticks, outcome.stats.accepted_samples, outcome.stats.dropped_samples
                );
                Ok(())
            })
        }
        Command::Scenario {
            config,
            scenario,
            telemetry,
            out_dir,
            seed,
        } => {
            let summary = commands::scenario(
                config.as_deref(),
                scenario.as_deref(),
                telemetry.as_deref(),
                out_dir.as_deref(),
                seed,
            )?;
            println!(
                "{} steps, final grasp {}, telemetry {}",
                summary.run.records.len(),
                summary.run.records.last().map(|r| r.grasp.to_string()).unwrap_or_default(),
                summary.telemetry.display()
            );
            Ok(())
        }
        Command::Replay {
            log,
            config,
            telemetry,
            out_dir,
            seed,
        } => {
            let summary = commands::replay_log(
                config.as_deref(),
                &log,
                telemetry.as_deref(),
                out_dir.as_deref(),
                seed,
            )?;
            println!("{} steps, telemetry {}", summary.run.records.len(), summary.telemetry.display());
            Ok(())
        }
        Command::Analyze { telemetry, out_dir } => {
            let report = commands::analyze_file(&telemetry, out_dir.as_deref())?;
            print!("{}", report.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
