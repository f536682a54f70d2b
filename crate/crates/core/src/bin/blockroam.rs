use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blockroam::net::{
    export_metrics, replay_verify, run_session, BotSpec, Mode, NetError, Server, ServerConfig, SessionConfig,
    VerifyOutcome,
};
use blockroam::sim::{load_scenario, Scenario};

#[derive(Parser)]
#[command(name = "blockroam", version, about = "Blockchain-over-wireless game server and headless harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Host a multiplayer round over WebSocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        port: u16,
        /// Bot population as policy:count; repeatable.
        #[arg(long)]
        bots: Vec<BotSpec>,
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this many ticks.
        #[arg(long)]
        ticks: Option<u64>,
        /// Write the replay log here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run ticks as fast as possible instead of 10 per second.
        #[arg(long)]
        turbo: bool,
    },
    /// Run a headless round with bots only.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        ticks: u64,
        #[arg(long, required = true)]
        bots: Vec<BotSpec>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pace ticks at 10 per second.
        #[arg(long)]
        realtime: bool,
    },
    /// Re-simulate a replay log and compare it byte for byte.
    Verify {
        #[arg(long)]
        log: PathBuf,
    },
    /// Derive score tables from a replay log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Scenario { path: PathBuf, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })
}

fn scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut s = load_scenario(&read(path)?).map_err(|e| CliError::Scenario { path: path.to_owned(), message: e.to_string() })?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write_metrics(log: &str, out: &Path) -> Result<(), CliError> {
    let report = export_metrics(log)?;
    let (table, series) = report.write_csv(out)?;
    println!(
        "{} blocks validated in {} ticks ({:.2}/min); wrote {} and {}",
        report.chain_length,
        report.ticks,
        report.validated_per_minute,
        table.display(),
        series.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Cmd::Serve { scenario: path, port, bots, seed, ticks, out, turbo } => {
            let scenario = scenario(&path, seed)?;
            let config = ServerConfig {
                session: SessionConfig::with_bots(bots),
                mode: if turbo { Mode::Turbo } else { Mode::Realtime },
                max_ticks: ticks,
                replay_out: out,
            };
            let rt = tokio::runtime::Runtime::new()?;
            let summary = rt.block_on(async {
                let server = Server::bind(&format!("0.0.0.0:{port}")).await?;
                eprintln!("listening on ws://{}", server.local_addr()?);
                let stop = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                server.run_until(scenario, config, stop).await
            })?;
            println!("round ended at tick {} ({:?}), chain length {}", summary.ticks, summary.reason, summary.chain_length);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { scenario: path, ticks, bots, out, metrics, seed, realtime } => {
            let scenario = scenario(&path, seed)?;
            let mode = if realtime { Mode::Realtime } else { Mode::Turbo };
            let file = BufWriter::new(File::create(&out)?);
            let (_, summary) = run_session(scenario, SessionConfig::with_bots(bots), mode, ticks, file)?;
            println!(
                "ran {} ticks ({:?}), chain length {}; replay in {}",
                summary.ticks,
                summary.reason,
                summary.chain_length,
                out.display()
            );
            if let Some(m) = metrics {
                write_metrics(&read(&out)?, &m)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { log } => match replay_verify(&read(&log)?)? {
            VerifyOutcome::Pass { ticks } => {
                println!("PASS ({ticks} ticks)");
                Ok(ExitCode::SUCCESS)
            }
            VerifyOutcome::Fail { tick } => {
                println!("FAIL at tick {tick}");
                Ok(ExitCode::FAILURE)
            }
        },
        Cmd::Metrics { log, out } => {
            write_metrics(&read(&log)?, &out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
