//! `cvot`: rate scans, bound tables, reconciliation benchmarks and protocol runs.

mod commands;
mod output;
mod protocol;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use cvot::config::{ConfigError, ConfigFile};
use output::{Manifest, OutputDir};
use protocol::{ProtocolStatus, Role};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    ConfigFile(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Recon(#[from] cvot::recon::ReconError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ConfigFile(_) => 2,
            CliError::Io(_) | CliError::Recon(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cvot",
    version,
    about = "Continuous-variable oblivious transfer in the noisy-storage model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    common: Common,
    /// Play Alice, accepting one connection on ADDR.
    #[arg(long, value_name = "ADDR", conflicts_with = "connect")]
    listen: Option<String>,
    /// Play Bob, connecting to Alice at ADDR.
    #[arg(long, value_name = "ADDR")]
    connect: Option<String>,
    /// Use quadrature records from FILE instead of simulating them.
    #[arg(long, value_name = "FILE")]
    inject_records: Option<PathBuf>,
    /// Write the quadrature records to NAME in the output directory.
    #[arg(long, value_name = "NAME", num_args = 0..=1, default_missing_value = "records.bin")]
    dump_records: Option<String>,
    /// Write the message transcript to NAME in the output directory.
    #[arg(long, value_name = "NAME", num_args = 0..=1, default_missing_value = "transcript.bin")]
    transcript: Option<String>,
    /// Transfer random input strings instead of running randomized OT.
    #[arg(long)]
    ot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Secure rate over a grid of channel losses and storage rates.
    Rate(Common),
    /// Feasible (storage rate, transmissivity) region per encoding class.
    Region(Common),
    /// Min-entropy rate bounds as functions of the bin width.
    Bounds(Common),
    /// Frame error rates of the reconciliation code.
    ReconBench(Common),
    /// One protocol run, in process or across a TCP socket.
    Protocol(ProtocolArgs),
    /// Re-run a manifest and compare output digests.
    Replay {
        manifest: PathBuf,
        /// Directory for the regenerated outputs.
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// Outcome of a command that completed without a configuration error.
enum Finished {
    Ok,
    Protocol(ProtocolStatus),
    ReplayMismatch,
}

fn execute(
    command: &str,
    cfg: &ConfigFile,
    role: &Role,
    out_dir: &Path,
) -> Result<(Finished, Manifest), CliError> {
    let mut out = OutputDir::create(out_dir)?;
    let finished = match command {
        "rate" => commands::rate(cfg, &mut out).map(|_| Finished::Ok)?,
        "region" => commands::region(cfg, &mut out).map(|_| Finished::Ok)?,
        "bounds" => commands::bounds(cfg, &mut out).map(|_| Finished::Ok)?,
        "recon-bench" => commands::recon_bench(cfg, &mut out).map(|_| Finished::Ok)?,
        "protocol" => Finished::Protocol(protocol::run(cfg, role, &mut out)?),
        other => return Err(CliError::Config(format!("unknown command {other:?}"))),
    };
    if let Finished::Protocol(ProtocolStatus::Infeasible) = finished {
        // Nothing was run, so there is nothing to describe.
        return Ok((finished, Manifest::default()));
    }
    let mode = match role {
        Role::Both => None,
        r => Some(r.name().to_string()),
    };
    let manifest = out.finish(command, cfg, mode)?;
    Ok((finished, manifest))
}

fn replay(path: &Path, out_dir: &Path) -> Result<Finished, CliError> {
    let original = Manifest::load(path)?;
    if let Some(mode) = &original.mode {
        return Err(CliError::Config(format!(
            "{}: a socket run ({mode}) cannot be replayed in process",
            path.display()
        )));
    }
    let cfg = original.config_file();
    let (finished, manifest) = execute(&original.command, &cfg, &Role::Both, out_dir)?;
    let mut all_match = manifest.outputs.len() == original.outputs.len();
    for want in &original.outputs {
        let got = manifest.outputs.iter().find(|o| o.file == want.file);
        let ok = got.is_some_and(|g| g.sha256 == want.sha256);
        all_match &= ok;
        println!("{} {}", if ok { "match   " } else { "MISMATCH" }, want.file);
    }
    Ok(if all_match {
        finished
    } else {
        Finished::ReplayMismatch
    })
}

fn run(cli: Cli) -> Result<Finished, CliError> {
    let (name, common, role, mut extra) = match cli.command {
        Command::Rate(c) => ("rate", c, Role::Both, vec![]),
        Command::Region(c) => ("region", c, Role::Both, vec![]),
        Command::Bounds(c) => ("bounds", c, Role::Both, vec![]),
        Command::ReconBench(c) => ("recon-bench", c, Role::Both, vec![]),
        Command::Protocol(p) => {
            let role = match (p.listen, p.connect) {
                (Some(a), _) => Role::Alice(a),
                (_, Some(a)) => Role::Bob(a),
                _ => Role::Both,
            };
            let mut extra = Vec::new();
            if let Some(f) = p.inject_records {
                // Absolute, so that a manifest replays from any directory.
                let f = std::path::absolute(&f)?;
                extra.push(format!("inject_records={}", f.display()));
            }
            if let Some(n) = p.dump_records {
                extra.push(format!("dump_records={n}"));
            }
            if let Some(n) = p.transcript {
                extra.push(format!("transcript={n}"));
            }
            if p.ot {
                extra.push("ot=true".to_string());
            }
            ("protocol", p.common, role, extra)
        }
        Command::Replay { manifest, out } => return replay(&manifest, &out),
    };
    let mut overrides = common.set.clone();
    overrides.append(&mut extra);
    let cfg = settings::resolve(name, common.config.as_deref(), &overrides)?;
    Ok(execute(name, &cfg, &role, &common.out)?.0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Finished::Ok) | Ok(Finished::Protocol(ProtocolStatus::Done)) => ExitCode::SUCCESS,
        Ok(Finished::Protocol(ProtocolStatus::Aborted)) => ExitCode::from(3),
        Ok(Finished::Protocol(ProtocolStatus::Infeasible)) => ExitCode::from(4),
        Ok(Finished::ReplayMismatch) => {
            eprintln!("error: replayed outputs differ from the manifest");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
