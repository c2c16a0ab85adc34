use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, ValueEnum};
use lrfhss_core::channel::ChannelKind;
use lrfhss_harness::config::{Experiment, ExperimentConfig};
use lrfhss_harness::experiments::{run_capacity, run_decode, run_loopback, run_prr_sweep, RunOutput};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Loopback,
    Prr,
    Capacity,
    Decode,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChannelArg {
    Awgn,
    Fading,
    Los,
}

#[derive(Parser, Debug)]
#[command(name = "lrfhss", about = "LR-FHSS gateway receiver experiments")]
struct Cli {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_sic: bool,
    #[arg(long)]
    no_caed: bool,
    #[arg(long)]
    ideal_acquisition: bool,
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    /// Trace to decode (overrides `trace` in the config).
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<RunOutput> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    cfg.experiment = match cli.command {
        Command::Loopback => Experiment::Loopback,
        Command::Prr => Experiment::PrrSweep,
        Command::Capacity => Experiment::Capacity,
        Command::Decode => Experiment::Decode,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.no_sic {
        cfg.rx.sic = false;
    }
    if cli.no_caed {
        cfg.rx.caed = false;
    }
    if cli.ideal_acquisition {
        cfg.ideal_acquisition = true;
    }
    if let Some(c) = cli.channel {
        cfg.channel = match c {
            ChannelArg::Awgn => ChannelKind::Awgn,
            ChannelArg::Fading => ChannelKind::BlockFading,
            ChannelArg::Los => ChannelKind::LosDoppler,
        };
    }
    let out = match cfg.experiment {
        Experiment::Loopback => run_loopback(&cfg)?,
        Experiment::PrrSweep => run_prr_sweep(&cfg)?,
        Experiment::Capacity => run_capacity(&cfg)?,
        Experiment::Decode => {
            let Some(path) = cli.trace.or(cfg.trace.clone()) else {
                bail!("decode needs a trace (--trace or `trace` in the config)");
            };
            run_decode(&cfg, &path)?
        }
    };
    let dir = cli.out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    out.write(&dir)?;
    Ok(out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            for c in &out.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
