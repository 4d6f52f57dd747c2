use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twinbeam::runner::{self, Overrides};
use twinbeam::Result;

#[derive(Parser)]
#[command(name = "twinbeam", version, about = "Twin-beam ghost imaging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Pulse count (overrides the config).
    #[arg(long)]
    pulses: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo correlation run.
    Run(Common),
    /// Quadrature oracle curve.
    Oracle(Common),
    /// Pure / W / W' contrast matrix at z = f and z = 2f.
    Discriminate(Common),
    /// Photon-statistics checks.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Samples per test.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

fn load(c: &Common) -> Result<twinbeam::config::RunConfig> {
    let mut cfg = runner::load_config(&c.config)?;
    Overrides { seed: c.seed, pulses: c.pulses, out: c.out.clone() }.apply(&mut cfg)?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let workers = runner::workers_from_env()?;
            runner::run_experiment(&cfg, workers, false)?;
        }
        Command::Oracle(c) => {
            let out = runner::run_oracle(&load(&c)?)?;
            eprintln!("[twinbeam] oracle -> {}", out.file.display());
        }
        Command::Discriminate(c) => {
            let d = runner::discriminate(&load(&c)?)?;
            for (m, ok, why) in &d.verdicts {
                eprintln!("[twinbeam] {:<6} {}  {why}", m.name(), if *ok { "PASS" } else { "FAIL" });
            }
            eprintln!("[twinbeam] table -> {}", d.file.display());
        }
        Command::Stats { common, samples } => {
            let r = runner::stats(&load(&common)?, samples)?;
            eprintln!(
                "[twinbeam] gain {:.3}: beam p = {:.3}, pair p = {:.3}, difference variance {}",
                r.gain, r.beam_p_value, r.pair_p_value, r.pair_difference_variance
            );
            eprintln!("[twinbeam] stats -> {}", r.file.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twinbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
