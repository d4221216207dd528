use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use flitsim::config::ScenarioConfig;
use flitsim::experiment::{buffer_estimation_experiment, run_scenario, sweep, verify_routing};
use flitsim::report;
use flitsim::{Error, Result};

#[derive(Parser)]
#[command(name = "flitsim", version, about = "Packet-level InfiniBand fabric simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the config's out_dir, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the simulated duration in milliseconds.
    #[arg(long, global = true)]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Run the scenario for every (credits, parallel_sends) pair.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        credits: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        parallel_sends: Vec<u32>,
    },
    /// Estimate the switch input buffer from PortXmitWait.
    EstimateBuffer { config: PathBuf },
    /// Check every shift phase for links shared by two flows.
    VerifyRouting { config: PathBuf },
}

impl Command {
    fn config(&self) -> &Path {
        match self {
            Command::Run { config }
            | Command::Sweep { config, .. }
            | Command::EstimateBuffer { config }
            | Command::VerifyRouting { config } => config,
        }
    }
}

fn load(common: &Common, path: &Path) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(ms) = common.duration {
        cfg.duration_ms = ms;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ScenarioConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load(&cli.common, cli.command.config())?;
    let dir = out_dir(&cli.common, &cfg);
    match &cli.command {
        Command::Run { .. } => {
            let rep = run_scenario(&cfg)?;
            report::write_run(&rep, &dir)?;
            print!("{}", report::summary(&rep));
        }
        Command::Sweep {
            credits,
            parallel_sends,
            ..
        } => {
            if credits.is_empty() || parallel_sends.is_empty() {
                return Err(Error::config("--credits and --parallel-sends need values"));
            }
            let cells = sweep(&cfg, credits, parallel_sends)?;
            report::write_sweep(&cells, &cfg.echo(), &dir)?;
            for c in &cells {
                match &c.goodput_gbps {
                    Ok(g) => println!("C={} P={} goodput_gbps={g:.3}", c.credits, c.parallel_sends),
                    Err(e) => println!("C={} P={} failed: {e}", c.credits, c.parallel_sends),
                }
            }
        }
        Command::EstimateBuffer { .. } => {
            let est = buffer_estimation_experiment(&cfg)?;
            report::write_buffer_estimate(&est, &cfg.echo(), &dir)?;
            print!("{}", report::buffer_summary(&est));
        }
        Command::VerifyRouting { .. } => {
            let (topo, _, rep) = verify_routing(&cfg)?;
            report::write_routing(&topo, &rep, &dir)?;
            println!(
                "hosts={} phases={} conflicting_links={}",
                rep.hosts,
                rep.phases.len(),
                rep.conflicting_links()
            );
            if rep.conflicting_links() > 0 {
                print!("{}", report::routing_text(&topo, &rep));
            }
        }
    }
    info!("results in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| execute(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // a panic inside the model is a broken invariant
        Err(_) => ExitCode::from(4),
    }
}
