use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mobility_lab::pipeline::{cmd_bias_lab, cmd_estimate, cmd_panel, cmd_regress, cmd_report, cmd_simulate, Run};
use mobility_lab::Error;

#[derive(Parser)]
#[command(name = "mobility-lab", version, about = "Assortative mating, inequality and mobility laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form moments and synthetic microdata
    Simulate(Common),
    /// National trend tables from microdata
    Estimate(Common),
    /// Coresidence bias by age and the corrected estimator
    BiasLab(Common),
    /// Regional panel with split-half replicates
    Panel(Common),
    /// Regressions on the regional panel
    Regress(Common),
    /// Summary of an output directory
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Enables targets and check settings, and flags outputs made under another config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn set_threads(n: Option<usize>) -> Result<(), Error> {
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, f): (&Common, fn(&Run) -> mobility_lab::Result<_>) = match &cli.command {
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Estimate(c) => (c, cmd_estimate),
        Command::BiasLab(c) => (c, cmd_bias_lab),
        Command::Panel(c) => (c, cmd_panel),
        Command::Regress(c) => (c, cmd_regress),
        Command::Report(a) => {
            set_threads(a.threads)?;
            let run = a.config.as_ref().map(|p| Run::load(p, a.seed, a.out.clone())).transpose()?;
            let out = a
                .out
                .clone()
                .or_else(|| run.as_ref().map(|r| r.out.clone()))
                .unwrap_or_else(|| PathBuf::from("out"));
            return match cmd_report(&out, run.as_ref()) {
                Ok(None) => {
                    println!("nothing to report in {}", out.display());
                    Ok(())
                }
                Ok(Some(r)) => {
                    print!("{}", r.to_text());
                    Ok(())
                }
                Err(e) => Err(e),
            };
        }
    };
    set_threads(common.threads)?;
    let run = Run::load(&common.config, common.seed, common.out.clone())?;
    for line in f(&run)?.lines {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
