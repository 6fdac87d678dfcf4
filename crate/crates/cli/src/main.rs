use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pas_cli::commands::{self, Outcome, RunContext};
use pas_cli::{CliError, CliResult, ExperimentConfig};
use pas_core::par::Execution;

#[derive(Parser, Debug)]
#[command(
    name = "pas",
    version,
    about = "Rate-loss-aware probabilistic amplitude shaping"
)]
struct Cli {
    /// TOML experiment config; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Empirical ADM rate loss against block length.
    Rateloss,
    /// Net AIR against launch power for every shaping scheme.
    Airsweep,
    /// Train a sequential model and write its trace.
    Train,
    /// Compare analytic and finite-difference gradients.
    Gradcheck,
    /// Run the built-in invariant checks.
    Selftest,
    /// ESS trellis parameters and induced marginal.
    EssInfo,
    /// ADM encode/decode roundtrip statistics.
    AdmRoundtrip,
}

fn context(cli: &Cli) -> CliResult<RunContext> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut ctx = RunContext::new(config);
    ctx.config_path = cli.config.clone();
    if let Some(s) = cli.seed {
        ctx.seed = s;
    }
    ctx.out = cli.out.clone();
    match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(1) => ctx.exec = Execution::Sequential,
        #[cfg(not(feature = "parallel"))]
        Some(_) => ctx.exec = Execution::Sequential,
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        None => {}
    }
    Ok(ctx)
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    let ctx = context(cli)?;
    let outcome = match cli.command {
        Command::Rateloss => commands::cmd_rateloss(&ctx),
        Command::Airsweep => commands::cmd_airsweep(&ctx),
        Command::Train => commands::cmd_train(&ctx),
        Command::Gradcheck => commands::cmd_gradcheck(&ctx),
        Command::Selftest => commands::cmd_selftest(&ctx),
        Command::EssInfo => commands::cmd_ess_info(&ctx),
        Command::AdmRoundtrip => commands::cmd_adm_roundtrip(&ctx),
    }?;
    match &cli.out {
        Some(p) => std::fs::write(p, &outcome.csv).map_err(|source| CliError::Output {
            path: p.display().to_string(),
            source,
        })?,
        None => {
            let _ = std::io::stdout().write_all(outcome.csv.as_bytes());
        }
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for m in &outcome.messages {
                eprintln!("{m}");
            }
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("FAIL {f}");
                }
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
