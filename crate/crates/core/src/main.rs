use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphridge::cli::{cmd_cv, cmd_dualcheck, cmd_estimate, cmd_lda, cmd_network, cmd_simulate, RunConfig};
use graphridge::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "graphridge", version, about = "Precision matrix estimation experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed, overriding the one in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Loss study on synthetic networks.
    Simulate,
    /// Fit one estimator to a data CSV.
    Estimate,
    /// Cross-validation surface for a data CSV.
    Cv,
    /// LDA misclassification study.
    Lda,
    /// Rolling-window partial-correlation networks of prices.
    Network,
    /// Numerical dual versus closed-form comparison.
    Dualcheck,
}

fn run(args: &Args) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let out = &args.out;
    pool.install(|| match args.command {
        Command::Simulate => cmd_simulate(&cfg.simulate, seed, out).map(drop),
        Command::Estimate => cmd_estimate(&cfg.estimate, seed, out).map(drop),
        Command::Cv => cmd_cv(&cfg.cv, seed, out).map(drop),
        Command::Lda => cmd_lda(&cfg.lda, seed, out).map(drop),
        Command::Network => cmd_network(&cfg.network, seed, out).map(drop),
        Command::Dualcheck => cmd_dualcheck(&cfg.dualcheck, seed, out).map(drop),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
