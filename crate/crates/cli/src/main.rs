use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gsopt_cli::check::cmd_check;
use gsopt_cli::report::cmd_report;
use gsopt_cli::solve::cmd_solve;
use gsopt_cli::synth::cmd_synth;
use gsopt_cli::{CliResult, Failure, RunConfig};
use gsopt_core::gcca::SyntheticSpec;
use gsopt_core::verify::{CheckOptions, Mutation};

#[derive(Parser)]
#[command(
    name = "gsopt",
    version,
    about = "Stochastic optimization on generalized Stiefel manifolds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    PenaltySign,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the solvers described by a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the verification suites.
    Check {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Inject a known defect; the affected suites should fail.
        #[arg(long, value_enum)]
        mutation: Option<MutationArg>,
    },
    /// Write planted two-view CCA data and its ground truth.
    Synth {
        /// View dimensions `n1,n2`.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize the metric files of a solve output directory.
    Report {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path.display(), e))?;
    let mut cfg =
        RunConfig::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if let Some(base) = path.parent() {
        cfg.resolve_paths(base);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Solve {
            config,
            seed,
            out,
            jobs,
        } => {
            let cfg = load_config(&config)?;
            let outcomes = cmd_solve(&cfg, seed, out.as_deref(), jobs)?;
            println!("{} runs finished", outcomes.len());
        }
        Cmd::Check {
            suite,
            seed,
            mutation,
        } => {
            let mut opts = CheckOptions::default();
            if let Some(s) = seed {
                opts.seed = s;
            }
            opts.mutation = mutation.map(|MutationArg::PenaltySign| Mutation::PenaltySign);
            cmd_check(suite.as_deref(), &opts)?;
        }
        Cmd::Synth {
            dims,
            rho,
            samples,
            seed,
            out,
        } => {
            if dims.len() != 2 {
                return Err(Failure::config(format!(
                    "--dims takes two values, got {}",
                    dims.len()
                )));
            }
            let spec = SyntheticSpec {
                dims: (dims[0], dims[1]),
                correlations: rho,
                n_samples: samples,
                seed,
            };
            cmd_synth(&spec, &out)?;
            println!("wrote {}", out.display());
        }
        Cmd::Report { dir, out } => {
            print!("{}", cmd_report(&dir, out.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gsopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
