//! `bench`: benchmark harness for the bregsplit solvers.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bregsplit_cli::benchmark::{run_benchmark_from_config, run_equality_benchmark_from_config};
use bregsplit_cli::{
    compute_reference, generate_instance, CliError, ExperimentConfig, ReferenceSolution,
};

#[derive(Parser)]
#[command(name = "bench", about = "Primal-dual splitting benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Rows of the data matrix C
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Columns of C (problem dimension)
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Weight of the total-variation penalty
    #[arg(long, default_value_t = 0.1)]
    lam: f64,
    /// Seed of the instance sampler
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Commands {
    /// Run the fixed-step solvers on the main instance and write a CSV trace
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Iteration budget per solver
        #[arg(long, default_value_t = 20_000)]
        iters: u64,
        /// Log one CSV row every this many iterations
        #[arg(long = "log-every", default_value_t = 100)]
        log_every: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Reference solution JSON (computed internally when absent)
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// Iteration budget of the internally computed reference
        #[arg(long = "ref-budget", default_value_t = 400_000)]
        ref_budget: u64,
    },
    /// Run the fixed-step and line-search dual solvers on the
    /// equality-constrained instance and write a CSV trace
    Equality {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 20_000)]
        iters: u64,
        #[arg(long = "log-every", default_value_t = 100)]
        log_every: u64,
        /// Line-search trial growth factor
        #[arg(long = "theta-bar", default_value_t = 1.2)]
        theta_bar: f64,
        /// Line-search acceptance constant in (0, 1]
        #[arg(long, default_value_t = 0.99)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a gated reference solution and write it as JSON
    Reference {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Iteration budget before polishing
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(instance: &InstanceArgs, iters: u64, log_every: u64) -> ExperimentConfig {
    ExperimentConfig {
        m: instance.m,
        n: instance.n,
        lam: instance.lam,
        seed: instance.seed,
        iters,
        log_every,
        ..Default::default()
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Commands::Run {
            instance,
            iters,
            log_every,
            out,
            reference,
            ref_budget,
        } => {
            let cfg = config(&instance, iters, log_every);
            let loaded = match reference {
                Some(path) => Some(serde_json::from_slice::<ReferenceSolution>(&fs::read(
                    path,
                )?)?),
                None => None,
            };
            let (bench, reference) = run_benchmark_from_config(&cfg, loaded, ref_budget)?;
            fs::write(&out, bench.csv)?;
            eprintln!(
                "wrote {} (psi* = {:.12e}, kkt residual {:.3e}, solver time {:.2?})",
                out.display(),
                reference.psi_star,
                reference.kkt_residual,
                bench.elapsed
            );
        }
        Commands::Equality {
            instance,
            iters,
            log_every,
            theta_bar,
            delta,
            out,
        } => {
            let mut cfg = config(&instance, iters, log_every);
            cfg.theta_bar = theta_bar;
            cfg.delta = delta;
            let bench = run_equality_benchmark_from_config(&cfg)?;
            fs::write(&out, bench.csv)?;
            eprintln!(
                "wrote {} (psi* = {:.12e}, solver time {:.2?})",
                out.display(),
                bench.psi_star,
                bench.elapsed
            );
        }
        Commands::Reference {
            instance,
            budget,
            out,
        } => {
            let cfg = config(&instance, 0, 1);
            let inst = generate_instance(&cfg);
            let reference = compute_reference(&cfg, &inst, budget)?;
            let mut file = fs::File::create(&out)?;
            serde_json::to_writer(&mut file, &reference)?;
            file.write_all(b"\n")?;
            eprintln!(
                "wrote {} (psi* = {:.12e}, kkt residual {:.3e})",
                out.display(),
                reference.psi_star,
                reference.kkt_residual
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
