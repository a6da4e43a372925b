//! Thin command-line front end over the library pipeline. Every subcommand
//! maps onto one function in [`trail::pipeline`]; the `examples/` directory
//! shows the same operations as library calls.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trail::config::{ExperimentConfig, Overrides};
use trail::pipeline;

#[derive(Parser)]
#[command(name = "trail", version, about = "Latent-action imitation pipeline and bound checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file flag plus the model/eval overrides shared by the pipeline
/// stages.
#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    rff_dim: Option<usize>,
    /// Contrastive negatives per positive; 0 uses the rest of the batch.
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Backpropagate decoder loss into the pair encoder.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    joint_phi: Option<bool>,
    /// Refit the decoder on expert data after pretraining.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    finetune_decoder: Option<bool>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    eval_seeds: Option<usize>,
    /// Run directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> trail::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            embed_dim: self.embed_dim,
            rff_dim: self.rff_dim,
            negatives: self.negatives,
            steps: self.steps,
            lr: self.lr,
            batch: self.batch,
            seed: self.seed,
            joint_phi: self.joint_phi,
            finetune_decoder: self.finetune_decoder,
            episodes: self.episodes,
            eval_seeds: self.eval_seeds,
            out: self.out.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the offline and expert datasets into the run directory.
    GenData(RunArgs),
    /// Fit the factored transition model on the offline data.
    Pretrain(RunArgs),
    /// Fit the policy (latent cloning + decoding, or vanilla cloning).
    Imitate(RunArgs),
    /// Roll out the fitted policy and report success/return statistics.
    Eval(RunArgs),
    /// Check the exact suboptimality bounds on random instances.
    VerifyBound {
        /// Random instances per bound family.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/verify")]
        out: PathBuf,
    },
    /// Sweep expert sample sizes against the finite-sample rate bound.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated expert dataset sizes.
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        n_grid: Vec<usize>,
        /// Fresh datasets per sample size.
        #[arg(long, default_value_t = 200)]
        resamples: usize,
    },
    /// Chart the CSV artifacts under a directory as standalone SVGs.
    Report {
        /// Directory to scan (run directory or a parent of several).
        #[arg(default_value = "runs")]
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> trail::Result<()> {
    match cli.command {
        Command::GenData(args) => {
            let cfg = args.load()?;
            let manifest = pipeline::gen_data(&cfg)?;
            println!(
                "wrote {} offline / {} expert samples under {}",
                cfg.data.m,
                cfg.data.n,
                cfg.out.display()
            );
            println!("manifest: {}-manifest.json (config {})", manifest.command, &manifest.config_sha256[..12]);
        }
        Command::Pretrain(args) => {
            let cfg = args.load()?;
            let manifest = pipeline::pretrain(&cfg)?;
            println!("pretrained {} on {}", cfg.method.name(), cfg.out.join("offline.jsonl").display());
            for (name, path) in &manifest.artifacts {
                println!("  {name}: {path}");
            }
        }
        Command::Imitate(args) => {
            let cfg = args.load()?;
            let manifest = pipeline::imitate(&cfg)?;
            println!("fitted {} policy", cfg.method.name());
            for (name, path) in &manifest.artifacts {
                println!("  {name}: {path}");
            }
        }
        Command::Eval(args) => {
            let cfg = args.load()?;
            let (summary, _) = pipeline::eval(&cfg)?;
            println!(
                "{}: success {:.3} ± {:.3}, return {:.3} ± {:.3} ({} episodes × {} seeds)",
                summary.method,
                summary.success_mean,
                summary.success_stderr,
                summary.return_mean,
                summary.return_stderr,
                summary.episodes,
                summary.eval_seeds,
            );
        }
        Command::VerifyBound { instances, seed, out } => {
            let args = pipeline::VerifyArgs { instances, seed };
            let report = pipeline::verify_bound(&args, &out)?;
            println!(
                "all {} instances hold ({} composed-policy, {} linear-model); report: {}",
                report.theorem1.len() + report.theorem3.len(),
                report.theorem1.len(),
                report.theorem3.len(),
                out.join("verify-bound.json").display()
            );
        }
        Command::Sweep { run, n_grid, resamples } => {
            let cfg = run.load()?;
            let (report, _) = pipeline::sweep(&cfg, &n_grid, resamples)?;
            println!("{:>10}  {:>12}  {:>12}", "n", "mean_diff", "bound");
            for row in &report.rows {
                println!("{:>10}  {:>12.6}  {:>12.6}", row.n, row.mean_diff, row.bound);
            }
            match report.log_log_slope {
                Some(slope) => println!("log-log slope: {slope:.3}"),
                None => println!("log-log slope: undefined (a mean gap is zero)"),
            }
        }
        Command::Report { dir } => {
            let charts = pipeline::report(&dir)?;
            println!("wrote {} chart(s):", charts.len());
            for chart in &charts {
                println!("  {}", chart.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
