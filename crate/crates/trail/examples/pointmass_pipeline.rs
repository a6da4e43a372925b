//! Continuous control end to end: on the 2-D point mass with a redundant
//! 4-channel actuator, pretrain the contrastive transition model, clone in
//! latent space, decode to raw controls — and compare against a Gaussian
//! behavioral clone fit on the same demonstrations.
//!
//! Run with: `cargo run --release --example pointmass_pipeline`

use trail::config::{
    DataConfig, EnvSpec, EvalConfig, ExperimentConfig, Method, ModelConfig, PointMassSpec,
};
use trail::pipeline::{eval, gen_data, imitate, pretrain, EvalSummary};

fn run(method: Method) -> trail::Result<EvalSummary> {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = ExperimentConfig {
        environment: EnvSpec::PointMass(PointMassSpec {
            action_dim: 4,
            dt: 0.2,
            noise_std: 0.01,
            bound: 1.0,
            gamma: 0.95,
            target: [0.5, 0.5],
        }),
        method,
        data: DataConfig { m: 4000, n: 400, expert_epsilon: 0.0 },
        model: ModelConfig {
            embed_dim: 4,
            hidden: vec![32, 32],
            steps: 2000,
            ..ModelConfig::default()
        },
        eval: EvalConfig { episodes: 20, eval_seeds: 4, max_steps: 40 },
        seed: 0,
        out: dir.path().to_path_buf(),
    };
    cfg.validate()?;
    gen_data(&cfg)?;
    if method != Method::Bc {
        pretrain(&cfg)?;
    }
    imitate(&cfg)?;
    Ok(eval(&cfg)?.0)
}

fn main() -> trail::Result<()> {
    for method in [Method::TrailEbm, Method::Bc] {
        let s = run(method)?;
        println!(
            "{:>9}: reached the target in {:.0}% of episodes, mean return {:+.3}",
            s.method,
            100.0 * s.success_mean,
            s.return_mean,
        );
    }
    Ok(())
}
