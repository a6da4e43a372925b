//! Turn a run directory's CSV artifacts into standalone SVG charts: the
//! rate sweep becomes a log-log line chart, evaluation tables pool into a
//! success bar chart per method.
//!
//! Run with: `cargo run --release --example report_charts`

use trail::config::{
    DataConfig, EnvSpec, EvalConfig, ExperimentConfig, Method, ModelConfig,
};
use trail::envs::GridSpec;
use trail::pipeline::{eval, gen_data, imitate, report, sweep};

fn main() -> trail::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let base = ExperimentConfig {
        environment: EnvSpec::Gridworld(GridSpec::default_5x5()),
        method: Method::TrailTabular,
        data: DataConfig { m: 20_000, n: 50, expert_epsilon: 0.0 },
        model: ModelConfig::default(),
        eval: EvalConfig { episodes: 10, eval_seeds: 4, max_steps: 100 },
        seed: 0,
        out: dir.path().join("sweep"),
    };
    sweep(&base, &[100, 1000, 10_000], 50)?;

    // Two quick runs so the bar chart has something to compare.
    for method in [Method::TrailTabular, Method::Bc] {
        let cfg = ExperimentConfig {
            method,
            out: dir.path().join(method.name()),
            ..base.clone()
        };
        gen_data(&cfg)?;
        if method != Method::Bc {
            trail::pipeline::pretrain(&cfg)?;
        }
        imitate(&cfg)?;
        eval(&cfg)?;
    }

    let charts = report(dir.path())?;
    println!("charts written:");
    for chart in &charts {
        println!("  {}", chart.display());
    }
    let svg = std::fs::read_to_string(&charts[0])?;
    println!("\nfirst chart is {} bytes of standalone SVG", svg.len());
    Ok(())
}
