//! Head-to-head on the redundant gridworld: latent-action cloning vs vanilla
//! behavioral cloning, few expert demonstrations, plentiful suboptimal
//! offline data.
//!
//! The action space duplicates each cardinal move, and the duplication is
//! deliberately lopsided: the two moves pointing at the corner opposite the
//! goal get 31 copies each. The expert demonstrates from a fixed start;
//! evaluation starts anywhere. In states the demonstrations never visited,
//! vanilla cloning falls back to uniform over the 64 raw actions — mostly
//! walking into the far corner — while cloning in the recovered 4-way latent
//! space stays uniform over moves and random-walks back into demonstrated
//! territory.
//!
//! Run with: `cargo run --release --example headline_gridworld`

use trail::baselines::tabular_bc;
use trail::data::{generate_expert, generate_offline};
use trail::envs::{build_redundant_gridworld, Duplication, GridSpec};
use trail::latent::{compose, TabularDecoder};
use trail::mdp::{value_iteration, DistVector, TabularPolicy};
use trail::pipeline::eval_tabular;
use trail::reparam::{reparametrize_tabular, rows_from_counts};
use trail::theory::tabular_latent_bc;

const SEEDS: u64 = 10;
const EXPERT_N: usize = 50;
const OFFLINE_M: usize = 50_000;
const EPISODES: usize = 10;
const MAX_STEPS: usize = 40;

fn main() -> trail::Result<()> {
    // Demonstrations start in the center; evaluation starts uniformly.
    let data_spec = GridSpec {
        duplication: Duplication::PerMove([1, 31, 31, 1]),
        start: Some((2, 2)),
        ..GridSpec::default_5x5()
    };
    let eval_spec = GridSpec { start: None, ..data_spec.clone() };
    let gw = build_redundant_gridworld(&data_spec)?;
    let eval_gw = build_redundant_gridworld(&eval_spec)?;
    let (n_states, n_actions) = (gw.mdp.n_states(), gw.mdp.n_actions());
    println!(
        "redundant gridworld: {} free cells, {} raw actions, 4 moves, slip {}",
        n_states, n_actions, data_spec.slip_prob
    );
    let expert_pi = value_iteration(&gw.mdp, &gw.reward, 1e-10)?;
    let d_off = DistVector::uniform(n_states);

    let mut trail_success = Vec::new();
    let mut bc_success = Vec::new();
    println!("{:>5} {:>14} {:>14}", "seed", "trail-tabular", "bc");
    for seed in 0..SEEDS {
        let offline = generate_offline(&gw.mdp, &d_off, OFFLINE_M, seed)?;
        let expert = generate_expert(&gw.mdp, &expert_pi, EXPERT_N, seed)?;

        // TRAIL-tabular: cluster empirical transition rows into 4 latents,
        // decode with the offline joint, clone in latent space, compose.
        let counts = offline.transition_counts(n_states, n_actions)?;
        let rows = rows_from_counts(&counts);
        let weights = offline.pair_counts(n_states, n_actions)?;
        let reparam = reparametrize_tabular(&rows, 4, Some(&weights))?;
        let phi = reparam.model.phi;
        let decoder = TabularDecoder::from_joint(&weights, &phi)?;
        let latent = tabular_latent_bc(&expert, &phi)?;
        let trail_pi: TabularPolicy = compose(&decoder, &latent)?;

        let bc_pi = tabular_bc(&expert, n_states, n_actions)?;

        let t = eval_tabular(&eval_gw, &trail_pi, "trail-tabular", EPISODES, 1, MAX_STEPS, seed);
        let b = eval_tabular(&eval_gw, &bc_pi, "bc", EPISODES, 1, MAX_STEPS, seed);
        println!("{:>5} {:>14.2} {:>14.2}", seed, t.success_mean, b.success_mean);
        trail_success.push(t.success_mean);
        bc_success.push(b.success_mean);
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (trail_mean, bc_mean) = (mean(&trail_success), mean(&bc_success));
    println!("\nmean success over {SEEDS} seeds × {EPISODES} episodes:");
    println!("  trail-tabular: {trail_mean:.3}");
    println!("  bc:            {bc_mean:.3}");
    if bc_mean > 0.0 {
        println!("  ratio:         {:.2}x", trail_mean / bc_mean);
    } else {
        println!("  ratio:         (vanilla cloning never reached the goal)");
    }
    Ok(())
}
