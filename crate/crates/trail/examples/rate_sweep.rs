//! Finite-sample behavior of latent cloning on the redundant gridworld:
//! resample `n` expert pairs, fit the count-based latent policy, measure the
//! exact visitation gap, and compare against the estimation-error bound.
//!
//! The printed log-log slope is close to −1/2 — the gap shrinks at the
//! square-root rate the bound predicts.
//!
//! Run with: `cargo run --release --example rate_sweep`

use trail::envs::{build_redundant_gridworld, GridSpec};
use trail::mdp::{value_iteration, DistVector};
use trail::theory::{log_log_slope, optimal_decoder, theorem2_sweep, uniform_joint};

fn main() -> trail::Result<()> {
    let gw = build_redundant_gridworld(&GridSpec::default_5x5())?;
    // A softened expert keeps every latent reachable, so the estimation
    // error — not support mismatch — dominates the measured gap.
    let expert = value_iteration(&gw.mdp, &gw.reward, 1e-10)?.soften(0.3);
    let d_off = DistVector::uniform(gw.mdp.n_states());
    let t_z = gw.ground_truth_t_z();
    let decoder = optimal_decoder(&uniform_joint(&d_off, gw.mdp.n_actions()), &gw.phi_star)?;

    let rows = theorem2_sweep(
        &gw.mdp,
        &expert,
        &d_off,
        &gw.phi_star,
        &t_z,
        &decoder,
        &[100, 1000, 10_000],
        200,
        0,
    )?;
    println!("{:>7}  {:>12}  {:>12}", "n", "mean gap", "bound");
    for row in &rows {
        println!("{:>7}  {:>12.6}  {:>12.4}", row.n, row.mean_diff, row.bound);
    }
    println!("\nlog-log slope of the mean gap: {:.3}", log_log_slope(&rows)?);
    Ok(())
}
