//! One pass over the supporting lemma checks, each on a random instance,
//! printing both sides of the inequality it certifies.
//!
//! These are the building blocks the headline bound is assembled from:
//! visitation perturbation, model substitution, marginal recovery, decoder
//! perturbation, coverage shift, and the finite-sample estimation rate.
//!
//! Run with: `cargo run --release --example lemma_suite`

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trail::rng::dirichlet_uniform;
use trail::theory::instances::{
    random_decoder, random_dist, random_full_support_policy, random_latent_map, random_mdp,
    random_offline_dist, random_realized_latent,
};
use trail::theory::lemmas::{
    coverage_shift_check, decode_perturbation_check, empirical_tv_bound, empirical_tv_mean,
    marginal_recovery_gap, model_substitution_check, visitation_err_bound_check,
};
use trail::theory::optimal_decoder;

fn main() -> trail::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (n_states, n_actions, n_latent) = (6, 4, 3);
    let mdp = random_mdp(n_states, n_actions, 0.9, &mut rng);
    let pi1 = random_full_support_policy(n_states, n_actions, &mut rng);
    let pi2 = random_full_support_policy(n_states, n_actions, &mut rng);

    let (lhs, rhs) = visitation_err_bound_check(&mdp, &pi1, &pi2)?;
    println!("visitation perturbation   {lhs:.6} ≤ {rhs:.6}");

    let tbar = random_mdp(n_states, n_actions, 0.9, &mut rng);
    let d = random_dist(n_states, &mut rng);
    let (lhs, rhs) = model_substitution_check(&mdp, &d, &pi1, &pi2, tbar.transition())?;
    println!("model substitution        {lhs:.6} ≤ {rhs:.6}");

    // Marginal recovery is an identity, not an inequality: decoding the
    // optimal decoder reproduces the marginalized policy exactly.
    let phi = random_latent_map(n_states, n_actions, n_latent, &mut rng);
    let d_off = random_offline_dist(n_states, &mut rng);
    let joint: Vec<Vec<f64>> = (0..n_states)
        .map(|s| dirichlet_uniform(n_actions, &mut rng).iter().map(|w| w * d_off[s]).collect())
        .collect();
    let latent = random_realized_latent(&phi, &mut rng);
    let gap = marginal_recovery_gap(&joint, &phi, &latent)?;
    println!("marginal recovery gap     {gap:e}");

    let alpha_star = optimal_decoder(&joint, &phi)?;
    let decoder = random_decoder(n_states, n_latent, n_actions, &mut rng);
    let (lhs, rhs) = decode_perturbation_check(&phi, &alpha_star, &decoder, &latent)?
        .into_iter()
        .fold((0.0f64, 0.0f64), |acc, (l, r)| (acc.0.max(l), acc.1.max(r)));
    println!("decoder perturbation      {lhs:.6} ≤ {rhs:.6}   (worst state)");

    let rho1 = random_dist(n_states, &mut rng);
    let rho2 = random_offline_dist(n_states, &mut rng);
    let h: Vec<f64> = (0..n_states).map(|_| 1.5).collect();
    let (lhs, rhs) = coverage_shift_check(&rho1, &rho2, &h)?;
    println!("coverage shift            {lhs:.6} ≤ {rhs:.6}");

    let rho = random_dist(23, &mut rng);
    for n in [100, 1000, 10_000] {
        let mean_tv = empirical_tv_mean(&rho, n, 500, n as u64);
        println!(
            "empirical TV (n = {n:>5})  {mean_tv:.6} ≤ {:.6}",
            empirical_tv_bound(23, n)
        );
    }
    Ok(())
}
