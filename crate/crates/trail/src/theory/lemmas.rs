//! Single-inequality building blocks of the bounds.
//!
//! Each check computes the two sides of one inequality exactly and returns
//! them as `(lhs, rhs)` (or per-state pairs when the statement is
//! state-wise), so tests can assert `lhs ≤ rhs + slack` and inspect the gap.
//! Everything is closed-form arithmetic on tabular objects except the
//! empirical-estimation helpers at the bottom, which are Monte-Carlo.

use crate::latent::{compose, LatentMap, TabularDecoder, TabularLatent};
use crate::mdp::{
    chi2, policy_diff, state_visitation, transition_err, tv, DistVector, TabularMdp,
    TabularPolicy,
};
use crate::reparam::FactoredModel;
use crate::rng::{sample_index, stream, stream_rng};
use crate::theory::{
    check_latent_table, horizon, marginalize_policy, optimal_decoder,
};
use crate::{Error, Result};

/// Visitation gap bounded by the one-step model error: for any two policies,
/// `TV(d^{π2}, d^{π1}) ≤ γ/(1−γ) · Err_{d^{π1}}(π1, π2, T)` with `Err` the
/// quantity computed by [`transition_err`].
pub fn visitation_err_bound_check(
    mdp: &TabularMdp,
    pi1: &TabularPolicy,
    pi2: &TabularPolicy,
) -> Result<(f64, f64)> {
    let d1 = state_visitation(mdp, pi1)?;
    let lhs = policy_diff(mdp, pi2, pi1)?;
    let rhs = horizon(mdp.gamma()) * transition_err(&d1, pi1, pi2, mdp.transition())?;
    Ok((lhs, rhs))
}

/// Substituting an approximate transition table into the one-step error
/// costs at most the summed per-action TV gap between the tables:
/// `Err_d(π1, π2, T) ≤ Σ_s d(s) Σ_a TV(T(s,a) ‖ T̄(s,a)) + Err_d(π1, π2, T̄)`.
/// The first right-hand term is `|A| · E_{(s,a)∼d×Unif}[TV]`.
pub fn model_substitution_check(
    mdp: &TabularMdp,
    d: &DistVector,
    pi1: &TabularPolicy,
    pi2: &TabularPolicy,
    tbar: &[Vec<Vec<f64>>],
) -> Result<(f64, f64)> {
    let lhs = transition_err(d, pi1, pi2, mdp.transition())?;
    let mut shift = 0.0;
    for s in 0..mdp.n_states() {
        if d[s] == 0.0 {
            continue;
        }
        for a in 0..mdp.n_actions() {
            shift += d[s] * tv(mdp.row(s, a), &tbar[s][a])?;
        }
    }
    let rhs = shift + transition_err(d, pi1, pi2, tbar)?;
    Ok((lhs, rhs))
}

/// A factored table cannot tell two policies apart beyond their latent
/// marginals: `Err_d(π1, π2, T̄) ≤ Σ_s d(s) · TV(π1_Z(s) ‖ π2_Z(s))` when
/// `T̄(s'|s,a)` depends on `a` only through `φ(s,a)`.
pub fn factored_bottleneck_check(
    d: &DistVector,
    pi1: &TabularPolicy,
    pi2: &TabularPolicy,
    model: &FactoredModel,
) -> Result<(f64, f64)> {
    let dense = model.dense();
    let lhs = transition_err(d, pi1, pi2, &dense)?;
    let m1 = marginalize_policy(pi1, &model.phi)?;
    let m2 = marginalize_policy(pi2, &model.phi)?;
    let mut rhs = 0.0;
    for s in 0..d.len() {
        rhs += d[s] * tv(m1.row(s), m2.row(s))?;
    }
    Ok((lhs, rhs))
}

/// Exact identity: decoding a latent policy with the optimal decoder of any
/// joint table and marginalizing back returns the latent policy, provided
/// the policy only uses latents realized at each state. Returns the largest
/// absolute entry-wise deviation (round-off only; ≤ 1e-12 on valid input).
pub fn marginal_recovery_gap(
    d_joint: &[Vec<f64>],
    phi: &LatentMap,
    latent: &TabularLatent,
) -> Result<f64> {
    let alpha_star = optimal_decoder(d_joint, phi)?;
    let composed = compose(&alpha_star, latent)?;
    let back = marginalize_policy(&composed, phi)?;
    let mut gap = 0.0f64;
    for s in 0..latent.n_states() {
        for z in 0..latent.n_latent() {
            gap = gap.max((back.row(s)[z] - latent.row(s)[z]).abs());
        }
    }
    Ok(gap)
}

/// Swapping the optimal decoder for another moves the decoded latent
/// marginal by at most the worst per-latent decoder gap, state by state:
/// one `(lhs_s, rhs_s)` pair per state with
/// `lhs_s = TV(π_Z(s) ‖ marginal of (π_α ∘ π_Z) at s)` and
/// `rhs_s = max_{z realized at s} TV(π_α*(s,z) ‖ π_α(s,z))`. Valid when the
/// latent policy is supported on realized latents.
pub fn decode_perturbation_check(
    phi: &LatentMap,
    alpha_star: &TabularDecoder,
    decoder: &TabularDecoder,
    latent: &TabularLatent,
) -> Result<Vec<(f64, f64)>> {
    let composed = compose(decoder, latent)?;
    let back = marginalize_policy(&composed, phi)?;
    let mut out = Vec::with_capacity(latent.n_states());
    for s in 0..latent.n_states() {
        let lhs = tv(latent.row(s), back.row(s))?;
        let mut worst = 0.0f64;
        for z in 0..phi.n_latent() {
            if phi.realized(s, z) {
                worst = worst.max(tv(alpha_star.row(s, z), decoder.row(s, z))?);
            }
        }
        out.push((lhs, worst));
    }
    Ok(out)
}

/// Triangle assembly at the latent level: against any target latent policy,
/// `TV(target(s) ‖ decoded marginal(s))
///   ≤ max_{z realized at s} TV(π_α(s,z) ‖ π_α*(s,z)) + TV(target(s) ‖ π_Z(s))`,
/// state by state.
pub fn latent_triangle_check(
    phi: &LatentMap,
    alpha_star: &TabularDecoder,
    decoder: &TabularDecoder,
    latent: &TabularLatent,
    target: &TabularLatent,
) -> Result<Vec<(f64, f64)>> {
    let composed = compose(decoder, latent)?;
    let back = marginalize_policy(&composed, phi)?;
    let mut out = Vec::with_capacity(latent.n_states());
    for s in 0..latent.n_states() {
        let lhs = tv(target.row(s), back.row(s))?;
        let mut worst = 0.0f64;
        for z in 0..phi.n_latent() {
            if phi.realized(s, z) {
                worst = worst.max(tv(decoder.row(s, z), alpha_star.row(s, z))?);
            }
        }
        out.push((lhs, worst + tv(target.row(s), latent.row(s))?));
    }
    Ok(out)
}

/// Change of measure for a non-negative statistic:
/// `E_{ρ1}[h] ≤ (1 + √χ²(ρ1‖ρ2)) · √(E_{ρ2}[h²])` whenever `ρ1 ≪ ρ2`.
pub fn coverage_shift_check(
    rho1: &DistVector,
    rho2: &DistVector,
    h: &[f64],
) -> Result<(f64, f64)> {
    if h.len() != rho1.len() || rho1.len() != rho2.len() {
        return Err(Error::DimensionMismatch(format!(
            "statistic has {} entries, distributions have {} and {}",
            h.len(),
            rho1.len(),
            rho2.len()
        )));
    }
    assert!(
        h.iter().all(|&x| x >= 0.0 && x.is_finite()),
        "coverage_shift_check needs a non-negative finite statistic"
    );
    let lhs: f64 = rho1.as_slice().iter().zip(h).map(|(&p, &x)| p * x).sum();
    let second: f64 = rho2.as_slice().iter().zip(h).map(|(&p, &x)| p * x * x).sum();
    let rhs = (1.0 + chi2(rho1.as_slice(), rho2.as_slice())?.sqrt()) * second.sqrt();
    Ok((lhs, rhs))
}

/// Full assembly of the composed-policy bound in TV form, before any change
/// of measure or KL relaxation: with `π2 = π_α ∘ π_Z`,
///
/// `Diff(π2, π*) ≤ γ/(1−γ) · Σ_s d*(s) · [ Σ_a TV(T(s,a) ‖ T_Z(s,φ(s,a)))
///   + max_z TV(π_α*(s,z) ‖ π_α(s,z)) + TV(π_{*,Z}(s) ‖ π_Z(s)) ]`.
pub fn onpolicy_assembly_check(
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
    phi: &LatentMap,
    t_z: &[Vec<Vec<f64>>],
    alpha_star: &TabularDecoder,
    decoder: &TabularDecoder,
    latent: &TabularLatent,
) -> Result<(f64, f64)> {
    check_latent_table(t_z, mdp.n_states(), phi.n_latent())?;
    let d_star = state_visitation(mdp, pi_star)?;
    let composed = compose(decoder, latent)?;
    let lhs = policy_diff(mdp, &composed, pi_star)?;
    let target = marginalize_policy(pi_star, phi)?;
    let mut total = 0.0;
    for s in 0..mdp.n_states() {
        let ds = d_star[s];
        if ds == 0.0 {
            continue;
        }
        let mut t_term = 0.0;
        for a in 0..mdp.n_actions() {
            t_term += tv(mdp.row(s, a), &t_z[s][phi.z_of(s, a)])?;
        }
        let mut worst = 0.0f64;
        for z in 0..phi.n_latent() {
            if phi.realized(s, z) {
                worst = worst.max(tv(alpha_star.row(s, z), decoder.row(s, z))?);
            }
        }
        total += ds * (t_term + worst + tv(target.row(s), latent.row(s))?);
    }
    Ok((lhs, horizon(mdp.gamma()) * total))
}

/// Monte-Carlo mean of `TV(ρ ‖ ρ̂_n)` over `resamples` draws of `n` i.i.d.
/// samples from `ρ`.
pub fn empirical_tv_mean(rho: &DistVector, n: usize, resamples: usize, seed: u64) -> f64 {
    assert!(n > 0 && resamples > 0);
    let mut rng = stream_rng(seed, stream::EVAL);
    let inv = 1.0 / n as f64;
    let mut total = 0.0;
    for _ in 0..resamples {
        let mut counts = vec![0.0f64; rho.len()];
        for _ in 0..n {
            counts[sample_index(rho.as_slice(), &mut rng)] += 1.0;
        }
        total += 0.5
            * rho
                .as_slice()
                .iter()
                .zip(&counts)
                .map(|(&p, &c)| (p - c * inv).abs())
                .sum::<f64>();
    }
    total / resamples as f64
}

/// Distribution-free bound on the expected empirical-estimation gap for `k`
/// categories and `n` samples: `E[TV(ρ ‖ ρ̂_n)] ≤ ½ √(k/n)`.
pub fn empirical_tv_bound(k: usize, n: usize) -> f64 {
    0.5 * ((k as f64) / (n as f64)).sqrt()
}
