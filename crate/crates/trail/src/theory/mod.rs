//! Exact computation and verification of the crate's suboptimality bounds.
//!
//! On tabular instances every quantity the bounds mention — discounted
//! visitations, divergences, the transition/decoding/cloning error terms and
//! the constants in front of them — has a closed form. The functions here
//! evaluate both sides of each bound exactly and report whether the
//! inequality holds, so the analysis behind the pipeline is checked
//! number-for-number instead of by eyeball. [`lemmas`] holds the
//! single-inequality building blocks the bounds are assembled from, and
//! [`instances`] the random instance generators used to stress them.
//!
//! Three bound reports are produced:
//!
//! * [`theorem1_report`] — the composed-policy visitation gap against the
//!   three-term pretraining/decoding/cloning budget ([`BoundReport`]).
//! * [`theorem2_sweep`] — the expected gap of a count-based latent clone as
//!   a function of the expert sample size, against the same budget plus a
//!   `√(|Z||S|/n)` estimation term ([`SweepRow`]).
//! * [`theorem3_report`] — the deterministic-latent variant on exactly
//!   linear transition models, where the cloning term is replaced by the L1
//!   norm of an exact mean-squared-error gradient ([`LinearReport`]).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_expert, ExpertDataset};
use crate::latent::{compose, LatentMap, TabularDecoder, TabularLatent};
use crate::mdp::{
    chi2, kernel_visitation, kl, policy_diff, state_visitation, tv, DistVector, TabularMdp,
    TabularPolicy,
};
use crate::rng::{cell_rng, dirichlet_uniform, stream, stream_rng};
use crate::{Error, Result};

pub mod instances;
pub mod lemmas;

/// Additive slack used when asserting `lhs ≤ rhs`: absorbs round-off in the
/// visitation solves without masking a genuine violation.
pub const BOUND_SLACK: f64 = 1e-9;

/// Effective horizon multiplier `γ/(1−γ)`.
pub fn horizon(gamma: f64) -> f64 {
    assert!((0.0..1.0).contains(&gamma), "horizon needs γ in [0,1), got {gamma}");
    gamma / (1.0 - gamma)
}

/// Full term breakdown of the composed-policy suboptimality bound.
///
/// `rhs = c1·√(j_t/2) + c2·√(j_de_max/2) + c3·√(j_bc_kl/2)` and `lhs` is the
/// exact visitation gap of the composed policy, so `holds` is a statement
/// about computed numbers, not an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Transition-representation error
    /// `E_{(s,a)∼d_off}[KL(T(s,a) ‖ T_Z(s, φ(s,a)))]` with actions uniform.
    pub j_t: f64,
    /// Exact decoding term `E_{s∼d_off}[max_z KL(π_α*(s,z) ‖ π_α(s,z))]`,
    /// the max running over latents realized at `s`.
    pub j_de_max: f64,
    /// Decoding log-loss `E_{(s,a)∼d_off}[−log π_α(a | s, φ(s,a))]`, the
    /// trainable surrogate for `j_de_max`. Reported so the gap between the
    /// two is visible; no relation between them is asserted.
    pub j_de_nll: f64,
    /// Latent cloning error `E_{s∼d*}[KL(π_{*,Z}(s) ‖ π_Z(s))]`.
    pub j_bc_kl: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `χ²(d^π* ‖ d_off)`, the coverage penalty inside `c1` and `c2`.
    pub chi2: f64,
    /// Exact visitation gap between the composed policy and the target.
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs ≤ rhs + BOUND_SLACK`.
    pub holds: bool,
}

/// One row of a sample-size sweep: the Monte-Carlo mean visitation gap of
/// the count-based latent clone at expert sample size `n`, next to its
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub mean_diff: f64,
    pub bound: f64,
}

/// An exactly linear transition structure: `T(s'|s,a) = w(s')ᵀ φ(s,a)` with
/// `w` columns stochastic over states and each `φ(s,a)` in the `d`-simplex,
/// so every constructed row is automatically a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub d: usize,
    /// `w[s'][j]`; column `j` is a distribution over next states.
    pub w: Vec<Vec<f64>>,
    /// `phi[s][a]`, a point in the `d`-simplex.
    pub phi: Vec<Vec<Vec<f64>>>,
    /// Largest entry of `w` in absolute value.
    pub w_inf: f64,
    /// `¼ |S| ‖w‖_∞`, the constant of the gradient term.
    pub c4: f64,
}

/// Term breakdown of the deterministic-latent bound on a linear model.
///
/// `lhs` is the visitation gap of the chain induced by acting at the latent
/// level (`kernel(s'|s) = w(s')ᵀ θ_s`); `grad_term` carries the effective
/// horizon on top of `c4 · grad_l1`, which the one-step-to-visitation
/// argument requires even though the per-step statement does not show it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    pub lhs: f64,
    /// Transition term `c1·√(j_t/2)`; identically zero when the model is
    /// exactly linear.
    pub term2: f64,
    /// Decoding term `c2·√(j_de_max/2)` on the latents induced by exact
    /// embedding equality.
    pub term3: f64,
    /// L1 norm of the exact population-MSE parameter gradient.
    pub grad_l1: f64,
    /// `γ/(1−γ) · c4 · grad_l1`.
    pub grad_term: f64,
    pub c4: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// The joint over `(s, a)` induced by a state distribution with uniformly
/// random actions — the sampling scheme of the offline data generator.
pub fn uniform_joint(d_off: &DistVector, n_actions: usize) -> Vec<Vec<f64>> {
    assert!(n_actions > 0);
    d_off
        .as_slice()
        .iter()
        .map(|&p| vec![p / n_actions as f64; n_actions])
        .collect()
}

/// The pointwise-optimal decoder for a joint state–action weight table:
/// `π_α*(a|s,z) ∝ joint[s][a] · 1[φ(s,a) = z]`. Zero-mass `(s,z)` cells fall
/// back to uniform over the realizing actions (uniform over all actions when
/// `z` is unrealized at `s`) and are flagged on the returned decoder.
pub fn optimal_decoder(d_off_joint: &[Vec<f64>], phi: &LatentMap) -> Result<TabularDecoder> {
    TabularDecoder::from_joint(d_off_joint, phi)
}

/// Marginalize a raw-action policy onto the latent space:
/// `π_Z(z|s) = Σ_{a: φ(s,a)=z} π(a|s)`.
pub fn marginalize_policy(pi: &TabularPolicy, phi: &LatentMap) -> Result<TabularLatent> {
    if pi.n_states() != phi.n_states() || pi.n_actions() != phi.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}×{}, latent map is {}×{}",
            pi.n_states(),
            pi.n_actions(),
            phi.n_states(),
            phi.n_actions()
        )));
    }
    let mut rows = Vec::with_capacity(pi.n_states());
    for s in 0..pi.n_states() {
        let mut row = vec![0.0; phi.n_latent()];
        for (a, &p) in pi.row(s).iter().enumerate() {
            row[phi.z_of(s, a)] += p;
        }
        rows.push(row);
    }
    TabularLatent::new(rows)
}

pub(crate) fn check_latent_table(
    t_z: &[Vec<Vec<f64>>],
    n_states: usize,
    n_latent: usize,
) -> Result<()> {
    if t_z.len() != n_states
        || t_z
            .iter()
            .any(|per_z| per_z.len() != n_latent || per_z.iter().any(|row| row.len() != n_states))
    {
        return Err(Error::DimensionMismatch(format!(
            "latent transition table must be {n_states}×{n_latent}×{n_states}"
        )));
    }
    Ok(())
}

fn check_coverage(d_star: &DistVector, d_off: &DistVector) -> Result<()> {
    if d_star.len() != d_off.len() {
        return Err(Error::DimensionMismatch(format!(
            "visitation has {} states, offline distribution has {}",
            d_star.len(),
            d_off.len()
        )));
    }
    for s in 0..d_star.len() {
        if d_star[s] > 0.0 && d_off[s] == 0.0 {
            return Err(Error::SupportViolation(format!(
                "coverage: state {s} has target visitation {} but zero offline mass",
                d_star[s]
            )));
        }
    }
    Ok(())
}

/// `E_{(s,a)∼d_off×Unif}[KL(T(s,a) ‖ T_Z(s, φ(s,a)))]`, exactly.
fn transition_term(
    mdp: &TabularMdp,
    d_off: &DistVector,
    phi: &LatentMap,
    t_z: &[Vec<Vec<f64>>],
) -> Result<f64> {
    check_latent_table(t_z, mdp.n_states(), phi.n_latent())?;
    let n_actions = mdp.n_actions();
    let w_a = 1.0 / n_actions as f64;
    let mut total = 0.0;
    for s in 0..mdp.n_states() {
        if d_off[s] == 0.0 {
            continue;
        }
        for a in 0..n_actions {
            let z = phi.z_of(s, a);
            let term = kl(mdp.row(s, a), &t_z[s][z]).map_err(|e| {
                Error::SupportViolation(format!("transition term at (s={s}, a={a}, z={z}): {e}"))
            })?;
            total += d_off[s] * w_a * term;
        }
    }
    // The exact value is non-negative; near-identical rows can leave a
    // ~1e-16 negative residue that would poison the square root downstream.
    Ok(total.max(0.0))
}

/// The exact decoding term and its log-loss surrogate:
/// `(E_{s∼d_off}[max_z KL(π_α*(s,z) ‖ π_α(s,z))], E_{(s,a)∼d_off×Unif}[−log π_α(a|s,φ(s,a))])`.
fn decoding_terms(
    d_off: &DistVector,
    phi: &LatentMap,
    alpha_star: &TabularDecoder,
    decoder: &TabularDecoder,
) -> Result<(f64, f64)> {
    if decoder.n_states() != phi.n_states()
        || decoder.n_latent() != phi.n_latent()
        || decoder.n_actions() != phi.n_actions()
    {
        return Err(Error::DimensionMismatch(format!(
            "decoder is {}×{}×{}, latent map needs {}×{}×{}",
            decoder.n_states(),
            decoder.n_latent(),
            decoder.n_actions(),
            phi.n_states(),
            phi.n_latent(),
            phi.n_actions()
        )));
    }
    let n_actions = phi.n_actions();
    let w_a = 1.0 / n_actions as f64;
    let mut j_max = 0.0;
    let mut j_nll = 0.0;
    for s in 0..phi.n_states() {
        if d_off[s] == 0.0 {
            continue;
        }
        let mut worst = 0.0f64;
        for z in 0..phi.n_latent() {
            if !phi.realized(s, z) {
                continue;
            }
            let term = kl(alpha_star.row(s, z), decoder.row(s, z)).map_err(|e| {
                Error::SupportViolation(format!("decoding term at (s={s}, z={z}): {e}"))
            })?;
            worst = worst.max(term);
        }
        j_max += d_off[s] * worst;
        for a in 0..n_actions {
            let p = decoder.row(s, phi.z_of(s, a))[a];
            if p <= 0.0 {
                return Err(Error::SupportViolation(format!(
                    "decoding log-loss at (s={s}, a={a}): decoder assigns zero mass"
                )));
            }
            j_nll -= d_off[s] * w_a * p.ln();
        }
    }
    Ok((j_max, j_nll.max(0.0)))
}

/// `E_{s∼d_star}[KL(target(s) ‖ latent(s))]`, exactly.
fn cloning_term(
    d_star: &DistVector,
    target: &TabularLatent,
    latent: &TabularLatent,
) -> Result<f64> {
    if target.n_states() != latent.n_states() || target.n_latent() != latent.n_latent() {
        return Err(Error::DimensionMismatch(format!(
            "latent policies are {}×{} and {}×{}",
            target.n_states(),
            target.n_latent(),
            latent.n_states(),
            latent.n_latent()
        )));
    }
    let mut total = 0.0;
    for s in 0..target.n_states() {
        if d_star[s] == 0.0 {
            continue;
        }
        let term = kl(target.row(s), latent.row(s))
            .map_err(|e| Error::SupportViolation(format!("cloning term at state {s}: {e}")))?;
        total += d_star[s] * term;
    }
    Ok(total.max(0.0))
}

fn bound_constants(mdp: &TabularMdp, chi2_val: f64) -> (f64, f64, f64) {
    let h = horizon(mdp.gamma());
    let shift = 1.0 + chi2_val.sqrt();
    (h * mdp.n_actions() as f64 * shift, h * shift, h)
}

/// Evaluate every term of the composed-policy bound exactly and check it.
///
/// `t_z[s][z]` is the latent transition table, `decoder` an arbitrary
/// full-support decoder and `latent` a latent policy supported on latents
/// realized at each state. The optimal decoder the decoding term compares
/// against is derived from `d_off` with uniform actions, matching the
/// offline data generator. Requires coverage: every state the target policy
/// visits must carry offline mass.
pub fn theorem1_report(
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
    d_off: &DistVector,
    phi: &LatentMap,
    t_z: &[Vec<Vec<f64>>],
    decoder: &TabularDecoder,
    latent: &TabularLatent,
) -> Result<BoundReport> {
    if phi.n_states() != mdp.n_states() || phi.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "latent map is {}×{}, MDP is {}×{}",
            phi.n_states(),
            phi.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    if latent.n_states() != mdp.n_states() || latent.n_latent() != phi.n_latent() {
        return Err(Error::DimensionMismatch(format!(
            "latent policy is {}×{}, expected {}×{}",
            latent.n_states(),
            latent.n_latent(),
            mdp.n_states(),
            phi.n_latent()
        )));
    }
    if d_off.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "offline distribution has {} states, MDP has {}",
            d_off.len(),
            mdp.n_states()
        )));
    }
    let d_star = state_visitation(mdp, pi_star)?;
    check_coverage(&d_star, d_off)?;
    let chi2_val = chi2(d_star.as_slice(), d_off.as_slice())?;
    let j_t = transition_term(mdp, d_off, phi, t_z)?;
    let alpha_star = optimal_decoder(&uniform_joint(d_off, mdp.n_actions()), phi)?;
    let (j_de_max, j_de_nll) = decoding_terms(d_off, phi, &alpha_star, decoder)?;
    let target_latent = marginalize_policy(pi_star, phi)?;
    let j_bc_kl = cloning_term(&d_star, &target_latent, latent)?;
    let (c1, c2, c3) = bound_constants(mdp, chi2_val);
    let composed = compose(decoder, latent)?;
    let lhs = policy_diff(mdp, &composed, pi_star)?;
    let rhs = c1 * (0.5 * j_t).sqrt() + c2 * (0.5 * j_de_max).sqrt() + c3 * (0.5 * j_bc_kl).sqrt();
    Ok(BoundReport {
        j_t,
        j_de_max,
        j_de_nll,
        j_bc_kl,
        c1,
        c2,
        c3,
        chi2: chi2_val,
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}

/// Count-based latent clone of an expert dataset: `π̂_Z(z|s)` is the observed
/// frequency of `φ(s,a) = z` among expert pairs at `s`; states never seen
/// fall back to uniform over all latents. The fallback choice is what the
/// `√(|Z||S|/n)` estimation rate is proved against.
pub fn tabular_latent_bc(expert: &ExpertDataset, phi: &LatentMap) -> Result<TabularLatent> {
    let pairs = expert.tabular()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("latent cloning needs at least one expert pair".into()));
    }
    for (i, &(s, a)) in pairs.iter().enumerate() {
        if s >= phi.n_states() || a >= phi.n_actions() {
            return Err(Error::DataFormat {
                line: i + 1,
                msg: format!(
                    "expert pair (s={s}, a={a}) out of range {}×{}",
                    phi.n_states(),
                    phi.n_actions()
                ),
            });
        }
    }
    TabularLatent::from_counts(
        pairs.iter().map(|&(s, a)| (s, phi.z_of(s, a))),
        phi.n_states(),
        phi.n_latent(),
    )
}

/// Sweep the expert sample size: for each `n`, draw `resamples` expert
/// datasets, fit [`tabular_latent_bc`], compose with `decoder` and measure
/// the exact visitation gap; report the mean next to its bound
/// `c1·√(j_t/2) + c2·√(j_de_max/2) + c3·√(|Z||S|/n)`.
///
/// Cells run in parallel on independent seed streams keyed by cell index,
/// so the output is identical regardless of thread scheduling. A row whose
/// mean exceeds its bound is a bound violation and aborts the sweep.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_sweep(
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
    d_off: &DistVector,
    phi: &LatentMap,
    t_z: &[Vec<Vec<f64>>],
    decoder: &TabularDecoder,
    n_grid: &[usize],
    resamples: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if n_grid.is_empty() || n_grid.iter().any(|&n| n == 0) {
        return Err(Error::Config {
            field: "n_grid".into(),
            msg: "sweep needs at least one positive sample size".into(),
        });
    }
    if resamples == 0 {
        return Err(Error::Config {
            field: "resamples".into(),
            msg: "sweep needs at least one resample per cell".into(),
        });
    }
    let d_star = state_visitation(mdp, pi_star)?;
    check_coverage(&d_star, d_off)?;
    let chi2_val = chi2(d_star.as_slice(), d_off.as_slice())?;
    let (c1, c2, c3) = bound_constants(mdp, chi2_val);
    let j_t = transition_term(mdp, d_off, phi, t_z)?;
    let alpha_star = optimal_decoder(&uniform_joint(d_off, mdp.n_actions()), phi)?;
    let (j_de_max, _) = decoding_terms(d_off, phi, &alpha_star, decoder)?;
    let pretrain = c1 * (0.5 * j_t).sqrt() + c2 * (0.5 * j_de_max).sqrt();

    let diffs: Vec<f64> = (0..n_grid.len() * resamples)
        .into_par_iter()
        .map(|idx| {
            let n = n_grid[idx / resamples];
            let mut rng = cell_rng(seed, stream::SWEEP, idx as u64);
            let ds_seed: u64 = rng.gen();
            let expert = generate_expert(mdp, pi_star, n, ds_seed)?;
            let latent_hat = tabular_latent_bc(&expert, phi)?;
            let composed = compose(decoder, &latent_hat)?;
            policy_diff(mdp, &composed, pi_star)
        })
        .collect::<Result<_>>()?;

    let size_term = ((phi.n_latent() * mdp.n_states()) as f64).sqrt();
    let mut rows = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let mean_diff =
            diffs[i * resamples..(i + 1) * resamples].iter().sum::<f64>() / resamples as f64;
        let bound = pretrain + c3 * size_term / (n as f64).sqrt();
        if mean_diff > bound + BOUND_SLACK {
            return Err(Error::BoundViolation(format!(
                "sweep row n={n}: mean visitation gap {mean_diff} exceeds bound {bound}"
            )));
        }
        rows.push(SweepRow { n, mean_diff, bound });
    }
    Ok(rows)
}

/// Least-squares slope of `ln(mean_diff)` against `ln(n)` over sweep rows.
pub fn log_log_slope(rows: &[SweepRow]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::Config {
            field: "rows".into(),
            msg: "slope needs at least two sweep rows".into(),
        });
    }
    if rows.iter().any(|r| r.mean_diff <= 0.0) {
        return Err(Error::NonFinite("slope undefined: a sweep row has zero mean gap".into()));
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().map(|r| ((r.n as f64).ln(), r.mean_diff.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config {
            field: "rows".into(),
            msg: "slope needs at least two distinct sample sizes".into(),
        });
    }
    Ok(sxy / sxx)
}

/// Monte-Carlo mean of `E_{s∼d*}[TV(π_{*,Z}(s) ‖ π̂_Z(s))]` over expert
/// dataset redraws of size `n`, with `π̂_Z` the count-based latent clone.
/// Used to check the `√(|S||Z|/n)` estimation rate.
pub fn latent_bc_tv_mean(
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
    phi: &LatentMap,
    n: usize,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if resamples == 0 {
        return Err(Error::Config {
            field: "resamples".into(),
            msg: "rate estimate needs at least one resample".into(),
        });
    }
    let d_star = state_visitation(mdp, pi_star)?;
    let target = marginalize_policy(pi_star, phi)?;
    let errs: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = cell_rng(seed, stream::SWEEP, r as u64);
            let ds_seed: u64 = rng.gen();
            let expert = generate_expert(mdp, pi_star, n, ds_seed)?;
            let hat = tabular_latent_bc(&expert, phi)?;
            let mut err = 0.0;
            for s in 0..mdp.n_states() {
                err += d_star[s] * tv(target.row(s), hat.row(s))?;
            }
            Ok(err)
        })
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / resamples as f64)
}

/// The estimation-rate bound `√(n_states · n_latent / n)` that
/// [`latent_bc_tv_mean`] is checked against.
pub fn estimation_rate_bound(n_states: usize, n_latent: usize, n: usize) -> f64 {
    ((n_states * n_latent) as f64 / n as f64).sqrt()
}

/// `¼ |S| ‖w‖_∞`, the constant in front of the gradient term.
pub fn linear_c4(n_states: usize, w_inf: f64) -> f64 {
    0.25 * n_states as f64 * w_inf
}

/// One reconstructed transition row `T(·|s,a) = Σ_j φ_j · w(·)[j]`.
pub fn linear_row(w: &[Vec<f64>], embed: &[f64]) -> Vec<f64> {
    w.iter().map(|ws| ws.iter().zip(embed).map(|(a, b)| a * b).sum()).collect()
}

/// Draw an exactly linear transition MDP: `w` columns from a Dirichlet over
/// states, embeddings `φ(s,a)` from a Dirichlet over the `d`-simplex, the
/// transition table their exact product, and a uniform initial distribution.
pub fn build_linear_mdp(
    n_states: usize,
    n_actions: usize,
    d: usize,
    gamma: f64,
    seed: u64,
) -> Result<(TabularMdp, LinearMdpSpec)> {
    if n_states == 0 || n_actions == 0 || d == 0 {
        return Err(Error::Config {
            field: "dims".into(),
            msg: "n_states, n_actions and d must all be positive".into(),
        });
    }
    let mut rng = stream_rng(seed, stream::INSTANCE_GEN);
    let mut w = vec![vec![0.0; d]; n_states];
    for j in 0..d {
        let col = dirichlet_uniform(n_states, &mut rng);
        for (sp, &x) in col.iter().enumerate() {
            w[sp][j] = x;
        }
    }
    let phi: Vec<Vec<Vec<f64>>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| dirichlet_uniform(d, &mut rng)).collect())
        .collect();
    let transition: Vec<Vec<Vec<f64>>> = (0..n_states)
        .map(|s| (0..n_actions).map(|a| linear_row(&w, &phi[s][a])).collect())
        .collect();
    let mdp = TabularMdp::new(
        n_states,
        n_actions,
        gamma,
        DistVector::uniform(n_states).into_vec(),
        transition,
    )?;
    let w_inf = w.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, &x| m.max(x.abs()));
    let c4 = linear_c4(n_states, w_inf);
    Ok((mdp, LinearMdpSpec { n_states, n_actions, d, w, phi, w_inf, c4 }))
}

fn mean_embed(linear: &LinearMdpSpec, pi: &TabularPolicy, s: usize) -> Vec<f64> {
    let mut mean = vec![0.0; linear.d];
    for a in 0..linear.n_actions {
        let pa = pi.row(s)[a];
        if pa == 0.0 {
            continue;
        }
        for (m, e) in mean.iter_mut().zip(&linear.phi[s][a]) {
            *m += pa * e;
        }
    }
    mean
}

/// Per-state conditional mean embedding `E_{a∼π(s)}[φ(s,a)]` — the unique
/// minimizer of the population MSE, and itself a point of the simplex.
pub fn conditional_mean_embedding(
    linear: &LinearMdpSpec,
    pi: &TabularPolicy,
) -> Result<Vec<Vec<f64>>> {
    if pi.n_states() != linear.n_states || pi.n_actions() != linear.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}×{}, linear model is {}×{}",
            pi.n_states(),
            pi.n_actions(),
            linear.n_states,
            linear.n_actions
        )));
    }
    Ok((0..linear.n_states).map(|s| mean_embed(linear, pi, s)).collect())
}

/// Population mean-squared embedding error of a deterministic latent table
/// against a policy's embedding stream, with its exact parameter gradient
/// and the gradient's entrywise L1 norm:
///
/// `M(θ) = Σ_s d(s) Σ_a π(a|s) ‖θ_s − φ(s,a)‖²`,
/// `∂M/∂θ_s = 2 d(s) (θ_s − E_{a∼π(s)}[φ(s,a)])`.
pub fn population_mse(
    linear: &LinearMdpSpec,
    d: &DistVector,
    pi: &TabularPolicy,
    theta: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>, f64)> {
    if pi.n_states() != linear.n_states || pi.n_actions() != linear.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}×{}, linear model is {}×{}",
            pi.n_states(),
            pi.n_actions(),
            linear.n_states,
            linear.n_actions
        )));
    }
    if d.len() != linear.n_states
        || theta.len() != linear.n_states
        || theta.iter().any(|row| row.len() != linear.d)
    {
        return Err(Error::DimensionMismatch(format!(
            "theta must be {}×{} and d must cover {} states",
            linear.n_states, linear.d, linear.n_states
        )));
    }
    let mut mse = 0.0;
    let mut grad = vec![vec![0.0; linear.d]; linear.n_states];
    for s in 0..linear.n_states {
        let ds = d[s];
        for a in 0..linear.n_actions {
            let pa = pi.row(s)[a];
            if pa == 0.0 {
                continue;
            }
            let se: f64 = theta[s]
                .iter()
                .zip(&linear.phi[s][a])
                .map(|(t, e)| (t - e) * (t - e))
                .sum();
            mse += ds * pa * se;
        }
        let mean = mean_embed(linear, pi, s);
        for j in 0..linear.d {
            grad[s][j] = 2.0 * ds * (theta[s][j] - mean[j]);
        }
    }
    let grad_l1 = grad.iter().flat_map(|r| r.iter()).map(|g| g.abs()).sum();
    Ok((mse, grad, grad_l1))
}

/// Discrete latent structure induced by exact embedding equality: actions of
/// one state share a latent iff their embeddings are bitwise equal. Latent
/// ids are first-occurrence action indices, so the id space is `n_actions`.
pub fn embedding_latent_map(linear: &LinearMdpSpec) -> Result<LatentMap> {
    let table: Vec<Vec<usize>> = (0..linear.n_states)
        .map(|s| {
            (0..linear.n_actions)
                .map(|a| (0..a).find(|&b| linear.phi[s][b] == linear.phi[s][a]).unwrap_or(a))
                .collect()
        })
        .collect();
    LatentMap::new(table, linear.n_actions)
}

/// Evaluate the deterministic-latent bound on an exactly linear model.
///
/// The latent policy is the table `theta` (one simplex point per state), and
/// it acts at the latent level: the induced one-step chain is
/// `kernel(s'|s) = w(s')ᵀ θ_s`, which is Markov because `θ_s` stays inside
/// the simplex. `lhs` is the visitation gap of that chain against the
/// target's; the decoder only enters through the reported decoding term,
/// which is non-negative and so only adds slack.
pub fn theorem3_report(
    linear: &LinearMdpSpec,
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
    d_off: &DistVector,
    theta: &[Vec<f64>],
    decoder: &TabularDecoder,
) -> Result<LinearReport> {
    if linear.n_states != mdp.n_states() || linear.n_actions != mdp.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "linear model is {}×{}, MDP is {}×{}",
            linear.n_states,
            linear.n_actions,
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    if theta.len() != linear.n_states || theta.iter().any(|row| row.len() != linear.d) {
        return Err(Error::DimensionMismatch(format!(
            "theta must be {}×{}",
            linear.n_states, linear.d
        )));
    }
    for (s, row) in theta.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if row.iter().any(|&x| x < 0.0 || !x.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "theta row {s} must lie in the {}-simplex (sum {total})",
                linear.d
            )));
        }
    }
    let d_star = state_visitation(mdp, pi_star)?;
    check_coverage(&d_star, d_off)?;
    let chi2_val = chi2(d_star.as_slice(), d_off.as_slice())?;
    let (c1, c2, _) = bound_constants(mdp, chi2_val);

    // Transition term against the reconstructed linear rows; zero whenever
    // the MDP really is the product of `w` and `phi`.
    let w_a = 1.0 / linear.n_actions as f64;
    let mut j_t = 0.0;
    for s in 0..linear.n_states {
        if d_off[s] == 0.0 {
            continue;
        }
        for a in 0..linear.n_actions {
            let recon = linear_row(&linear.w, &linear.phi[s][a]);
            let term = kl(mdp.row(s, a), &recon).map_err(|e| {
                Error::SupportViolation(format!("transition term at (s={s}, a={a}): {e}"))
            })?;
            j_t += d_off[s] * w_a * term;
        }
    }
    let term2 = c1 * (0.5 * j_t).sqrt();

    let phi_map = embedding_latent_map(linear)?;
    let alpha_star = optimal_decoder(&uniform_joint(d_off, linear.n_actions), &phi_map)?;
    let (j_de_max, _) = decoding_terms(d_off, &phi_map, &alpha_star, decoder)?;
    let term3 = c2 * (0.5 * j_de_max).sqrt();

    let (_, _, grad_l1) = population_mse(linear, &d_star, pi_star, theta)?;
    let grad_term = horizon(mdp.gamma()) * linear.c4 * grad_l1;

    let kernel: Vec<Vec<f64>> = theta.iter().map(|row| linear_row(&linear.w, row)).collect();
    let d_theta = kernel_visitation(&kernel, mdp.initial(), mdp.gamma())?;
    let lhs = tv(d_theta.as_slice(), d_star.as_slice())?;

    let rhs = term2 + term3 + grad_term;
    Ok(LinearReport {
        lhs,
        term2,
        term3,
        grad_l1,
        grad_term,
        c4: linear.c4,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}
