//! Tabular MDPs, policies, divergences, and exact visitation math.
//!
//! Everything downstream (environments, imitation, bound verification) is
//! built on four operations defined here:
//!
//! * [`divergence`] — total variation, KL, and chi-squared between
//!   distribution vectors, with support violations surfaced as errors;
//! * [`state_visitation`] — the discounted state distribution
//!   `d = (1-γ) (I - γ Pᵀ)⁻¹ μ`, computed by a dense LU solve so that bound
//!   checks are exact up to solver round-off, not iteration tolerance;
//! * [`transition_err`] — the one-step model-mismatch functional
//!   `½ Σ_{s'} | E_{s~d} [ Σ_a T̄(s'|s,a) (π₁(a|s) − π₂(a|s)) ] |`;
//! * [`value_iteration`] — a deterministic greedy expert for synthetic tasks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for validating that a vector is a probability distribution.
pub const DIST_TOL: f64 = 1e-12;

/// A validated probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector(Vec<f64>);

impl DistVector {
    /// Validate entries in `[0,1]` summing to 1 within `1e-12`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        validate_dist(&p, "distribution")?;
        Ok(DistVector(p))
    }

    /// Wrap a vector that was produced by a normalizing routine in this
    /// module. Debug-asserted rather than revalidated.
    pub(crate) fn new_unchecked(p: Vec<f64>) -> Self {
        debug_assert!(validate_dist(&p, "distribution").is_ok());
        DistVector(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Uniform distribution over `n` categories.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        DistVector(vec![1.0 / n as f64; n])
    }

    /// Point mass at `i` out of `n` categories.
    pub fn delta(i: usize, n: usize) -> Self {
        assert!(i < n);
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        DistVector(p)
    }
}

impl std::ops::Index<usize> for DistVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn validate_dist(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "{what} entry {i} is not finite: {x}"
            )));
        }
        if !(-DIST_TOL..=1.0 + DIST_TOL).contains(&x) {
            return Err(Error::InvalidDistribution(format!(
                "{what} entry {i} out of [0,1]: {x}"
            )));
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// A stationary stochastic policy: one probability row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("policy has no states".into()));
        }
        let n_actions = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch(format!(
                    "policy row {s} has {} actions, row 0 has {n_actions}",
                    row.len()
                )));
            }
            validate_dist(row, &format!("policy row {s}"))?;
        }
        Ok(TabularPolicy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states > 0 && n_actions > 0);
        TabularPolicy {
            probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    /// Deterministic policy from one action index per state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        assert!(!actions.is_empty());
        let probs = actions
            .iter()
            .map(|&a| {
                assert!(a < n_actions);
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        TabularPolicy { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Mix this policy with the uniform policy: `(1-eps)·π + eps·U`.
    /// Keeps rows exactly normalized.
    pub fn soften(&self, eps: f64) -> TabularPolicy {
        assert!((0.0..=1.0).contains(&eps));
        let u = 1.0 / self.n_actions() as f64;
        let probs = self
            .probs
            .iter()
            .map(|row| row.iter().map(|&p| (1.0 - eps) * p + eps * u).collect())
            .collect();
        TabularPolicy { probs }
    }
}

/// Validate a transition tensor shape `n_states × n_actions × n_states` with
/// probability rows.
pub fn validate_transition(t: &[Vec<Vec<f64>>], n_states: usize, n_actions: usize) -> Result<()> {
    if t.len() != n_states {
        return Err(Error::DimensionMismatch(format!(
            "transition tensor has {} states, expected {n_states}",
            t.len()
        )));
    }
    for (s, per_action) in t.iter().enumerate() {
        if per_action.len() != n_actions {
            return Err(Error::DimensionMismatch(format!(
                "transition[{s}] has {} actions, expected {n_actions}",
                per_action.len()
            )));
        }
        for (a, row) in per_action.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::DimensionMismatch(format!(
                    "transition[{s}][{a}] has {} entries, expected {n_states}",
                    row.len()
                )));
            }
            validate_dist(row, &format!("transition row (s={s}, a={a})"))?;
        }
    }
    Ok(())
}

/// A finite MDP with discount. The reward, when a task needs one, travels
/// separately (see [`crate::envs`]); the bound machinery never uses rewards.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "RawMdp")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    initial: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
}

/// Serialization mirror of [`TabularMdp`]; deserialization revalidates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    initial: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
}

impl From<TabularMdp> for RawMdp {
    fn from(m: TabularMdp) -> RawMdp {
        RawMdp {
            n_states: m.n_states,
            n_actions: m.n_actions,
            gamma: m.gamma,
            initial: m.initial,
            transition: m.transition,
        }
    }
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = Error;
    fn try_from(raw: RawMdp) -> Result<TabularMdp> {
        TabularMdp::new(raw.n_states, raw.n_actions, raw.gamma, raw.initial, raw.transition)
    }
}

impl<'de> Deserialize<'de> for TabularMdp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMdp::deserialize(d)?;
        TabularMdp::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        initial: Vec<f64>,
        transition: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::DimensionMismatch(
                "MDP needs at least one state and one action".into(),
            ));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config {
                field: "gamma".into(),
                msg: format!("discount must lie in [0,1), got {gamma}"),
            });
        }
        if initial.len() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "initial distribution has {} entries, expected {n_states}",
                initial.len()
            )));
        }
        validate_dist(&initial, "initial distribution")?;
        validate_transition(&transition, n_states, n_actions)?;
        Ok(TabularMdp { n_states, n_actions, gamma, initial, transition })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Next-state distribution for `(s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn transition(&self) -> &[Vec<Vec<f64>>] {
        &self.transition
    }

    fn check_policy(&self, pi: &TabularPolicy) -> Result<()> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy is {}×{}, MDP is {}×{}",
                pi.n_states(),
                pi.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    /// State-to-state kernel `P(s'|s) = Σ_a T(s'|s,a) π(a|s)` for a policy.
    pub fn policy_kernel(&self, pi: &TabularPolicy) -> Result<Vec<Vec<f64>>> {
        self.check_policy(pi)?;
        let mut kernel = vec![vec![0.0; self.n_states]; self.n_states];
        for s in 0..self.n_states {
            let row = &mut kernel[s];
            for a in 0..self.n_actions {
                let p = pi.row(s)[a];
                if p == 0.0 {
                    continue;
                }
                for (sp, &t) in self.transition[s][a].iter().enumerate() {
                    row[sp] += p * t;
                }
            }
        }
        Ok(kernel)
    }
}

/// Divergences between distribution vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Tv,
    Kl,
    Chi2,
}

/// Total variation distance `½ Σ |p - q|`.
pub fn tv(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// KL divergence `Σ p ln(p/q)` with the convention `0·ln(0/q) = 0`.
/// `p(i) > 0` with `q(i) = 0` is a support violation, reported as an error.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::SupportViolation(format!(
                "kl: p[{i}] = {pi} but q[{i}] = 0"
            )));
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

/// Chi-squared divergence `Σ (p - q)² / q`, with `0²/0 = 0`.
pub fn chi2(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q)?;
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if qi == 0.0 {
            if pi == 0.0 {
                continue;
            }
            return Err(Error::SupportViolation(format!(
                "chi2: p[{i}] = {pi} but q[{i}] = 0"
            )));
        }
        let diff = pi - qi;
        total += diff * diff / qi;
    }
    Ok(total)
}

/// Dispatch on [`DivergenceKind`].
pub fn divergence(kind: DivergenceKind, p: &DistVector, q: &DistVector) -> Result<f64> {
    match kind {
        DivergenceKind::Tv => tv(p.as_slice(), q.as_slice()),
        DivergenceKind::Kl => kl(p.as_slice(), q.as_slice()),
        DivergenceKind::Chi2 => chi2(p.as_slice(), q.as_slice()),
    }
}

fn check_same_len(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "divergence arguments have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Discounted state visitation `d^π = (1-γ) Σ_t γ^t P(s_t = ·)`, computed
/// exactly as the solution of `(I - γ Pᵀ) d = (1-γ) μ`.
pub fn state_visitation(mdp: &TabularMdp, pi: &TabularPolicy) -> Result<DistVector> {
    let kernel = mdp.policy_kernel(pi)?;
    kernel_visitation(&kernel, mdp.initial(), mdp.gamma())
}

/// Discounted visitation of a raw state-to-state Markov chain
/// `kernel[s][s']` started from `initial` with discount `gamma`.
///
/// This is [`state_visitation`] with the policy already folded into the
/// kernel; the bound checks on deterministic latent policies need it because
/// their one-step chain is built directly from latent parameters rather than
/// from an action-space policy.
///
/// The solve is dense LU; for the instance sizes this crate targets the
/// matrix is tiny and well conditioned (condition number at most
/// `(1+γ)/(1-γ)`). Entries are clamped to zero only to absorb round-off of
/// magnitude below 1e-10; anything more negative is reported as an error.
pub fn kernel_visitation(kernel: &[Vec<f64>], initial: &[f64], gamma: f64) -> Result<DistVector> {
    let n = kernel.len();
    if n == 0 || initial.len() != n || kernel.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "kernel must be square and match the initial distribution ({} states)",
            initial.len()
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidDistribution(format!(
            "discount {gamma} outside [0, 1)"
        )));
    }
    for (s, row) in kernel.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-8 || row.iter().any(|&p| p < -1e-12 || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "kernel row {s} is not a distribution (sum {total})"
            )));
        }
    }
    // m[(sp, s)] = δ(sp,s) - γ P(sp | s)
    let mut m = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for sp in 0..n {
            m[(sp, s)] -= gamma * kernel[s][sp];
        }
    }
    let rhs = DVector::from_iterator(n, initial.iter().map(|&x| (1.0 - gamma) * x));
    let lu = m.lu();
    let d = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NonFinite("visitation solve: singular system".into()))?;
    let mut out: Vec<f64> = d.iter().copied().collect();
    for (s, x) in out.iter_mut().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("visitation entry {s} is {x}")));
        }
        if *x < -1e-10 {
            return Err(Error::NonFinite(format!(
                "visitation entry {s} is {x}, below the -1e-10 round-off budget"
            )));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::NonFinite(format!(
            "visitation sums to {total}; solve drifted beyond tolerance"
        )));
    }
    for x in out.iter_mut() {
        *x /= total;
    }
    Ok(DistVector::new_unchecked(out))
}

/// Total variation between the discounted visitations of two policies:
/// the `Diff` functional every bound in [`crate::theory`] controls.
pub fn policy_diff(mdp: &TabularMdp, pi1: &TabularPolicy, pi2: &TabularPolicy) -> Result<f64> {
    let d1 = state_visitation(mdp, pi1)?;
    let d2 = state_visitation(mdp, pi2)?;
    tv(d1.as_slice(), d2.as_slice())
}

/// One-step expected model mismatch between two policies under a transition
/// tensor `tbar` and a state distribution `d`:
///
/// `Err = ½ Σ_{s'} | Σ_s d(s) Σ_a tbar(s'|s,a) (π₁(a|s) − π₂(a|s)) |`.
///
/// With `tbar` the true tensor and `d = d^π₁` this is the quantity whose
/// `γ/(1-γ)` multiple dominates the visitation gap (see
/// [`crate::theory::lemmas::visitation_err_bound_check`]).
pub fn transition_err(
    d: &DistVector,
    pi1: &TabularPolicy,
    pi2: &TabularPolicy,
    tbar: &[Vec<Vec<f64>>],
) -> Result<f64> {
    let n_states = d.len();
    if pi1.n_states() != n_states || pi2.n_states() != n_states {
        return Err(Error::DimensionMismatch(format!(
            "transition_err: d has {n_states} states, policies have {} and {}",
            pi1.n_states(),
            pi2.n_states()
        )));
    }
    if pi1.n_actions() != pi2.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "transition_err: policies have {} and {} actions",
            pi1.n_actions(),
            pi2.n_actions()
        )));
    }
    validate_transition(tbar, n_states, pi1.n_actions())?;
    let n_actions = pi1.n_actions();
    let mut signed = vec![0.0; n_states];
    for s in 0..n_states {
        let ds = d[s];
        if ds == 0.0 {
            continue;
        }
        for a in 0..n_actions {
            let w = ds * (pi1.row(s)[a] - pi2.row(s)[a]);
            if w == 0.0 {
                continue;
            }
            for (sp, &t) in tbar[s][a].iter().enumerate() {
                signed[sp] += w * t;
            }
        }
    }
    Ok(0.5 * signed.iter().map(|x| x.abs()).sum::<f64>())
}

/// Greedy deterministic policy by value iteration on `reward[s][a]`,
/// iterated until the value function moves less than `tol` in sup norm.
/// Ties in the greedy argmax break toward the lowest action index, which
/// pins the expert exactly for reproducibility.
pub fn value_iteration(mdp: &TabularMdp, reward: &[Vec<f64>], tol: f64) -> Result<TabularPolicy> {
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    if reward.len() != n_states || reward.iter().any(|r| r.len() != n_actions) {
        return Err(Error::DimensionMismatch(format!(
            "reward table must be {n_states}×{n_actions}"
        )));
    }
    assert!(tol > 0.0);
    let gamma = mdp.gamma();
    let mut v = vec![0.0; n_states];
    // γ < 1 contracts, so this terminates for any finite reward.
    loop {
        let mut v_next = vec![f64::NEG_INFINITY; n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let q = reward[s][a]
                    + gamma
                        * mdp
                            .row(s, a)
                            .iter()
                            .zip(v.iter())
                            .map(|(&t, &vs)| t * vs)
                            .sum::<f64>();
                if q > v_next[s] {
                    v_next[s] = q;
                }
            }
        }
        let delta = v
            .iter()
            .zip(v_next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = v_next;
        if delta < tol {
            break;
        }
    }
    let mut actions = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let mut best_a = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..n_actions {
            let q = reward[s][a]
                + gamma
                    * mdp
                        .row(s, a)
                        .iter()
                        .zip(v.iter())
                        .map(|(&t, &vs)| t * vs)
                        .sum::<f64>();
            // Strict improvement only: ties keep the lowest index.
            if q > best_q {
                best_q = q;
                best_a = a;
            }
        }
        actions.push(best_a);
    }
    Ok(TabularPolicy::deterministic(&actions, n_actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{dirichlet_uniform, sample_index, stream_rng};
    use proptest::prelude::*;
    use rand::Rng;

    /// Two-state chain: action 0 moves 0→1, state 1 absorbs.
    fn two_state_chain(gamma: f64) -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            gamma,
            vec![1.0, 0.0],
            vec![
                vec![vec![0.0, 1.0]],
                vec![vec![0.0, 1.0]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn kl_matches_closed_form() {
        // KL([.5,.5] || [.25,.75]) = 0.5 ln 2 + 0.5 ln(2/3) = 0.5 ln(4/3)
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let expect = 0.5 * (4.0f64 / 3.0).ln();
        assert!((kl(&p, &q).unwrap() - expect).abs() < 1e-15);
        assert!((kl(&p, &q).unwrap() - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn chi2_matches_closed_form() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        // 0.0625/0.25 + 0.0625/0.75 = 1/3
        assert!((chi2(&p, &q).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tv_of_disjoint_masses() {
        assert!((tv(&[0.1, 0.9], &[1.0, 0.0]).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn kl_zero_numerator_is_zero_not_nan() {
        assert_eq!(kl(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 1.0f64.ln() - 0.5f64.ln());
        assert_eq!(kl(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn kl_support_violation_is_error_not_infinity() {
        let err = kl(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::SupportViolation(_)), "{err}");
        let err = chi2(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::SupportViolation(_)), "{err}");
    }

    #[test]
    fn divergence_length_mismatch() {
        let p = DistVector::new(vec![1.0]).unwrap();
        let q = DistVector::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            divergence(DivergenceKind::Tv, &p, &q),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dist_vector_rejects_bad_input() {
        assert!(DistVector::new(vec![0.5, 0.4]).is_err());
        assert!(DistVector::new(vec![1.5, -0.5]).is_err());
        assert!(DistVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(DistVector::new(vec![]).is_err());
    }

    #[test]
    fn visitation_of_two_state_chain_is_geometric() {
        // d(s0) = (1-γ) Σ_t γ^t [s_t = s0] = 1-γ, d(s1) = γ.
        let mdp = two_state_chain(0.9);
        let pi = TabularPolicy::uniform(2, 1);
        let d = state_visitation(&mdp, &pi).unwrap();
        assert!((d[0] - 0.1).abs() < 1e-12);
        assert!((d[1] - 0.9).abs() < 1e-12);
    }

    /// Independent oracle: estimate d^π by sampling the geometric-horizon
    /// construction directly.
    fn monte_carlo_visitation(
        mdp: &TabularMdp,
        pi: &TabularPolicy,
        samples: usize,
        seed: u64,
    ) -> Vec<f64> {
        let mut rng = stream_rng(seed, 99);
        let mut counts = vec![0.0; mdp.n_states()];
        for _ in 0..samples {
            let mut s = sample_index(mdp.initial(), &mut rng);
            loop {
                if rng.gen::<f64>() < 1.0 - mdp.gamma() {
                    break;
                }
                let a = sample_index(pi.row(s), &mut rng);
                s = sample_index(mdp.row(s, a), &mut rng);
            }
            counts[s] += 1.0;
        }
        for c in counts.iter_mut() {
            *c /= samples as f64;
        }
        counts
    }

    fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularMdp {
        let mut rng = stream_rng(seed, 5);
        let initial = dirichlet_uniform(n_states, &mut rng);
        let transition = (0..n_states)
            .map(|_| (0..n_actions).map(|_| dirichlet_uniform(n_states, &mut rng)).collect())
            .collect();
        TabularMdp::new(n_states, n_actions, gamma, initial, transition).unwrap()
    }

    fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> TabularPolicy {
        let mut rng = stream_rng(seed, 6);
        let rows = (0..n_states).map(|_| dirichlet_uniform(n_actions, &mut rng)).collect();
        TabularPolicy::new(rows).unwrap()
    }

    #[test]
    fn visitation_agrees_with_monte_carlo() {
        for seed in 0..4u64 {
            let mdp = random_mdp(8, 3, 0.9, seed);
            let pi = random_policy(8, 3, seed + 100);
            let exact = state_visitation(&mdp, &pi).unwrap();
            let mc = monte_carlo_visitation(&mdp, &pi, 100_000, seed);
            let gap = tv(exact.as_slice(), &mc).unwrap();
            assert!(gap < 0.02, "seed {seed}: TV(exact, monte carlo) = {gap}");
        }
    }

    #[test]
    fn visitation_is_valid_distribution_on_random_instances() {
        for seed in 0..20u64 {
            let gamma = if seed % 2 == 0 { 0.5 } else { 0.95 };
            let mdp = random_mdp(2 + (seed as usize % 9), 1 + (seed as usize % 5), gamma, seed);
            let pi = random_policy(mdp.n_states(), mdp.n_actions(), seed + 7);
            let d = state_visitation(&mdp, &pi).unwrap();
            assert!((d.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(d.as_slice().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn policy_diff_is_zero_for_identical_policies() {
        let mdp = random_mdp(6, 4, 0.9, 11);
        let pi = random_policy(6, 4, 12);
        assert_eq!(policy_diff(&mdp, &pi, &pi).unwrap(), 0.0);
    }

    #[test]
    fn transition_err_zero_for_equal_policies_and_bounded_by_one() {
        let mdp = random_mdp(5, 3, 0.8, 21);
        let pi1 = random_policy(5, 3, 22);
        let pi2 = random_policy(5, 3, 23);
        let d = state_visitation(&mdp, &pi1).unwrap();
        assert_eq!(transition_err(&d, &pi1, &pi1, mdp.transition()).unwrap(), 0.0);
        let e = transition_err(&d, &pi1, &pi2, mdp.transition()).unwrap();
        assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn value_iteration_beats_every_deterministic_policy_on_small_mdp() {
        // Exhaustive oracle: enumerate all |A|^|S| deterministic policies and
        // compare discounted returns computed from the visitation identity
        // E[Σ γ^t r] = Σ_s d(s) Σ_a π(a|s) r(s,a) / (1-γ).
        let mdp = random_mdp(4, 2, 0.9, 31);
        let mut rng = stream_rng(31, 7);
        let reward: Vec<Vec<f64>> =
            (0..4).map(|_| (0..2).map(|_| rng.gen::<f64>()).collect()).collect();
        let ret = |pi: &TabularPolicy| -> f64 {
            let d = state_visitation(&mdp, pi).unwrap();
            (0..4)
                .map(|s| {
                    d[s] * (0..2).map(|a| pi.row(s)[a] * reward[s][a]).sum::<f64>()
                })
                .sum::<f64>()
                / (1.0 - mdp.gamma())
        };
        let greedy = value_iteration(&mdp, &reward, 1e-12).unwrap();
        let greedy_ret = ret(&greedy);
        for mask in 0..(1 << 4) {
            let actions: Vec<usize> = (0..4).map(|s| (mask >> s) & 1).collect();
            let pi = TabularPolicy::deterministic(&actions, 2);
            assert!(ret(&pi) <= greedy_ret + 1e-9, "policy {actions:?} beats value iteration");
        }
    }

    #[test]
    fn value_iteration_breaks_ties_toward_lowest_index() {
        // Both actions are identical, so every Q-value ties.
        let mdp = TabularMdp::new(
            2,
            2,
            0.5,
            vec![0.5, 0.5],
            vec![
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            ],
        )
        .unwrap();
        let reward = vec![vec![1.0, 1.0], vec![0.0, 0.0]];
        let pi = value_iteration(&mdp, &reward, 1e-10).unwrap();
        assert_eq!(pi.row(0), &[1.0, 0.0]);
        assert_eq!(pi.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn mdp_json_round_trip_preserves_bits() {
        let mdp = random_mdp(5, 3, 0.9, 41);
        let json = serde_json::to_string(&mdp).unwrap();
        let back: TabularMdp = serde_json::from_str(&json).unwrap();
        assert_eq!(mdp.transition(), back.transition());
        assert_eq!(mdp.initial(), back.initial());
        assert_eq!(mdp.gamma(), back.gamma());
    }

    #[test]
    fn mdp_json_rejects_invalid_rows() {
        let mdp = random_mdp(3, 2, 0.9, 43);
        let mut val = serde_json::to_value(&mdp).unwrap();
        val["transition"][0][0][0] = serde_json::json!(0.7);
        let err = serde_json::from_value::<TabularMdp>(val).unwrap_err();
        assert!(err.to_string().contains("transition row"), "{err}");
    }

    proptest! {
        #[test]
        fn tv_is_a_metric_on_random_triples(seed in 0u64..500) {
            let mut rng = stream_rng(seed, 8);
            let n = 2 + (seed as usize % 6);
            let p = dirichlet_uniform(n, &mut rng);
            let q = dirichlet_uniform(n, &mut rng);
            let r = dirichlet_uniform(n, &mut rng);
            let pq = tv(&p, &q).unwrap();
            let qp = tv(&q, &p).unwrap();
            prop_assert!((pq - qp).abs() < 1e-15);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
            let pr = tv(&p, &r).unwrap();
            let rq = tv(&r, &q).unwrap();
            prop_assert!(pq <= pr + rq + 1e-12);
            prop_assert!(tv(&p, &p).unwrap() == 0.0);
        }

        #[test]
        fn kl_and_chi2_nonnegative(seed in 0u64..200) {
            let mut rng = stream_rng(seed, 9);
            let n = 2 + (seed as usize % 6);
            let p = dirichlet_uniform(n, &mut rng);
            let q = dirichlet_uniform(n, &mut rng);
            prop_assert!(kl(&p, &q).unwrap() >= 0.0);
            prop_assert!(chi2(&p, &q).unwrap() >= 0.0);
        }
    }
}
