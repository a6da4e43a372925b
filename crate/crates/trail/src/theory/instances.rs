//! Random tabular instances for stress-testing the bound checks.
//!
//! Distributions are Dirichlet(1,…,1) draws; policies and decoders mix a
//! Dirichlet draw with the uniform row so every probability is at least
//! [`MIN_POLICY_PROB`], which keeps every KL term in the bounds finite.
//! Latent policies place mass only on latents realized at each state — the
//! hypothesis under which the decode-and-marginalize identity is exact.

use rand::Rng;

use crate::latent::{LatentMap, TabularDecoder, TabularLatent};
use crate::mdp::{DistVector, TabularMdp, TabularPolicy};
use crate::rng::dirichlet_uniform;

/// Smallest probability any generated policy or decoder row assigns.
pub const MIN_POLICY_PROB: f64 = 1e-3;

fn full_support_row(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let lambda = MIN_POLICY_PROB * n as f64;
    assert!(lambda < 1.0, "too many categories for the probability floor");
    dirichlet_uniform(n, rng)
        .into_iter()
        .map(|p| (1.0 - lambda) * p + MIN_POLICY_PROB)
        .collect()
}

/// Dirichlet transition rows and a Dirichlet initial distribution; every
/// entry is strictly positive, so every state is visited by every policy.
pub fn random_mdp(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> TabularMdp {
    let transition = (0..n_states)
        .map(|_| (0..n_actions).map(|_| dirichlet_uniform(n_states, rng)).collect())
        .collect();
    let initial = dirichlet_uniform(n_states, rng);
    TabularMdp::new(n_states, n_actions, gamma, initial, transition)
        .expect("dirichlet rows are distributions")
}

/// A policy with every action probability at least [`MIN_POLICY_PROB`].
pub fn random_full_support_policy(
    n_states: usize,
    n_actions: usize,
    rng: &mut impl Rng,
) -> TabularPolicy {
    let rows = (0..n_states).map(|_| full_support_row(n_actions, rng)).collect();
    TabularPolicy::new(rows).expect("floored dirichlet rows are distributions")
}

/// A Dirichlet distribution over `n` categories.
pub fn random_dist(n: usize, rng: &mut impl Rng) -> DistVector {
    DistVector::new(dirichlet_uniform(n, rng)).expect("dirichlet draw is a distribution")
}

/// An offline state distribution with guaranteed full support: a Dirichlet
/// draw mixed with 10% uniform mass, so coverage holds against any target.
pub fn random_offline_dist(n: usize, rng: &mut impl Rng) -> DistVector {
    let u = 0.1 / n as f64;
    let mixed = dirichlet_uniform(n, rng).into_iter().map(|p| 0.9 * p + u).collect();
    DistVector::new(mixed).expect("mixed dirichlet is a distribution")
}

/// A uniformly random latent assignment. Nothing forces every latent to be
/// realized at every state, so downstream code gets exercised on unrealized
/// `(s, z)` cells.
pub fn random_latent_map(
    n_states: usize,
    n_actions: usize,
    n_latent: usize,
    rng: &mut impl Rng,
) -> LatentMap {
    let table = (0..n_states)
        .map(|_| (0..n_actions).map(|_| rng.gen_range(0..n_latent)).collect())
        .collect();
    LatentMap::new(table, n_latent).expect("entries are drawn below n_latent")
}

/// Dirichlet rows for a latent transition table `t_z[s][z][s']`.
pub fn random_latent_rows(
    n_states: usize,
    n_latent: usize,
    n_next: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<Vec<f64>>> {
    (0..n_states)
        .map(|_| (0..n_latent).map(|_| dirichlet_uniform(n_next, rng)).collect())
        .collect()
}

/// A decoder whose every row has full support over actions.
pub fn random_decoder(
    n_states: usize,
    n_latent: usize,
    n_actions: usize,
    rng: &mut impl Rng,
) -> TabularDecoder {
    let probs = (0..n_states)
        .map(|_| (0..n_latent).map(|_| full_support_row(n_actions, rng)).collect())
        .collect();
    TabularDecoder::new(probs).expect("floored dirichlet rows are distributions")
}

/// A latent policy supported exactly on the latents realized at each state,
/// each with probability at least [`MIN_POLICY_PROB`].
pub fn random_realized_latent(phi: &LatentMap, rng: &mut impl Rng) -> TabularLatent {
    let rows = (0..phi.n_states())
        .map(|s| {
            let realized: Vec<usize> =
                (0..phi.n_latent()).filter(|&z| phi.realized(s, z)).collect();
            let support = full_support_row(realized.len(), rng);
            let mut row = vec![0.0; phi.n_latent()];
            for (&z, &p) in realized.iter().zip(&support) {
                row[z] = p;
            }
            row
        })
        .collect();
    TabularLatent::new(rows).expect("realized rows are distributions")
}

/// A deterministic latent table with one `d`-simplex point per state.
pub fn random_simplex_theta(n_states: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n_states).map(|_| dirichlet_uniform(d, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, stream_rng};

    #[test]
    fn generators_respect_their_floors_and_supports() {
        let mut rng = stream_rng(1, stream::INSTANCE_GEN);
        let pi = random_full_support_policy(6, 5, &mut rng);
        for s in 0..6 {
            assert!(pi.row(s).iter().all(|&p| p >= MIN_POLICY_PROB));
        }
        let d_off = random_offline_dist(8, &mut rng);
        assert!(d_off.as_slice().iter().all(|&p| p >= 0.1 / 8.0 - 1e-15));

        let phi = random_latent_map(4, 3, 5, &mut rng);
        let latent = random_realized_latent(&phi, &mut rng);
        for s in 0..4 {
            for z in 0..5 {
                if phi.realized(s, z) {
                    assert!(latent.row(s)[z] > 0.0);
                } else {
                    assert_eq!(latent.row(s)[z], 0.0);
                }
            }
        }
    }

    #[test]
    fn generators_are_reproducible() {
        let draw = |seed| {
            let mut rng = stream_rng(seed, stream::INSTANCE_GEN);
            let mdp = random_mdp(5, 3, 0.9, &mut rng);
            mdp.row(2, 1).to_vec()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }
}
