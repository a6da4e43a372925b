//! Behavioral cloning directly in the raw action space.
//!
//! The comparison point for the latent pipeline: fit `π(a|s)` on expert
//! pairs with no representation in between. Tabular mode is the count
//! estimate with a uniform fallback on unseen states; continuous mode fits
//! a Gaussian head by log-loss descent, reusing the trainer from
//! [`crate::latent`].

use rand::Rng;
use rayon::prelude::*;

use crate::data::{generate_expert, ExpertDataset};
use crate::latent::{train_gaussian_latent, FitConfig, GaussianHead};
use crate::mdp::{policy_diff, state_visitation, tv, TabularMdp, TabularPolicy};
use crate::rng::{cell_rng, stream};
use crate::{Error, Result};

/// Which kind of policy [`vanilla_bc`] fits.
#[derive(Debug, Clone)]
pub enum BcMode {
    /// Count-based conditional estimate on a finite state/action grid.
    Tabular { n_states: usize, n_actions: usize },
    /// Gaussian head fit by NLL; dimensions are read off the data.
    Gaussian { hidden: Vec<usize> },
}

/// A fitted raw-action policy, matching the mode it was fit in.
#[derive(Debug, Clone)]
pub enum BcPolicy {
    Tabular(TabularPolicy),
    Gaussian(GaussianHead),
}

/// Fit behavioral cloning on raw actions in the requested mode. `cfg` is
/// only consulted in the continuous mode; the tabular estimate is closed
/// form.
pub fn vanilla_bc(expert: &ExpertDataset, mode: &BcMode, cfg: &FitConfig) -> Result<BcPolicy> {
    match mode {
        BcMode::Tabular { n_states, n_actions } => {
            Ok(BcPolicy::Tabular(tabular_bc(expert, *n_states, *n_actions)?))
        }
        BcMode::Gaussian { hidden } => Ok(BcPolicy::Gaussian(gaussian_bc(expert, hidden, cfg)?.0)),
    }
}

/// The count estimate `π̂(a|s) ∝ #(s,a)`, uniform at unseen states.
pub fn tabular_bc(
    expert: &ExpertDataset,
    n_states: usize,
    n_actions: usize,
) -> Result<TabularPolicy> {
    if expert.is_empty() {
        return Err(Error::EmptyDataset("expert dataset is empty".into()));
    }
    let pairs = expert.tabular()?;
    let mut counts = vec![vec![0.0f64; n_actions]; n_states];
    for (i, &(s, a)) in pairs.iter().enumerate() {
        if s >= n_states || a >= n_actions {
            return Err(Error::DataFormat {
                line: i + 1,
                msg: format!("pair ({s}, {a}) out of range for a {n_states}×{n_actions} policy"),
            });
        }
        counts[s][a] += 1.0;
    }
    let rows = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total == 0.0 {
                vec![1.0 / n_actions as f64; n_actions]
            } else {
                row.into_iter().map(|c| c / total).collect()
            }
        })
        .collect();
    TabularPolicy::new(rows)
}

/// Fit a Gaussian head `π(a|s)` on continuous expert pairs by NLL descent.
/// Returns the head and its loss log.
pub fn gaussian_bc(
    expert: &ExpertDataset,
    hidden: &[usize],
    cfg: &FitConfig,
) -> Result<(GaussianHead, Vec<(usize, f64)>)> {
    if expert.is_empty() {
        return Err(Error::EmptyDataset("expert dataset is empty".into()));
    }
    let pairs = expert.continuous()?;
    let state_dim = pairs[0].0.len();
    let action_dim = pairs[0].1.len();
    for (i, (s, a)) in pairs.iter().enumerate() {
        if s.len() != state_dim || a.len() != action_dim {
            return Err(Error::DataFormat {
                line: i + 1,
                msg: format!(
                    "pair has dims ({}, {}), first pair has ({state_dim}, {action_dim})",
                    s.len(),
                    a.len()
                ),
            });
        }
    }
    let mut head = GaussianHead::new(state_dim, hidden, action_dim, cfg.seed);
    let log = train_gaussian_latent(pairs, &mut head, cfg)?;
    Ok((head, log))
}

/// Monte-Carlo mean of `E_{s∼d^{π*}}[TV(π̂_n(s) ‖ π*(s))]` over fresh
/// `n`-sample expert datasets, with `π̂_n` the tabular count estimate.
pub fn bc_tv_mean(
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
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
    let errs: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = cell_rng(seed, stream::SWEEP, r as u64);
            let ds_seed: u64 = rng.gen();
            let expert = generate_expert(mdp, pi_star, n, ds_seed)?;
            let hat = tabular_bc(&expert, mdp.n_states(), mdp.n_actions())?;
            let mut err = 0.0;
            for s in 0..mdp.n_states() {
                err += d_star[s] * tv(pi_star.row(s), hat.row(s))?;
            }
            Ok(err)
        })
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / resamples as f64)
}

/// Monte-Carlo mean of `Diff(π̂, π*)` for any policy-fitting procedure:
/// draws `resamples` fresh expert datasets of size `n` and averages the
/// visitation gap of the fitted policy. Two procedures called with the same
/// `seed` see identical datasets, so their means compare pairwise.
pub fn mean_policy_diff(
    mdp: &TabularMdp,
    pi_star: &TabularPolicy,
    n: usize,
    resamples: usize,
    seed: u64,
    fit: impl Fn(&ExpertDataset) -> Result<TabularPolicy> + Sync,
) -> Result<f64> {
    if resamples == 0 {
        return Err(Error::Config {
            field: "resamples".into(),
            msg: "diff estimate needs at least one resample".into(),
        });
    }
    let diffs: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = cell_rng(seed, stream::SWEEP, r as u64);
            let ds_seed: u64 = rng.gen();
            let expert = generate_expert(mdp, pi_star, n, ds_seed)?;
            policy_diff(mdp, &fit(&expert)?, pi_star)
        })
        .collect::<Result<_>>()?;
    Ok(diffs.iter().sum::<f64>() / resamples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExpertData;
    use crate::envs::{build_redundant_gridworld, Duplication, GridSpec};
    use crate::latent::compose;
    use crate::mdp::{value_iteration, DistVector};
    use crate::rng::stream_rng;
    use crate::theory::{instances, optimal_decoder, tabular_latent_bc, uniform_joint};

    fn pairs(data: Vec<(usize, usize)>) -> ExpertDataset {
        let episodes = vec![data.len()];
        ExpertDataset { data: ExpertData::Tabular(data), episodes }
    }

    #[test]
    fn single_repeated_pair_gives_a_delta_row() {
        let hat = tabular_bc(&pairs(vec![(0, 1); 5]), 2, 3).unwrap();
        assert_eq!(hat.row(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn unseen_states_fall_back_to_uniform() {
        let hat = tabular_bc(&pairs(vec![(0, 1); 5]), 2, 3).unwrap();
        assert_eq!(hat.row(1), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn bad_pairs_and_empty_data_are_rejected() {
        assert!(matches!(
            tabular_bc(&pairs(vec![(0, 3)]), 2, 3),
            Err(Error::DataFormat { line: 1, .. })
        ));
        assert!(matches!(
            tabular_bc(&pairs(vec![]), 2, 3),
            Err(Error::EmptyDataset(_))
        ));
        let cont = ExpertDataset {
            data: ExpertData::Continuous(vec![(vec![0.0], vec![1.0])]),
            episodes: vec![1],
        };
        assert!(matches!(tabular_bc(&cont, 2, 3), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn count_estimate_respects_the_tv_rate() {
        let mut rng = stream_rng(11, stream::INSTANCE_GEN);
        let mdp = instances::random_mdp(4, 3, 0.9, &mut rng);
        let pi = instances::random_full_support_policy(4, 3, &mut rng);
        let n = 1000;
        let mean = bc_tv_mean(&mdp, &pi, n, 40, 11).unwrap();
        let bound = ((4 * 3) as f64 / n as f64).sqrt();
        assert!(mean <= bound, "mean {mean} > bound {bound}");
    }

    #[test]
    fn raw_cloning_needs_more_data_than_latent_cloning() {
        // Redundant gridworld with the "down" move heavily duplicated: the
        // uniform fallback over raw actions walks away from the goal, while
        // the latent fallback stays uniform over the four moves.
        let spec = GridSpec {
            width: 3,
            height: 3,
            walls: vec![],
            goal: (2, 2),
            slip_prob: 0.1,
            duplication: Duplication::PerMove([1, 1, 13, 1]),
            gamma: 0.9,
            start: Some((0, 0)),
        };
        let gw = build_redundant_gridworld(&spec).unwrap();
        let expert = value_iteration(&gw.mdp, &gw.reward, 1e-10).unwrap();
        let n_states = gw.mdp.n_states();
        let n_actions = gw.mdp.n_actions();
        let alpha = optimal_decoder(
            &uniform_joint(&DistVector::uniform(n_states), n_actions),
            &gw.phi_star,
        )
        .unwrap();
        for n in [16, 48, 144] {
            let vanilla = mean_policy_diff(&gw.mdp, &expert, n, 30, 7, |e| {
                tabular_bc(e, n_states, n_actions)
            })
            .unwrap();
            let latent = mean_policy_diff(&gw.mdp, &expert, n, 30, 7, |e| {
                compose(&alpha, &tabular_latent_bc(e, &gw.phi_star)?)
            })
            .unwrap();
            assert!(
                vanilla > latent,
                "n={n}: raw-action mean diff {vanilla} <= latent mean diff {latent}"
            );
        }
    }

    #[test]
    fn gaussian_mode_fits_a_linear_map() {
        let mut rng = stream_rng(12, stream::INSTANCE_GEN);
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..256)
            .map(|_| {
                let s: f64 = rng.gen_range(-1.0..1.0);
                (vec![s], vec![2.0 * s])
            })
            .collect();
        let expert = ExpertDataset { data: ExpertData::Continuous(data), episodes: vec![256] };
        let cfg = FitConfig { steps: 400, batch_size: 64, lr: 1e-2, seed: 3 };
        let policy = vanilla_bc(&expert, &BcMode::Gaussian { hidden: vec![16] }, &cfg).unwrap();
        let BcPolicy::Gaussian(head) = policy else { panic!("expected a Gaussian policy") };
        let (mean, _) = head.dist(&[0.5]);
        assert!((mean[0] - 1.0).abs() < 0.25, "mean {} far from 1.0", mean[0]);
        let (_, log) = gaussian_bc(&expert, &[16], &cfg).unwrap();
        assert!(log.last().unwrap().1 < log.first().unwrap().1);
    }
}
