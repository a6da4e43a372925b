//! Energy-based transition model over learned embeddings, its contrastive
//! training loss, and the random-feature map that linearizes it.
//!
//! Two encoders embed state–action pairs and next states into a shared
//! `ℝ^d`; the transition model scores a successor by the energy
//! `½‖φ(s,a) − ψ(s′)‖²` against a candidate pool. The contrastive loss is
//! the energy of the observed successor plus the log of the mean Boltzmann
//! weight over negatives; enumerating the whole pool turns it into an exact
//! softmax cross-entropy (up to `ln B`), which the tests exploit as an
//! oracle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nn::{Adam, Mlp};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Encoder pair plus a candidate pool of next-state feature vectors (the
/// empirical successor distribution of the offline data).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    /// Embeds state–action pair features.
    pub phi: Mlp,
    /// Embeds next-state features.
    pub psi: Mlp,
    /// Embedding width shared by both encoders.
    pub embed_dim: usize,
    /// Candidate next-state features for negatives and normalization.
    pub rho_pool: Vec<Vec<f64>>,
}

impl EnergyModel {
    pub fn new(
        pair_dim: usize,
        next_dim: usize,
        embed_dim: usize,
        hidden: &[usize],
        rho_pool: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<EnergyModel> {
        if rho_pool.is_empty() {
            return Err(Error::EmptyDataset("candidate pool must be non-empty".into()));
        }
        if let Some(bad) = rho_pool.iter().find(|c| c.len() != next_dim) {
            return Err(Error::DimensionMismatch(format!(
                "pool candidate has length {}, expected {next_dim}",
                bad.len()
            )));
        }
        let mut phi_sizes = vec![pair_dim];
        phi_sizes.extend_from_slice(hidden);
        phi_sizes.push(embed_dim);
        let mut psi_sizes = vec![next_dim];
        psi_sizes.extend_from_slice(hidden);
        psi_sizes.push(embed_dim);
        Ok(EnergyModel {
            phi: Mlp::new(&phi_sizes, seed.wrapping_mul(2)),
            psi: Mlp::new(&psi_sizes, seed.wrapping_mul(2).wrapping_add(1)),
            embed_dim,
            rho_pool,
        })
    }

    pub fn from_parts(phi: Mlp, psi: Mlp, rho_pool: Vec<Vec<f64>>) -> Result<EnergyModel> {
        if phi.output_dim() != psi.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "encoder widths differ: {} vs {}",
                phi.output_dim(),
                psi.output_dim()
            )));
        }
        if rho_pool.is_empty() {
            return Err(Error::EmptyDataset("candidate pool must be non-empty".into()));
        }
        let embed_dim = phi.output_dim();
        Ok(EnergyModel { phi, psi, embed_dim, rho_pool })
    }

    /// `½‖φ(pair) − ψ(next)‖²`.
    pub fn energy(&self, pair: &[f64], next: &[f64]) -> f64 {
        let u = self.phi.forward(pair);
        let v = self.psi.forward(next);
        half_sq_dist(&u, &v)
    }

    /// Softmax over the candidate pool: `p(c) ∝ exp(−½‖φ(pair) − ψ(c)‖²)`.
    pub fn candidate_dist(&self, pair: &[f64], candidates: &[Vec<f64>]) -> Vec<f64> {
        let u = self.phi.forward(pair);
        let neg_e: Vec<f64> =
            candidates.iter().map(|c| -half_sq_dist(&u, &self.psi.forward(c))).collect();
        softmax(&neg_e)
    }
}

fn half_sq_dist(u: &[f64], v: &[f64]) -> f64 {
    0.5 * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// How negatives are chosen for the contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// The batch's own successors serve as each other's negatives.
    InBatch,
    /// `count` uniform draws from the model's candidate pool per sample.
    Sampled { count: usize },
    /// Enumerate the entire candidate pool (exact; used as the oracle).
    Full,
}

/// Contrastive loss over a batch of `(pair_features, next_features)` plus
/// exact gradients for both encoders.
///
/// Per sample: `½‖φ−ψ₊‖² + log( (1/B) Σ_j exp(−½‖φ−ψ_j‖²) )`, averaged over
/// the batch. With [`NegativeMode::Full`] the inner sum enumerates the pool,
/// making the loss the enumerated softmax cross-entropy minus `ln B`.
pub fn contrastive_loss(
    model: &EnergyModel,
    batch: &[(Vec<f64>, Vec<f64>)],
    mode: NegativeMode,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("contrastive batch is empty".into()));
    }
    if model.rho_pool.is_empty() {
        return Err(Error::EmptyDataset("candidate pool is empty".into()));
    }
    if let NegativeMode::Sampled { count: 0 } = mode {
        return Err(Error::Config {
            field: "negatives".into(),
            msg: "sampled mode needs at least one negative".into(),
        });
    }
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let mut grad_phi = vec![0.0; model.phi.n_params()];
    let mut grad_psi = vec![0.0; model.psi.n_params()];
    let mut loss = 0.0;

    // Shared candidate side (in-batch or full pool): embed once, accumulate
    // upstreams, backprop once per candidate at the end.
    let shared: Option<Vec<&[f64]>> = match mode {
        NegativeMode::InBatch => Some(batch.iter().map(|(_, sp)| sp.as_slice()).collect()),
        NegativeMode::Full => Some(model.rho_pool.iter().map(|c| c.as_slice()).collect()),
        NegativeMode::Sampled { .. } => None,
    };

    match shared {
        Some(cands) => {
            let embeds: Vec<Vec<f64>> = cands.iter().map(|c| model.psi.forward(c)).collect();
            let mut cand_upstream = vec![vec![0.0; model.embed_dim]; cands.len()];
            for (i, (pair, next)) in batch.iter().enumerate() {
                let u = model.phi.forward(pair);
                // Positive: shared embedding i in in-batch mode, else its own.
                let own_pos;
                let v_pos: &[f64] = if matches!(mode, NegativeMode::InBatch) {
                    &embeds[i]
                } else {
                    own_pos = model.psi.forward(next);
                    &own_pos
                };
                let neg_e: Vec<f64> = embeds.iter().map(|v| -half_sq_dist(&u, v)).collect();
                let m = neg_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + neg_e.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
                loss += (half_sq_dist(&u, v_pos) + lse - (cands.len() as f64).ln()) * inv_n;

                let mut u_up: Vec<f64> =
                    u.iter().zip(v_pos).map(|(a, b)| (a - b) * inv_n).collect();
                for (j, v) in embeds.iter().enumerate() {
                    let q = (neg_e[j] - lse).exp();
                    for k in 0..model.embed_dim {
                        u_up[k] -= q * (u[k] - v[k]) * inv_n;
                        cand_upstream[j][k] += q * (u[k] - v[k]) * inv_n;
                    }
                }
                if matches!(mode, NegativeMode::InBatch) {
                    for k in 0..model.embed_dim {
                        cand_upstream[i][k] += (v_pos[k] - u[k]) * inv_n;
                    }
                } else {
                    let up: Vec<f64> =
                        v_pos.iter().zip(&u).map(|(b, a)| (b - a) * inv_n).collect();
                    model.psi.forward_backward(next, &up, &mut grad_psi);
                }
                model.phi.forward_backward(pair, &u_up, &mut grad_phi);
            }
            for (c, up) in cands.iter().zip(&cand_upstream) {
                model.psi.forward_backward(c, up, &mut grad_psi);
            }
        }
        None => {
            let count = match mode {
                NegativeMode::Sampled { count } => count,
                _ => unreachable!(),
            };
            for (pair, next) in batch {
                let u = model.phi.forward(pair);
                let v_pos = model.psi.forward(next);
                let idx: Vec<usize> =
                    (0..count).map(|_| rng.gen_range(0..model.rho_pool.len())).collect();
                let negs: Vec<Vec<f64>> =
                    idx.iter().map(|&j| model.psi.forward(&model.rho_pool[j])).collect();
                let neg_e: Vec<f64> = negs.iter().map(|v| -half_sq_dist(&u, v)).collect();
                let m = neg_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + neg_e.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
                loss += (half_sq_dist(&u, &v_pos) + lse - (count as f64).ln()) * inv_n;

                let mut u_up: Vec<f64> =
                    u.iter().zip(&v_pos).map(|(a, b)| (a - b) * inv_n).collect();
                for (j, v) in negs.iter().enumerate() {
                    let q = (neg_e[j] - lse).exp();
                    let up: Vec<f64> =
                        v.iter().zip(&u).map(|(b, a)| q * (a - b) * inv_n).collect();
                    for k in 0..model.embed_dim {
                        u_up[k] -= q * (u[k] - v[k]) * inv_n;
                    }
                    model.psi.forward_backward(&model.rho_pool[idx[j]], &up, &mut grad_psi);
                }
                let pos_up: Vec<f64> =
                    v_pos.iter().zip(&u).map(|(b, a)| (b - a) * inv_n).collect();
                model.psi.forward_backward(next, &pos_up, &mut grad_psi);
                model.phi.forward_backward(pair, &u_up, &mut grad_phi);
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    Ok((loss, grad_phi, grad_psi))
}

/// Training configuration for [`train_transition_ebm`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EbmConfig {
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub batch_size: usize,
    pub negatives: NegativeMode,
    pub lr: f64,
    pub seed: u64,
}

impl Default for EbmConfig {
    fn default() -> Self {
        EbmConfig {
            embed_dim: 8,
            hidden: vec![64, 64],
            steps: 20_000,
            batch_size: 64,
            negatives: NegativeMode::InBatch,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Pretrain the factored transition model on offline `(pair, next)` feature
/// pairs by minimizing the contrastive loss with Adam.
///
/// The candidate pool is the dataset's own successor set. Returns the model
/// and a training log of `(step, loss)` samples.
pub fn train_transition_ebm(
    data: &[(Vec<f64>, Vec<f64>)],
    cfg: &EbmConfig,
) -> Result<(EnergyModel, Vec<(usize, f64)>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("transition model training set is empty".into()));
    }
    let pair_dim = data[0].0.len();
    let next_dim = data[0].1.len();
    let pool: Vec<Vec<f64>> = data.iter().map(|(_, sp)| sp.clone()).collect();
    let mut model =
        EnergyModel::new(pair_dim, next_dim, cfg.embed_dim, &cfg.hidden, pool, cfg.seed)?;
    let mut rng = stream_rng(cfg.seed, crate::rng::stream::TRAIN);
    let mut opt_phi = Adam::new(model.phi.n_params(), cfg.lr);
    let mut opt_psi = Adam::new(model.psi.n_params(), cfg.lr);
    let mut log = Vec::new();
    let log_every = (cfg.steps / 50).max(1);
    for step in 0..cfg.steps {
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.batch_size.min(data.len()))
            .map(|_| data[rng.gen_range(0..data.len())].clone())
            .collect();
        let (loss, g_phi, g_psi) = contrastive_loss(&model, &batch, cfg.negatives, &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, msg: format!("contrastive loss = {loss}") });
        }
        opt_phi
            .step(model.phi.params_mut(), &g_phi)
            .map_err(|e| Error::Diverged { step, msg: e.to_string() })?;
        opt_psi
            .step(model.psi.params_mut(), &g_psi)
            .map_err(|e| Error::Diverged { step, msg: e.to_string() })?;
        if step % log_every == 0 || step + 1 == cfg.steps {
            log.push((step, loss));
        }
    }
    Ok((model, log))
}

/// Frozen random-feature map `x ↦ scale · cos(Wx + b)` with Gaussian `W`
/// and uniform phases, approximating the kernel `exp(−‖x−y‖²/2)` through
/// plain dot products.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub scale: f64,
    pub seed: u64,
}

impl RffMap {
    pub fn new(in_dim: usize, n_features: usize, seed: u64) -> RffMap {
        assert!(in_dim > 0 && n_features > 0);
        let mut rng = stream_rng(seed, crate::rng::stream::RFF);
        let w = (0..n_features)
            .map(|_| (0..in_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let b = (0..n_features).map(|_| rng.gen::<f64>() * 2.0 * std::f64::consts::PI).collect();
        RffMap { w, b, scale: (2.0 / n_features as f64).sqrt(), seed }
    }

    pub fn n_features(&self) -> usize {
        self.w.len()
    }

    pub fn in_dim(&self) -> usize {
        self.w[0].len()
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "input dimension mismatch");
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, &b)| {
                let dot: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum();
                self.scale * (dot + b).cos()
            })
            .collect()
    }

    /// Kernel estimate `⟨rff(x), rff(y)⟩ ≈ exp(−‖x−y‖²/2)`.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        self.features(x).iter().zip(self.features(y)).map(|(a, b)| a * b).sum()
    }
}

/// Exact Gaussian kernel the random features approximate.
pub fn gaussian_kernel(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / 2.0).exp()
}

/// Candidate distribution of the linearized model: normalized dot-product
/// scores `⟨rff(x), rff(c)⟩` over the pool (negative estimates clamp to 0).
pub fn linear_candidate_dist(map: &RffMap, x: &[f64], candidates: &[Vec<f64>]) -> Vec<f64> {
    let fx = map.features(x);
    let mut scores: Vec<f64> = candidates
        .iter()
        .map(|c| {
            map.features(c).iter().zip(&fx).map(|(a, b)| a * b).sum::<f64>().max(0.0)
        })
        .collect();
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / candidates.len() as f64; candidates.len()];
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;

    fn tiny_model(pool: Vec<Vec<f64>>, seed: u64) -> EnergyModel {
        EnergyModel::new(3, 2, 4, &[6], pool, seed).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn single_candidate_pool_gives_zero_loss() {
        let mut rng = stream_rng(1, 9);
        let sp = rand_vec(&mut rng, 2);
        let model = tiny_model(vec![sp.clone()], 3);
        let batch = vec![(rand_vec(&mut rng, 3), sp)];
        let (loss, _, _) =
            contrastive_loss(&model, &batch, NegativeMode::Full, &mut rng).unwrap();
        assert_eq!(loss, 0.0, "positive energy must cancel the single-candidate sum");
    }

    #[test]
    fn constant_embeddings_give_zero_loss() {
        let mut model = tiny_model(vec![vec![0.3, -0.4], vec![0.9, 0.1]], 3);
        let zeros_phi = vec![0.0; model.phi.n_params()];
        let zeros_psi = vec![0.0; model.psi.n_params()];
        model.phi.set_params(&zeros_phi);
        model.psi.set_params(&zeros_psi);
        let mut rng = stream_rng(2, 9);
        let batch = vec![(vec![0.1, 0.2, 0.3], vec![0.5, 0.5])];
        let (loss, _, _) =
            contrastive_loss(&model, &batch, NegativeMode::Full, &mut rng).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn two_candidate_closed_form() {
        // φ ≡ 0; ψ maps scalar x to [x, x], so ψ(0) = 0 and ‖ψ(1)‖² = 2.
        let phi = {
            let mut m = Mlp::new(&[1, 2], 0);
            m.set_params(&[0.0, 0.0, 0.0, 0.0]);
            m
        };
        let psi = {
            let mut m = Mlp::new(&[1, 2], 0);
            m.set_params(&[1.0, 1.0, 0.0, 0.0]);
            m
        };
        let model = EnergyModel::from_parts(phi, psi, vec![vec![0.0], vec![1.0]]).unwrap();
        let mut rng = stream_rng(0, 9);
        let batch = vec![(vec![0.7], vec![0.0])];
        let (loss, _, _) =
            contrastive_loss(&model, &batch, NegativeMode::Full, &mut rng).unwrap();
        let expect = ((1.0 + (-1.0f64).exp()) / 2.0).ln();
        assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn full_mode_matches_enumerated_cross_entropy() {
        let mut rng = stream_rng(7, 9);
        for trial in 0..5 {
            let pool: Vec<Vec<f64>> = (0..12).map(|_| rand_vec(&mut rng, 2)).collect();
            let model = tiny_model(pool.clone(), 100 + trial);
            let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
                .map(|_| {
                    let pos = pool[rng.gen_range(0..pool.len())].clone();
                    (rand_vec(&mut rng, 3), pos)
                })
                .collect();
            let (loss, _, _) =
                contrastive_loss(&model, &batch, NegativeMode::Full, &mut rng).unwrap();
            // Independent oracle: plain softmax cross-entropy minus ln B.
            let mut oracle = 0.0;
            for (pair, pos) in &batch {
                let weights: Vec<f64> =
                    pool.iter().map(|c| (-model.energy(pair, c)).exp()).collect();
                let total: f64 = weights.iter().sum();
                let p_pos = (-model.energy(pair, pos)).exp() / total;
                oracle += -p_pos.ln() - (pool.len() as f64).ln();
            }
            oracle /= batch.len() as f64;
            assert!((loss - oracle).abs() < 1e-8, "trial {trial}: {loss} vs {oracle}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_all_modes() {
        let mut rng = stream_rng(4, 9);
        let pool: Vec<Vec<f64>> = (0..8).map(|_| rand_vec(&mut rng, 2)).collect();
        let model = tiny_model(pool.clone(), 5);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
            .map(|_| (rand_vec(&mut rng, 3), pool[rng.gen_range(0..pool.len())].clone()))
            .collect();
        for mode in [NegativeMode::Full, NegativeMode::InBatch] {
            let mut r = stream_rng(11, 9);
            let (_, g_phi, g_psi) = contrastive_loss(&model, &batch, mode, &mut r).unwrap();
            let mut probe = model.clone();
            let check_phi = gradient_check(model.phi.params(), &g_phi, 1e-5, 80, |p| {
                probe.phi.set_params(p);
                let mut r = stream_rng(11, 9);
                contrastive_loss(&probe, &batch, mode, &mut r).unwrap().0
            });
            assert!(check_phi.max_rel_err < 1e-5, "phi {mode:?}: {}", check_phi.max_rel_err);
            probe.phi.set_params(model.phi.params());
            let check_psi = gradient_check(model.psi.params(), &g_psi, 1e-5, 80, |p| {
                probe.psi.set_params(p);
                let mut r = stream_rng(11, 9);
                contrastive_loss(&probe, &batch, mode, &mut r).unwrap().0
            });
            assert!(check_psi.max_rel_err < 1e-5, "psi {mode:?}: {}", check_psi.max_rel_err);
        }
        // Sampled mode: identical rng stream per evaluation keeps the draw
        // fixed, so finite differences see a deterministic function.
        let mode = NegativeMode::Sampled { count: 4 };
        let mut r = stream_rng(13, 9);
        let (_, g_phi, _) = contrastive_loss(&model, &batch, mode, &mut r).unwrap();
        let mut probe = model.clone();
        let check = gradient_check(model.phi.params(), &g_phi, 1e-5, 60, |p| {
            probe.phi.set_params(p);
            let mut r = stream_rng(13, 9);
            contrastive_loss(&probe, &batch, mode, &mut r).unwrap().0
        });
        assert!(check.max_rel_err < 1e-5, "sampled: {}", check.max_rel_err);
    }

    #[test]
    fn sampled_negatives_are_seed_deterministic() {
        let mut rng = stream_rng(3, 9);
        let pool: Vec<Vec<f64>> = (0..10).map(|_| rand_vec(&mut rng, 2)).collect();
        let model = tiny_model(pool.clone(), 8);
        let batch = vec![(rand_vec(&mut rng, 3), pool[0].clone())];
        let mode = NegativeMode::Sampled { count: 3 };
        let mut r1 = stream_rng(42, 9);
        let mut r2 = stream_rng(42, 9);
        let (l1, g1, _) = contrastive_loss(&model, &batch, mode, &mut r1).unwrap();
        let (l2, g2, _) = contrastive_loss(&model, &batch, mode, &mut r2).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        // Two pair clusters with distinct successors: the model must learn
        // to rank the right successor above the wrong one.
        let mut rng = stream_rng(6, 9);
        let mut data = Vec::new();
        for _ in 0..64 {
            let eps = 0.05 * (rng.gen::<f64>() - 0.5);
            data.push((vec![1.0 + eps, 0.0, 0.0], vec![1.0, 0.0]));
            let eps = 0.05 * (rng.gen::<f64>() - 0.5);
            data.push((vec![0.0, 1.0 + eps, 0.0], vec![0.0, 1.0]));
        }
        let cfg = EbmConfig {
            embed_dim: 4,
            hidden: vec![16],
            steps: 400,
            batch_size: 32,
            negatives: NegativeMode::InBatch,
            lr: 3e-3,
            seed: 9,
        };
        let (model, log) = train_transition_ebm(&data, &cfg).unwrap();
        assert!(log.last().unwrap().1 < log.first().unwrap().1);
        let e_right = model.energy(&[1.0, 0.0, 0.0], &[1.0, 0.0]);
        let e_wrong = model.energy(&[1.0, 0.0, 0.0], &[0.0, 1.0]);
        assert!(e_right < e_wrong, "true successor must have lower energy");
        let (model2, _) = train_transition_ebm(&data, &cfg).unwrap();
        assert_eq!(model.phi.params(), model2.phi.params(), "training must be seed-deterministic");
    }

    #[test]
    fn rff_zero_map_is_constant() {
        let mut map = RffMap::new(3, 16, 0);
        for row in map.w.iter_mut() {
            row.iter_mut().for_each(|w| *w = 0.0);
        }
        map.b.iter_mut().for_each(|b| *b = 0.0);
        let f = map.features(&[0.4, -0.2, 0.9]);
        let expect = (2.0f64 / 16.0).sqrt();
        assert!(f.iter().all(|&v| (v - expect).abs() < 1e-15));
    }

    #[test]
    fn rff_self_kernel_near_one() {
        let mut rng = stream_rng(5, 9);
        let map = RffMap::new(8, 4096, 1);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let x = rand_vec(&mut rng, 8);
            worst = worst.max((map.kernel(&x, &x) - 1.0).abs());
        }
        assert!(worst < 0.05, "self-kernel error {worst}");
    }

    #[test]
    fn rff_kernel_error_small_and_improves_with_width() {
        let mut rng = stream_rng(8, 9);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> =
            (0..100).map(|_| (rand_vec(&mut rng, 8), rand_vec(&mut rng, 8))).collect();
        let big = RffMap::new(8, 4096, 2);
        let small = RffMap::new(8, 256, 2);
        let err = |map: &RffMap| -> f64 {
            pairs
                .iter()
                .map(|(x, y)| (map.kernel(x, y) - gaussian_kernel(x, y)).abs())
                .sum::<f64>()
                / pairs.len() as f64
        };
        let err_big = err(&big);
        let err_small = err(&small);
        assert!(err_big <= 0.05, "mean kernel error {err_big}");
        assert!(err_big < err_small, "{err_big} vs {err_small}");
    }

    #[test]
    fn linear_scores_track_ebm_softmax() {
        // Identity encoders: the EBM softmax is the exact Gaussian-kernel
        // normalization, which the linear scores approximate.
        let mut rng = stream_rng(12, 9);
        let d = 8;
        let map = RffMap::new(d, 4096, 3);
        let mut mean_tv = 0.0;
        let trials = 10;
        let shrink = |v: Vec<f64>| v.into_iter().map(|x| 0.7 * x).collect::<Vec<f64>>();
        for _ in 0..trials {
            let x = shrink(rand_vec(&mut rng, d));
            let pool: Vec<Vec<f64>> =
                (0..16).map(|_| shrink(rand_vec(&mut rng, d))).collect();
            let exact: Vec<f64> = {
                let k: Vec<f64> = pool.iter().map(|c| gaussian_kernel(&x, c)).collect();
                let t: f64 = k.iter().sum();
                k.into_iter().map(|v| v / t).collect()
            };
            let approx = linear_candidate_dist(&map, &x, &pool);
            let tv = 0.5
                * exact.iter().zip(&approx).map(|(a, b)| (a - b).abs()).sum::<f64>();
            mean_tv += tv / trials as f64;
        }
        assert!(mean_tv < 0.05, "mean TV {mean_tv}");
    }
}
