//! Latent action spaces: the map `φ(s,a) → z`, decoders back to raw
//! actions, latent policies, their training losses, and inference-time
//! composition `a ~ π_α(·|s,z), z ~ π_Z(·|s)`.
//!
//! The tabular side is exact (count tables, closed-form optimal decoder);
//! the continuous side runs on [`crate::nn::Mlp`] heads producing diagonal
//! Gaussians. Log-stds are clamped to `[-5, 2]` so early training cannot
//! collapse or explode a variance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::mdp::TabularPolicy;
use crate::nn::{Adam, Mlp};
use crate::rng::stream_rng;
use crate::{Error, Result};

pub const LOGSTD_MIN: f64 = -5.0;
pub const LOGSTD_MAX: f64 = 2.0;
const LOG_2PI: f64 = 1.8378770664093453;

/// A deterministic assignment of each state–action pair to one of
/// `n_latent` discrete latent actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentMap {
    table: Vec<Vec<usize>>,
    n_latent: usize,
}

impl LatentMap {
    pub fn new(table: Vec<Vec<usize>>, n_latent: usize) -> Result<Self> {
        if table.is_empty() || table[0].is_empty() {
            return Err(Error::DimensionMismatch("latent map must be non-empty".into()));
        }
        if n_latent == 0 {
            return Err(Error::DimensionMismatch("latent map needs n_latent >= 1".into()));
        }
        let n_actions = table[0].len();
        for (s, row) in table.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch(format!(
                    "latent map row {s} has {} actions, row 0 has {n_actions}",
                    row.len()
                )));
            }
            if let Some(&z) = row.iter().find(|&&z| z >= n_latent) {
                return Err(Error::DimensionMismatch(format!(
                    "latent map row {s} assigns z = {z} >= n_latent = {n_latent}"
                )));
            }
        }
        Ok(LatentMap { table, n_latent })
    }

    pub fn n_states(&self) -> usize {
        self.table.len()
    }

    pub fn n_actions(&self) -> usize {
        self.table[0].len()
    }

    pub fn n_latent(&self) -> usize {
        self.n_latent
    }

    pub fn z_of(&self, s: usize, a: usize) -> usize {
        self.table[s][a]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// Actions mapping to each latent at state `s`.
    pub fn groups(&self, s: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_latent];
        for (a, &z) in self.table[s].iter().enumerate() {
            groups[z].push(a);
        }
        groups
    }

    /// Whether any action at `s` maps to `z`.
    pub fn realized(&self, s: usize, z: usize) -> bool {
        self.table[s].iter().any(|&g| g == z)
    }
}

/// Conditional decoder table `π_α(a | s, z)`.
///
/// Rows for `(s, z)` cells that no action realizes are uniform-over-actions
/// placeholders; they are flagged so diagnostics can report how often a
/// fallback row was actually constructed from zero evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDecoder {
    /// `probs[s][z][a]`, each row a distribution over actions.
    probs: Vec<Vec<Vec<f64>>>,
    /// `(s, z)` cells whose row is a fallback rather than derived mass.
    fallback_cells: Vec<(usize, usize)>,
}

impl TabularDecoder {
    /// Decoder with explicit rows. Rows must be distributions.
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::DimensionMismatch("decoder must be non-empty".into()));
        }
        let n_latent = probs[0].len();
        let n_actions = probs[0][0].len();
        for (s, per_z) in probs.iter().enumerate() {
            if per_z.len() != n_latent {
                return Err(Error::DimensionMismatch(format!(
                    "decoder state {s} has {} latent rows, expected {n_latent}",
                    per_z.len()
                )));
            }
            for (z, row) in per_z.iter().enumerate() {
                if row.len() != n_actions {
                    return Err(Error::DimensionMismatch(format!(
                        "decoder row (s={s}, z={z}) has {} actions, expected {n_actions}",
                        row.len()
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "decoder row (s={s}, z={z}) is not a distribution"
                    )));
                }
            }
        }
        Ok(TabularDecoder { probs, fallback_cells: Vec::new() })
    }

    /// The decoder induced by a joint state–action weight table:
    /// `π_α(a|s,z) ∝ joint[s][a] · 1[φ(s,a) = z]`.
    ///
    /// With `joint` the true offline occupancy this is the pointwise-optimal
    /// decoder; with empirical counts it is the maximum-likelihood decoder.
    /// Cells with zero total weight fall back to uniform over the realizing
    /// actions (or over all actions when `z` is unrealized at `s`) and are
    /// recorded in `fallback_cells`.
    pub fn from_joint(joint: &[Vec<f64>], phi: &LatentMap) -> Result<TabularDecoder> {
        let n_states = phi.n_states();
        let n_actions = phi.n_actions();
        if joint.len() != n_states || joint.iter().any(|r| r.len() != n_actions) {
            return Err(Error::DimensionMismatch(format!(
                "joint table must be {n_states}×{n_actions}"
            )));
        }
        if let Some((s, a, w)) = joint.iter().enumerate().find_map(|(s, row)| {
            row.iter().enumerate().find(|(_, &w)| w < 0.0 || !w.is_finite()).map(|(a, &w)| (s, a, w))
        }) {
            return Err(Error::InvalidDistribution(format!(
                "joint weight (s={s}, a={a}) = {w} is not a non-negative finite number"
            )));
        }
        let n_latent = phi.n_latent();
        let mut probs = vec![vec![vec![0.0; n_actions]; n_latent]; n_states];
        let mut fallback_cells = Vec::new();
        for s in 0..n_states {
            let groups = phi.groups(s);
            for (z, members) in groups.iter().enumerate() {
                let total: f64 = members.iter().map(|&a| joint[s][a]).sum();
                let row = &mut probs[s][z];
                if total > 0.0 {
                    for &a in members {
                        row[a] = joint[s][a] / total;
                    }
                } else if !members.is_empty() {
                    for &a in members {
                        row[a] = 1.0 / members.len() as f64;
                    }
                    fallback_cells.push((s, z));
                } else {
                    for p in row.iter_mut() {
                        *p = 1.0 / n_actions as f64;
                    }
                    fallback_cells.push((s, z));
                }
            }
        }
        Ok(TabularDecoder { probs, fallback_cells })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_latent(&self) -> usize {
        self.probs[0].len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0][0].len()
    }

    pub fn row(&self, s: usize, z: usize) -> &[f64] {
        &self.probs[s][z]
    }

    pub fn fallback_cells(&self) -> &[(usize, usize)] {
        &self.fallback_cells
    }
}

/// A latent policy as a table `π_Z(z | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularLatent {
    probs: Vec<Vec<f64>>,
}

impl TabularLatent {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let as_policy = TabularPolicy::new(probs)?;
        Ok(TabularLatent { probs: as_policy.rows().to_vec() })
    }

    /// Count-based estimate from `(state, latent)` pairs; states never seen
    /// fall back to uniform over latents.
    pub fn from_counts(
        pairs: impl IntoIterator<Item = (usize, usize)>,
        n_states: usize,
        n_latent: usize,
    ) -> Result<TabularLatent> {
        assert!(n_states > 0 && n_latent > 0);
        let mut counts = vec![vec![0.0f64; n_latent]; n_states];
        for (i, (s, z)) in pairs.into_iter().enumerate() {
            if s >= n_states || z >= n_latent {
                return Err(Error::DataFormat {
                    line: i + 1,
                    msg: format!("pair (s={s}, z={z}) out of range {n_states}×{n_latent}"),
                });
            }
            counts[s][z] += 1.0;
        }
        let probs = counts
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                if total == 0.0 {
                    vec![1.0 / n_latent as f64; n_latent]
                } else {
                    row.into_iter().map(|c| c / total).collect()
                }
            })
            .collect();
        Ok(TabularLatent { probs })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_latent(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }
}

/// Compose a decoder with a latent policy into a raw-action policy:
/// `π(a|s) = Σ_z π_α(a|s,z) π_Z(z|s)`.
pub fn compose(decoder: &TabularDecoder, latent: &TabularLatent) -> Result<TabularPolicy> {
    if decoder.n_states() != latent.n_states() || decoder.n_latent() != latent.n_latent() {
        return Err(Error::DimensionMismatch(format!(
            "decoder is {}×{} (states×latents), latent policy is {}×{}",
            decoder.n_states(),
            decoder.n_latent(),
            latent.n_states(),
            latent.n_latent()
        )));
    }
    let n_actions = decoder.n_actions();
    let mut rows = Vec::with_capacity(decoder.n_states());
    for s in 0..decoder.n_states() {
        let mut row = vec![0.0; n_actions];
        for z in 0..decoder.n_latent() {
            let w = latent.row(s)[z];
            if w == 0.0 {
                continue;
            }
            for (a, &p) in decoder.row(s, z).iter().enumerate() {
                row[a] += w * p;
            }
        }
        // Convex combination of distributions; renormalize away the last ulp.
        let total: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= total;
        }
        rows.push(row);
    }
    TabularPolicy::new(rows)
}

/// Negative log-likelihood of a tabular decoder on `(s, a)` pairs with
/// latents assigned by `phi`: `−mean log π_α(a | s, φ(s,a))`.
///
/// Probabilities are floored at 1e-12 inside the log; the number of floored
/// terms is returned so callers can see when the decoder is being scored on
/// actions it assigns (numerically) zero mass.
pub fn tabular_decoder_nll(
    batch: &[(usize, usize)],
    phi: &LatentMap,
    decoder: &TabularDecoder,
) -> Result<(f64, usize)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("decoder NLL needs at least one pair".into()));
    }
    let mut total = 0.0;
    let mut floored = 0;
    for &(s, a) in batch {
        let z = phi.z_of(s, a);
        let mut p = decoder.row(s, z)[a];
        if p < 1e-12 {
            p = 1e-12;
            floored += 1;
        }
        total -= p.ln();
    }
    Ok((total / batch.len() as f64, floored))
}

/// Negative log-likelihood of a tabular latent policy on `(s, a)` pairs
/// reparametrized through `phi`: `−mean log π_Z(φ(s,a) | s)`.
pub fn tabular_latent_nll(
    batch: &[(usize, usize)],
    phi: &LatentMap,
    latent: &TabularLatent,
) -> Result<(f64, usize)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("latent NLL needs at least one pair".into()));
    }
    let mut total = 0.0;
    let mut floored = 0;
    for &(s, a) in batch {
        let z = phi.z_of(s, a);
        let mut p = latent.row(s)[z];
        if p < 1e-12 {
            p = 1e-12;
            floored += 1;
        }
        total -= p.ln();
    }
    Ok((total / batch.len() as f64, floored))
}

/// An MLP head parameterizing a diagonal Gaussian: the network emits
/// `2·out_dim` values, interpreted as the mean followed by raw log-stds
/// (clamped to `[LOGSTD_MIN, LOGSTD_MAX]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub net: Mlp,
    pub out_dim: usize,
}

impl GaussianHead {
    pub fn new(input_dim: usize, hidden: &[usize], out_dim: usize, seed: u64) -> GaussianHead {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * out_dim);
        GaussianHead { net: Mlp::new(&sizes, seed), out_dim }
    }

    /// Reinterpret a loaded net as a Gaussian head.
    pub fn wrap(net: Mlp) -> Result<GaussianHead> {
        if net.output_dim() % 2 != 0 {
            return Err(Error::Checkpoint(format!(
                "gaussian head needs an even output dimension, got {}",
                net.output_dim()
            )));
        }
        let out_dim = net.output_dim() / 2;
        Ok(GaussianHead { net, out_dim })
    }

    /// Mean and clamped log-std at `input`.
    pub fn dist(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.net.forward(input);
        let mean = y[..self.out_dim].to_vec();
        let logstd = y[self.out_dim..]
            .iter()
            .map(|&r| r.clamp(LOGSTD_MIN, LOGSTD_MAX))
            .collect();
        (mean, logstd)
    }

    pub fn sample(&self, input: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let (mean, logstd) = self.dist(input);
        mean.iter()
            .zip(logstd.iter())
            .map(|(&m, &ls)| {
                let g: f64 = StandardNormal.sample(rng);
                m + ls.exp() * g
            })
            .collect()
    }

    /// Per-sample negative log-likelihood of `target`.
    pub fn nll(&self, input: &[f64], target: &[f64]) -> f64 {
        assert_eq!(target.len(), self.out_dim);
        let (mean, logstd) = self.dist(input);
        let mut nll = 0.0;
        for j in 0..self.out_dim {
            let var = (2.0 * logstd[j]).exp();
            let diff = target[j] - mean[j];
            nll += 0.5 * LOG_2PI + logstd[j] + diff * diff / (2.0 * var);
        }
        nll
    }

    /// NLL plus gradients: parameter gradients are accumulated into `grad`
    /// (length `net.n_params()`), and the gradient w.r.t. the input is
    /// returned. The clamp on log-std passes zero gradient outside its range.
    pub fn nll_backward(&self, input: &[f64], target: &[f64], grad: &mut [f64]) -> (f64, Vec<f64>) {
        assert_eq!(target.len(), self.out_dim);
        let y = self.net.forward(input);
        let mut upstream = vec![0.0; 2 * self.out_dim];
        let mut nll = 0.0;
        for j in 0..self.out_dim {
            let raw = y[self.out_dim + j];
            let ls = raw.clamp(LOGSTD_MIN, LOGSTD_MAX);
            let var = (2.0 * ls).exp();
            let diff = target[j] - y[j];
            nll += 0.5 * LOG_2PI + ls + diff * diff / (2.0 * var);
            upstream[j] = -diff / var;
            let pass = if raw > LOGSTD_MIN && raw < LOGSTD_MAX { 1.0 } else { 0.0 };
            upstream[self.out_dim + j] = pass * (1.0 - diff * diff / var);
        }
        let input_grad = self.net.forward_backward(input, &upstream, grad);
        (nll, input_grad)
    }
}

/// Continuous-action decoder: a Gaussian over raw actions conditioned on
/// state features concatenated with a latent embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDecoder {
    pub head: GaussianHead,
    pub state_dim: usize,
    pub z_dim: usize,
}

impl GaussianDecoder {
    pub fn new(
        state_dim: usize,
        z_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        seed: u64,
    ) -> GaussianDecoder {
        GaussianDecoder {
            head: GaussianHead::new(state_dim + z_dim, hidden, action_dim, seed),
            state_dim,
            z_dim,
        }
    }

    pub fn from_net(net: Mlp, state_dim: usize) -> Result<GaussianDecoder> {
        if net.input_dim() <= state_dim {
            return Err(Error::Checkpoint(format!(
                "decoder net input dim {} does not leave room for a latent after {state_dim} state features",
                net.input_dim()
            )));
        }
        let z_dim = net.input_dim() - state_dim;
        Ok(GaussianDecoder { head: GaussianHead::wrap(net)?, state_dim, z_dim })
    }

    pub fn input(&self, state: &[f64], z: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.state_dim);
        assert_eq!(z.len(), self.z_dim);
        let mut joint = Vec::with_capacity(self.state_dim + self.z_dim);
        joint.extend_from_slice(state);
        joint.extend_from_slice(z);
        joint
    }
}

/// A latent policy over continuous embeddings.
#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousLatent {
    /// Stochastic: diagonal Gaussian over the embedding space.
    Gaussian(GaussianHead),
    /// Deterministic: an MLP emitting the embedding directly.
    DeterministicNet(Mlp),
    /// Deterministic: one embedding per tabular state.
    DeterministicTable(Vec<Vec<f64>>),
}

/// A decoder in either mode, for pipeline plumbing.
#[derive(Debug, Clone)]
pub enum ActionDecoder {
    Tabular(TabularDecoder),
    Gaussian(GaussianDecoder),
}

/// A latent policy in either mode, for pipeline plumbing.
#[derive(Debug, Clone)]
pub enum LatentPolicy {
    Tabular(TabularLatent),
    Continuous(ContinuousLatent),
}

/// A state reference for inference: tabular index or feature vector.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Index(usize),
    Features(&'a [f64]),
}

/// A sampled action in either mode.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSample {
    Index(usize),
    Vector(Vec<f64>),
}

/// Sample `z ~ π_Z(·|s)` then `a ~ π_α(·|s,z)`.
///
/// Valid mode pairings: tabular latent with tabular decoder (state given as
/// an index), and continuous latents with the Gaussian decoder (state given
/// as features). Anything else is a mode mismatch error.
pub fn infer_action(
    state: StateRef,
    latent: &LatentPolicy,
    decoder: &ActionDecoder,
    rng: &mut ChaCha8Rng,
) -> Result<ActionSample> {
    match (latent, decoder, state) {
        (LatentPolicy::Tabular(lat), ActionDecoder::Tabular(dec), StateRef::Index(s)) => {
            if s >= lat.n_states() || dec.n_states() != lat.n_states() {
                return Err(Error::DimensionMismatch(format!(
                    "state {s} vs latent {} states, decoder {} states",
                    lat.n_states(),
                    dec.n_states()
                )));
            }
            let z = crate::rng::sample_index(lat.row(s), rng);
            let a = crate::rng::sample_index(dec.row(s, z), rng);
            Ok(ActionSample::Index(a))
        }
        (LatentPolicy::Continuous(lat), ActionDecoder::Gaussian(dec), StateRef::Features(sf)) => {
            if sf.len() != dec.state_dim {
                return Err(Error::DimensionMismatch(format!(
                    "state features have length {}, decoder expects {}",
                    sf.len(),
                    dec.state_dim
                )));
            }
            let z = match lat {
                ContinuousLatent::Gaussian(head) => head.sample(sf, rng),
                ContinuousLatent::DeterministicNet(net) => net.forward(sf),
                ContinuousLatent::DeterministicTable(_) => {
                    return Err(Error::ModeMismatch(
                        "table-valued deterministic latents index tabular states; pass StateRef::Index via snap_to_embedding + a tabular decoder".into(),
                    ))
                }
            };
            if z.len() != dec.z_dim {
                return Err(Error::DimensionMismatch(format!(
                    "latent embedding has length {}, decoder expects {}",
                    z.len(),
                    dec.z_dim
                )));
            }
            Ok(ActionSample::Vector(dec.head.sample(&dec.input(sf, &z), rng)))
        }
        _ => Err(Error::ModeMismatch(
            "latent policy, decoder, and state reference must agree on tabular vs continuous mode"
                .into(),
        )),
    }
}

/// Index of the embedding nearest to `theta` in Euclidean distance; ties
/// break toward the lowest index. Used to decode a deterministic embedding
/// through a finite set of realized latent values.
pub fn snap_to_embedding(theta: &[f64], embeddings: &[Vec<f64>]) -> usize {
    assert!(!embeddings.is_empty());
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, e) in embeddings.iter().enumerate() {
        assert_eq!(e.len(), theta.len());
        let d2: f64 = theta.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    best
}

/// Mean squared embedding error of a table-valued deterministic latent
/// policy: `mean_i ‖θ_{s_i} − z̄_i‖²`, with the batch gradient w.r.t. every
/// `θ_s` and its total L1 norm (the quantity the linear-model bound charges
/// for).
pub fn latent_mse_table(
    batch: &[(usize, Vec<f64>)],
    theta: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("latent MSE needs at least one sample".into()));
    }
    let d = theta.first().map(|t| t.len()).unwrap_or(0);
    if d == 0 || theta.iter().any(|t| t.len() != d) {
        return Err(Error::DimensionMismatch("theta rows must share a positive length".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![vec![0.0; d]; theta.len()];
    let inv_n = 1.0 / batch.len() as f64;
    for (i, (s, zbar)) in batch.iter().enumerate() {
        if *s >= theta.len() || zbar.len() != d {
            return Err(Error::DataFormat {
                line: i + 1,
                msg: format!("sample (s={s}, dim={}) incompatible with theta {}×{d}", zbar.len(), theta.len()),
            });
        }
        for j in 0..d {
            let diff = theta[*s][j] - zbar[j];
            loss += diff * diff * inv_n;
            grad[*s][j] += 2.0 * diff * inv_n;
        }
    }
    let grad_l1 = grad.iter().flat_map(|r| r.iter()).map(|g| g.abs()).sum();
    Ok((loss, grad, grad_l1))
}

/// Net-valued version of [`latent_mse_table`]: `mean_i ‖net(s_i) − z̄_i‖²`
/// with flat parameter gradients and their L1 norm.
pub fn latent_mse_net(
    batch: &[(Vec<f64>, Vec<f64>)],
    net: &Mlp,
) -> Result<(f64, Vec<f64>, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("latent MSE needs at least one sample".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.n_params()];
    let inv_n = 1.0 / batch.len() as f64;
    for (feat, zbar) in batch {
        let y = net.forward(feat);
        assert_eq!(y.len(), zbar.len(), "net output vs target dimension");
        let upstream: Vec<f64> =
            y.iter().zip(zbar).map(|(a, b)| 2.0 * (a - b) * inv_n).collect();
        loss += y.iter().zip(zbar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * inv_n;
        net.forward_backward(feat, &upstream, &mut grad);
    }
    let grad_l1 = grad.iter().map(|g| g.abs()).sum();
    Ok((loss, grad, grad_l1))
}

/// Configuration for the gradient-trained fits in this module.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { steps: 2000, batch_size: 256, lr: 3e-4, seed: 0 }
    }
}

fn draw_batch_indices(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..batch.min(n)).map(|_| rng.gen_range(0..n)).collect()
}

/// Fit a Gaussian decoder on continuous offline data by NLL descent.
///
/// `data` holds `(state_features, pair_features, action)`; the latent fed to
/// the decoder is `phi(pair_features)`. With `joint_phi` the embedding
/// network receives gradient through the decoder input and is updated in
/// lockstep; otherwise it stays frozen.
pub fn train_gaussian_decoder(
    data: &[(Vec<f64>, Vec<f64>, Vec<f64>)],
    phi: &mut Mlp,
    decoder: &mut GaussianDecoder,
    cfg: &FitConfig,
    joint_phi: bool,
) -> Result<Vec<(usize, f64)>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("decoder training set is empty".into()));
    }
    let mut rng = stream_rng(cfg.seed, crate::rng::stream::TRAIN);
    let mut opt_dec = Adam::new(decoder.head.net.n_params(), cfg.lr);
    let mut opt_phi = Adam::new(phi.n_params(), cfg.lr);
    let mut log = Vec::new();
    let log_every = (cfg.steps / 20).max(1);
    for step in 0..cfg.steps {
        let idx = draw_batch_indices(data.len(), cfg.batch_size, &mut rng);
        let inv = 1.0 / idx.len() as f64;
        let mut grad_dec = vec![0.0; decoder.head.net.n_params()];
        let mut grad_phi = vec![0.0; phi.n_params()];
        let mut loss = 0.0;
        for &i in &idx {
            let (sf, pf, action) = &data[i];
            let z = phi.forward(pf);
            let input = decoder.input(sf, &z);
            let mut sample_grad = vec![0.0; decoder.head.net.n_params()];
            let (nll, input_grad) = decoder.head.nll_backward(&input, action, &mut sample_grad);
            loss += nll * inv;
            for (g, sg) in grad_dec.iter_mut().zip(&sample_grad) {
                *g += sg * inv;
            }
            if joint_phi {
                let z_grad: Vec<f64> =
                    input_grad[decoder.state_dim..].iter().map(|g| g * inv).collect();
                phi.forward_backward(pf, &z_grad, &mut grad_phi);
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { step, msg: format!("decoder NLL = {loss}") });
        }
        opt_dec.step(decoder.head.net.params_mut(), &grad_dec).map_err(|e| Error::Diverged {
            step,
            msg: e.to_string(),
        })?;
        if joint_phi {
            opt_phi.step(phi.params_mut(), &grad_phi).map_err(|e| Error::Diverged {
                step,
                msg: e.to_string(),
            })?;
        }
        if step % log_every == 0 || step + 1 == cfg.steps {
            log.push((step, loss));
        }
    }
    Ok(log)
}

/// Fit a Gaussian latent policy `π_Z(z|s)` on `(state_features, embedding)`
/// pairs by NLL descent.
pub fn train_gaussian_latent(
    data: &[(Vec<f64>, Vec<f64>)],
    head: &mut GaussianHead,
    cfg: &FitConfig,
) -> Result<Vec<(usize, f64)>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("latent training set is empty".into()));
    }
    let mut rng = stream_rng(cfg.seed, crate::rng::stream::TRAIN);
    let mut opt = Adam::new(head.net.n_params(), cfg.lr);
    let mut log = Vec::new();
    let log_every = (cfg.steps / 20).max(1);
    for step in 0..cfg.steps {
        let idx = draw_batch_indices(data.len(), cfg.batch_size, &mut rng);
        let inv = 1.0 / idx.len() as f64;
        let mut grad = vec![0.0; head.net.n_params()];
        let mut loss = 0.0;
        for &i in &idx {
            let (sf, z) = &data[i];
            let mut sample_grad = vec![0.0; head.net.n_params()];
            let (nll, _) = head.nll_backward(sf, z, &mut sample_grad);
            loss += nll * inv;
            for (g, sg) in grad.iter_mut().zip(&sample_grad) {
                *g += sg * inv;
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { step, msg: format!("latent NLL = {loss}") });
        }
        opt.step(head.net.params_mut(), &grad)
            .map_err(|e| Error::Diverged { step, msg: e.to_string() })?;
        if step % log_every == 0 || step + 1 == cfg.steps {
            log.push((step, loss));
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use crate::rng::stream_rng;

    fn toy_phi() -> LatentMap {
        // 2 states, 4 actions, 2 latents; state 1 leaves z=1 unrealized.
        LatentMap::new(vec![vec![0, 1, 0, 1], vec![0, 0, 0, 0]], 2).unwrap()
    }

    #[test]
    fn latent_map_validates() {
        assert!(LatentMap::new(vec![vec![0, 2]], 2).is_err());
        assert!(LatentMap::new(vec![vec![0, 1], vec![0]], 2).is_err());
        assert!(LatentMap::new(vec![], 2).is_err());
    }

    #[test]
    fn decoder_from_joint_matches_hand_computation() {
        // Spec of the closed form: joint mass 0.3 and 0.1 on two actions in
        // the same group gives decoder probabilities 0.75 / 0.25.
        let phi = toy_phi();
        let joint = vec![vec![0.3, 0.2, 0.1, 0.0], vec![0.25, 0.25, 0.25, 0.25]];
        let dec = TabularDecoder::from_joint(&joint, &phi).unwrap();
        assert!((dec.row(0, 0)[0] - 0.75).abs() < 1e-15);
        assert!((dec.row(0, 0)[2] - 0.25).abs() < 1e-15);
        // Group z=1 at state 0 has mass only on action 1.
        assert_eq!(dec.row(0, 1)[1], 1.0);
        assert_eq!(dec.row(0, 1)[3], 0.0);
        // Unrealized (s=1, z=1) falls back to uniform over all actions.
        assert!(dec.fallback_cells().contains(&(1, 1)));
        assert!(dec.row(1, 1).iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn decoder_zero_mass_group_falls_back_to_uniform_members() {
        let phi = toy_phi();
        let joint = vec![vec![0.0, 0.5, 0.0, 0.5], vec![0.25, 0.25, 0.25, 0.25]];
        let dec = TabularDecoder::from_joint(&joint, &phi).unwrap();
        // Group z=0 at state 0 = {actions 0, 2}, zero mass -> uniform on it.
        assert!(dec.fallback_cells().contains(&(0, 0)));
        assert_eq!(dec.row(0, 0)[0], 0.5);
        assert_eq!(dec.row(0, 0)[2], 0.5);
        assert_eq!(dec.row(0, 0)[1], 0.0);
    }

    #[test]
    fn compose_mixes_decoder_rows() {
        let phi = toy_phi();
        let joint = vec![vec![0.25; 4]; 2];
        let dec = TabularDecoder::from_joint(&joint, &phi).unwrap();
        let lat = TabularLatent::new(vec![vec![0.6, 0.4], vec![1.0, 0.0]]).unwrap();
        let pi = compose(&dec, &lat).unwrap();
        // State 0: z=0 uniform on {0,2}, z=1 uniform on {1,3}.
        assert!((pi.row(0)[0] - 0.3).abs() < 1e-15);
        assert!((pi.row(0)[1] - 0.2).abs() < 1e-15);
        // State 1: all actions in z=0, uniform.
        assert!((pi.row(1)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn latent_counts_estimate_and_uniform_fallback() {
        let lat = TabularLatent::from_counts(vec![(0, 0), (0, 0), (0, 1)], 2, 2).unwrap();
        assert!((lat.row(0)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lat.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn nll_floor_is_flagged() {
        let phi = toy_phi();
        let joint = vec![vec![0.5, 0.0, 0.0, 0.5], vec![0.25; 4]];
        let dec = TabularDecoder::from_joint(&joint, &phi).unwrap();
        // Action 2 is in group 0 but has zero decoder mass -> floored.
        let (nll, floored) = tabular_decoder_nll(&[(0, 2)], &phi, &dec).unwrap();
        assert_eq!(floored, 1);
        assert!((nll - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn gaussian_nll_matches_closed_form() {
        // Standard normal in 1-D at x: NLL = ½ln(2π) + x²/2 when mean 0, std 1.
        let mut head = GaussianHead::new(1, &[], 1, 0);
        // Linear net 1→2 with zero weights: mean = 0, raw logstd = 0.
        head.net.set_params(&[0.0, 0.0, 0.0, 0.0]);
        let x = 1.3;
        let expect = 0.5 * LOG_2PI + x * x / 2.0;
        assert!((head.nll(&[0.4], &[x]) - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_nll_gradient_matches_finite_differences() {
        let head = GaussianHead::new(3, &[8], 2, 11);
        let input = vec![0.2, -0.5, 0.8];
        let target = vec![0.3, -0.1];
        let mut grad = vec![0.0; head.net.n_params()];
        head.nll_backward(&input, &target, &mut grad);
        let mut probe = head.clone();
        let check = gradient_check(head.net.params(), &grad, 1e-5, 100, |p| {
            probe.net.set_params(p);
            probe.nll(&input, &target)
        });
        assert!(check.max_rel_err < 1e-6, "max rel err {}", check.max_rel_err);
    }

    #[test]
    fn logstd_clamp_active_on_extreme_outputs() {
        let mut head = GaussianHead::new(1, &[], 1, 0);
        // Bias the raw logstd to 50; clamp caps it at LOGSTD_MAX.
        head.net.set_params(&[0.0, 0.0, 0.0, 50.0]);
        let (_, logstd) = head.dist(&[0.0]);
        assert_eq!(logstd[0], LOGSTD_MAX);
        // Gradient through the clamped coordinate must vanish.
        let mut grad = vec![0.0; head.net.n_params()];
        head.nll_backward(&[1.0], &[0.7], &mut grad);
        assert_eq!(grad[3], 0.0, "clamped logstd bias must get zero gradient");
    }

    #[test]
    fn latent_mse_table_gradient_is_exact() {
        let theta = vec![vec![0.5, -0.2], vec![1.0, 0.0]];
        let batch = vec![
            (0usize, vec![0.0, 0.0]),
            (0usize, vec![1.0, -0.4]),
            (1usize, vec![1.0, 0.2]),
        ];
        let (loss, grad, grad_l1) = latent_mse_table(&batch, &theta).unwrap();
        // Hand computation.
        let expect_loss = ((0.5f64.powi(2) + 0.2f64.powi(2))
            + (0.5f64.powi(2) + 0.2f64.powi(2))
            + 0.2f64.powi(2))
            / 3.0;
        assert!((loss - expect_loss).abs() < 1e-15);
        // d/dθ_0 = 2/3 [(θ0 − x1) + (θ0 − x2)] = 2/3 [(0.5, −0.2) + (−0.5, 0.2)] = 0.
        assert!(grad[0][0].abs() < 1e-15 && grad[0][1].abs() < 1e-15);
        assert!((grad[1][1] - 2.0 * (-0.2) / 3.0).abs() < 1e-15);
        let manual_l1: f64 = grad.iter().flatten().map(|g| g.abs()).sum();
        assert_eq!(grad_l1, manual_l1);
    }

    #[test]
    fn latent_mse_net_gradient_matches_finite_differences() {
        let net = Mlp::new(&[3, 6, 2], 5);
        let batch = vec![
            (vec![0.1, 0.2, -0.3], vec![0.5, 0.5]),
            (vec![-0.4, 0.9, 0.0], vec![-0.1, 0.3]),
        ];
        let (_, grad, _) = latent_mse_net(&batch, &net).unwrap();
        let mut probe = net.clone();
        let check = gradient_check(net.params(), &grad, 1e-5, 100, |p| {
            probe.set_params(p);
            latent_mse_net(&batch, &probe).unwrap().0
        });
        assert!(check.max_rel_err < 1e-6, "max rel err {}", check.max_rel_err);
    }

    #[test]
    fn infer_action_tabular_matches_composition_frequencies() {
        let phi = toy_phi();
        let joint = vec![vec![0.4, 0.1, 0.2, 0.3], vec![0.25; 4]];
        let dec = TabularDecoder::from_joint(&joint, &phi).unwrap();
        let lat = TabularLatent::new(vec![vec![0.3, 0.7], vec![1.0, 0.0]]).unwrap();
        let composed = compose(&dec, &lat).unwrap();
        let mut rng = stream_rng(9, 1);
        let n = 200_000;
        let mut counts = vec![0.0; 4];
        let latp = LatentPolicy::Tabular(lat);
        let decp = ActionDecoder::Tabular(dec);
        for _ in 0..n {
            match infer_action(StateRef::Index(0), &latp, &decp, &mut rng).unwrap() {
                ActionSample::Index(a) => counts[a] += 1.0,
                _ => unreachable!(),
            }
        }
        for a in 0..4 {
            assert!(
                (counts[a] / n as f64 - composed.row(0)[a]).abs() < 5e-3,
                "action {a}: {} vs {}",
                counts[a] / n as f64,
                composed.row(0)[a]
            );
        }
    }

    #[test]
    fn infer_action_rejects_mode_mismatch() {
        let phi = toy_phi();
        let dec = TabularDecoder::from_joint(&vec![vec![0.25; 4]; 2], &phi).unwrap();
        let lat = ContinuousLatent::DeterministicNet(Mlp::new(&[2, 2], 0));
        let mut rng = stream_rng(0, 1);
        let err = infer_action(
            StateRef::Features(&[0.0, 1.0]),
            &LatentPolicy::Continuous(lat),
            &ActionDecoder::Tabular(dec),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ModeMismatch(_)));
    }

    #[test]
    fn snap_breaks_ties_toward_lowest_index() {
        let embeds = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(snap_to_embedding(&[0.0, 0.0], &embeds), 0);
        assert_eq!(snap_to_embedding(&[-0.9, 0.0], &embeds), 1);
    }

    #[test]
    fn gaussian_decoder_training_fits_conditional_mean() {
        // Data: action = [2·z̄₀] with tiny noise; z̄ = pair features through φ.
        let mut phi = Mlp::new(&[2, 4, 1], 3);
        let mut dec = GaussianDecoder::new(1, 1, &[8], 1, 4);
        let mut rng = stream_rng(5, 2);
        let data: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..256)
            .map(|_| {
                let pf = vec![rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
                let z = phi.forward(&pf);
                (vec![0.0], pf, vec![2.0 * z[0]])
            })
            .collect();
        let cfg = FitConfig { steps: 1500, batch_size: 64, lr: 3e-3, seed: 6 };
        train_gaussian_decoder(&data, &mut phi, &mut dec, &cfg, false).unwrap();
        let mut worst = 0.0f64;
        for (sf, pf, action) in data.iter().take(32) {
            let z = phi.forward(pf);
            let (mean, _) = dec.head.dist(&dec.input(sf, &z));
            worst = worst.max((mean[0] - action[0]).abs());
        }
        assert!(worst < 0.15, "decoder mean off by {worst}");
    }
}
