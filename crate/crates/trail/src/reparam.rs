//! Tabular reparametrization: cluster the transition rows of each state so
//! that actions with (near-)identical dynamics share one latent action.
//!
//! Per state, the `n_actions` rows `T(·|s,a)` are clustered by k-medoids
//! under total-variation distance with a deterministic farthest-point
//! initialization and PAM refinement. Each cluster's representative row is
//! the weighted arithmetic mean of its members, which minimizes the
//! weighted sum of KL divergences from the members to a single row.
//!
//! [`reparam_path`] grows the latent budget one cluster at a time, always
//! keeping a pure split of the previous partition among its candidates, so
//! the modelling objective is non-increasing in the number of latents.

use serde::{Deserialize, Serialize};

use crate::latent::LatentMap;
use crate::mdp::{kl, tv};
use crate::{Error, Result};

/// A factored transition model: latent assignment plus one transition row
/// per `(state, latent)` cell. The modelled row for `(s, a)` is the row of
/// the latent that `phi` assigns to `(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredModel {
    pub phi: LatentMap,
    /// `latent_rows[s][z][s']`; rows of unrealized latents are uniform.
    pub latent_rows: Vec<Vec<Vec<f64>>>,
}

impl FactoredModel {
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.latent_rows[s][self.phi.z_of(s, a)]
    }

    /// Expand to a dense per-(s,a) transition table.
    pub fn dense(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.phi.n_states())
            .map(|s| (0..self.phi.n_actions()).map(|a| self.row(s, a).to_vec()).collect())
            .collect()
    }
}

/// Result of one reparametrization at a fixed latent budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularReparam {
    pub model: FactoredModel,
    /// Weighted sum over `(s,a)` of `KL(rows[s][a] ‖ model row)`; equals the
    /// transition modelling gap under the same weights.
    pub objective: f64,
    /// Per-state medoid actions actually used (for diagnostics).
    pub medoids: Vec<Vec<usize>>,
}

const PAM_ROUNDS: usize = 50;

/// Normalize per-(s,a) next-state counts into probability rows. Rows with
/// zero total count become uniform.
pub fn rows_from_counts(counts: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    counts
        .iter()
        .map(|per_a| {
            per_a
                .iter()
                .map(|row| {
                    let total: f64 = row.iter().sum();
                    if total > 0.0 {
                        row.iter().map(|c| c / total).collect()
                    } else {
                        vec![1.0 / row.len() as f64; row.len()]
                    }
                })
                .collect()
        })
        .collect()
}

fn validate_rows(rows: &[Vec<Vec<f64>>]) -> Result<(usize, usize, usize)> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::DimensionMismatch("transition rows must be non-empty".into()));
    }
    let n_states = rows.len();
    let n_actions = rows[0].len();
    let n_next = rows[0][0].len();
    for (s, per_a) in rows.iter().enumerate() {
        if per_a.len() != n_actions {
            return Err(Error::DimensionMismatch(format!(
                "state {s} has {} action rows, expected {n_actions}",
                per_a.len()
            )));
        }
        for (a, row) in per_a.iter().enumerate() {
            if row.len() != n_next {
                return Err(Error::DimensionMismatch(format!(
                    "row (s={s}, a={a}) has length {}, expected {n_next}",
                    row.len()
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "row (s={s}, a={a}) is not a distribution"
                )));
            }
        }
    }
    Ok((n_states, n_actions, n_next))
}

/// Weighted mean of the rows selected by `members`, computed in offset form
/// around the first member so that a cluster of bitwise-identical rows
/// reproduces that row bitwise.
fn cluster_center(rows: &[Vec<f64>], members: &[usize], weights: &[f64]) -> Vec<f64> {
    debug_assert!(!members.is_empty());
    let total_w: f64 = members.iter().map(|&a| weights[a]).sum();
    let base = &rows[members[0]];
    let mut center = base.clone();
    if total_w > 0.0 {
        for &a in members {
            let w = weights[a] / total_w;
            for (c, (&x, &b)) in center.iter_mut().zip(rows[a].iter().zip(base.iter())) {
                *c += w * (x - b);
            }
        }
    } else {
        // Zero-weight cluster: plain mean keeps every member in support.
        let w = 1.0 / members.len() as f64;
        for &a in members {
            for (c, (&x, &b)) in center.iter_mut().zip(rows[a].iter().zip(base.iter())) {
                *c += w * (x - b);
            }
        }
    }
    center
}

/// Weighted KL of each member to its cluster center, summed. Zero-weight
/// members contribute nothing.
fn partition_objective(
    rows: &[Vec<f64>],
    clusters: &[Vec<usize>],
    weights: &[f64],
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut total = 0.0;
    let mut centers = Vec::with_capacity(clusters.len());
    for members in clusters {
        let center = cluster_center(rows, members, weights);
        for &a in members {
            if weights[a] > 0.0 {
                total += weights[a] * kl(&rows[a], &center)?;
            }
        }
        centers.push(center);
    }
    Ok((total, centers))
}

struct DistanceMatrix(Vec<Vec<f64>>);

impl DistanceMatrix {
    fn build(rows: &[Vec<f64>]) -> Result<DistanceMatrix> {
        let n = rows.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = tv(&rows[i], &rows[j])?;
                d[i][j] = dij;
                d[j][i] = dij;
            }
        }
        Ok(DistanceMatrix(d))
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }
}

/// Most central row: minimizes the sum of distances to all rows, lowest
/// index on ties.
fn central_row(dist: &DistanceMatrix, n: usize) -> usize {
    (0..n)
        .min_by(|&i, &j| {
            let si: f64 = (0..n).map(|b| dist.at(i, b)).sum();
            let sj: f64 = (0..n).map(|b| dist.at(j, b)).sum();
            si.partial_cmp(&sj).unwrap()
        })
        .unwrap()
}

/// Deterministic farthest-point medoid initialization. Stops early when all
/// remaining rows coincide with an existing medoid.
fn init_medoids(dist: &DistanceMatrix, n: usize, k: usize) -> Vec<usize> {
    let mut medoids = vec![central_row(dist, n)];
    while medoids.len() < k {
        let mut best = None;
        let mut best_d = 0.0;
        for a in 0..n {
            let nearest = medoids.iter().map(|&m| dist.at(a, m)).fold(f64::INFINITY, f64::min);
            if nearest > best_d {
                best_d = nearest;
                best = Some(a);
            }
        }
        match best {
            Some(a) if best_d > 0.0 => medoids.push(a),
            _ => break,
        }
    }
    medoids
}

fn assign_to_medoids(dist: &DistanceMatrix, n: usize, medoids: &[usize]) -> Vec<Vec<usize>> {
    let mut clusters = vec![Vec::new(); medoids.len()];
    for a in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &m) in medoids.iter().enumerate() {
            let d = dist.at(a, m);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        clusters[best].push(a);
    }
    clusters
}

/// PAM-style refinement: alternate nearest-medoid assignment and per-cluster
/// medoid updates until stable (or the round budget runs out).
fn refine_medoids(dist: &DistanceMatrix, n: usize, mut medoids: Vec<usize>) -> Vec<usize> {
    for _ in 0..PAM_ROUNDS {
        let clusters = assign_to_medoids(dist, n, &medoids);
        let mut next = medoids.clone();
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            next[c] = *members
                .iter()
                .min_by(|&&i, &&j| {
                    let si: f64 = members.iter().map(|&b| dist.at(i, b)).sum();
                    let sj: f64 = members.iter().map(|&b| dist.at(j, b)).sum();
                    si.partial_cmp(&sj).unwrap()
                })
                .unwrap();
        }
        if next == medoids {
            break;
        }
        medoids = next;
    }
    medoids
}

fn drop_empty(clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    clusters.into_iter().filter(|c| !c.is_empty()).collect()
}

/// One state's clustering solution along the budget path.
#[derive(Clone)]
struct StateSolution {
    clusters: Vec<Vec<usize>>,
    centers: Vec<Vec<f64>>,
    objective: f64,
}

fn solve_state_k1(rows: &[Vec<f64>], weights: &[f64]) -> Result<StateSolution> {
    let clusters = vec![(0..rows.len()).collect::<Vec<_>>()];
    let (objective, centers) = partition_objective(rows, &clusters, weights)?;
    Ok(StateSolution { clusters, centers, objective })
}

/// Grow the previous solution by one cluster. Candidates:
/// 1. split the worst cluster at its farthest-from-center member (a pure
///    refinement of the previous partition, so the objective cannot rise);
/// 2. PAM from scratch at the new budget;
/// 3. PAM seeded with the split's medoids.
/// The best candidate by objective wins.
fn grow_state(
    rows: &[Vec<f64>],
    weights: &[f64],
    dist: &DistanceMatrix,
    prev: &StateSolution,
    k: usize,
) -> Result<StateSolution> {
    let n = rows.len();
    let mut candidates: Vec<Vec<Vec<usize>>> = Vec::new();

    // Candidate 1: pure split of the worst cluster.
    let mut worst = None;
    let mut worst_score = -1.0;
    for (c, members) in prev.clusters.iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let mut score = 0.0;
        for &a in members {
            if weights[a] > 0.0 {
                score += weights[a] * kl(&rows[a], &prev.centers[c])?;
            }
        }
        // Zero-objective ties (e.g. exact duplicates everywhere): prefer the
        // cluster with the largest spread so duplicates still separate.
        let spread: f64 =
            members.iter().map(|&a| tv(&rows[a], &prev.centers[c]).unwrap_or(0.0)).sum();
        let combined = score + 1e-9 * spread;
        if combined > worst_score {
            worst_score = combined;
            worst = Some(c);
        }
    }
    let mut split_medoids: Option<Vec<usize>> = None;
    if let Some(c) = worst {
        let members = &prev.clusters[c];
        // Anchor on the member closest to the center, split at the farthest.
        let anchor = *members
            .iter()
            .min_by(|&&i, &&j| {
                let si: f64 = members.iter().map(|&b| dist.at(i, b)).sum();
                let sj: f64 = members.iter().map(|&b| dist.at(j, b)).sum();
                si.partial_cmp(&sj).unwrap()
            })
            .unwrap();
        let far = *members
            .iter()
            .max_by(|&&i, &&j| dist.at(i, anchor).partial_cmp(&dist.at(j, anchor)).unwrap())
            .unwrap();
        if dist.at(far, anchor) > 0.0 {
            let mut split: Vec<Vec<usize>> = prev.clusters.clone();
            let (keep, moved): (Vec<usize>, Vec<usize>) = members
                .iter()
                .partition(|&&a| dist.at(a, anchor) <= dist.at(a, far));
            split[c] = keep;
            split.push(moved);
            candidates.push(drop_empty(split));
            let mut med: Vec<usize> = prev
                .clusters
                .iter()
                .enumerate()
                .map(|(i, ms)| if i == c { anchor } else { ms[0] })
                .collect();
            med.push(far);
            split_medoids = Some(med);
        }
    }

    // Candidate 2: fresh farthest-point PAM at budget k.
    let fresh = refine_medoids(dist, n, init_medoids(dist, n, k));
    candidates.push(drop_empty(assign_to_medoids(dist, n, &fresh)));

    // Candidate 3: PAM refinement of the split medoids.
    if let Some(med) = split_medoids {
        let refined = refine_medoids(dist, n, med);
        candidates.push(drop_empty(assign_to_medoids(dist, n, &refined)));
    }

    let mut best: Option<StateSolution> = None;
    for clusters in candidates {
        let (objective, centers) = partition_objective(rows, &clusters, weights)?;
        if best.as_ref().map_or(true, |b| objective < b.objective) {
            best = Some(StateSolution { clusters, centers, objective });
        }
    }
    let best = best.expect("at least one candidate partition");
    // The pure-split candidate guarantees this, even if PAM wandered off.
    Ok(if best.objective <= prev.objective { best } else { prev.clone() })
}

fn uniform_weights(n_states: usize, n_actions: usize) -> Vec<Vec<f64>> {
    vec![vec![1.0 / (n_states * n_actions) as f64; n_actions]; n_states]
}

/// Reparametrize with every latent budget from 1 to `max_latent`.
///
/// `weights[s][a]` (default uniform) sets each pair's share of the
/// objective; the reported objective at budget `k` is non-increasing in
/// `k`. Solutions at budget `k` come with a latent map of exactly `k`
/// latents, some of which may be unrealized at states whose rows collapse
/// into fewer clusters.
pub fn reparam_path(
    rows: &[Vec<Vec<f64>>],
    max_latent: usize,
    weights: Option<&[Vec<f64>]>,
) -> Result<Vec<TabularReparam>> {
    let (n_states, n_actions, n_next) = validate_rows(rows)?;
    if max_latent == 0 {
        return Err(Error::DimensionMismatch("latent budget must be at least 1".into()));
    }
    let default_w;
    let weights = match weights {
        Some(w) => {
            if w.len() != n_states || w.iter().any(|r| r.len() != n_actions) {
                return Err(Error::DimensionMismatch(format!(
                    "weights must be {n_states}×{n_actions}"
                )));
            }
            if let Some(bad) = w.iter().flatten().find(|&&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "weights must be non-negative and finite, found {bad}"
                )));
            }
            w
        }
        None => {
            default_w = uniform_weights(n_states, n_actions);
            &default_w
        }
    };

    let dists: Vec<DistanceMatrix> =
        rows.iter().map(|per_a| DistanceMatrix::build(per_a)).collect::<Result<_>>()?;
    let mut state_solutions: Vec<StateSolution> = (0..n_states)
        .map(|s| solve_state_k1(&rows[s], &weights[s]))
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(max_latent);
    for k in 1..=max_latent {
        if k > 1 {
            for s in 0..n_states {
                state_solutions[s] =
                    grow_state(&rows[s], &weights[s], &dists[s], &state_solutions[s], k)?;
            }
        }
        let mut table = vec![vec![0usize; n_actions]; n_states];
        let mut latent_rows = vec![vec![vec![1.0 / n_next as f64; n_next]; k]; n_states];
        let mut medoids = Vec::with_capacity(n_states);
        let mut objective = 0.0;
        for (s, sol) in state_solutions.iter().enumerate() {
            objective += sol.objective;
            let mut meds = Vec::with_capacity(sol.clusters.len());
            for (z, members) in sol.clusters.iter().enumerate() {
                for &a in members {
                    table[s][a] = z;
                }
                latent_rows[s][z] = sol.centers[z].clone();
                meds.push(members[0]);
            }
            medoids.push(meds);
        }
        let phi = LatentMap::new(table, k)?;
        out.push(TabularReparam { model: FactoredModel { phi, latent_rows }, objective, medoids });
    }
    Ok(out)
}

/// Reparametrize at a single latent budget (the end of [`reparam_path`]).
pub fn reparametrize_tabular(
    rows: &[Vec<Vec<f64>>],
    n_latent: usize,
    weights: Option<&[Vec<f64>]>,
) -> Result<TabularReparam> {
    Ok(reparam_path(rows, n_latent, weights)?.pop().expect("non-empty path"))
}

/// Transition modelling gap: `Σ_{s,a} d[s][a] · KL(rows[s][a] ‖ model row)`.
///
/// This is the quantity the imitation bounds charge for replacing the true
/// dynamics with the factored model.
pub fn transition_gap(
    rows: &[Vec<Vec<f64>>],
    model: &FactoredModel,
    d_joint: &[Vec<f64>],
) -> Result<f64> {
    let (n_states, n_actions, _) = validate_rows(rows)?;
    if model.phi.n_states() != n_states || model.phi.n_actions() != n_actions {
        return Err(Error::DimensionMismatch(format!(
            "model is {}×{}, rows are {n_states}×{n_actions}",
            model.phi.n_states(),
            model.phi.n_actions()
        )));
    }
    if d_joint.len() != n_states || d_joint.iter().any(|r| r.len() != n_actions) {
        return Err(Error::DimensionMismatch(format!("d_joint must be {n_states}×{n_actions}")));
    }
    let mut total = 0.0;
    for s in 0..n_states {
        for a in 0..n_actions {
            if d_joint[s][a] > 0.0 {
                total += d_joint[s][a] * kl(&rows[s][a], model.row(s, a))?;
            }
        }
    }
    Ok(total)
}
