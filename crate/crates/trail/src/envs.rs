//! Synthetic environments with known latent action structure.
//!
//! The workhorse is a gridworld whose four cardinal moves are duplicated
//! into many raw action indices. Duplication is *exact* — duplicated actions
//! share bitwise-identical transition rows — so the ground-truth factored
//! model `T_Z(s'|s, group(a))` reproduces the dynamics with zero divergence
//! and every equality case in the bound reports is testable to float
//! precision. A small continuous point-mass environment provides the
//! continuous-action counterpart for the Gaussian decoder and linear model.

use serde::{Deserialize, Serialize};

use crate::latent::LatentMap;
use crate::mdp::TabularMdp;
use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Cardinal moves in a fixed order; raw action indices map onto these.
pub const MOVES: [(i64, i64); 4] = [
    (0, 1),  // up
    (1, 0),  // right
    (0, -1), // down
    (-1, 0), // left
];

pub const MOVE_NAMES: [&str; 4] = ["up", "right", "down", "left"];

/// How the four moves are duplicated into raw actions.
///
/// `Balanced(k)` interleaves duplicates so that raw action `a` performs move
/// `a % 4` — duplicates of a move sit at stride 4. `PerMove` lays the raw
/// actions out in contiguous blocks, one block per move, with the given
/// block lengths; this covers skewed action spaces where the moves are
/// duplicated unevenly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duplication {
    Balanced(usize),
    PerMove([usize; 4]),
}

impl Duplication {
    pub fn n_actions(&self) -> usize {
        match self {
            Duplication::Balanced(k) => 4 * k,
            Duplication::PerMove(counts) => counts.iter().sum(),
        }
    }

    /// Move index performed by raw action `a`.
    pub fn move_of(&self, a: usize) -> usize {
        match self {
            Duplication::Balanced(_) => a % 4,
            Duplication::PerMove(counts) => {
                let mut rest = a;
                for (m, &c) in counts.iter().enumerate() {
                    if rest < c {
                        return m;
                    }
                    rest -= c;
                }
                panic!("action index {a} out of range");
            }
        }
    }
}

/// Geometry and dynamics of the redundant gridworld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Blocked cells as `(x, y)`.
    #[serde(default)]
    pub walls: Vec<(usize, usize)>,
    pub goal: (usize, usize),
    /// Probability that an action executes a uniformly random cardinal move
    /// instead of its own move.
    pub slip_prob: f64,
    pub duplication: Duplication,
    pub gamma: f64,
    /// Initial cell; `None` means uniform over all free cells.
    #[serde(default)]
    pub start: Option<(usize, usize)>,
}

impl GridSpec {
    /// The default instance used throughout the examples and tests: 5×5 with
    /// two walls (23 free cells), goal in the top-right corner, 10% slip,
    /// each move duplicated 16 times (64 raw actions), discount 0.95.
    pub fn default_5x5() -> GridSpec {
        GridSpec {
            width: 5,
            height: 5,
            walls: vec![(1, 1), (3, 3)],
            goal: (4, 4),
            slip_prob: 0.1,
            duplication: Duplication::Balanced(16),
            gamma: 0.95,
            start: Some((0, 0)),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let field = |f: &str, msg: String| Error::Config { field: f.into(), msg };
        if self.width == 0 || self.height == 0 {
            return Err(field("width/height", "grid must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(field("slip_prob", format!("must lie in [0,1], got {}", self.slip_prob)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(field("gamma", format!("must lie in [0,1), got {}", self.gamma)));
        }
        if self.duplication.n_actions() == 0 {
            return Err(field("duplication", "needs at least one raw action".into()));
        }
        if let Duplication::PerMove(counts) = &self.duplication {
            if counts.iter().any(|&c| c == 0) {
                return Err(field(
                    "duplication",
                    "every move needs at least one raw action".into(),
                ));
            }
        }
        let in_bounds = |&(x, y): &(usize, usize)| x < self.width && y < self.height;
        if !in_bounds(&self.goal) {
            return Err(field("goal", format!("{:?} outside the grid", self.goal)));
        }
        if self.walls.contains(&self.goal) {
            return Err(field("goal", "goal cell is a wall".into()));
        }
        for w in &self.walls {
            if !in_bounds(w) {
                return Err(field("walls", format!("{w:?} outside the grid")));
            }
        }
        if let Some(start) = self.start {
            if !in_bounds(&start) {
                return Err(field("start", format!("{start:?} outside the grid")));
            }
            if self.walls.contains(&start) {
                return Err(field("start", "start cell is a wall".into()));
            }
        }
        Ok(())
    }
}

/// A built gridworld: the MDP, the ground-truth latent map (raw action →
/// cardinal move), the reward table for expert synthesis, and the cell
/// layout for rendering and debugging.
#[derive(Debug, Clone)]
pub struct Gridworld {
    pub mdp: TabularMdp,
    /// Ground-truth grouping of raw actions; exactly 4 latent actions.
    pub phi_star: LatentMap,
    /// `reward[s][a] = 1` iff `s` is the goal cell.
    pub reward: Vec<Vec<f64>>,
    /// Free cells in state-index order.
    pub cells: Vec<(usize, usize)>,
    pub goal_state: usize,
    pub spec: GridSpec,
}

impl Gridworld {
    pub fn state_of(&self, cell: (usize, usize)) -> Option<usize> {
        self.cells.iter().position(|&c| c == cell)
    }

    /// Exact latent transition table under the ground-truth grouping:
    /// `t_z[s][z]` is the transition row shared by every duplicate of move
    /// `z` at state `s`. Duplicates are assigned bitwise-identical rows at
    /// construction, so the first member's row is the group's row with zero
    /// error. A move with no duplicates falls back to a uniform row.
    pub fn ground_truth_t_z(&self) -> Vec<Vec<Vec<f64>>> {
        let phi = &self.phi_star;
        (0..phi.n_states())
            .map(|s| {
                let groups = phi.groups(s);
                (0..phi.n_latent())
                    .map(|z| match groups[z].first() {
                        Some(&a) => self.mdp.row(s, a).to_vec(),
                        None => vec![1.0 / phi.n_states() as f64; phi.n_states()],
                    })
                    .collect()
            })
            .collect()
    }
}

/// Build the redundant gridworld.
///
/// Dynamics: the intended move succeeds with probability `1 - slip_prob`;
/// otherwise one of the four cardinal moves is chosen uniformly (the
/// intended one included, so its total probability is
/// `1 - slip + slip/4`). Moves into walls or off the grid leave the agent
/// in place. The goal cell absorbs under every action. Duplicated actions
/// are assigned literally the same row, so grouping rows by move and
/// averaging reproduces each row with zero error.
pub fn build_redundant_gridworld(spec: &GridSpec) -> Result<Gridworld> {
    spec.validate()?;
    let mut cells = Vec::new();
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !spec.walls.contains(&(x, y)) {
                cells.push((x, y));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Config { field: "walls".into(), msg: "no free cells".into() });
    }
    let n_states = cells.len();
    let state_of = |cell: (usize, usize)| cells.iter().position(|&c| c == cell);
    let goal_state = state_of(spec.goal).expect("goal validated as free");

    // Where a single deterministic move lands from each cell.
    let land = |(x, y): (usize, usize), mv: usize| -> (usize, usize) {
        let (dx, dy) = MOVES[mv];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= spec.width as i64 || ny >= spec.height as i64 {
            return (x, y);
        }
        let cand = (nx as usize, ny as usize);
        if spec.walls.contains(&cand) {
            (x, y)
        } else {
            cand
        }
    };

    // One row per (state, move); raw actions clone their move's row.
    let mut move_rows = vec![vec![vec![0.0; n_states]; 4]; n_states];
    for (s, &cell) in cells.iter().enumerate() {
        for mv in 0..4 {
            let row = &mut move_rows[s][mv];
            if s == goal_state {
                row[goal_state] = 1.0;
                continue;
            }
            let intended = state_of(land(cell, mv)).expect("landing cell is free");
            row[intended] += 1.0 - spec.slip_prob;
            for slip_mv in 0..4 {
                let slipped = state_of(land(cell, slip_mv)).expect("landing cell is free");
                row[slipped] += spec.slip_prob / 4.0;
            }
        }
    }

    let n_actions = spec.duplication.n_actions();
    let mut transition = vec![vec![Vec::new(); n_actions]; n_states];
    let mut phi_table = vec![vec![0usize; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let mv = spec.duplication.move_of(a);
            transition[s][a] = move_rows[s][mv].clone();
            phi_table[s][a] = mv;
        }
    }

    let initial = match spec.start {
        Some(cell) => {
            let s0 = state_of(cell).expect("start validated as free");
            let mut mu = vec![0.0; n_states];
            mu[s0] = 1.0;
            mu
        }
        None => vec![1.0 / n_states as f64; n_states],
    };

    let reward: Vec<Vec<f64>> = (0..n_states)
        .map(|s| vec![if s == goal_state { 1.0 } else { 0.0 }; n_actions])
        .collect();

    let mdp = TabularMdp::new(n_states, n_actions, spec.gamma, initial, transition)?;
    let phi_star = LatentMap::new(phi_table, 4)?;
    Ok(Gridworld { mdp, phi_star, reward, cells, goal_state, spec: spec.clone() })
}

/// A 2-D point mass driven by a redundant `action_dim`-dimensional control.
///
/// The state moves by `dt · M a` plus Gaussian noise, clipped to the box
/// `[-bound, bound]²`; `M` is a fixed 2×`action_dim` mixing matrix with
/// orthonormal rows, so the control space has `action_dim - 2` latent-null
/// directions — the continuous analog of duplicated gridworld actions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointMassEnv {
    pub action_dim: usize,
    /// 2 × action_dim, orthonormal rows.
    pub mixing: [Vec<f64>; 2],
    pub dt: f64,
    pub noise_std: f64,
    pub bound: f64,
}

impl PointMassEnv {
    /// Environment with a seeded random mixing matrix (orthonormalized
    /// Gaussian rows).
    pub fn new(action_dim: usize, dt: f64, noise_std: f64, bound: f64, seed: u64) -> Result<Self> {
        if action_dim < 2 {
            return Err(Error::Config {
                field: "action_dim".into(),
                msg: format!("need at least 2 control dimensions, got {action_dim}"),
            });
        }
        if dt <= 0.0 || bound <= 0.0 || noise_std < 0.0 {
            return Err(Error::Config {
                field: "point_mass".into(),
                msg: "dt and bound must be positive, noise_std non-negative".into(),
            });
        }
        let mut rng = stream_rng(seed, crate::rng::stream::INIT);
        let mut rows: [Vec<f64>; 2] = [
            (0..action_dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
            (0..action_dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
        ];
        // Gram–Schmidt; with continuous draws the rows are independent a.s.
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n0 = norm(&rows[0]);
        rows[0].iter_mut().for_each(|x| *x /= n0);
        let dot: f64 = rows[0].iter().zip(rows[1].iter()).map(|(a, b)| a * b).sum();
        let r0 = rows[0].clone();
        rows[1].iter_mut().zip(r0.iter()).for_each(|(x, r)| *x -= dot * r);
        let n1 = norm(&rows[1]);
        rows[1].iter_mut().for_each(|x| *x /= n1);
        Ok(PointMassEnv { action_dim, mixing: rows, dt, noise_std, bound })
    }

    /// Effective 2-D displacement direction of a control vector.
    pub fn project(&self, action: &[f64]) -> [f64; 2] {
        assert_eq!(action.len(), self.action_dim);
        [
            self.mixing[0].iter().zip(action).map(|(m, a)| m * a).sum(),
            self.mixing[1].iter().zip(action).map(|(m, a)| m * a).sum(),
        ]
    }

    /// Scripted expert control pulling the state toward `target` with gain
    /// `gain`, expressed in the raw control space through the mixing
    /// transpose (for orthonormal rows this is the least-norm preimage).
    pub fn expert_action(&self, state: [f64; 2], target: [f64; 2], gain: f64) -> Vec<f64> {
        let pull = [gain * (target[0] - state[0]), gain * (target[1] - state[1])];
        (0..self.action_dim)
            .map(|j| self.mixing[0][j] * pull[0] + self.mixing[1][j] * pull[1])
            .collect()
    }
}

/// One environment step; noise is isotropic Gaussian scaled by `noise_std`.
pub fn point_mass_step(
    env: &PointMassEnv,
    state: [f64; 2],
    action: &[f64],
    rng: &mut impl Rng,
) -> [f64; 2] {
    let push = env.project(action);
    let mut next = [0.0; 2];
    for i in 0..2 {
        let noise: f64 = StandardNormal.sample(rng);
        next[i] = (state[i] + env.dt * push[i] + env.noise_std * noise)
            .clamp(-env.bound, env.bound);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{state_visitation, value_iteration};
    use crate::rng::{sample_index, stream_rng};
    use rand::Rng;

    #[test]
    fn default_grid_has_23_states_and_64_actions() {
        let gw = build_redundant_gridworld(&GridSpec::default_5x5()).unwrap();
        assert_eq!(gw.mdp.n_states(), 23);
        assert_eq!(gw.mdp.n_actions(), 64);
        assert_eq!(gw.phi_star.n_latent(), 4);
    }

    #[test]
    fn duplicated_actions_share_identical_rows() {
        let gw = build_redundant_gridworld(&GridSpec::default_5x5()).unwrap();
        for s in 0..gw.mdp.n_states() {
            for a in 0..gw.mdp.n_actions() {
                // Balanced layout: duplicates sit at stride 4.
                let twin = (a + 4) % gw.mdp.n_actions();
                assert_eq!(gw.phi_star.z_of(s, a), gw.phi_star.z_of(s, twin));
                assert_eq!(gw.mdp.row(s, a), gw.mdp.row(s, twin));
            }
        }
    }

    #[test]
    fn group_averages_reproduce_rows_exactly() {
        let gw = build_redundant_gridworld(&GridSpec::default_5x5()).unwrap();
        let n = gw.mdp.n_states();
        for s in 0..n {
            for z in 0..4 {
                let members: Vec<usize> =
                    (0..gw.mdp.n_actions()).filter(|&a| gw.phi_star.z_of(s, a) == z).collect();
                // Average via offsets from the first member: exact for
                // identical rows.
                let first = gw.mdp.row(s, members[0]);
                let mut avg = first.to_vec();
                for sp in 0..n {
                    let mut acc = 0.0;
                    for &a in &members {
                        acc += gw.mdp.row(s, a)[sp] - first[sp];
                    }
                    avg[sp] += acc / members.len() as f64;
                }
                for &a in &members {
                    assert_eq!(gw.mdp.row(s, a), avg.as_slice(), "s={s} z={z}");
                }
            }
        }
    }

    #[test]
    fn goal_is_absorbing() {
        let gw = build_redundant_gridworld(&GridSpec::default_5x5()).unwrap();
        for a in 0..gw.mdp.n_actions() {
            let row = gw.mdp.row(gw.goal_state, a);
            assert_eq!(row[gw.goal_state], 1.0);
        }
    }

    #[test]
    fn rows_are_valid_distributions_with_slip() {
        for slip in [0.0, 0.1, 0.5, 1.0] {
            let spec = GridSpec { slip_prob: slip, ..GridSpec::default_5x5() };
            let gw = build_redundant_gridworld(&spec).unwrap();
            for s in 0..gw.mdp.n_states() {
                for a in 0..gw.mdp.n_actions() {
                    let total: f64 = gw.mdp.row(s, a).iter().sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn expert_reaches_goal_within_width_plus_height_without_slip() {
        let spec = GridSpec { slip_prob: 0.0, ..GridSpec::default_5x5() };
        let gw = build_redundant_gridworld(&spec).unwrap();
        let expert = value_iteration(&gw.mdp, &gw.reward, 1e-10).unwrap();
        let budget = spec.width + spec.height;
        for start in 0..gw.mdp.n_states() {
            let mut s = start;
            for _ in 0..budget {
                if s == gw.goal_state {
                    break;
                }
                let a = expert.row(s).iter().position(|&p| p == 1.0).unwrap();
                // Deterministic dynamics: the row is a point mass.
                s = gw.mdp.row(s, a).iter().position(|&p| p == 1.0).unwrap();
            }
            assert_eq!(s, gw.goal_state, "expert failed from state {start}");
        }
    }

    #[test]
    fn visitation_concentrates_on_goal_under_expert() {
        let gw = build_redundant_gridworld(&GridSpec::default_5x5()).unwrap();
        let expert = value_iteration(&gw.mdp, &gw.reward, 1e-10).unwrap();
        let d = state_visitation(&gw.mdp, &expert).unwrap();
        assert!(d[gw.goal_state] > 0.5, "goal mass {}", d[gw.goal_state]);
    }

    #[test]
    fn per_move_duplication_counts_and_groups() {
        let spec = GridSpec {
            duplication: Duplication::PerMove([1, 1, 31, 31]),
            ..GridSpec::default_5x5()
        };
        let gw = build_redundant_gridworld(&spec).unwrap();
        assert_eq!(gw.mdp.n_actions(), 64);
        assert_eq!(gw.phi_star.z_of(0, 0), 0);
        assert_eq!(gw.phi_star.z_of(0, 1), 1);
        assert_eq!(gw.phi_star.z_of(0, 2), 2);
        assert_eq!(gw.phi_star.z_of(0, 32), 2);
        assert_eq!(gw.phi_star.z_of(0, 33), 3);
        assert_eq!(gw.phi_star.z_of(0, 63), 3);
    }

    #[test]
    fn grid_spec_validation_errors_name_fields() {
        let bad = GridSpec { goal: (9, 9), ..GridSpec::default_5x5() };
        match build_redundant_gridworld(&bad) {
            Err(crate::Error::Config { field, .. }) => assert_eq!(field, "goal"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn point_mass_mixing_rows_are_orthonormal() {
        let env = PointMassEnv::new(8, 0.1, 0.01, 1.0, 7).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&env.mixing[0], &env.mixing[0]) - 1.0).abs() < 1e-12);
        assert!((dot(&env.mixing[1], &env.mixing[1]) - 1.0).abs() < 1e-12);
        assert!(dot(&env.mixing[0], &env.mixing[1]).abs() < 1e-12);
    }

    #[test]
    fn point_mass_expert_contracts_toward_target() {
        let env = PointMassEnv::new(6, 0.5, 0.0, 10.0, 3).unwrap();
        let mut rng = stream_rng(3, 1);
        let mut state = [4.0, -3.0];
        for _ in 0..60 {
            let a = env.expert_action(state, [0.0, 0.0], 1.0);
            state = point_mass_step(&env, state, &a, &mut rng);
        }
        assert!(state[0].abs() < 1e-6 && state[1].abs() < 1e-6, "state {state:?}");
    }

    #[test]
    fn point_mass_step_stays_in_bounds() {
        let env = PointMassEnv::new(4, 0.3, 0.5, 1.0, 11).unwrap();
        let mut rng = stream_rng(11, 2);
        let mut state = [0.0, 0.0];
        for _ in 0..200 {
            let action: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            state = point_mass_step(&env, state, &action, &mut rng);
            assert!(state[0].abs() <= 1.0 && state[1].abs() <= 1.0);
        }
    }

    #[test]
    fn null_space_controls_do_not_move_the_point() {
        // Any control orthogonal to both mixing rows projects to zero.
        let env = PointMassEnv::new(5, 0.1, 0.0, 1.0, 13).unwrap();
        let mut rng = stream_rng(13, 3);
        let raw: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() - 0.5).collect();
        let d0: f64 = env.mixing[0].iter().zip(&raw).map(|(m, a)| m * a).sum();
        let d1: f64 = env.mixing[1].iter().zip(&raw).map(|(m, a)| m * a).sum();
        let null: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(j, &x)| x - d0 * env.mixing[0][j] - d1 * env.mixing[1][j])
            .collect();
        let push = env.project(&null);
        assert!(push[0].abs() < 1e-12 && push[1].abs() < 1e-12);
    }

    /// Frequency oracle for the slip model on the default grid.
    #[test]
    fn slip_frequencies_match_rows() {
        let gw = build_redundant_gridworld(&GridSpec::default_5x5()).unwrap();
        let mut rng = stream_rng(17, 4);
        let s = gw.state_of((2, 2)).unwrap();
        let a = 1; // a "right" action under balanced layout
        let n = 100_000;
        let mut counts = vec![0.0; gw.mdp.n_states()];
        for _ in 0..n {
            counts[sample_index(gw.mdp.row(s, a), &mut rng)] += 1.0;
        }
        for (sp, &c) in counts.iter().enumerate() {
            assert!((c / n as f64 - gw.mdp.row(s, a)[sp]).abs() < 6e-3);
        }
    }
}
