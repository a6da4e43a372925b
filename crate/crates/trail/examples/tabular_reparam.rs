//! Reparametrize a counted transition table into latent actions: cluster the
//! empirical next-state rows per state, then check the recovered grouping
//! against the gridworld's true duplicate structure.
//!
//! Run with: `cargo run --release --example tabular_reparam`

use trail::data::generate_offline;
use trail::envs::{build_redundant_gridworld, GridSpec};
use trail::mdp::DistVector;
use trail::reparam::{reparametrize_tabular, rows_from_counts, transition_gap};
use trail::theory::uniform_joint;

fn main() -> trail::Result<()> {
    let spec = GridSpec::default_5x5();
    let gw = build_redundant_gridworld(&spec)?;
    let (n_states, n_actions) = (gw.mdp.n_states(), gw.mdp.n_actions());
    let d_off = DistVector::uniform(n_states);
    let offline = generate_offline(&gw.mdp, &d_off, 50_000, 0)?;

    let counts = offline.transition_counts(n_states, n_actions)?;
    let weights = offline.pair_counts(n_states, n_actions)?;
    let reparam = reparametrize_tabular(&rows_from_counts(&counts), 4, Some(&weights))?;
    println!("clustering objective (weighted KL to medoid rows): {:.6}", reparam.objective);
    println!(
        "modelling gap against the true dynamics: {:.6}",
        transition_gap(gw.mdp.transition(), &reparam.model, &uniform_joint(&d_off, n_actions))?
    );

    // Score the grouping: within any state, two actions sharing a latent
    // should share a move. Count agreements over all action pairs.
    let mut agree = 0usize;
    let mut total = 0usize;
    for s in 0..n_states {
        for a in 0..n_actions {
            for b in (a + 1)..n_actions {
                let same_latent =
                    reparam.model.phi.z_of(s, a) == reparam.model.phi.z_of(s, b);
                let same_move = spec.duplication.move_of(a) == spec.duplication.move_of(b);
                agree += (same_latent == same_move) as usize;
                total += 1;
            }
        }
    }
    println!(
        "grouping agreement with the true duplicate structure: {agree}/{total} \
         ({:.1}%)",
        100.0 * agree as f64 / total as f64
    );
    println!("medoid actions at state 0: {:?}", reparam.medoids[0]);
    Ok(())
}
