//! Train the contrastive transition model on redundant-gridworld data and
//! inspect the learned pair embeddings: duplicated actions should land close
//! together, actions with different moves far apart.
//!
//! This is the qualitative heart of the pretraining stage — the encoder
//! discovers the latent action space purely from (s, a, s') triples, with
//! no access to the duplicate structure.
//!
//! Run with: `cargo run --release --example ebm_embeddings`

use trail::data::generate_offline;
use trail::ebm::{train_transition_ebm, EbmConfig, NegativeMode};
use trail::envs::{build_redundant_gridworld, GridSpec};
use trail::mdp::DistVector;
use trail::pipeline::tabular_features;

fn main() -> trail::Result<()> {
    let spec = GridSpec::default_5x5();
    let gw = build_redundant_gridworld(&spec)?;
    let (n_states, n_actions) = (gw.mdp.n_states(), gw.mdp.n_actions());
    let offline = generate_offline(&gw.mdp, &DistVector::uniform(n_states), 20_000, 0)?;
    let features = tabular_features(offline.tabular()?, n_states, n_actions);

    let cfg = EbmConfig {
        embed_dim: 8,
        hidden: vec![64, 64],
        steps: 4000,
        batch_size: 64,
        negatives: NegativeMode::InBatch,
        lr: 1e-3,
        seed: 0,
    };
    let (model, log) = train_transition_ebm(&features, &cfg)?;
    let (first, last) = (log.first().unwrap(), log.last().unwrap());
    println!("contrastive loss: {:.4} (step {}) → {:.4} (step {})", first.1, first.0, last.1, last.0);

    // Pool pairwise embedding distances over all states, split by whether
    // the two actions duplicate the same move.
    let mut within = (0.0, 0usize);
    let mut across = (0.0, 0usize);
    for s in 0..n_states {
        let embeds: Vec<Vec<f64>> = (0..n_actions)
            .map(|a| {
                let mut pair = vec![0.0; n_states + n_actions];
                pair[s] = 1.0;
                pair[n_states + a] = 1.0;
                model.phi.forward(&pair)
            })
            .collect();
        for a in 0..n_actions {
            for b in (a + 1)..n_actions {
                let dist = embeds[a]
                    .iter()
                    .zip(&embeds[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if spec.duplication.move_of(a) == spec.duplication.move_of(b) {
                    within.0 += dist;
                    within.1 += 1;
                } else {
                    across.0 += dist;
                    across.1 += 1;
                }
            }
        }
    }
    let (w, x) = (within.0 / within.1 as f64, across.0 / across.1 as f64);
    println!("mean embedding distance within duplicate groups: {w:.4}");
    println!("mean embedding distance across groups:           {x:.4}");
    println!("ratio: {:.2} (smaller is better separated)", w / x);
    Ok(())
}
