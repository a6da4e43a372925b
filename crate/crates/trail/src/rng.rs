//! Seeded RNG streams.
//!
//! Every sampling site in the crate draws from a ChaCha8 stream derived from
//! an experiment seed plus a stream id. Distinct pipeline stages (offline
//! data, expert data, training batches, evaluation episodes, sweep cells)
//! get distinct stream ids, so results are reproducible bit-for-bit and
//! independent of scheduling when cells run on a worker pool.

use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known stream ids. Keeping them in one place avoids accidental reuse.
pub mod stream {
    pub const OFFLINE_DATA: u64 = 1;
    pub const EXPERT_DATA: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const INSTANCE_GEN: u64 = 5;
    pub const SWEEP: u64 = 6;
    pub const INIT: u64 = 7;
    pub const RFF: u64 = 8;
}

/// A ChaCha8 stream for (`seed`, `stream_id`). Streams with the same seed and
/// different ids never overlap.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Per-cell stream for fan-out work: cell `index` of stage `stream_id`.
/// Cells are independent of execution order, so a worker pool can process
/// them in any order without changing results.
pub fn cell_rng(seed: u64, stream_id: u64, index: u64) -> ChaCha8Rng {
    // Leave the low id space to the named streams; cells live above it.
    stream_rng(seed, (stream_id << 32) | (index + 16))
}

/// Sample an index from an unnormalized or normalized weight slice by linear
/// scan over the cumulative sum. Weights must be non-negative with a positive
/// total; both are asserted because callers only pass validated rows.
pub fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "sample_index: nonpositive total weight");
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding can push the final cumulative sum a hair below `u`.
    weights.len() - 1
}

/// A draw from Dirichlet(1, ..., 1) over `n` categories: normalized
/// exponentials. Always strictly positive in exact arithmetic; entries are
/// floored at 1e-300 to keep that true under floating point.
pub fn dirichlet_uniform(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(n > 0);
    let exp = rand_distr::Exp1;
    let mut draws: Vec<f64> = (0..n).map(|_| {
        let e: f64 = exp.sample(rng);
        e.max(1e-300)
    }).collect();
    let total: f64 = draws.iter().sum();
    for d in draws.iter_mut() {
        *d /= total;
    }
    let drift: f64 = 1.0 - draws.iter().sum::<f64>();
    draws[0] += drift;
    draws
}
