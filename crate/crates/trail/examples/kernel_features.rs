//! Random Fourier features against the Gaussian kernel they approximate:
//! the mean absolute error over random point pairs shrinks as the feature
//! count grows.
//!
//! Run with: `cargo run --release --example kernel_features`

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trail::ebm::{gaussian_kernel, RffMap};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 8;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
        .map(|_| {
            let mut point = || -> Vec<f64> {
                (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
            };
            (point(), point())
        })
        .collect();

    println!("{:>9}  {:>12}  {:>12}", "features", "mean error", "max error");
    for d in [64, 256, 1024, 4096] {
        let map = RffMap::new(dim, d, 11);
        let errs: Vec<f64> = pairs
            .iter()
            .map(|(x, y)| (map.kernel(x, y) - gaussian_kernel(x, y)).abs())
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let max = errs.iter().fold(0.0f64, |m, e| m.max(*e));
        println!("{d:>9}  {mean:>12.5}  {max:>12.5}");
    }
}
