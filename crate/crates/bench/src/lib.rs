//! Seeded workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian design with a sparse linear response.
pub fn regression_problem(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| 2.0 * r[0] - r[p / 2] + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

/// Presence-score-like values: `-|N(mu, sd)|`.
pub fn score_collection(n: usize, mu: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| -(mu + sd * rng.sample::<f64, _>(StandardNormal)).abs())
        .collect()
}
