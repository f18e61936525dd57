//! Seeded synthetic inputs for smoke runs and tests: a benchmark matrix
//! correlated with RewardBench scores, planted low-rank matrices, merge
//! attribute pairs and token log-probability documents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ingest::{Category, RewardBenchTable, ScoreMatrix};
use crate::merge_search::AttributeSample;
use crate::pretrain_probe::{DataCategory, TokenLogProbDoc};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One column per synthetic benchmark, rows in table order. Column `j`
/// mixes the standardized `category` score with loading drawn from
/// `[0.1, 0.95]` and independent noise, then maps to a 0-100 style scale
/// rounded to one decimal.
pub fn benchmark_matrix(
    rb: &RewardBenchTable,
    category: Category,
    n_benchmarks: usize,
    seed: u64,
) -> Result<ScoreMatrix> {
    if rb.len() < 2 || n_benchmarks == 0 {
        return Err(Error::invalid("need at least 2 models and 1 benchmark"));
    }
    let target: Vec<f64> = rb.values().map(|s| s.get(category)).collect();
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let sd = (target.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("target scores are constant".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loadings: Vec<f64> = (0..n_benchmarks).map(|_| rng.random_range(0.1..0.95)).collect();
    let centers: Vec<f64> = (0..n_benchmarks).map(|_| rng.random_range(35.0..75.0)).collect();
    let spreads: Vec<f64> = (0..n_benchmarks).map(|_| rng.random_range(4.0..12.0)).collect();
    let values = target
        .iter()
        .map(|t| {
            let z = (t - mean) / sd;
            (0..n_benchmarks)
                .map(|j| {
                    let a = loadings[j];
                    let v = a * z + (1.0 - a * a).sqrt() * normal(&mut rng);
                    ((centers[j] + spreads[j] * v) * 10.0).round() / 10.0
                })
                .collect()
        })
        .collect();
    let columns = (0..n_benchmarks).map(|j| format!("synth_{j:02}")).collect();
    ScoreMatrix::new(rb.keys().cloned().collect(), columns, values)
}

/// `U V + noise`, with `U` (n x rank) and `V` (rank x p) standard normal
/// and the noise scaled relative to the RMS entry of `U V`.
pub fn planted_low_rank(n: usize, p: usize, rank: usize, relative_noise: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<Vec<f64>> = (0..n).map(|_| (0..rank).map(|_| normal(&mut rng)).collect()).collect();
    let v: Vec<Vec<f64>> = (0..rank).map(|_| (0..p).map(|_| normal(&mut rng)).collect()).collect();
    let signal: Vec<Vec<f64>> = u
        .iter()
        .map(|ui| (0..p).map(|j| (0..rank).map(|k| ui[k] * v[k][j]).sum()).collect())
        .collect();
    let rms = (signal.iter().flatten().map(|x| x * x).sum::<f64>() / (n * p) as f64).sqrt();
    signal
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| x + relative_noise * rms * normal(&mut rng))
                .collect()
        })
        .collect()
}

/// Attribute pairs ordered by a hidden merge vector plus logistic label noise.
pub fn attribute_samples(n: usize, latent: &[f64; 5], seed: u64) -> Vec<AttributeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let a: [f64; 5] = std::array::from_fn(|_| (rng.random_range(0.0..4.0f64) * 8.0).round() / 8.0);
            let b: [f64; 5] = std::array::from_fn(|_| (rng.random_range(0.0..4.0f64) * 8.0).round() / 8.0);
            let gap: f64 = (0..5).map(|j| latent[j] * (a[j] - b[j])).sum();
            let p = 1.0 / (1.0 + (-4.0 * gap).exp());
            let (c, r) = if rng.random::<f64>() < p { (a, b) } else { (b, a) };
            AttributeSample {
                pair_id: format!("pair_{i:05}"),
                chosen: c,
                rejected: r,
            }
        })
        .collect()
}

/// Documents for every model and canonical category. Per-token
/// log-probabilities are `-|N(mu, 1)|` with `mu` depending on model and category.
pub fn presence_docs(
    models: &[String],
    docs_per_category: usize,
    tokens: usize,
    seed: u64,
) -> Result<Vec<TokenLogProbDoc>> {
    if tokens == 0 {
        return Err(Error::invalid("documents need at least one token"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for m in models {
        let shift = rng.random_range(0.5..2.5);
        for (ci, cat) in DataCategory::CANONICAL.iter().enumerate() {
            let mu = shift + 0.3 * ci as f64;
            for d in 0..docs_per_category {
                let lp = (0..tokens).map(|_| -(mu + normal(&mut rng)).abs()).collect();
                out.push(TokenLogProbDoc::new(format!("{}_{d:04}", cat.name()), cat.clone(), m.clone(), lp)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FixtureSet, Method};
    use crate::stats::pearson;

    #[test]
    fn matrix_is_seeded_and_correlated() {
        let fx = FixtureSet::bundled().unwrap();
        let rb = fx.rewardbench(Method::Regression);
        let a = benchmark_matrix(rb, Category::Overall, 6, 1).unwrap();
        assert_eq!(a, benchmark_matrix(rb, Category::Overall, 6, 1).unwrap());
        assert_ne!(a, benchmark_matrix(rb, Category::Overall, 6, 2).unwrap());
        assert_eq!((a.n_rows(), a.n_cols()), (40, 6));
        let target: Vec<f64> = rb.values().map(|s| s.overall).collect();
        let best = (0..6)
            .map(|j| pearson(&a.column(j), &target).unwrap())
            .fold(f64::MIN, f64::max);
        assert!(best > 0.5, "{best}");
    }

    #[test]
    fn planted_shape() {
        let x = planted_low_rank(40, 33, 5, 0.01, 3);
        assert_eq!(x.len(), 40);
        assert!(x.iter().all(|r| r.len() == 33));
    }

    #[test]
    fn docs_cover_categories() {
        let models = vec!["a".to_string(), "b".to_string()];
        let docs = presence_docs(&models, 3, 10, 4).unwrap();
        assert_eq!(docs.len(), 2 * 5 * 3);
        assert!(docs.iter().all(|d| d.logprobs.iter().all(|v| *v <= 0.0)));
    }

    #[test]
    fn attribute_pairs_follow_latent() {
        let w = [0.6, 0.3, 0.2, 0.1, -0.3];
        let s = attribute_samples(2000, &w, 5);
        let acc = crate::merge_search::pair_accuracy(&w, &s).unwrap();
        assert!(acc > 0.7, "{acc}");
    }
}
