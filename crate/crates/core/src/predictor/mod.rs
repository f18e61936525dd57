//! Performance prediction from benchmark results: polynomial features,
//! Elastic-Net by coordinate descent, k-fold hyperparameter search, the
//! final refit and its coefficient/coverage reports.

mod cv;
mod enet;
mod poly;
mod scale;

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::coverage::{coverage_curve, CoverageCurve, Scores};
use crate::error::{Error, Result};
use crate::ingest::{Category, RewardBenchTable, ScoreMatrix};

pub use cv::{cross_validate, fold_assignment, CvEntry, CvResult, HyperGrid, HyperTriple};
pub use enet::{alpha_max, elastic_net_fit, kkt_residual, objective, EnetFit, FitOptions};
pub use poly::{expand_polynomial, PolynomialExpansion};
pub use scale::{standardize, Standardizer};

/// Number of cross-validation folds used unless overridden.
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInfo {
    pub n_iter: usize,
    pub converged: bool,
    pub max_update: f64,
    pub kkt_residual: f64,
}

/// A fitted predictor. Raw inputs are expanded, standardized with the stored
/// parameters, then combined linearly. Features with a zero stored standard
/// deviation were constant in training and carry a zero coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub degree: usize,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub raw_features: Vec<String>,
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub coef: Vec<f64>,
    pub intercept: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    pub convergence: ConvergenceInfo,
}

impl ElasticNetModel {
    fn expansion(&self) -> Result<PolynomialExpansion> {
        PolynomialExpansion::new(self.raw_features.len(), self.degree)
    }

    /// Prediction for one raw feature row, in `raw_features` order.
    pub fn predict_row(&self, raw: &[f64]) -> Result<f64> {
        let z = self.expansion()?.apply(raw)?;
        Ok(self.intercept
            + z.iter()
                .zip(self.means.iter().zip(&self.stds))
                .zip(&self.coef)
                .map(|((v, (m, s)), c)| if *s > 0.0 { c * (v - m) / s } else { 0.0 })
                .sum::<f64>())
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let exp = self.expansion()?;
        rows.iter()
            .map(|r| {
                let z = exp.apply(r)?;
                Ok(self.intercept
                    + z.iter()
                        .zip(self.means.iter().zip(&self.stds))
                        .zip(&self.coef)
                        .map(|((v, (m, s)), c)| if *s > 0.0 { c * (v - m) / s } else { 0.0 })
                        .sum::<f64>())
            })
            .collect()
    }

    /// Prediction from named raw features; every model feature must be
    /// supplied and no unknown names are accepted.
    pub fn predict(&self, features: &BTreeMap<String, f64>) -> Result<f64> {
        if let Some(unknown) = features.keys().find(|k| !self.raw_features.contains(k)) {
            return Err(Error::UnknownFeature(unknown.clone()));
        }
        let row = self
            .raw_features
            .iter()
            .map(|n| {
                features
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::MissingFeature(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.predict_row(&row)
    }

    /// Predictions for every matrix row, looking up columns by feature name.
    pub fn predict_matrix(&self, matrix: &ScoreMatrix) -> Result<Vec<f64>> {
        let cols = self
            .raw_features
            .iter()
            .map(|n| {
                matrix
                    .column_index(n)
                    .ok_or_else(|| Error::MissingFeature(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<f64>> = (0..matrix.n_rows())
            .map(|i| cols.iter().map(|&c| matrix.value(i, c)).collect())
            .collect();
        self.predict_rows(&rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ElasticNetModel = serde_json::from_str(s)?;
        let n = m.expansion()?.n_outputs();
        if [m.feature_names.len(), m.means.len(), m.stds.len(), m.coef.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::invalid("model arrays disagree with the expanded feature count"));
        }
        Ok(m)
    }
}

/// Refits on all rows with the chosen hyperparameters.
pub fn fit_final(
    x: &[Vec<f64>],
    raw_features: &[String],
    y: &[f64],
    triple: &HyperTriple,
    opts: &FitOptions,
    seed: Option<u64>,
) -> Result<ElasticNetModel> {
    let exp = PolynomialExpansion::new(raw_features.len(), triple.degree)?;
    let expanded = exp.apply_rows(x)?;
    let scaler = Standardizer::fit(&expanded)?;
    let fit = elastic_net_fit(
        &scaler.transform(&expanded),
        y,
        triple.alpha,
        triple.l1_ratio,
        opts,
    )?;
    Ok(ElasticNetModel {
        degree: triple.degree,
        alpha: triple.alpha,
        l1_ratio: triple.l1_ratio,
        raw_features: raw_features.to_vec(),
        feature_names: exp.names(raw_features)?,
        means: scaler.means,
        stds: scaler.stds,
        coef: fit.coef,
        intercept: fit.intercept,
        seed,
        convergence: ConvergenceInfo {
            n_iter: fit.n_iter,
            converged: fit.converged,
            max_update: fit.max_update,
            kkt_residual: fit.kkt_residual,
        },
    })
}

/// Features with `|coefficient| > threshold`, largest magnitude first.
pub fn nonzero_features(model: &ElasticNetModel, threshold: f64) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = model
        .feature_names
        .iter()
        .zip(&model.coef)
        .filter(|(_, c)| c.abs() > threshold)
        .map(|(n, c)| (n.clone(), *c))
        .collect();
    out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Model inputs and target drawn from a score matrix and a RewardBench table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub models: Vec<String>,
    pub features: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl TrainingSet {
    /// Rows are the matrix models that also appear in `rb`, in matrix order.
    /// `features` defaults to every matrix column.
    pub fn from_tables(
        matrix: &ScoreMatrix,
        rb: &RewardBenchTable,
        category: Category,
        features: Option<&[String]>,
    ) -> Result<TrainingSet> {
        let features: Vec<String> = features
            .map(<[String]>::to_vec)
            .unwrap_or_else(|| matrix.columns().to_vec());
        let cols = features
            .iter()
            .map(|n| {
                matrix
                    .column_index(n)
                    .ok_or_else(|| Error::MissingFeature(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut models = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, id) in matrix.rows().iter().enumerate() {
            if let Some(s) = rb.get(id) {
                models.push(id.clone());
                x.push(cols.iter().map(|&c| matrix.value(i, c)).collect());
                y.push(s.get(category));
            }
        }
        if models.is_empty() {
            return Err(Error::KeySetMismatch(
                "no model appears in both the score matrix and the RewardBench table".into(),
            ));
        }
        Ok(TrainingSet {
            models,
            features,
            x,
            y,
        })
    }
}

/// Treats the model's predictions as a pseudo-benchmark and measures its
/// coverage of the RewardBench ranking for `category`.
pub fn predicted_coverage(
    model: &ElasticNetModel,
    matrix: &ScoreMatrix,
    rb: &RewardBenchTable,
    category: Category,
    k_range: RangeInclusive<usize>,
) -> Result<CoverageCurve> {
    let preds = model.predict_matrix(matrix)?;
    let mut bench = Scores::new();
    let mut target = Scores::new();
    for (id, p) in matrix.rows().iter().zip(preds) {
        if let Some(s) = rb.get(id) {
            bench.insert(id.clone(), p);
            target.insert(id.clone(), s.get(category));
        }
    }
    coverage_curve("predicted", &bench, &target, k_range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationComparison {
    pub base: CvResult,
    pub augmented: CvResult,
    /// `augmented.best_mae - base.best_mae`; negative means the extra features help.
    pub mae_delta: f64,
}

/// Cross-validates with and without extra per-row features (same folds and seed).
pub fn augmented_fit(
    x: &[Vec<f64>],
    y: &[f64],
    extra: &[Vec<f64>],
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<AugmentationComparison> {
    if extra.len() != x.len() {
        return Err(Error::invalid(format!(
            "presence features cover {} of {} rows",
            extra.len(),
            x.len()
        )));
    }
    let width = extra.first().map_or(0, Vec::len);
    if width == 0 || extra.iter().any(|r| r.len() != width) {
        return Err(Error::invalid("presence feature rows must be non-empty and equal length"));
    }
    let joined: Vec<Vec<f64>> = x
        .iter()
        .zip(extra)
        .map(|(a, b)| a.iter().chain(b).copied().collect())
        .collect();
    let base = cross_validate(x, y, grid, folds, seed, opts)?;
    let augmented = cross_validate(&joined, y, grid, folds, seed, opts)?;
    Ok(AugmentationComparison {
        mae_delta: augmented.best_mae - base.best_mae,
        base,
        augmented,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::top_k;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn sparse_problem(seed: u64, n: usize, p: usize, noise: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| 3.0 * r[2] - 2.0 * r[5] + 1.5 * r[11] + 50.0 + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (x, y)
    }

    #[test]
    fn predicts_training_rows_of_noiseless_data() {
        let (x, y) = sparse_problem(1, 30, 12, 0.0);
        let t = HyperTriple {
            degree: 1,
            alpha: 0.0,
            l1_ratio: 1.0,
        };
        let opts = FitOptions {
            tol: 1e-12,
            max_iter: 100_000,
            trace: false,
        };
        let m = fit_final(&x, &names(12), &y, &t, &opts, Some(7)).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict_row(r).unwrap() - t).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_model_predicts_mean() {
        let (x, y) = sparse_problem(2, 30, 12, 0.5);
        let t = HyperTriple {
            degree: 2,
            alpha: 1e6,
            l1_ratio: 1.0,
        };
        let m = fit_final(&x, &names(12), &y, &t, &FitOptions::default(), None).unwrap();
        assert!(nonzero_features(&m, 1e-8).is_empty());
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.predict_row(&x[3]).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn planted_support_recovered() {
        let (x, y) = sparse_problem(3, 200, 20, 0.0);
        let t = HyperTriple {
            degree: 1,
            alpha: 1e-3,
            l1_ratio: 1.0,
        };
        let m = fit_final(&x, &names(20), &y, &t, &FitOptions::default(), None).unwrap();
        let mut support: Vec<String> = nonzero_features(&m, 1e-8).into_iter().map(|f| f.0).collect();
        support.sort();
        assert_eq!(support, vec!["f11", "f2", "f5"]);
        // sorted by magnitude
        assert_eq!(nonzero_features(&m, 1e-8)[0].0, "f2");
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let (x, y) = sparse_problem(4, 40, 12, 0.3);
        let t = HyperTriple {
            degree: 2,
            alpha: 0.01,
            l1_ratio: 0.5,
        };
        let m = fit_final(&x, &names(12), &y, &t, &FitOptions::default(), Some(1)).unwrap();
        let back = ElasticNetModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        for r in &x {
            assert_eq!(
                m.predict_row(r).unwrap().to_bits(),
                back.predict_row(r).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn named_prediction_errors() {
        let (x, y) = sparse_problem(5, 30, 12, 0.1);
        let t = HyperTriple {
            degree: 1,
            alpha: 0.01,
            l1_ratio: 0.5,
        };
        let m = fit_final(&x, &names(12), &y, &t, &FitOptions::default(), None).unwrap();
        let mut q: BTreeMap<String, f64> = names(12).into_iter().zip(x[0].clone()).collect();
        assert_eq!(m.predict(&q).unwrap(), m.predict_row(&x[0]).unwrap());
        q.insert("bogus".into(), 1.0);
        assert!(matches!(m.predict(&q), Err(Error::UnknownFeature(f)) if f == "bogus"));
        q.remove("bogus");
        q.remove("f3");
        assert!(matches!(m.predict(&q), Err(Error::MissingFeature(f)) if f == "f3"));
    }

    #[test]
    fn degree_one_unpenalized_matches_least_squares() {
        use nalgebra::{DMatrix, DVector};
        let (x, y) = sparse_problem(6, 25, 12, 1.0);
        let t = HyperTriple {
            degree: 1,
            alpha: 0.0,
            l1_ratio: 0.5,
        };
        let opts = FitOptions {
            tol: 1e-13,
            max_iter: 1_000_000,
            trace: false,
        };
        let m = fit_final(&x, &names(12), &y, &t, &opts, None).unwrap();
        let a = DMatrix::from_fn(25, 13, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let b = DVector::from_column_slice(&y);
        let beta = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &b));
        let fitted = &a * beta;
        for (i, r) in x.iter().enumerate() {
            assert!((m.predict_row(r).unwrap() - fitted[i]).abs() < 1e-8);
        }
    }

    fn fixture_like(n: usize, seed: u64) -> (ScoreMatrix, RewardBenchTable, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<String> = (0..n).map(|i| format!("m{i:02}")).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..100.0)).collect())
            .collect();
        let target: Vec<f64> = x.iter().map(|r| 0.5 * r[0] + 0.2 * r[1] + 10.0).collect();
        let rb = ids
            .iter()
            .zip(&target)
            .map(|(id, &t)| {
                (
                    id.clone(),
                    crate::RewardBenchScores {
                        chat: t,
                        chat_hard: t,
                        safety: t,
                        reasoning: t,
                        overall: t,
                    },
                )
            })
            .collect();
        let m = ScoreMatrix::new(ids, names(3), x).unwrap();
        (m, rb, target)
    }

    #[test]
    fn perfect_predictor_has_full_coverage() {
        let (matrix, rb, _) = fixture_like(20, 9);
        let set = TrainingSet::from_tables(&matrix, &rb, Category::Overall, None).unwrap();
        let t = HyperTriple {
            degree: 1,
            alpha: 0.0,
            l1_ratio: 1.0,
        };
        let opts = FitOptions {
            tol: 1e-12,
            max_iter: 100_000,
            trace: false,
        };
        let m = fit_final(&set.x, &set.features, &set.y, &t, &opts, None).unwrap();
        let c = predicted_coverage(&m, &matrix, &rb, Category::Overall, 1..=20).unwrap();
        assert!(c.points.iter().all(|p| p.coverage == 1.0));
    }

    #[test]
    fn constant_predictor_coverage_is_lexicographic_baseline() {
        let (matrix, rb, target) = fixture_like(15, 10);
        let set = TrainingSet::from_tables(&matrix, &rb, Category::Overall, None).unwrap();
        let t = HyperTriple {
            degree: 1,
            alpha: 1e9,
            l1_ratio: 1.0,
        };
        let m = fit_final(&set.x, &set.features, &set.y, &t, &FitOptions::default(), None).unwrap();
        let c = predicted_coverage(&m, &matrix, &rb, Category::Overall, 1..=15).unwrap();
        let target: Scores = matrix.rows().iter().cloned().zip(target).collect();
        for p in &c.points {
            // all predictions tie, so the top-k is the first k ids
            let lex: Vec<String> = matrix.rows()[..p.k].to_vec();
            let tk = top_k(&target, p.k).unwrap();
            let expected = lex.iter().filter(|id| tk.contains(id)).count() as f64 / p.k as f64;
            assert_eq!(p.coverage, expected);
        }
    }

    #[test]
    fn augmentation_with_leaked_target() {
        let (x, y) = sparse_problem(12, 40, 12, 2.0);
        let grid = HyperGrid {
            degrees: vec![1],
            ..Default::default()
        };
        let leak: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
        let cmp = augmented_fit(&x, &y, &leak, &grid, 10, 4, &FitOptions::default()).unwrap();
        assert!(cmp.augmented.best_mae < 1e-2, "{}", cmp.augmented.best_mae);
        assert!(cmp.mae_delta < 0.0);
        assert!(augmented_fit(&x, &y, &leak[..5], &grid, 10, 4, &FitOptions::default()).is_err());
    }

    #[test]
    fn augmentation_with_noise_features() {
        let (x, y) = sparse_problem(13, 40, 12, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noise: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..5).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let grid = HyperGrid {
            degrees: vec![1],
            ..Default::default()
        };
        let cmp = augmented_fit(&x, &y, &noise, &grid, 10, 4, &FitOptions::default()).unwrap();
        // noiseless base data is already fit almost exactly
        assert!(cmp.base.best_mae < 0.05, "{}", cmp.base.best_mae);
        assert!(cmp.mae_delta > -0.05, "{}", cmp.mae_delta);
        assert_eq!(cmp.base.seed, cmp.augmented.seed);
    }
}
