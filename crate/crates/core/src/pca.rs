//! Principal components of the model-by-benchmark matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ScoreMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub features: Vec<String>,
    /// One unit-norm row per component, in descending variance order.
    pub loadings: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub means: Vec<f64>,
    /// Column scales; all ones when not standardizing.
    pub scales: Vec<f64>,
    pub standardized: bool,
}

impl PcaResult {
    pub fn n_components(&self) -> usize {
        self.explained_ratio.len()
    }

    /// Preprocessed data: centered, and scaled when standardizing.
    pub fn preprocess(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(self.means.iter().zip(&self.scales))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    /// Component scores of preprocessed rows.
    pub fn project(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.preprocess(rows)
            .iter()
            .map(|r| {
                self.loadings
                    .iter()
                    .map(|l| l.iter().zip(r).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }
}

pub fn pca_fit(matrix: &ScoreMatrix, standardize: bool) -> Result<PcaResult> {
    let rows: Vec<Vec<f64>> = (0..matrix.n_rows()).map(|i| matrix.row_values(i).to_vec()).collect();
    pca_fit_rows(&rows, matrix.columns(), standardize)
}

/// Centers (and with `standardize`, scales to unit sample variance) every
/// column, then takes the singular value decomposition. Components with
/// zero variance are kept so that loadings always span the feature space
/// when the sample count allows it.
pub fn pca_fit_rows(rows: &[Vec<f64>], features: &[String], standardize: bool) -> Result<PcaResult> {
    let n = rows.len();
    let p = features.len();
    if n < 2 || p == 0 {
        return Err(Error::Degenerate(format!(
            "PCA needs at least 2 rows and 1 column, got {n}x{p}"
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::LengthMismatch {
            left: p,
            right: r.len(),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let mut scales = vec![1.0; p];
    if standardize {
        for j in 0..p {
            let ss: f64 = x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd <= 1e-12 * means[j].abs().max(1.0) {
                return Err(Error::Degenerate(format!(
                    "column `{}` is constant and cannot be standardized",
                    features[j]
                )));
            }
            scales[j] = sd;
        }
    }
    let z = DMatrix::from_fn(n, p, |i, j| (x[(i, j)] - means[j]) / scales[j]);
    let svd = z.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NotConverged("singular value decomposition".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let variance: Vec<f64> = order
        .iter()
        .map(|&k| svd.singular_values[k].powi(2) / (n - 1) as f64)
        .collect();
    let total: f64 = variance.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("matrix has zero variance".into()));
    }
    let loadings: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| sign_normalized(v_t.row(k).iter().copied().collect()))
        .collect();
    Ok(PcaResult {
        features: features.to_vec(),
        loadings,
        explained_ratio: variance.iter().map(|v| v / total).collect(),
        explained_variance: variance,
        means,
        scales,
        standardized: standardize,
    })
}

/// Flips a loading vector so that its largest-magnitude entry is positive.
/// The first of several equal-magnitude entries decides.
pub fn sign_normalized(mut v: Vec<f64>) -> Vec<f64> {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v.get(pivot).is_some_and(|x| *x < 0.0) {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

pub fn explained_topk(result: &PcaResult, k: usize) -> Result<f64> {
    if k == 0 || k > result.n_components() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}, got {k}",
            result.n_components()
        )));
    }
    Ok(result.explained_ratio[..k].iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLoadings {
    pub component: usize,
    pub explained_ratio: f64,
    pub weights: Vec<(String, f64)>,
}

/// Per-component named weights, components numbered from 1.
pub fn loadings_report(result: &PcaResult) -> Vec<ComponentLoadings> {
    result
        .loadings
        .iter()
        .zip(&result.explained_ratio)
        .enumerate()
        .map(|(i, (l, r))| ComponentLoadings {
            component: i + 1,
            explained_ratio: *r,
            weights: result.features.iter().cloned().zip(l.iter().copied()).collect(),
        })
        .collect()
}
