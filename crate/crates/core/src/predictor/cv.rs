use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::enet::{elastic_net_fit, FitOptions};
use super::poly::PolynomialExpansion;
use super::scale::Standardizer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub degrees: Vec<usize>,
    pub alphas: Vec<f64>,
    pub l1_ratios: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            degrees: vec![1, 2, 3],
            alphas: vec![0.1, 0.01, 0.001, 0.0001],
            l1_ratios: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperTriple {
    pub degree: usize,
    pub alpha: f64,
    pub l1_ratio: f64,
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() || self.alphas.is_empty() || self.l1_ratios.is_empty() {
            return Err(Error::invalid("hyperparameter grid has an empty axis"));
        }
        if self.degrees.iter().any(|&d| d < 1) {
            return Err(Error::invalid("degrees must be at least 1"));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("alphas must be positive"));
        }
        if self.l1_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid("l1 ratios must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Degree-major enumeration, then alpha, then l1 ratio, in listed order.
    pub fn triples(&self) -> Vec<HyperTriple> {
        let mut out = Vec::new();
        for &degree in &self.degrees {
            for &alpha in &self.alphas {
                for &l1_ratio in &self.l1_ratios {
                    out.push(HyperTriple {
                        degree,
                        alpha,
                        l1_ratio,
                    });
                }
            }
        }
        out
    }
}

/// Seeded shuffle of `0..n` cut into `folds` contiguous blocks whose sizes
/// differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if folds > n {
        return Err(Error::invalid(format!("{folds} folds exceed {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub triple: HyperTriple,
    pub mean_mae: f64,
    pub fold_mae: Vec<f64>,
    pub fold_converged: Vec<bool>,
    pub fold_kkt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: usize,
    pub seed: u64,
    /// In [`HyperGrid::triples`] order.
    pub entries: Vec<CvEntry>,
    pub best: HyperTriple,
    pub best_mae: f64,
}

/// Strict "better than" for CV entries: lower MAE, then smaller degree,
/// larger alpha, larger l1 ratio.
fn better(a: &CvEntry, b: &CvEntry) -> bool {
    a.mean_mae
        .total_cmp(&b.mean_mae)
        .then(a.triple.degree.cmp(&b.triple.degree))
        .then(b.triple.alpha.total_cmp(&a.triple.alpha))
        .then(b.triple.l1_ratio.total_cmp(&a.triple.l1_ratio))
        .is_lt()
}

struct FoldOutcome {
    mae: f64,
    converged: bool,
    kkt: f64,
}

fn run_fold(
    expanded: &[Vec<f64>],
    y: &[f64],
    test: &[usize],
    triple: &HyperTriple,
    opts: &FitOptions,
) -> Result<FoldOutcome> {
    let mut is_test = vec![false; y.len()];
    for &i in test {
        is_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..y.len()).filter(|&i| !is_test[i]).collect();
    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| expanded[i].clone()).collect();
    let train_y: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
    let scaler = Standardizer::fit(&train_x)?;
    let fit = elastic_net_fit(
        &scaler.transform(&train_x),
        &train_y,
        triple.alpha,
        triple.l1_ratio,
        opts,
    )?;
    let mae = test
        .iter()
        .map(|&i| {
            let z = scaler.transform_row(&expanded[i]);
            let pred = fit.intercept + z.iter().zip(&fit.coef).map(|(a, b)| a * b).sum::<f64>();
            (pred - y[i]).abs()
        })
        .sum::<f64>()
        / test.len() as f64;
    Ok(FoldOutcome {
        mae,
        converged: fit.converged,
        kkt: fit.kkt_residual,
    })
}

/// Evaluates every grid triple with k-fold CV. Features are expanded per
/// degree and standardized with training-split statistics only; the score
/// is mean absolute error on the held-out fold, averaged over folds.
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<CvResult> {
    grid.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let parts = fold_assignment(y.len(), folds, seed)?;
    let n_inputs = x.first().map_or(0, Vec::len);

    let mut expanded = Vec::with_capacity(grid.degrees.len());
    for &d in &grid.degrees {
        expanded.push((d, PolynomialExpansion::new(n_inputs, d)?.apply_rows(x)?));
    }
    let triples = grid.triples();
    let jobs: Vec<(usize, usize)> = (0..triples.len())
        .flat_map(|t| (0..folds).map(move |f| (t, f)))
        .collect();
    let outcomes: Vec<FoldOutcome> = jobs
        .par_iter()
        .map(|&(t, f)| {
            let triple = &triples[t];
            let rows = &expanded
                .iter()
                .find(|(d, _)| *d == triple.degree)
                .expect("degree expanded above")
                .1;
            run_fold(rows, y, &parts[f], triple, opts)
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(triples.len());
    for (t, chunk) in outcomes.chunks(folds).enumerate() {
        let fold_mae: Vec<f64> = chunk.iter().map(|o| o.mae).collect();
        entries.push(CvEntry {
            triple: triples[t],
            mean_mae: fold_mae.iter().sum::<f64>() / folds as f64,
            fold_mae,
            fold_converged: chunk.iter().map(|o| o.converged).collect(),
            fold_kkt: chunk.iter().map(|o| o.kkt).collect(),
        });
    }
    let best = entries
        .iter()
        .fold(None::<&CvEntry>, |acc, e| match acc {
            Some(b) if !better(e, b) => Some(b),
            _ => Some(e),
        })
        .expect("grid is non-empty");
    Ok(CvResult {
        folds,
        seed,
        best: best.triple,
        best_mae: best.mean_mae,
        entries,
    })
}
