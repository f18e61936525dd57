//! Top-k coverage between a benchmark ranking and a target ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Scores = BTreeMap<String, f64>;

/// The `k` highest-scoring ids, best first. Equal scores are ordered by
/// ascending id, which makes the order total.
pub fn top_k(scores: &Scores, k: usize) -> Result<Vec<String>> {
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(format!(
            "k must lie in [1, {}], got {k}",
            scores.len()
        )));
    }
    let mut items: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(items.into_iter().take(k).map(|(id, _)| id.clone()).collect())
}

fn same_keys(a: &Scores, b: &Scores) -> Result<()> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let only_a: Vec<_> = a.keys().filter(|k| !b.contains_key(*k)).collect();
        let only_b: Vec<_> = b.keys().filter(|k| !a.contains_key(*k)).collect();
        return Err(Error::KeySetMismatch(format!(
            "only in benchmark: {only_a:?}; only in target: {only_b:?}"
        )));
    }
    Ok(())
}

/// Number of shared ids between the two top-k sets.
pub fn overlap_at_k(bench: &Scores, target: &Scores, k: usize) -> Result<usize> {
    same_keys(bench, target)?;
    let a: BTreeSet<String> = top_k(bench, k)?.into_iter().collect();
    let b = top_k(target, k)?;
    Ok(b.iter().filter(|id| a.contains(*id)).count())
}

/// `|top_k(bench) ∩ top_k(target)| / k`.
pub fn coverage_at_k(bench: &Scores, target: &Scores, k: usize) -> Result<f64> {
    Ok(overlap_at_k(bench, target, k)? as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub k: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub benchmark: String,
    pub points: Vec<CoveragePoint>,
}

impl CoverageCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.coverage)
    }
}

pub fn coverage_curve(
    name: &str,
    bench: &Scores,
    target: &Scores,
    k_range: RangeInclusive<usize>,
) -> Result<CoverageCurve> {
    same_keys(bench, target)?;
    if *k_range.start() == 0 || *k_range.end() > bench.len() || k_range.is_empty() {
        return Err(Error::invalid(format!(
            "k range {}..={} must lie within [1, {}]",
            k_range.start(),
            k_range.end(),
            bench.len()
        )));
    }
    let points = k_range
        .map(|k| {
            Ok(CoveragePoint {
                k,
                coverage: coverage_at_k(bench, target, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageCurve {
        benchmark: name.to_string(),
        points,
    })
}

/// Curves for many benchmarks at once, sorted by benchmark name.
pub fn coverage_curves(
    benches: &BTreeMap<String, Scores>,
    target: &Scores,
    k_range: RangeInclusive<usize>,
) -> Result<Vec<CoverageCurve>> {
    let items: Vec<(&String, &Scores)> = benches.iter().collect();
    items
        .par_iter()
        .map(|(name, scores)| coverage_curve(name, scores, target, k_range.clone()))
        .collect()
}

/// Default retention rule: at least 0.4 at k = 5 and 0.7 at k = 10.
pub fn default_thresholds() -> BTreeMap<usize, f64> {
    BTreeMap::from([(5, 0.4), (10, 0.7)])
}

/// Benchmarks whose curve meets every `k -> minimum coverage` threshold (inclusive).
pub fn filter_benchmarks(
    curves: &[CoverageCurve],
    thresholds: &BTreeMap<usize, f64>,
) -> Result<Vec<String>> {
    let mut kept = Vec::new();
    for c in curves {
        let mut keep = true;
        for (&k, &min) in thresholds {
            let v = c.at(k).ok_or_else(|| {
                Error::invalid(format!("curve `{}` has no value at k = {k}", c.benchmark))
            })?;
            keep &= v >= min;
        }
        if keep {
            kept.push(c.benchmark.clone());
        }
    }
    kept.sort();
    Ok(kept)
}
