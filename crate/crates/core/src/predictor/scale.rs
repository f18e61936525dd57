use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column mean and sample standard deviation. A zero standard
/// deviation marks a constant column that was dropped: it maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid("standardizing needs at least 2 rows"));
        }
        let p = rows[0].len();
        let mut means = vec![0.0; p];
        for r in rows {
            if r.len() != p {
                return Err(Error::LengthMismatch {
                    left: p,
                    right: r.len(),
                });
            }
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut stds = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in stds.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut dropped = 0;
        for (s, m) in stds.iter_mut().zip(&means) {
            *s = (*s / (n - 1) as f64).sqrt();
            if !s.is_finite() {
                return Err(Error::NonFinite("feature column".into()));
            }
            if *s <= 1e-12 * m.abs().max(1.0) {
                *s = 0.0;
                dropped += 1;
            }
        }
        if p > 0 && dropped == p {
            return Err(Error::Degenerate("every feature column is constant".into()));
        }
        if dropped > 0 {
            log::warn!("dropping {dropped} constant feature column(s)");
        }
        Ok(Standardizer { means, stds })
    }

    pub fn is_active(&self, col: usize) -> bool {
        self.stds[col] > 0.0
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Zero-mean, unit-sample-variance columns; constant columns become zeros.
pub fn standardize(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Standardizer)> {
    let s = Standardizer::fit(rows)?;
    Ok((s.transform(rows), s))
}
