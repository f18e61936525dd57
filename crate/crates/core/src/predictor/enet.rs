//! Elastic-Net by cyclic coordinate descent.
//!
//! Minimizes
//!
//! ```text
//! 1/(2n) * ||y - Xw - b||^2 + alpha * (l1_ratio * ||w||_1 + (1 - l1_ratio)/2 * ||w||^2)
//! ```
//!
//! with an unpenalized intercept `b`, fit on column-centered data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Largest coordinate change tolerated at convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the objective after every sweep.
    #[serde(default)]
    pub trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-7,
            max_iter: 10_000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnetFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Largest coordinate change in the final sweep.
    pub max_update: f64,
    /// Largest violation of the subgradient optimality conditions.
    pub kkt_residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

/// Allowed subgradient residual at convergence, in units of `tol`.
const KKT_FACTOR: f64 = 10.0;

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Column-major, centered copy of the design.
struct Centered {
    cols: Vec<Vec<f64>>,
    x_means: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

fn center(x: &[Vec<f64>], y: &[f64]) -> Result<Centered> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::invalid("elastic net needs at least 2 rows"));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::invalid("ragged design matrix"));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic net input".into()));
    }
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut cols = Vec::with_capacity(p);
    let mut x_means = Vec::with_capacity(p);
    for j in 0..p {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / nf;
        cols.push(x.iter().map(|r| r[j] - m).collect());
        x_means.push(m);
    }
    Ok(Centered {
        cols,
        x_means,
        y: y.iter().map(|v| v - y_mean).collect(),
        y_mean,
    })
}

fn check_penalty(alpha: f64, l1_ratio: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::invalid(format!("l1_ratio must lie in [0, 1], got {l1_ratio}")));
    }
    Ok(())
}

fn centered_objective(resid: &[f64], w: &[f64], alpha: f64, l1: f64) -> f64 {
    let n = resid.len() as f64;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let l1n: f64 = w.iter().map(|v| v.abs()).sum();
    let l2n: f64 = w.iter().map(|v| v * v).sum();
    rss / (2.0 * n) + alpha * (l1 * l1n + 0.5 * (1.0 - l1) * l2n)
}

fn centered_kkt(c: &Centered, resid: &[f64], w: &[f64], alpha: f64, l1: f64) -> f64 {
    let n = resid.len() as f64;
    let mut worst = 0.0f64;
    for (col, &wj) in c.cols.iter().zip(w) {
        let grad = -col.iter().zip(resid).map(|(a, b)| a * b).sum::<f64>() / n
            + alpha * (1.0 - l1) * wj;
        let v = if wj != 0.0 {
            (grad + alpha * l1 * wj.signum()).abs()
        } else {
            (grad.abs() - alpha * l1).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent with soft-thresholding.
///
/// A sweep whose largest coordinate change falls below `tol` ends the run
/// once the subgradient residual is also within `10 * tol`; otherwise
/// sweeping continues. Hitting `max_iter` is reported through `converged = false`.
pub fn elastic_net_fit(
    x: &[Vec<f64>],
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    opts: &FitOptions,
) -> Result<EnetFit> {
    check_penalty(alpha, l1_ratio)?;
    let c = center(x, y)?;
    let n = c.y.len() as f64;
    let p = c.cols.len();
    let sq: Vec<f64> = c.cols.iter().map(|col| col.iter().map(|v| v * v).sum()).collect();
    let l1_pen = n * alpha * l1_ratio;
    let l2_pen = n * alpha * (1.0 - l1_ratio);

    let mut w = vec![0.0; p];
    let mut resid = c.y.clone();
    let mut trace = Vec::new();
    let mut n_iter = 0;
    let mut max_update = 0.0;
    let mut kkt = f64::INFINITY;
    let mut converged = false;

    while n_iter < opts.max_iter {
        n_iter += 1;
        max_update = 0.0f64;
        for j in 0..p {
            if sq[j] == 0.0 {
                continue;
            }
            let col = &c.cols[j];
            let rho = col.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() + sq[j] * w[j];
            let new = soft_threshold(rho, l1_pen) / (sq[j] + l2_pen);
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= delta * a;
                }
                w[j] = new;
                max_update = max_update.max(delta.abs());
            }
        }
        if opts.trace {
            trace.push(centered_objective(&resid, &w, alpha, l1_ratio));
        }
        if !max_update.is_finite() {
            return Err(Error::NonFinite("coordinate descent diverged".into()));
        }
        if max_update < opts.tol {
            kkt = centered_kkt(&c, &resid, &w, alpha, l1_ratio);
            if kkt < KKT_FACTOR * opts.tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = centered_kkt(&c, &resid, &w, alpha, l1_ratio);
    }
    let intercept = c.y_mean - c.x_means.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>();
    Ok(EnetFit {
        coef: w,
        intercept,
        n_iter,
        converged,
        max_update,
        kkt_residual: kkt,
        objective_trace: trace,
    })
}

/// Objective value of `(coef, intercept)` on raw (uncentered) data.
pub fn objective(
    x: &[Vec<f64>],
    y: &[f64],
    coef: &[f64],
    intercept: f64,
    alpha: f64,
    l1_ratio: f64,
) -> f64 {
    let n = y.len() as f64;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, t)| {
            let pred = intercept + r.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
            (t - pred).powi(2)
        })
        .sum();
    let l1n: f64 = coef.iter().map(|v| v.abs()).sum();
    let l2n: f64 = coef.iter().map(|v| v * v).sum();
    rss / (2.0 * n) + alpha * (l1_ratio * l1n + 0.5 * (1.0 - l1_ratio) * l2n)
}

/// Largest subgradient-condition violation of `coef` (with the optimal
/// intercept for it) on raw data.
pub fn kkt_residual(x: &[Vec<f64>], y: &[f64], coef: &[f64], alpha: f64, l1_ratio: f64) -> Result<f64> {
    check_penalty(alpha, l1_ratio)?;
    let c = center(x, y)?;
    let resid: Vec<f64> = (0..c.y.len())
        .map(|i| c.y[i] - c.cols.iter().zip(coef).map(|(col, w)| col[i] * w).sum::<f64>())
        .collect();
    Ok(centered_kkt(&c, &resid, coef, alpha, l1_ratio))
}

/// Smallest alpha at which every coefficient is zero, for `l1_ratio > 0`:
/// `max_j |x_j . (y - mean y)| / (n * l1_ratio)` on centered columns.
pub fn alpha_max(x: &[Vec<f64>], y: &[f64], l1_ratio: f64) -> Result<f64> {
    if !(l1_ratio > 0.0 && l1_ratio <= 1.0) {
        return Err(Error::invalid("alpha_max needs l1_ratio in (0, 1]"));
    }
    let c = center(x, y)?;
    let n = c.y.len() as f64;
    Ok(c.cols
        .iter()
        .map(|col| col.iter().zip(&c.y).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
        / (n * l1_ratio))
}
