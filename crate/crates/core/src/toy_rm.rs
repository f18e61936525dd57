//! Linear reward heads over fixed feature vectors.
//!
//! A [`LinearRewardHead`] maps a feature vector to a scalar reward and is
//! trained with the Bradley-Terry negative log-likelihood on preference
//! pairs. An [`AttributeHead`] maps features to `n` attribute scores and is
//! trained by mean squared error. Both train with mini-batch Adam (or plain
//! SGD), a linear warm-up and checkpoint selection on a validation set.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{csv_reader, line_of, open};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRewardHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearRewardHead {
    pub fn zeros(d: usize) -> Self {
        LinearRewardHead {
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn reward(&self, f: &[f64]) -> Result<f64> {
        check_dim(self.dim(), f.len())?;
        Ok(dot(&self.weights, f) + self.bias)
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    fn from_flat(v: &[f64]) -> Self {
        let (w, b) = v.split_at(v.len() - 1);
        LinearRewardHead {
            weights: w.to_vec(),
            bias: b[0],
        }
    }
}

/// Projection `W` of shape `d x n`: scores are `f^T W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeHead {
    pub w: Vec<Vec<f64>>,
}

impl AttributeHead {
    pub fn zeros(d: usize, n: usize) -> Self {
        AttributeHead {
            w: vec![vec![0.0; n]; d],
        }
    }

    pub fn new(w: Vec<Vec<f64>>) -> Result<Self> {
        let n = w.first().map_or(0, |r| r.len());
        if w.is_empty() || n == 0 {
            return Err(Error::invalid("attribute head needs d >= 1 and n >= 1"));
        }
        if w.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("ragged attribute projection"));
        }
        if w.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attribute projection".into()));
        }
        Ok(AttributeHead { w })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.w.first().map_or(0, |r| r.len())
    }

    fn to_flat(&self) -> Vec<f64> {
        self.w.iter().flatten().copied().collect()
    }

    fn from_flat(v: &[f64], n: usize) -> Self {
        AttributeHead {
            w: v.chunks(n).map(|c| c.to_vec()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub winner: Vec<f64>,
    pub loser: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch {
            left: expected,
            right: found,
        });
    }
    Ok(())
}

/// Logistic function, evaluated so that `sigmoid(z) + sigmoid(-z) == 1`
/// holds exactly.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        1.0 - 1.0 / (1.0 + z.exp())
    }
}

/// `-ln sigmoid(z)` without overflow.
pub fn neg_log_sigmoid(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Probability that `f1` is preferred over `f2`: `sigmoid(r1 - r2)`.
pub fn bt_probability(head: &LinearRewardHead, f1: &[f64], f2: &[f64]) -> Result<f64> {
    let r1 = head.reward(f1)?;
    let r2 = head.reward(f2)?;
    Ok(sigmoid(r1 - r2))
}

fn check_batch(head: &LinearRewardHead, batch: &[FeaturePair]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    for p in batch {
        check_dim(head.dim(), p.winner.len())?;
        check_dim(head.dim(), p.loser.len())?;
    }
    Ok(())
}

fn pair_margin(head: &LinearRewardHead, p: &FeaturePair) -> f64 {
    (dot(&head.weights, &p.winner) + head.bias) - (dot(&head.weights, &p.loser) + head.bias)
}

/// Mean of `-ln sigmoid(r_w - r_l)` over the batch.
pub fn bt_loss(head: &LinearRewardHead, batch: &[FeaturePair]) -> Result<f64> {
    check_batch(head, batch)?;
    let s: f64 = batch.iter().map(|p| neg_log_sigmoid(pair_margin(head, p))).sum();
    Ok(s / batch.len() as f64)
}

/// Gradient of [`bt_loss`], in parameter shape. The bias cancels in every
/// margin, so its component is always zero.
pub fn bt_gradient(head: &LinearRewardHead, batch: &[FeaturePair]) -> Result<LinearRewardHead> {
    check_batch(head, batch)?;
    let mut g = LinearRewardHead::zeros(head.dim());
    let n = batch.len() as f64;
    for p in batch {
        let c = -sigmoid(-pair_margin(head, p)) / n;
        for ((gj, w), l) in g.weights.iter_mut().zip(&p.winner).zip(&p.loser) {
            *gj += c * (w - l);
        }
    }
    Ok(g)
}

/// Share of pairs whose winner gets the strictly higher reward.
pub fn pairwise_accuracy(head: &LinearRewardHead, pairs: &[FeaturePair]) -> Result<f64> {
    check_batch(head, pairs)?;
    let ok = pairs.iter().filter(|p| pair_margin(head, p) > 0.0).count();
    Ok(ok as f64 / pairs.len() as f64)
}

pub fn attribute_scores(head: &AttributeHead, f: &[f64]) -> Result<Vec<f64>> {
    check_dim(head.dim(), f.len())?;
    let mut out = vec![0.0; head.n_attributes()];
    for (row, x) in head.w.iter().zip(f) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += x * w;
        }
    }
    Ok(out)
}

fn check_regression(head: &AttributeHead, features: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    check_dim(features.len(), targets.len())?;
    for (f, t) in features.iter().zip(targets) {
        check_dim(head.dim(), f.len())?;
        check_dim(head.n_attributes(), t.len())?;
    }
    Ok(())
}

/// Mean squared error over samples and attributes.
pub fn reg_loss(head: &AttributeHead, features: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    check_regression(head, features, targets)?;
    let mut s = 0.0;
    for (f, t) in features.iter().zip(targets) {
        let pred = attribute_scores(head, f)?;
        s += pred.iter().zip(t).map(|(p, y)| (p - y) * (p - y)).sum::<f64>();
    }
    Ok(s / (features.len() * head.n_attributes()) as f64)
}

pub fn reg_gradient(
    head: &AttributeHead,
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<AttributeHead> {
    check_regression(head, features, targets)?;
    let n = head.n_attributes();
    let scale = 2.0 / (features.len() * n) as f64;
    let mut g = AttributeHead::zeros(head.dim(), n);
    for (f, t) in features.iter().zip(targets) {
        let pred = attribute_scores(head, f)?;
        let resid: Vec<f64> = pred.iter().zip(t).map(|(p, y)| scale * (p - y)).collect();
        for (grow, x) in g.w.iter_mut().zip(f) {
            for (gk, r) in grow.iter_mut().zip(&resid) {
                *gk += x * r;
            }
        }
    }
    Ok(g)
}

/// Independent Gaussian features: `mean[j] + std[j] * N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureSpec {
    pub fn standard(d: usize) -> Self {
        FeatureSpec {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.mean.len(), self.std.len())?;
        if self.mean.is_empty() {
            return Err(Error::invalid("feature spec has no dimensions"));
        }
        if self.mean.iter().chain(&self.std).any(|v| !v.is_finite()) || self.std.iter().any(|s| *s < 0.0) {
            return Err(Error::invalid("feature spec needs finite means and non-negative stds"));
        }
        if self.std.iter().all(|s| *s == 0.0) {
            return Err(Error::Degenerate("every feature dimension has zero variance".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Labeled pairs. `first_won[i]` records whether the first sampled member
/// of pair `i` won the Bernoulli draw; `pairs[i]` is already oriented.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceData {
    pub pairs: Vec<FeaturePair>,
    pub first_won: Vec<bool>,
}

/// Samples two feature vectors per pair and labels the winner with a draw
/// from the Bradley-Terry probability under `latent`.
pub fn synth_preferences(
    latent: &LinearRewardHead,
    n_pairs: usize,
    seed: u64,
    spec: &FeatureSpec,
) -> Result<PreferenceData> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    spec.validate()?;
    check_dim(latent.dim(), spec.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut first_won = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let a = spec.sample(&mut rng);
        let b = spec.sample(&mut rng);
        let p = bt_probability(latent, &a, &b)?;
        let won = rng.random::<f64>() < p;
        first_won.push(won);
        pairs.push(if won {
            FeaturePair { winner: a, loser: b }
        } else {
            FeaturePair { winner: b, loser: a }
        });
    }
    Ok(PreferenceData { pairs, first_won })
}

/// Pairs whose latent reward gap is at least `margin`, winner always the
/// higher-reward member. Candidates below the margin are redrawn.
pub fn synth_separable(
    latent: &LinearRewardHead,
    n_pairs: usize,
    margin: f64,
    seed: u64,
    spec: &FeatureSpec,
) -> Result<Vec<FeaturePair>> {
    spec.validate()?;
    check_dim(latent.dim(), spec.dim())?;
    if !(margin >= 0.0) {
        return Err(Error::invalid("margin must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pairs);
    let budget = 1000 * n_pairs.max(1);
    for _ in 0..budget {
        if out.len() == n_pairs {
            break;
        }
        let a = spec.sample(&mut rng);
        let b = spec.sample(&mut rng);
        let gap = latent.reward(&a)? - latent.reward(&b)?;
        if gap.abs() < margin || gap == 0.0 {
            continue;
        }
        out.push(if gap > 0.0 {
            FeaturePair { winner: a, loser: b }
        } else {
            FeaturePair { winner: b, loser: a }
        });
    }
    if out.len() < n_pairs {
        return Err(Error::Degenerate(format!(
            "could not draw {n_pairs} pairs with reward gap >= {margin}"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled from the gradient, applied as `theta -= lr * wd * theta`.
    pub weight_decay: f64,
    /// Steps of linear learning-rate ramp before the constant phase.
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Checkpoint cadence in optimizer steps; the last step is always evaluated.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            warmup_steps: 20,
            batch_size: 64,
            epochs: 50,
            eval_every: 20,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::invalid("batch_size and eval_every must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("moment decays must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        Ok(())
    }
}

struct Stepper<'a> {
    cfg: &'a OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a OptimizerConfig, p: usize) -> Self {
        Stepper {
            cfg,
            m: vec![0.0; p],
            v: vec![0.0; p],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        let cfg = self.cfg;
        self.t += 1;
        let lr = if self.t <= cfg.warmup_steps {
            cfg.learning_rate * self.t as f64 / cfg.warmup_steps as f64
        } else {
            cfg.learning_rate
        };
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            theta[i] -= lr * cfg.weight_decay * theta[i];
            match cfg.optimizer {
                Optimizer::Sgd => theta[i] -= lr * grad[i],
                Optimizer::Adam => {
                    self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
                    self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                    let mh = self.m[i] / bc1;
                    let vh = self.v[i] / bc2;
                    theta[i] -= lr * mh / (vh.sqrt() + cfg.eps);
                }
            }
        }
    }
}

/// Parameters and diagnostics of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome<H> {
    /// Checkpoint with the best validation score.
    pub head: H,
    /// Full training loss after each epoch.
    pub loss_trace: Vec<f64>,
    pub best_step: usize,
    /// Validation accuracy for Bradley-Terry heads, validation MSE for attribute heads.
    pub best_score: f64,
    pub steps: usize,
}

// (best parameters, loss trace, best step, best score, total steps)
type RunSummary = (Vec<f64>, Vec<f64>, usize, f64, usize);

// Shared mini-batch loop. `grad` fills the gradient for a batch of indices,
// `score` rates a checkpoint (higher is better), `loss` is the full training loss.
fn run_training<G, S, L>(
    n: usize,
    theta: &mut [f64],
    cfg: &OptimizerConfig,
    mut grad: G,
    mut score: S,
    mut loss: L,
) -> Result<RunSummary>
where
    G: FnMut(&[f64], &[usize]) -> Result<Vec<f64>>,
    S: FnMut(&[f64]) -> Result<f64>,
    L: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stepper = Stepper::new(cfg, theta.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = (theta.to_vec(), 0usize, score(theta)?);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let g = grad(theta, batch)?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { batch: step });
            }
            stepper.step(theta, &g);
            step += 1;
            if step % cfg.eval_every == 0 {
                let s = score(theta)?;
                if s > best.2 {
                    best = (theta.to_vec(), step, s);
                }
            }
        }
        let l = loss(theta)?;
        if !l.is_finite() {
            return Err(Error::NonFinite("training loss".into()));
        }
        trace.push(l);
    }
    if step % cfg.eval_every != 0 {
        let s = score(theta)?;
        if s > best.2 {
            best = (theta.to_vec(), step, s);
        }
    }
    Ok((best.0, trace, best.1, best.2, step))
}

/// Trains a Bradley-Terry head from zero initialization. Checkpoints are
/// scored by pairwise accuracy on `valid` (or on `train` when absent).
pub fn train_bt(
    train: &[FeaturePair],
    valid: Option<&[FeaturePair]>,
    cfg: &OptimizerConfig,
) -> Result<TrainOutcome<LinearRewardHead>> {
    let d = train.first().map_or(0, |p| p.winner.len());
    if d == 0 {
        return Err(Error::invalid("training needs non-empty pairs with d >= 1"));
    }
    let zero = LinearRewardHead::zeros(d);
    check_batch(&zero, train)?;
    if let Some(v) = valid {
        check_batch(&zero, v)?;
    }
    let eval = valid.unwrap_or(train);
    let mut theta = zero.to_flat();
    let mut batch = Vec::new();
    let (best, trace, best_step, best_score, steps) = run_training(
        train.len(),
        &mut theta,
        cfg,
        |th, idx| {
            batch.clear();
            batch.extend(idx.iter().map(|&i| train[i].clone()));
            Ok(bt_gradient(&LinearRewardHead::from_flat(th), &batch)?.to_flat())
        },
        |th| pairwise_accuracy(&LinearRewardHead::from_flat(th), eval),
        |th| bt_loss(&LinearRewardHead::from_flat(th), train),
    )?;
    Ok(TrainOutcome {
        head: LinearRewardHead::from_flat(&best),
        loss_trace: trace,
        best_step,
        best_score,
        steps,
    })
}

/// Trains an attribute head from zero initialization. Checkpoints are
/// scored by MSE on `valid` (or on the training data when absent).
pub fn train_reg(
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    valid: Option<RegressionView<'_>>,
    cfg: &OptimizerConfig,
) -> Result<TrainOutcome<AttributeHead>> {
    let d = features.first().map_or(0, |f| f.len());
    let n = targets.first().map_or(0, |t| t.len());
    if d == 0 || n == 0 {
        return Err(Error::invalid("training needs d >= 1 features and n >= 1 targets"));
    }
    let zero = AttributeHead::zeros(d, n);
    check_regression(&zero, features, targets)?;
    if let Some((vf, vt)) = valid {
        check_regression(&zero, vf, vt)?;
    }
    let (ef, et) = valid.unwrap_or((features, targets));
    let mut theta = zero.to_flat();
    let (mut bf, mut bt) = (Vec::new(), Vec::new());
    let (best, trace, best_step, best_score, steps) = run_training(
        features.len(),
        &mut theta,
        cfg,
        |th, idx| {
            bf.clear();
            bt.clear();
            bf.extend(idx.iter().map(|&i| features[i].clone()));
            bt.extend(idx.iter().map(|&i| targets[i].clone()));
            Ok(reg_gradient(&AttributeHead::from_flat(th, n), &bf, &bt)?.to_flat())
        },
        |th| Ok(-reg_loss(&AttributeHead::from_flat(th, n), ef, et)?),
        |th| reg_loss(&AttributeHead::from_flat(th, n), features, targets),
    )?;
    Ok(TrainOutcome {
        head: AttributeHead::from_flat(&best, n),
        loss_trace: trace,
        best_step,
        best_score: -best_score,
        steps,
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

fn parse_row(rec: &csv::StringRecord, source: &Path) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::MalformedRow {
                path: source.to_path_buf(),
                line: line_of(rec),
                reason: format!("`{s}` is not a finite number"),
            })
        })
        .collect()
}

fn count_prefixed(headers: &csv::StringRecord, prefix: &str) -> usize {
    headers.iter().filter(|h| h.starts_with(prefix)).count()
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<FeaturePair>> {
    let path = path.as_ref();
    read_pairs(open(path)?, path)
}

/// Pairs CSV: `d` winner columns `w_*` followed by `d` loser columns `l_*`.
pub fn read_pairs<R: Read>(rdr: R, source: &Path) -> Result<Vec<FeaturePair>> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers()?.clone();
    let d = count_prefixed(&headers, "w_");
    if d == 0 || count_prefixed(&headers, "l_") != d || headers.len() != 2 * d {
        return Err(Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: "expected d `w_*` columns followed by d `l_*` columns".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 * d {
            return Err(Error::RaggedRow {
                line: line_of(&rec),
                expected: 2 * d,
                found: rec.len(),
            });
        }
        let mut v = parse_row(&rec, source)?;
        let loser = v.split_off(d);
        out.push(FeaturePair { winner: v, loser });
    }
    if out.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    Ok(out)
}

pub fn write_pairs<W: Write>(pairs: &[FeaturePair], w: W) -> Result<()> {
    let d = pairs.first().map_or(0, |p| p.winner.len());
    let mut wtr = csv::Writer::from_writer(w);
    let header: Vec<String> = (0..d)
        .map(|j| format!("w_{j}"))
        .chain((0..d).map(|j| format!("l_{j}")))
        .collect();
    wtr.write_record(&header)?;
    for p in pairs {
        wtr.write_record(p.winner.iter().chain(&p.loser).map(|v| v.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Regression samples: features and attribute targets.
pub type RegressionData = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Borrowed `(features, targets)`.
pub type RegressionView<'a> = (&'a [Vec<f64>], &'a [Vec<f64>]);

pub fn load_regression(path: impl AsRef<Path>) -> Result<RegressionData> {
    let path = path.as_ref();
    read_regression(open(path)?, path)
}

/// Regression CSV: `d` feature columns `f_*` followed by `n` target columns `y_*`.
pub fn read_regression<R: Read>(rdr: R, source: &Path) -> Result<RegressionData> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers()?.clone();
    let d = count_prefixed(&headers, "f_");
    let n = count_prefixed(&headers, "y_");
    if d == 0 || n == 0 || headers.len() != d + n {
        return Err(Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: "expected `f_*` feature columns followed by `y_*` target columns".into(),
        });
    }
    let (mut fs, mut ys) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != d + n {
            return Err(Error::RaggedRow {
                line: line_of(&rec),
                expected: d + n,
                found: rec.len(),
            });
        }
        let mut v = parse_row(&rec, source)?;
        ys.push(v.split_off(d));
        fs.push(v);
    }
    if fs.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    Ok((fs, ys))
}
