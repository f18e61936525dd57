//! Report bundle: every table the analyses produce, written into one
//! directory with a manifest of inputs, hashes and outputs.
//!
//! CSV artifacts start with `#` metadata lines (tool version, seed, input
//! hashes); JSON artifacts wrap their payload as `{"meta": ..., "data": ...}`.
//! Nothing thread-dependent is written into artifacts or the manifest, so a
//! rerun with the same inputs and seed is byte-identical at any thread
//! count. The thread count goes to `run_info.json`, which the manifest
//! does not list.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coverage::{coverage_curves, default_thresholds, filter_benchmarks, Scores};
use crate::error::{Error, ErrorKind, Result};
use crate::ingest::{
    fixture_data, read_model_records, read_post_training, read_rewardbench, read_score_matrix,
    read_topic_sidecar, write_score_matrix, Category, Method, ModelRecord,
    PostTrainingTable, RewardBenchTable, ScoreMatrix, OVERALL_TOLERANCE,
};
use crate::leaderboard::{group_gains, method_diff, post_training_deltas, ReferencePolicy};
use crate::pca::{explained_topk, loadings_report, pca_fit};
use crate::predictor::{
    cross_validate, fit_final, nonzero_features, predicted_coverage, FitOptions, HyperGrid,
    TrainingSet, DEFAULT_FOLDS,
};
use crate::stats::correlation_report;
use crate::synth;
use crate::TOOL_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_INFO_FILE: &str = "run_info.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub name: String,
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub seed: u64,
    pub inputs: Vec<InputHash>,
}

impl Meta {
    pub fn new(seed: u64, inputs: Vec<InputHash>) -> Self {
        Meta {
            tool: TOOL_VERSION.to_string(),
            seed,
            inputs,
        }
    }

    fn csv_header(&self) -> String {
        let mut s = format!("# tool: {}\n# seed: {}\n", self.tool, self.seed);
        for i in &self.inputs {
            s.push_str(&format!("# input: {} {} sha256:{}\n", i.name, i.source, i.sha256));
        }
        s
    }
}

/// CSV text with the metadata block on top.
pub fn csv_with_meta(meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(r)?;
    }
    let body = wtr.into_inner().map_err(|e| Error::io("<buffer>", e.into_error()))?;
    let mut out = meta.csv_header();
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

/// Pretty JSON `{"meta": ..., "data": ...}` with a trailing newline.
pub fn json_with_meta<T: Serialize + ?Sized>(meta: &Meta, data: &T) -> Result<String> {
    let v = serde_json::json!({ "meta": meta, "data": data });
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Where a report input comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Bundled,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub models: InputSource,
    pub regression: InputSource,
    pub bradley_terry: InputSource,
    pub post_training: InputSource,
    pub matrix: Option<PathBuf>,
    /// Number of synthetic benchmark columns to generate when no matrix is given.
    pub synthetic_benchmarks: Option<usize>,
    pub topics: InputSource,
    pub reference_policy: ReferencePolicy,
    /// RewardBench table the matrix analyses target.
    pub target_method: Method,
    pub target_category: Category,
    pub alpha: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub thresholds: BTreeMap<usize, f64>,
    pub grid: HyperGrid,
    pub folds: usize,
    pub fit: FitOptions,
    pub pca_standardize: bool,
}

impl ReportConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        ReportConfig {
            out_dir: out_dir.into(),
            seed: 0,
            models: InputSource::Bundled,
            regression: InputSource::Bundled,
            bradley_terry: InputSource::Bundled,
            post_training: InputSource::Bundled,
            matrix: None,
            synthetic_benchmarks: None,
            topics: InputSource::Bundled,
            reference_policy: ReferencePolicy::default(),
            target_method: Method::Regression,
            target_category: Category::Overall,
            alpha: 0.05,
            k_min: 1,
            k_max: 20,
            thresholds: default_thresholds(),
            grid: HyperGrid::default(),
            folds: DEFAULT_FOLDS,
            fit: FitOptions::default(),
            pca_standardize: true,
        }
    }

    fn record(&self) -> ConfigRecord {
        ConfigRecord {
            reference_policy: match &self.reference_policy {
                ReferencePolicy::Latest => "latest".into(),
                ReferencePolicy::HighestOverall => "highest-overall".into(),
                ReferencePolicy::Explicit(ids) => format!("explicit:{}", ids.join("|")),
            },
            target_method: self.target_method,
            target_category: self.target_category,
            alpha: self.alpha,
            k_min: self.k_min,
            k_max: self.k_max,
            thresholds: self.thresholds.clone(),
            grid: self.grid.clone(),
            folds: self.folds,
            fit: self.fit,
            pca_standardize: self.pca_standardize,
            synthetic_benchmarks: self.synthetic_benchmarks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub reference_policy: String,
    pub target_method: Method,
    pub target_category: Category,
    pub alpha: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub thresholds: BTreeMap<usize, f64>,
    pub grid: HyperGrid,
    pub folds: usize,
    pub fit: FitOptions,
    pub pca_standardize: bool,
    pub synthetic_benchmarks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedArtifact {
    pub artifact: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedArtifact {
    pub artifact: String,
    pub kind: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub seed: u64,
    pub config: ConfigRecord,
    pub inputs: Vec<InputHash>,
    pub artifacts: Vec<ArtifactEntry>,
    pub skipped: Vec<SkippedArtifact>,
    pub failed: Vec<FailedArtifact>,
}

impl Manifest {
    /// Kind of the first failure, if any artifact failed.
    pub fn failure_kind(&self) -> Option<ErrorKind> {
        self.failed.first().map(|f| match f.kind.as_str() {
            "io" => ErrorKind::Io,
            "numerical" => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        })
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Validation => "validation",
        ErrorKind::Io => "io",
        ErrorKind::Numerical => "numerical",
    }
}

fn read_input(name: &str, src: &InputSource, bundled: &str) -> Result<(Vec<u8>, InputHash, PathBuf)> {
    let (bytes, source, path) = match src {
        InputSource::Bundled => (
            bundled.as_bytes().to_vec(),
            format!("bundled:{name}"),
            PathBuf::from(name),
        ),
        InputSource::File(p) => (
            fs::read(p).map_err(|e| Error::io(p, e))?,
            p.display().to_string(),
            p.clone(),
        ),
    };
    let hash = InputHash {
        name: name.to_string(),
        source,
        sha256: sha256_hex(&bytes),
    };
    Ok((bytes, hash, path))
}

struct Inputs {
    models: Vec<ModelRecord>,
    regression: RewardBenchTable,
    bradley_terry: RewardBenchTable,
    post_training: PostTrainingTable,
    matrix: Option<ScoreMatrix>,
    hashes: Vec<InputHash>,
}

impl Inputs {
    fn rewardbench(&self, method: Method) -> &RewardBenchTable {
        match method {
            Method::Regression => &self.regression,
            Method::BradleyTerry => &self.bradley_terry,
        }
    }
}

fn load_inputs(cfg: &ReportConfig) -> Result<Inputs> {
    use fixture_data::*;
    let mut hashes = Vec::new();
    let (b, h, p) = read_input("models.csv", &cfg.models, MODELS)?;
    hashes.push(h);
    let models = read_model_records(b.as_slice(), &p)?;
    let (b, h, p) = read_input("rewardbench_regression.csv", &cfg.regression, REWARDBENCH_REGRESSION)?;
    hashes.push(h);
    let regression = read_rewardbench(b.as_slice(), &p)?;
    let (b, h, p) = read_input(
        "rewardbench_bradley_terry.csv",
        &cfg.bradley_terry,
        REWARDBENCH_BRADLEY_TERRY,
    )?;
    hashes.push(h);
    let bradley_terry = read_rewardbench(b.as_slice(), &p)?;
    let (b, h, p) = read_input("post_training.csv", &cfg.post_training, POST_TRAINING)?;
    hashes.push(h);
    let post_training = read_post_training(b.as_slice(), &p)?;

    let mut matrix = match (&cfg.matrix, cfg.synthetic_benchmarks) {
        (Some(path), _) => {
            let (b, h, p) = read_input("benchmark_matrix.csv", &InputSource::File(path.clone()), "")?;
            hashes.push(h);
            Some(read_score_matrix(b.as_slice(), &p)?)
        }
        (None, Some(n)) => {
            let rb = match cfg.target_method {
                Method::Regression => &regression,
                Method::BradleyTerry => &bradley_terry,
            };
            let m = synth::benchmark_matrix(rb, cfg.target_category, n, cfg.seed)?;
            let mut buf = Vec::new();
            write_score_matrix(&m, &mut buf)?;
            hashes.push(InputHash {
                name: "benchmark_matrix.csv".into(),
                source: format!("synthetic:benchmarks={n},seed={}", cfg.seed),
                sha256: sha256_hex(&buf),
            });
            Some(m)
        }
        (None, None) => None,
    };
    if let Some(m) = matrix.as_mut() {
        let (b, h, p) = read_input("benchmark_topics.csv", &cfg.topics, BENCHMARK_TOPICS)?;
        hashes.push(h);
        m.apply_topics(&read_topic_sidecar(b.as_slice(), &p)?);
    }
    Ok(Inputs {
        models,
        regression,
        bradley_terry,
        post_training,
        matrix,
        hashes,
    })
}

/// A named CSV or JSON document ready to be written.
struct Artifact {
    file: String,
    text: String,
}

struct Bundle<'a> {
    dir: &'a Path,
    meta: Meta,
    artifacts: Vec<ArtifactEntry>,
    skipped: Vec<SkippedArtifact>,
    failed: Vec<FailedArtifact>,
}

impl Bundle<'_> {
    fn write(&mut self, a: Artifact) -> Result<()> {
        let path = self.dir.join(&a.file);
        fs::write(&path, &a.text).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(ArtifactEntry {
            sha256: sha256_hex(a.text.as_bytes()),
            bytes: a.text.len(),
            file: a.file,
        });
        Ok(())
    }

    /// Builds a group of artifacts; a failure is recorded and does not stop the run.
    fn group(&mut self, name: &str, build: impl FnOnce(&Meta) -> Result<Vec<Artifact>>) -> Result<()> {
        match build(&self.meta) {
            Ok(list) => {
                for a in list {
                    self.write(a)?;
                }
            }
            Err(e) => {
                log::error!("artifact group `{name}` failed: {e}");
                self.failed.push(FailedArtifact {
                    artifact: name.to_string(),
                    kind: kind_name(e.kind()).to_string(),
                    error: e.to_string(),
                });
            }
        }
        Ok(())
    }

    fn skip(&mut self, artifact: &str, reason: &str) {
        self.skipped.push(SkippedArtifact {
            artifact: artifact.to_string(),
            reason: reason.to_string(),
        });
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn fixture_integrity(meta: &Meta, inputs: &Inputs) -> Result<Vec<Artifact>> {
    let mut rows = Vec::new();
    for method in Method::ALL {
        for (id, s) in inputs.rewardbench(method) {
            let mean = s.category_mean();
            rows.push(vec![
                method.name().to_string(),
                id.clone(),
                f(s.chat),
                f(s.chat_hard),
                f(s.safety),
                f(s.reasoning),
                f(s.overall),
                f(mean),
                f(s.overall - mean),
                s.is_consistent().to_string(),
            ]);
        }
    }
    let text = csv_with_meta(
        meta,
        &["method", "model", "chat", "chat_hard", "safety", "reasoning", "overall", "category_mean", "deviation", "consistent"],
        &rows,
    )?;
    let summary = serde_json::json!({
        "tolerance": OVERALL_TOLERANCE,
        "rows": rows.len(),
        "inconsistent": rows.iter().filter(|r| r[9] == "false").count(),
    });
    Ok(vec![
        Artifact {
            file: "fixture_integrity.csv".into(),
            text,
        },
        Artifact {
            file: "fixture_integrity.json".into(),
            text: json_with_meta(meta, &summary)?,
        },
    ])
}

fn gains(meta: &Meta, inputs: &Inputs, policy: &ReferencePolicy) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for method in Method::ALL {
        let rb = inputs.rewardbench(method);
        let mut rows = Vec::new();
        for cat in Category::ALL {
            for g in group_gains(rb, &inputs.models, policy, cat)? {
                for gain in &g.gains {
                    rows.push(vec![
                        g.group.label().to_string(),
                        g.reference.clone(),
                        gain.model.clone(),
                        cat.name().to_string(),
                        f(rb[&gain.model].get(cat)),
                        f(g.reference_score),
                        f(gain.gain_pct),
                    ]);
                }
            }
        }
        out.push(Artifact {
            file: format!("gains_{}.csv", method.name().replace('-', "_")),
            text: csv_with_meta(
                meta,
                &["group", "reference", "model", "category", "score", "reference_score", "gain_pct"],
                &rows,
            )?,
        });
    }
    Ok(out)
}

fn deltas(meta: &Meta, inputs: &Inputs) -> Result<Vec<Artifact>> {
    let pt = &inputs.post_training;
    let mut rows = Vec::new();
    for d in post_training_deltas(&pt.stages, &pt.base)? {
        for (cat, delta) in &d.deltas {
            rows.push(vec![
                pt.base_id.clone(),
                d.stage.clone(),
                cat.name().to_string(),
                f(pt.base.get(*cat)),
                f(d.scores.get(*cat)),
                f(*delta),
            ]);
        }
    }
    Ok(vec![Artifact {
        file: "post_training_deltas.csv".into(),
        text: csv_with_meta(meta, &["base", "stage", "category", "base_score", "score", "delta_pct"], &rows)?,
    }])
}

fn method_diffs(meta: &Meta, inputs: &Inputs) -> Result<Vec<Artifact>> {
    let diffs = method_diff(&inputs.bradley_terry, &inputs.regression)?;
    let rows: Vec<Vec<String>> = diffs
        .iter()
        .map(|(m, d)| {
            vec![
                m.clone(),
                f(inputs.bradley_terry[m].overall),
                f(inputs.regression[m].overall),
                f(*d),
            ]
        })
        .collect();
    Ok(vec![Artifact {
        file: "method_diff.csv".into(),
        text: csv_with_meta(meta, &["model", "bradley_terry_overall", "regression_overall", "regression_minus_bt"], &rows)?,
    }])
}

fn correlation(meta: &Meta, m: &ScoreMatrix, rb: &RewardBenchTable, alpha: f64) -> Result<Vec<Artifact>> {
    let rep = correlation_report(m, rb, alpha)?;
    let topic = |b: &str| m.column_index(b).and_then(|c| m.topic(c)).unwrap_or("").to_string();
    let rows: Vec<Vec<String>> = rep
        .entries
        .iter()
        .map(|e| {
            let flag = |b: Option<bool>| b.map(|v| v.to_string()).unwrap_or_default();
            vec![
                e.benchmark.clone(),
                topic(&e.benchmark),
                e.category.name().to_string(),
                opt(e.pearson),
                opt(e.spearman),
                flag(e.sig_pearson),
                flag(e.sig_spearman),
            ]
        })
        .collect();
    let summary = serde_json::json!({ "n": rep.n, "alpha": rep.alpha, "r_crit": rep.r_crit, "models": rep.models });
    Ok(vec![
        Artifact {
            file: "correlation.csv".into(),
            text: csv_with_meta(
                meta,
                &["benchmark", "topic", "category", "pearson", "spearman", "significant_pearson", "significant_spearman"],
                &rows,
            )?,
        },
        Artifact {
            file: "correlation_summary.json".into(),
            text: json_with_meta(meta, &summary)?,
        },
    ])
}

fn target_scores(m: &ScoreMatrix, rb: &RewardBenchTable, cat: Category) -> (Vec<usize>, Scores) {
    let rows: Vec<usize> = (0..m.n_rows()).filter(|&i| rb.contains_key(&m.rows()[i])).collect();
    let target = rows
        .iter()
        .map(|&i| (m.rows()[i].clone(), rb[&m.rows()[i]].get(cat)))
        .collect();
    (rows, target)
}

fn k_range(cfg: &ReportConfig, n: usize) -> std::ops::RangeInclusive<usize> {
    cfg.k_min..=cfg.k_max.min(n)
}

fn coverage(meta: &Meta, m: &ScoreMatrix, rb: &RewardBenchTable, cfg: &ReportConfig) -> Result<(Vec<Artifact>, Vec<String>)> {
    let (rows, target) = target_scores(m, rb, cfg.target_category);
    let benches: BTreeMap<String, Scores> = (0..m.n_cols())
        .map(|c| {
            let s = rows.iter().map(|&i| (m.rows()[i].clone(), m.value(i, c))).collect();
            (m.columns()[c].clone(), s)
        })
        .collect();
    let curves = coverage_curves(&benches, &target, k_range(cfg, target.len()))?;
    let kept = filter_benchmarks(&curves, &cfg.thresholds)?;
    let mut rows_out = Vec::new();
    for c in &curves {
        for p in &c.points {
            rows_out.push(vec![c.benchmark.clone(), p.k.to_string(), f(p.coverage)]);
        }
    }
    let filter_rows: Vec<Vec<String>> = curves
        .iter()
        .map(|c| {
            let mut r = vec![c.benchmark.clone(), kept.contains(&c.benchmark).to_string()];
            r.extend(cfg.thresholds.keys().map(|k| opt(c.at(*k))));
            r
        })
        .collect();
    let mut header = vec!["benchmark".to_string(), "retained".to_string()];
    header.extend(cfg.thresholds.iter().map(|(k, t)| format!("coverage_at_{k}_min_{t}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok((
        vec![
            Artifact {
                file: "coverage.csv".into(),
                text: csv_with_meta(meta, &["benchmark", "k", "coverage"], &rows_out)?,
            },
            Artifact {
                file: "coverage_filter.csv".into(),
                text: csv_with_meta(meta, &header, &filter_rows)?,
            },
        ],
        kept,
    ))
}

fn predictor(
    meta: &Meta,
    m: &ScoreMatrix,
    rb: &RewardBenchTable,
    features: Option<&[String]>,
    cfg: &ReportConfig,
) -> Result<Vec<Artifact>> {
    let ts = TrainingSet::from_tables(m, rb, cfg.target_category, features)?;
    let cv = cross_validate(&ts.x, &ts.y, &cfg.grid, cfg.folds, cfg.seed, &cfg.fit)?;
    let model = fit_final(&ts.x, &ts.features, &ts.y, &cv.best, &cfg.fit, Some(cfg.seed))?;
    if !model.convergence.converged {
        return Err(Error::NotConverged(format!(
            "final fit stopped after {} sweeps",
            model.convergence.n_iter
        )));
    }
    let cv_rows: Vec<Vec<String>> = cv
        .entries
        .iter()
        .map(|e| {
            vec![
                e.triple.degree.to_string(),
                f(e.triple.alpha),
                f(e.triple.l1_ratio),
                f(e.mean_mae),
                e.fold_converged.iter().all(|c| *c).to_string(),
                f(e.fold_kkt.iter().cloned().fold(0.0, f64::max)),
            ]
        })
        .collect();
    let coef_rows: Vec<Vec<String>> = nonzero_features(&model, 0.0)
        .into_iter()
        .map(|(n, c)| vec![n, f(c)])
        .collect();
    let curve = predicted_coverage(&model, m, rb, cfg.target_category, k_range(cfg, ts.models.len()))?;
    let cov_rows: Vec<Vec<String>> = curve.points.iter().map(|p| vec![p.k.to_string(), f(p.coverage)]).collect();
    Ok(vec![
        Artifact {
            file: "predictor_cv.csv".into(),
            text: csv_with_meta(meta, &["degree", "alpha", "l1_ratio", "mean_mae", "all_folds_converged", "max_fold_kkt"], &cv_rows)?,
        },
        Artifact {
            file: "predictor_model.json".into(),
            text: json_with_meta(meta, &model)?,
        },
        Artifact {
            file: "predictor_coefficients.csv".into(),
            text: csv_with_meta(meta, &["feature", "coefficient"], &coef_rows)?,
        },
        Artifact {
            file: "predicted_coverage.csv".into(),
            text: csv_with_meta(meta, &["k", "coverage"], &cov_rows)?,
        },
    ])
}

fn pca(meta: &Meta, m: &ScoreMatrix, standardize: bool) -> Result<Vec<Artifact>> {
    let r = pca_fit(m, standardize)?;
    let mut cum = 0.0;
    let ratio_rows: Vec<Vec<String>> = r
        .explained_ratio
        .iter()
        .zip(&r.explained_variance)
        .enumerate()
        .map(|(i, (ratio, var))| {
            cum += ratio;
            vec![(i + 1).to_string(), f(*var), f(*ratio), f(cum)]
        })
        .collect();
    let mut load_rows = Vec::new();
    for c in loadings_report(&r) {
        for (name, w) in c.weights {
            load_rows.push(vec![c.component.to_string(), name, f(w)]);
        }
    }
    let k = r.n_components().min(5);
    let scree = serde_json::json!({
        "components": (1..=r.n_components()).collect::<Vec<_>>(),
        "explained_ratio": r.explained_ratio,
        "top5": explained_topk(&r, k)?,
        "standardized": r.standardized,
    });
    Ok(vec![
        Artifact {
            file: "pca_explained.csv".into(),
            text: csv_with_meta(meta, &["component", "variance", "ratio", "cumulative"], &ratio_rows)?,
        },
        Artifact {
            file: "pca_loadings.csv".into(),
            text: csv_with_meta(meta, &["component", "feature", "weight"], &load_rows)?,
        },
        Artifact {
            file: "pca_scree.json".into(),
            text: json_with_meta(meta, &scree)?,
        },
    ])
}

const MATRIX_ARTIFACTS: [&str; 4] = ["correlation", "coverage", "predictor", "pca"];

/// Produces the report bundle in `cfg.out_dir`. Failed artifact groups are
/// listed in the manifest rather than aborting the run; callers decide
/// how to treat [`Manifest::failed`].
pub fn report_all(cfg: &ReportConfig) -> Result<Manifest> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let inputs = load_inputs(cfg)?;
    let mut b = Bundle {
        dir: &cfg.out_dir,
        meta: Meta::new(cfg.seed, inputs.hashes.clone()),
        artifacts: Vec::new(),
        skipped: Vec::new(),
        failed: Vec::new(),
    };
    b.group("fixture-integrity", |m| fixture_integrity(m, &inputs))?;
    b.group("gains", |m| gains(m, &inputs, &cfg.reference_policy))?;
    b.group("post-training-deltas", |m| deltas(m, &inputs))?;
    b.group("method-diff", |m| method_diffs(m, &inputs))?;

    match &inputs.matrix {
        None => {
            for a in MATRIX_ARTIFACTS {
                b.skip(a, "no benchmark matrix supplied");
            }
        }
        Some(matrix) => {
            let rb = inputs.rewardbench(cfg.target_method);
            b.group("correlation", |m| correlation(m, matrix, rb, cfg.alpha))?;
            let mut kept = None;
            b.group("coverage", |m| {
                let (a, k) = coverage(m, matrix, rb, cfg)?;
                kept = Some(k);
                Ok(a)
            })?;
            // fit on the retained benchmarks when the filter keeps any
            let features = kept.filter(|k| !k.is_empty());
            b.group("predictor", |m| predictor(m, matrix, rb, features.as_deref(), cfg))?;
            b.group("pca", |m| pca(m, matrix, cfg.pca_standardize))?;
        }
    }

    let manifest = Manifest {
        tool: TOOL_VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.record(),
        inputs: inputs.hashes,
        artifacts: b.artifacts,
        skipped: b.skipped,
        failed: b.failed,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = cfg.out_dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let info = serde_json::json!({ "threads": rayon::current_num_threads() });
    let path = cfg.out_dir.join(RUN_INFO_FILE);
    fs::write(&path, serde_json::to_string_pretty(&info)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
