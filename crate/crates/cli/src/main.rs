mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rmselect::coverage::{coverage_curves, default_thresholds, filter_benchmarks, Scores};
use rmselect::ingest::{
    fixture_data, read_model_records, read_post_training, read_rewardbench, read_score_matrix,
    read_topic_sidecar,
};
use rmselect::leaderboard::{group_gains, method_diff, post_training_deltas, ReferencePolicy};
use rmselect::merge_search::{read_attribute_samples, search, subsample};
use rmselect::pca::{explained_topk, loadings_report, pca_fit};
use rmselect::predictor::{
    cross_validate, fit_final, nonzero_features, ElasticNetModel, FitOptions, HyperGrid, TrainingSet,
    DEFAULT_FOLDS,
};
use rmselect::pretrain_probe::{
    jsd_matrix, read_aliases, read_docs, score_sets, Binning, AliasTable, DEFAULT_BINS,
    DEFAULT_TOKEN_LIMIT,
};
use rmselect::report::{csv_with_meta, json_with_meta, report_all, sha256_hex, InputHash, InputSource, Meta, ReportConfig};
use rmselect::stats::correlation_report;
use rmselect::toy_rm::{
    pairwise_accuracy, read_pairs, read_regression, synth_separable, train_bt, train_reg,
    FeatureSpec, LinearRewardHead, Optimizer, OptimizerConfig,
};
use rmselect::{Category, Error, ErrorKind, Method, ModelRecord, Result, RewardBenchTable, ScoreMatrix};

use config::Config;

#[derive(Debug, Parser)]
#[command(name = "rmselect", version, about = "Base-model selection analytics for reward modeling")]
struct Cli {
    /// Seed for every random choice (folds, subsamples, synthetic data).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory. Without it the primary table goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate input tables and report their sizes.
    IngestCheck(TableArgs),
    /// Relative gains inside each size group against its reference model.
    Gains(GainsArgs),
    /// Percentage change of each post-training stage over the base model.
    PostDeltas(TableArgs),
    /// Regression minus Bradley-Terry overall score per model.
    MethodDiff(TableArgs),
    /// Pearson/Spearman correlation of benchmarks with RewardBench scores.
    Correlate(MatrixArgs),
    /// Top-k coverage curves of every benchmark.
    Coverage(MatrixArgs),
    /// Benchmarks meeting the coverage thresholds.
    Filter(MatrixArgs),
    /// Cross-validated Elastic-Net fit.
    Fit(FitArgs),
    /// Predictions of a fitted model for every matrix row.
    Predict(PredictArgs),
    /// Non-zero coefficients of a fitted model.
    Coefficients(CoefArgs),
    /// Exhaustive merge-vector search over attribute pairs.
    MergeSearch(MergeArgs),
    /// Train a linear Bradley-Terry or attribute-regression head.
    ToyTrain(ToyArgs),
    /// Presence scores and per-category statistics.
    ProbeScore(ProbeArgs),
    /// Jensen-Shannon distances between models' presence scores.
    ProbeJsd(ProbeArgs),
    /// Principal components of the benchmark matrix.
    Pca(PcaArgs),
    /// Every artifact plus a manifest in one directory.
    ReportAll(ReportArgs),
}

#[derive(Debug, Clone, Args)]
struct TableArgs {
    /// Model metadata CSV (bundled table by default).
    #[arg(long)]
    models: Option<PathBuf>,
    /// RewardBench CSV for regression reward models.
    #[arg(long)]
    regression: Option<PathBuf>,
    /// RewardBench CSV for Bradley-Terry reward models.
    #[arg(long)]
    bradley_terry: Option<PathBuf>,
    /// Post-training table CSV.
    #[arg(long)]
    post_training: Option<PathBuf>,
    /// Benchmark matrix CSV (checked by ingest-check when given).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Benchmark topic sidecar CSV.
    #[arg(long)]
    topics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GainsArgs {
    #[command(flatten)]
    tables: TableArgs,
    /// `regression` or `bt`.
    #[arg(long)]
    method: Option<String>,
    /// Restrict to one category (all categories by default).
    #[arg(long)]
    category: Option<String>,
    /// `latest`, `highest-overall`, or comma-separated reference ids.
    #[arg(long)]
    reference: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct MatrixArgs {
    #[command(flatten)]
    tables: TableArgs,
    /// Explicit RewardBench CSV, overriding --method.
    #[arg(long)]
    rewardbench: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    category: Option<String>,
    /// Significance level of the correlation test.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Retention thresholds as `k:min` pairs, e.g. `5:0.4,10:0.7`.
    #[arg(long)]
    thresholds: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Comma-separated raw features (all matrix columns by default).
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoefArgs {
    #[arg(long)]
    model: PathBuf,
    /// Keep coefficients with magnitude above this value.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// CSV with `pair_id`, `chosen_<attr>` and `rejected_<attr>` columns.
    #[arg(long)]
    pairs: PathBuf,
    /// Search a seeded subsample of this many pairs.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Debug, Args)]
struct ToyArgs {
    /// Bradley-Terry pairs CSV (`w_*`, `l_*` columns).
    #[arg(long, conflicts_with = "attributes")]
    pairs: Option<PathBuf>,
    /// Attribute regression CSV (`f_*`, `y_*` columns).
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Validation file in the same format, for checkpoint selection.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Generate this many separable planted pairs instead of reading a file.
    #[arg(long, conflicts_with_all = ["pairs", "attributes"])]
    synthetic: Option<usize>,
    /// Feature dimension of synthetic pairs.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    /// Line-delimited JSON documents with per-token log-probabilities.
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    token_limit: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// CSV `alias,source` of models sharing a score set.
    #[arg(long)]
    aliases: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PcaArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Skip column standardization.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Synthesize a benchmark matrix with this many columns when --matrix is absent.
    #[arg(long)]
    synthetic_benchmarks: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    folds: Option<usize>,
}

/// Hyper-parameter grid, each flag a comma-separated list.
#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    l1_ratios: Option<Vec<f64>>,
}

/// Per-invocation state: resolved settings and the hashes of every input read.
struct Run {
    cfg: Config,
    seed: u64,
    out: Option<PathBuf>,
    inputs: Vec<InputHash>,
}

impl Run {
    fn read(&mut self, name: &str, path: Option<&Path>, bundled: Option<&str>) -> Result<(Vec<u8>, PathBuf)> {
        let (bytes, source, shown) = match (path, bundled) {
            (Some(p), _) => (
                fs::read(p).map_err(|e| Error::io(p, e))?,
                p.display().to_string(),
                p.to_path_buf(),
            ),
            (None, Some(text)) => (text.as_bytes().to_vec(), format!("bundled:{name}"), PathBuf::from(name)),
            (None, None) => return Err(Error::InvalidArgument(format!("missing input: {name}"))),
        };
        self.inputs.push(InputHash {
            name: name.to_string(),
            source,
            sha256: sha256_hex(&bytes),
        });
        Ok((bytes, shown))
    }

    fn path_setting(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.cfg.raw(key).map(PathBuf::from))
    }

    fn models(&mut self, t: &TableArgs) -> Result<Vec<ModelRecord>> {
        let p = self.path_setting(&t.models, "models");
        let (b, src) = self.read("models.csv", p.as_deref(), Some(fixture_data::MODELS))?;
        read_model_records(b.as_slice(), &src)
    }

    fn rewardbench(&mut self, t: &TableArgs, method: Method) -> Result<RewardBenchTable> {
        let (flag, key, bundled, name) = match method {
            Method::Regression => (&t.regression, "regression", fixture_data::REWARDBENCH_REGRESSION, "rewardbench_regression.csv"),
            Method::BradleyTerry => (
                &t.bradley_terry,
                "bradley-terry",
                fixture_data::REWARDBENCH_BRADLEY_TERRY,
                "rewardbench_bradley_terry.csv",
            ),
        };
        let p = self.path_setting(flag, key);
        let (b, src) = self.read(name, p.as_deref(), Some(bundled))?;
        read_rewardbench(b.as_slice(), &src)
    }

    fn target(&mut self, m: &MatrixArgs) -> Result<(RewardBenchTable, Category)> {
        let category = self.category(&m.category)?.unwrap_or(Category::Overall);
        if let Some(p) = self.path_setting(&m.rewardbench, "rewardbench") {
            let (b, src) = self.read("rewardbench.csv", Some(&p), None)?;
            return Ok((read_rewardbench(b.as_slice(), &src)?, category));
        }
        let method = self.method(&m.method)?;
        Ok((self.rewardbench(&m.tables, method)?, category))
    }

    fn matrix(&mut self, flag: &Option<PathBuf>, topics: &Option<PathBuf>) -> Result<ScoreMatrix> {
        let p = self
            .path_setting(flag, "matrix")
            .ok_or_else(|| Error::InvalidArgument("--matrix is required".into()))?;
        let (b, src) = self.read("benchmark_matrix.csv", Some(&p), None)?;
        let mut m = read_score_matrix(b.as_slice(), &src)?;
        let tp = self.path_setting(topics, "topics");
        let (b, src) = self.read("benchmark_topics.csv", tp.as_deref(), Some(fixture_data::BENCHMARK_TOPICS))?;
        m.apply_topics(&read_topic_sidecar(b.as_slice(), &src)?);
        Ok(m)
    }

    fn method(&self, flag: &Option<String>) -> Result<Method> {
        self.cfg.pick(flag.clone(), "method", "regression".to_string())?.parse()
    }

    fn category(&self, flag: &Option<String>) -> Result<Option<Category>> {
        self.cfg.pick_opt(flag.clone(), "category")?.map(|s: String| s.parse()).transpose()
    }

    fn k_range(&self, m: &MatrixArgs, n: usize) -> Result<std::ops::RangeInclusive<usize>> {
        let lo = self.cfg.pick(m.k_min, "k-min", 1)?;
        let hi = self.cfg.pick(m.k_max, "k-max", n)?;
        Ok(lo..=hi)
    }

    fn thresholds(&self, m: &MatrixArgs) -> Result<BTreeMap<usize, f64>> {
        match self.cfg.pick_opt(m.thresholds.clone(), "thresholds")? {
            None => Ok(default_thresholds()),
            Some(s) => parse_thresholds(&s),
        }
    }

    fn grid(&self, g: &GridArgs) -> Result<HyperGrid> {
        let d = HyperGrid::default();
        Ok(HyperGrid {
            degrees: self.cfg.pick_list(g.degrees.clone(), "degrees", d.degrees)?,
            alphas: self.cfg.pick_list(g.alphas.clone(), "alphas", d.alphas)?,
            l1_ratios: self.cfg.pick_list(g.l1_ratios.clone(), "l1-ratios", d.l1_ratios)?,
        })
    }

    fn meta(&self) -> Meta {
        Meta::new(self.seed, self.inputs.clone())
    }

    /// Writes every file into the output directory, or prints the first one.
    fn emit(&self, files: Vec<(String, String)>) -> Result<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for (name, text) in files {
                    let p = dir.join(&name);
                    fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                    log::info!("wrote {}", p.display());
                }
            }
            None => {
                if let Some((_, text)) = files.into_iter().next() {
                    print!("{text}");
                }
            }
        }
        Ok(())
    }
}

fn parse_thresholds(s: &str) -> Result<BTreeMap<usize, f64>> {
    s.split(',')
        .map(|p| {
            let (k, v) = p
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("threshold `{p}` is not `k:min`")))?;
            let k = k.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad k in `{p}`")))?;
            let v = v.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad minimum in `{p}`")))?;
            Ok((k, v))
        })
        .collect()
}

fn parse_policy(s: &str) -> ReferencePolicy {
    match s {
        "latest" => ReferencePolicy::Latest,
        "highest-overall" => ReferencePolicy::HighestOverall,
        ids => ReferencePolicy::Explicit(ids.split(',').map(|x| x.trim().to_string()).collect()),
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

fn csv(run: &Run, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    csv_with_meta(&run.meta(), header, rows)
}

fn cmd_ingest_check(run: &mut Run, t: &TableArgs) -> Result<()> {
    let models = run.models(t)?;
    let reg = run.rewardbench(t, Method::Regression)?;
    let bt = run.rewardbench(t, Method::BradleyTerry)?;
    let pp = run.path_setting(&t.post_training, "post-training");
    let (b, src) = run.read("post_training.csv", pp.as_deref(), Some(fixture_data::POST_TRAINING))?;
    let pt = read_post_training(b.as_slice(), &src)?;
    let matrix = match run.path_setting(&t.matrix, "matrix") {
        Some(p) => {
            let m = run.matrix(&Some(p), &t.topics)?;
            Some(json!({ "rows": m.n_rows(), "columns": m.n_cols() }))
        }
        None => None,
    };
    let summary = json!({
        "models": models.len(),
        "rewardbench_regression": reg.len(),
        "rewardbench_bradley_terry": bt.len(),
        "post_training_stages": pt.stages.len(),
        "matrix": matrix,
        "overall_consistent": true,
    });
    run.emit(vec![("ingest_check.json".into(), json_with_meta(&run.meta(), &summary)?)])
}

fn cmd_gains(run: &mut Run, a: &GainsArgs) -> Result<()> {
    let method = run.method(&a.method)?;
    let category = run.category(&a.category)?;
    let policy = parse_policy(&run.cfg.pick(a.reference.clone(), "reference", "latest".to_string())?);
    let models = run.models(&a.tables)?;
    let rb = run.rewardbench(&a.tables, method)?;
    let cats: Vec<Category> = category.map_or(Category::ALL.to_vec(), |c| vec![c]);
    let mut rows = Vec::new();
    for cat in cats {
        for g in group_gains(&rb, &models, &policy, cat)? {
            for gain in &g.gains {
                rows.push(vec![
                    g.group.label().to_string(),
                    g.reference.clone(),
                    gain.model.clone(),
                    cat.name().to_string(),
                    f(rb[&gain.model].get(cat)),
                    f(g.reference_score),
                    f(gain.gain_pct),
                    format!("{:+.2}%", gain.gain_pct),
                ]);
            }
        }
    }
    let text = csv(
        run,
        &["group", "reference", "model", "category", "score", "reference_score", "gain_pct", "gain"],
        &rows,
    )?;
    run.emit(vec![(format!("gains_{}.csv", method.name().replace('-', "_")), text)])
}

fn cmd_post_deltas(run: &mut Run, t: &TableArgs) -> Result<()> {
    let pp = run.path_setting(&t.post_training, "post-training");
    let (b, src) = run.read("post_training.csv", pp.as_deref(), Some(fixture_data::POST_TRAINING))?;
    let pt = read_post_training(b.as_slice(), &src)?;
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
                format!("{:+.1}%", delta),
            ]);
        }
    }
    let text = csv(run, &["base", "stage", "category", "base_score", "score", "delta_pct", "delta"], &rows)?;
    run.emit(vec![("post_training_deltas.csv".into(), text)])
}

fn cmd_method_diff(run: &mut Run, t: &TableArgs) -> Result<()> {
    let bt = run.rewardbench(t, Method::BradleyTerry)?;
    let reg = run.rewardbench(t, Method::Regression)?;
    let rows: Vec<Vec<String>> = method_diff(&bt, &reg)?
        .into_iter()
        .map(|(m, d)| vec![m.clone(), f(bt[&m].overall), f(reg[&m].overall), f(d)])
        .collect();
    let text = csv(run, &["model", "bradley_terry_overall", "regression_overall", "regression_minus_bt"], &rows)?;
    run.emit(vec![("method_diff.csv".into(), text)])
}

fn cmd_correlate(run: &mut Run, m: &MatrixArgs) -> Result<()> {
    let matrix = run.matrix(&m.tables.matrix, &m.tables.topics)?;
    let (rb, _) = run.target(m)?;
    let alpha = run.cfg.pick(m.alpha, "alpha", 0.05)?;
    let rep = correlation_report(&matrix, &rb, alpha)?;
    let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
    let flag = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = rep
        .entries
        .iter()
        .map(|e| {
            let topic = matrix
                .column_index(&e.benchmark)
                .and_then(|c| matrix.topic(c))
                .unwrap_or("")
                .to_string();
            vec![
                e.benchmark.clone(),
                topic,
                e.category.name().to_string(),
                opt(e.pearson),
                opt(e.spearman),
                flag(e.sig_pearson),
                flag(e.sig_spearman),
            ]
        })
        .collect();
    let text = csv(
        run,
        &["benchmark", "topic", "category", "pearson", "spearman", "significant_pearson", "significant_spearman"],
        &rows,
    )?;
    let summary = json!({ "n": rep.n, "alpha": rep.alpha, "r_crit": rep.r_crit });
    let summary = json_with_meta(&run.meta(), &summary)?;
    run.emit(vec![("correlation.csv".into(), text), ("correlation_summary.json".into(), summary)])
}

fn curves(run: &mut Run, m: &MatrixArgs) -> Result<Vec<rmselect::coverage::CoverageCurve>> {
    let matrix = run.matrix(&m.tables.matrix, &m.tables.topics)?;
    let (rb, category) = run.target(m)?;
    let rows: Vec<usize> = (0..matrix.n_rows()).filter(|&i| rb.contains_key(&matrix.rows()[i])).collect();
    let target: Scores = rows
        .iter()
        .map(|&i| (matrix.rows()[i].clone(), rb[&matrix.rows()[i]].get(category)))
        .collect();
    let benches: BTreeMap<String, Scores> = (0..matrix.n_cols())
        .map(|c| {
            let s = rows.iter().map(|&i| (matrix.rows()[i].clone(), matrix.value(i, c))).collect();
            (matrix.columns()[c].clone(), s)
        })
        .collect();
    let range = run.k_range(m, target.len())?;
    coverage_curves(&benches, &target, range)
}

fn cmd_coverage(run: &mut Run, m: &MatrixArgs) -> Result<()> {
    let cs = curves(run, m)?;
    let mut rows = Vec::new();
    for c in &cs {
        for p in &c.points {
            rows.push(vec![c.benchmark.clone(), p.k.to_string(), f(p.coverage)]);
        }
    }
    let text = csv(run, &["benchmark", "k", "coverage"], &rows)?;
    run.emit(vec![("coverage.csv".into(), text)])
}

fn cmd_filter(run: &mut Run, m: &MatrixArgs) -> Result<()> {
    let thresholds = run.thresholds(m)?;
    let cs = curves(run, m)?;
    let kept = filter_benchmarks(&cs, &thresholds)?;
    let rows: Vec<Vec<String>> = cs
        .iter()
        .map(|c| {
            let mut r = vec![c.benchmark.clone(), kept.contains(&c.benchmark).to_string()];
            r.extend(thresholds.keys().map(|k| c.at(*k).map(f).unwrap_or_default()));
            r
        })
        .collect();
    let mut header = vec!["benchmark".to_string(), "retained".to_string()];
    header.extend(thresholds.iter().map(|(k, t)| format!("coverage_at_{k}_min_{t}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let text = csv(run, &header, &rows)?;
    run.emit(vec![("coverage_filter.csv".into(), text)])
}

fn fit_options(run: &Run, tol: Option<f64>, max_iter: Option<usize>) -> Result<FitOptions> {
    let d = FitOptions::default();
    Ok(FitOptions {
        tol: run.cfg.pick(tol, "tol", d.tol)?,
        max_iter: run.cfg.pick(max_iter, "max-iter", d.max_iter)?,
        trace: false,
    })
}

fn cmd_fit(run: &mut Run, a: &FitArgs) -> Result<()> {
    let matrix = run.matrix(&a.matrix.tables.matrix, &a.matrix.tables.topics)?;
    let (rb, category) = run.target(&a.matrix)?;
    let features: Option<Vec<String>> = a
        .features
        .as_ref()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let ts = TrainingSet::from_tables(&matrix, &rb, category, features.as_deref())?;
    let grid = run.grid(&a.grid)?;
    let folds = run.cfg.pick(a.folds, "folds", DEFAULT_FOLDS)?;
    let opts = fit_options(run, a.tol, a.max_iter)?;
    let cv = cross_validate(&ts.x, &ts.y, &grid, folds, run.seed, &opts)?;
    let model = fit_final(&ts.x, &ts.features, &ts.y, &cv.best, &opts, Some(run.seed))?;
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
    let cv_text = csv(run, &["degree", "alpha", "l1_ratio", "mean_mae", "all_folds_converged", "max_fold_kkt"], &cv_rows)?;
    let model_text = json_with_meta(&run.meta(), &model)?;
    run.emit(vec![("model.json".into(), model_text), ("cv.csv".into(), cv_text)])?;
    if !model.convergence.converged {
        return Err(Error::NotConverged(format!(
            "final fit stopped after {} sweeps (max update {:e}, KKT residual {:e})",
            model.convergence.n_iter, model.convergence.max_update, model.convergence.kkt_residual
        )));
    }
    Ok(())
}

fn load_model(run: &mut Run, path: &Path) -> Result<ElasticNetModel> {
    let (b, _) = run.read("model.json", Some(path), None)?;
    let v: serde_json::Value = serde_json::from_slice(&b)?;
    let data = match v.get("data") {
        Some(d) if v.get("meta").is_some() => d.clone(),
        _ => v,
    };
    ElasticNetModel::from_json(&data.to_string())
}

fn cmd_predict(run: &mut Run, a: &PredictArgs) -> Result<()> {
    let model = load_model(run, &a.model)?;
    let matrix = run.matrix(&a.matrix, &None)?;
    let preds = model.predict_matrix(&matrix)?;
    let rows: Vec<Vec<String>> = matrix
        .rows()
        .iter()
        .zip(preds)
        .map(|(m, p)| vec![m.clone(), f(p)])
        .collect();
    let text = csv(run, &["model", "prediction"], &rows)?;
    run.emit(vec![("predictions.csv".into(), text)])
}

fn cmd_coefficients(run: &mut Run, a: &CoefArgs) -> Result<()> {
    let model = load_model(run, &a.model)?;
    let rows: Vec<Vec<String>> = nonzero_features(&model, a.threshold)
        .into_iter()
        .map(|(n, c)| vec![n, f(c)])
        .collect();
    let text = csv(run, &["feature", "coefficient"], &rows)?;
    run.emit(vec![("coefficients.csv".into(), text)])
}

fn cmd_merge(run: &mut Run, a: &MergeArgs) -> Result<()> {
    let (b, src) = run.read("attribute_pairs.csv", Some(&a.pairs), None)?;
    let mut samples = read_attribute_samples(b.as_slice(), &src)?;
    if let Some(n) = run.cfg.pick_opt(a.subsample, "subsample")? {
        samples = subsample(&samples, n, run.seed);
    }
    let result = search(&samples)?;
    run.emit(vec![("merge_result.json".into(), json_with_meta(&run.meta(), &result)?)])
}

fn optimizer_config(run: &Run, a: &ToyArgs) -> Result<OptimizerConfig> {
    let d = OptimizerConfig::default();
    let optimizer = match run.cfg.pick(a.optimizer.clone(), "optimizer", "adam".to_string())?.as_str() {
        "adam" => Optimizer::Adam,
        "sgd" => Optimizer::Sgd,
        other => return Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
    };
    Ok(OptimizerConfig {
        optimizer,
        learning_rate: run.cfg.pick(a.learning_rate, "learning-rate", d.learning_rate)?,
        weight_decay: run.cfg.pick(a.weight_decay, "weight-decay", d.weight_decay)?,
        warmup_steps: run.cfg.pick(a.warmup_steps, "warmup-steps", d.warmup_steps)?,
        batch_size: run.cfg.pick(a.batch_size, "batch-size", d.batch_size)?,
        epochs: run.cfg.pick(a.epochs, "epochs", d.epochs)?,
        eval_every: run.cfg.pick(a.eval_every, "eval-every", d.eval_every)?,
        seed: run.seed,
        ..d
    })
}

fn cmd_toy_train(run: &mut Run, a: &ToyArgs) -> Result<()> {
    let cfg = optimizer_config(run, a)?;
    if let Some(path) = &a.attributes {
        let (b, src) = run.read("attributes.csv", Some(path), None)?;
        let (fs_, ys) = read_regression(b.as_slice(), &src)?;
        let valid = match &a.valid {
            Some(p) => {
                let (b, src) = run.read("valid.csv", Some(p), None)?;
                Some(read_regression(b.as_slice(), &src)?)
            }
            None => None,
        };
        let out = train_reg(&fs_, &ys, valid.as_ref().map(|(f, y)| (f.as_slice(), y.as_slice())), &cfg)?;
        return run.emit(vec![("attribute_head.json".into(), json_with_meta(&run.meta(), &out)?)]);
    }
    let (train, valid) = match (&a.pairs, a.synthetic) {
        (Some(p), _) => {
            let (b, src) = run.read("pairs.csv", Some(p), None)?;
            let train = read_pairs(b.as_slice(), &src)?;
            let valid = match &a.valid {
                Some(p) => {
                    let (b, src) = run.read("valid.csv", Some(p), None)?;
                    Some(read_pairs(b.as_slice(), &src)?)
                }
                None => None,
            };
            (train, valid)
        }
        (None, Some(n)) => {
            let mut rng_head = LinearRewardHead::zeros(a.dim);
            for (j, w) in rng_head.weights.iter_mut().enumerate() {
                *w = if j % 2 == 0 { 1.0 } else { -0.5 };
            }
            let spec = FeatureSpec::standard(a.dim);
            let train = synth_separable(&rng_head, n, 1.0, run.seed, &spec)?;
            let valid = synth_separable(&rng_head, n.div_ceil(4), 1.0, run.seed.wrapping_add(1), &spec)?;
            (train, Some(valid))
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "toy-train needs --pairs, --attributes or --synthetic".into(),
            ))
        }
    };
    let out = train_bt(&train, valid.as_deref(), &cfg)?;
    let summary = json!({
        "outcome": out,
        "train_accuracy": pairwise_accuracy(&out.head, &train)?,
    });
    run.emit(vec![("reward_head.json".into(), json_with_meta(&run.meta(), &summary)?)])
}

fn probe_sets(run: &mut Run, a: &ProbeArgs) -> Result<BTreeMap<String, rmselect::pretrain_probe::PresenceScoreSet>> {
    let (b, src) = run.read("docs.jsonl", Some(&a.docs), None)?;
    let docs = read_docs(b.as_slice(), &src)?;
    let n = run.cfg.pick(a.token_limit, "token-limit", DEFAULT_TOKEN_LIMIT)?;
    let sets = score_sets(&docs, n)?;
    let aliases = match a.aliases.clone().or_else(|| run.cfg.raw("aliases").map(PathBuf::from)) {
        Some(p) => {
            let (b, src) = run.read("aliases.csv", Some(&p), None)?;
            read_aliases(b.as_slice(), &src)?
        }
        None => AliasTable::new(),
    };
    aliases.expand(&sets)
}

fn cmd_probe_score(run: &mut Run, a: &ProbeArgs) -> Result<()> {
    let sets = probe_sets(run, a)?;
    let bins = run.cfg.pick(a.bins, "bins", DEFAULT_BINS)?;
    let mut stats = BTreeMap::new();
    let mut rows = Vec::new();
    for (model, s) in &sets {
        let features = rmselect::pretrain_probe::export_presence_features(s).ok();
        stats.insert(model.clone(), json!({ "categories": s.categories, "features": features }));
        for d in &s.docs {
            rows.push(vec![model.clone(), d.doc_id.clone(), d.category.to_string(), f(d.score)]);
        }
    }
    let all: Vec<Vec<f64>> = sets.values().map(|s| s.scores()).collect();
    let binning = Binning::spanning(all.iter().map(Vec::as_slice), bins)?;
    let hist: BTreeMap<&String, Vec<u64>> = sets.iter().map(|(m, s)| (m, binning.counts(&s.scores()))).collect();
    let meta = run.meta();
    run.emit(vec![
        ("presence_stats.json".into(), json_with_meta(&meta, &stats)?),
        ("presence_scores.csv".into(), csv(run, &["model", "doc_id", "category", "score"], &rows)?),
        (
            "presence_histograms.json".into(),
            json_with_meta(&meta, &json!({ "binning": binning, "counts": hist }))?,
        ),
    ])
}

fn cmd_probe_jsd(run: &mut Run, a: &ProbeArgs) -> Result<()> {
    let sets = probe_sets(run, a)?;
    let bins = run.cfg.pick(a.bins, "bins", DEFAULT_BINS)?;
    let pooled: Vec<(String, Vec<f64>)> = sets.iter().map(|(m, s)| (m.clone(), s.scores())).collect();
    let m = jsd_matrix(&pooled, bins)?;
    let mut header = vec!["model".to_string()];
    header.extend(m.models.iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = m
        .models
        .iter()
        .zip(&m.values)
        .map(|(name, row)| std::iter::once(name.clone()).chain(row.iter().map(|v| f(*v))).collect())
        .collect();
    let text = csv(run, &header, &rows)?;
    run.emit(vec![("jsd_matrix.csv".into(), text)])
}

fn cmd_pca(run: &mut Run, a: &PcaArgs) -> Result<()> {
    let matrix = run.matrix(&a.matrix, &None)?;
    let standardize = !a.no_standardize && run.cfg.pick(None, "standardize", true)?;
    let r = pca_fit(&matrix, standardize)?;
    let mut cum = 0.0;
    let rows: Vec<Vec<String>> = r
        .explained_ratio
        .iter()
        .enumerate()
        .map(|(i, v)| {
            cum += v;
            vec![(i + 1).to_string(), f(r.explained_variance[i]), f(*v), f(cum)]
        })
        .collect();
    let mut load = Vec::new();
    for c in loadings_report(&r) {
        for (name, w) in c.weights {
            load.push(vec![c.component.to_string(), name, f(w)]);
        }
    }
    let scree = json!({
        "explained_ratio": r.explained_ratio,
        "top5": explained_topk(&r, r.n_components().min(5))?,
    });
    let meta = run.meta();
    run.emit(vec![
        ("pca_explained.csv".into(), csv(run, &["component", "variance", "ratio", "cumulative"], &rows)?),
        ("pca_loadings.csv".into(), csv(run, &["component", "feature", "weight"], &load)?),
        ("pca_scree.json".into(), json_with_meta(&meta, &scree)?),
    ])
}

fn cmd_report_all(run: &mut Run, a: &ReportArgs) -> Result<()> {
    let out = run
        .out
        .clone()
        .ok_or_else(|| Error::InvalidArgument("report-all needs --out".into()))?;
    let m = &a.matrix;
    let source = |flag: &Option<PathBuf>, key: &str| match run.path_setting(flag, key) {
        Some(p) => InputSource::File(p),
        None => InputSource::Bundled,
    };
    let mut cfg = ReportConfig::new(out);
    cfg.seed = run.seed;
    cfg.models = source(&m.tables.models, "models");
    cfg.regression = source(&m.tables.regression, "regression");
    cfg.bradley_terry = source(&m.tables.bradley_terry, "bradley-terry");
    cfg.post_training = source(&m.tables.post_training, "post-training");
    cfg.topics = source(&m.tables.topics, "topics");
    cfg.matrix = run.path_setting(&m.tables.matrix, "matrix");
    cfg.synthetic_benchmarks = run.cfg.pick_opt(a.synthetic_benchmarks, "synthetic-benchmarks")?;
    cfg.target_method = run.method(&m.method)?;
    if let Some(c) = run.category(&m.category)? {
        cfg.target_category = c;
    }
    cfg.reference_policy = parse_policy(&run.cfg.pick(None, "reference", "latest".to_string())?);
    cfg.alpha = run.cfg.pick(m.alpha, "alpha", cfg.alpha)?;
    cfg.k_min = run.cfg.pick(m.k_min, "k-min", cfg.k_min)?;
    cfg.k_max = run.cfg.pick(m.k_max, "k-max", cfg.k_max)?;
    cfg.thresholds = run.thresholds(m)?;
    cfg.grid = run.grid(&a.grid)?;
    cfg.folds = run.cfg.pick(a.folds, "folds", cfg.folds)?;
    cfg.fit = fit_options(run, None, None)?;
    let manifest = report_all(&cfg)?;
    eprintln!(
        "wrote {} artifacts, skipped {}, failed {}",
        manifest.artifacts.len(),
        manifest.skipped.len(),
        manifest.failed.len()
    );
    match manifest.failure_kind() {
        None => Ok(()),
        Some(kind) => {
            let first = &manifest.failed[0];
            let msg = format!("artifact `{}` failed: {}", first.artifact, first.error);
            Err(match kind {
                ErrorKind::Io => Error::Io {
                    path: cfg.out_dir.clone(),
                    source: std::io::Error::other(msg),
                },
                ErrorKind::Numerical => Error::NotConverged(msg),
                ErrorKind::Validation => Error::InvalidArgument(msg),
            })
        }
    }
}

fn dispatch(run: &mut Run, command: &Command) -> Result<()> {
    match command {
        Command::IngestCheck(t) => cmd_ingest_check(run, t),
        Command::Gains(a) => cmd_gains(run, a),
        Command::PostDeltas(t) => cmd_post_deltas(run, t),
        Command::MethodDiff(t) => cmd_method_diff(run, t),
        Command::Correlate(m) => cmd_correlate(run, m),
        Command::Coverage(m) => cmd_coverage(run, m),
        Command::Filter(m) => cmd_filter(run, m),
        Command::Fit(a) => cmd_fit(run, a),
        Command::Predict(a) => cmd_predict(run, a),
        Command::Coefficients(a) => cmd_coefficients(run, a),
        Command::MergeSearch(a) => cmd_merge(run, a),
        Command::ToyTrain(a) => cmd_toy_train(run, a),
        Command::ProbeScore(a) => cmd_probe_score(run, a),
        Command::ProbeJsd(a) => cmd_probe_jsd(run, a),
        Command::Pca(a) => cmd_pca(run, a),
        Command::ReportAll(a) => cmd_report_all(run, a),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let threads = cfg.pick_opt(cli.threads, "threads")?;
    let mut run = Run {
        seed: cfg.pick(cli.seed, "seed", 0)?,
        out: cli.out.clone().or_else(|| cfg.raw("out").map(PathBuf::from)),
        cfg,
        inputs: Vec::new(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start thread pool: {e}")))?;
    log::debug!("running with {} threads", pool.current_num_threads());
    pool.install(|| dispatch(&mut run, &cli.command))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let label = match kind {
                ErrorKind::Validation => "validation",
                ErrorKind::Io => "io",
                ErrorKind::Numerical => "numerical",
            };
            eprintln!("{}", json!({ "error": label, "message": e.to_string() }));
            ExitCode::from(exit_code(kind))
        }
    }
}
