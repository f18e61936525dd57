//! Pre-training data presence scores.
//!
//! A document's presence score under a model is the mean per-token
//! log-probability over its first `N` tokens. Scores are grouped by data
//! category, compared across models with a histogram Jensen-Shannon
//! distance, and exported as per-category means for the predictor.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::{csv_reader, header_index, line_of, open};

pub const DEFAULT_TOKEN_LIMIT: usize = 2048;
pub const DEFAULT_BINS: usize = 100;
/// Probability mass added to every histogram bin before renormalizing.
pub const SMOOTHING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataCategory {
    Github,
    Book,
    ArXiv,
    Wikipedia,
    StackExchange,
    Custom(String),
}

impl DataCategory {
    pub const CANONICAL: [DataCategory; 5] = [
        DataCategory::Github,
        DataCategory::Book,
        DataCategory::ArXiv,
        DataCategory::Wikipedia,
        DataCategory::StackExchange,
    ];

    pub fn name(&self) -> &str {
        match self {
            DataCategory::Github => "Github",
            DataCategory::Book => "Book",
            DataCategory::ArXiv => "ArXiv",
            DataCategory::Wikipedia => "Wikipedia",
            DataCategory::StackExchange => "StackExchange",
            DataCategory::Custom(s) => s,
        }
    }
}

impl fmt::Display for DataCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::invalid("empty data category"));
        }
        Ok(DataCategory::CANONICAL
            .iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .cloned()
            .unwrap_or_else(|| DataCategory::Custom(s.to_string())))
    }
}

impl Serialize for DataCategory {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DataCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbDoc {
    pub doc_id: String,
    pub category: DataCategory,
    pub model: String,
    /// Natural-log probabilities, one per token.
    pub logprobs: Vec<f64>,
}

impl TokenLogProbDoc {
    pub fn new(
        doc_id: impl Into<String>,
        category: DataCategory,
        model: impl Into<String>,
        logprobs: Vec<f64>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        if logprobs.is_empty() {
            return Err(Error::invalid(format!("document `{doc_id}` has no tokens")));
        }
        if let Some(v) = logprobs.iter().find(|v| !v.is_finite() || **v > 0.0) {
            return Err(Error::invalid(format!(
                "document `{doc_id}`: log-probability {v} is not a finite value <= 0"
            )));
        }
        Ok(TokenLogProbDoc {
            doc_id,
            category,
            model: model.into(),
            logprobs,
        })
    }
}

/// Logarithm base of the values in an input record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    fn to_natural(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::Ten => std::f64::consts::LN_10,
        }
    }
}

#[derive(Deserialize)]
struct DocLine {
    doc_id: String,
    category: DataCategory,
    model: String,
    base: LogBase,
    logprobs: Vec<f64>,
}

pub fn load_docs(path: impl AsRef<Path>) -> Result<Vec<TokenLogProbDoc>> {
    let path = path.as_ref();
    read_docs(open(path)?, path)
}

/// Reads line-delimited JSON records
/// `{"doc_id", "category", "model", "base": "e"|"2"|"10", "logprobs": [...]}`.
/// Values are converted to natural logarithms. Blank lines are skipped.
pub fn read_docs<R: Read>(rdr: R, source: &Path) -> Result<Vec<TokenLogProbDoc>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(rdr).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRow {
            path: source.to_path_buf(),
            line: i as u64 + 1,
            reason,
        };
        let rec: DocLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let k = rec.base.to_natural();
        let lp = rec.logprobs.iter().map(|v| v * k).collect();
        out.push(
            TokenLogProbDoc::new(rec.doc_id, rec.category, rec.model, lp)
                .map_err(|e| malformed(e.to_string()))?,
        );
    }
    if out.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    Ok(out)
}

pub fn write_docs<W: Write>(docs: &[TokenLogProbDoc], mut w: W) -> Result<()> {
    for d in docs {
        let v = serde_json::json!({
            "doc_id": d.doc_id,
            "category": d.category,
            "model": d.model,
            "base": LogBase::E,
            "logprobs": d.logprobs,
        });
        serde_json::to_writer(&mut w, &v)?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

/// Mean log-probability of the first `min(n, len)` tokens.
pub fn presence_score(doc: &TokenLogProbDoc, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("token limit must be at least 1"));
    }
    if doc.logprobs.is_empty() {
        return Err(Error::invalid(format!("document `{}` has no tokens", doc.doc_id)));
    }
    let m = n.min(doc.logprobs.len());
    Ok(doc.logprobs[..m].iter().sum::<f64>() / m as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    pub category: DataCategory,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single document.
    pub std: Option<f64>,
}

fn category_stats(scores: &[f64]) -> CategoryStats {
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| {
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    CategoryStats { count: n, mean, std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceScoreSet {
    pub model: String,
    pub token_limit: usize,
    pub docs: Vec<DocScore>,
    pub categories: BTreeMap<DataCategory, CategoryStats>,
}

impl PresenceScoreSet {
    pub fn scores(&self) -> Vec<f64> {
        self.docs.iter().map(|d| d.score).collect()
    }

    pub fn category_scores(&self, category: &DataCategory) -> Vec<f64> {
        self.docs
            .iter()
            .filter(|d| &d.category == category)
            .map(|d| d.score)
            .collect()
    }

    /// Same scores under another model id.
    pub fn aliased(&self, model: impl Into<String>) -> Self {
        PresenceScoreSet {
            model: model.into(),
            ..self.clone()
        }
    }
}

/// Scores every document of `model`, in input order, and summarizes each category.
pub fn score_set(docs: &[TokenLogProbDoc], model: &str, n: usize) -> Result<PresenceScoreSet> {
    if docs.is_empty() {
        return Err(Error::invalid("no documents to score"));
    }
    if let Some(d) = docs.iter().find(|d| d.model != model) {
        return Err(Error::invalid(format!(
            "document `{}` belongs to model `{}`, expected `{model}`",
            d.doc_id, d.model
        )));
    }
    let scored: Vec<DocScore> = docs
        .par_iter()
        .map(|d| {
            Ok(DocScore {
                doc_id: d.doc_id.clone(),
                category: d.category.clone(),
                score: presence_score(d, n)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut by_cat: BTreeMap<DataCategory, Vec<f64>> = BTreeMap::new();
    for d in &scored {
        by_cat.entry(d.category.clone()).or_default().push(d.score);
    }
    Ok(PresenceScoreSet {
        model: model.to_string(),
        token_limit: n,
        docs: scored,
        categories: by_cat.into_iter().map(|(c, s)| (c, category_stats(&s))).collect(),
    })
}

/// Splits a mixed-model document list and scores each model.
pub fn score_sets(docs: &[TokenLogProbDoc], n: usize) -> Result<BTreeMap<String, PresenceScoreSet>> {
    let mut by_model: BTreeMap<&str, Vec<TokenLogProbDoc>> = BTreeMap::new();
    for d in docs {
        by_model.entry(&d.model).or_default().push(d.clone());
    }
    by_model
        .into_iter()
        .map(|(m, ds)| Ok((m.to_string(), score_set(&ds, m, n)?)))
        .collect()
}

/// Category means in canonical order, named `presence_<category>`.
pub fn export_presence_features(set: &PresenceScoreSet) -> Result<Vec<(String, f64)>> {
    DataCategory::CANONICAL
        .iter()
        .map(|c| {
            let s = set
                .categories
                .get(c)
                .ok_or_else(|| Error::MissingCategory(c.name().to_string()))?;
            Ok((format!("presence_{}", c.name()), s.mean))
        })
        .collect()
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    /// Bins spanning the pooled range of all collections.
    pub fn spanning<'a>(collections: impl IntoIterator<Item = &'a [f64]>, bins: usize) -> Result<Binning> {
        if bins < 2 {
            return Err(Error::invalid("at least 2 bins are required"));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in collections {
            if c.is_empty() {
                return Err(Error::invalid("empty score collection"));
            }
            for &v in c {
                if !v.is_finite() {
                    return Err(Error::NonFinite("score".into()));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            return Err(Error::invalid("no score collections"));
        }
        Ok(Binning { lo, hi, bins })
    }

    pub fn index(&self, v: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let t = (v - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (t.max(0.0) as usize).min(self.bins - 1)
    }

    pub fn counts(&self, scores: &[f64]) -> Vec<u64> {
        scores
            .par_chunks(4096)
            .map(|chunk| {
                let mut c = vec![0u64; self.bins];
                for &v in chunk {
                    c[self.index(v)] += 1;
                }
                c
            })
            .reduce(
                || vec![0u64; self.bins],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    }

    /// Smoothed, normalized histogram.
    pub fn distribution(&self, scores: &[f64]) -> Vec<f64> {
        let counts = self.counts(scores);
        let n = scores.len() as f64;
        let z = 1.0 + self.bins as f64 * SMOOTHING;
        counts.iter().map(|&c| (c as f64 / n + SMOOTHING) / z).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub model: String,
    pub binning: Binning,
    pub counts: Vec<u64>,
}

// Symmetric in (p, q) term by term, so swapping the arguments gives
// bit-identical sums.
fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        s += 0.5 * (a * (a / m).log2() + b * (b / m).log2());
    }
    s
}

/// Jensen-Shannon distance (base 2, square root) between two histograms.
pub fn jsd_distributions(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(js_divergence(p, q).clamp(0.0, 1.0).sqrt())
}

pub fn jsd_with(a: &[f64], b: &[f64], binning: &Binning) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("empty score collection"));
    }
    jsd_distributions(&binning.distribution(a), &binning.distribution(b))
}

/// Distance between two score collections, binned over their pooled range.
pub fn jsd(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    let binning = Binning::spanning([a, b], bins)?;
    jsd_with(a, b, &binning)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdMatrix {
    pub models: Vec<String>,
    pub binning: Binning,
    pub values: Vec<Vec<f64>>,
}

/// Pairwise distances between per-model score collections, all binned on
/// one global range.
pub fn jsd_matrix(sets: &[(String, Vec<f64>)], bins: usize) -> Result<JsdMatrix> {
    if sets.len() < 2 {
        return Err(Error::invalid("a distance matrix needs at least 2 models"));
    }
    let binning = Binning::spanning(sets.iter().map(|(_, s)| s.as_slice()), bins)?;
    let dists: Vec<Vec<f64>> = sets.par_iter().map(|(_, s)| binning.distribution(s)).collect();
    let k = sets.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = jsd_distributions(&dists[i], &dists[j])?;
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    Ok(JsdMatrix {
        models: sets.iter().map(|(m, _)| m.clone()).collect(),
        binning,
        values,
    })
}

/// Models that reuse another model's score set, e.g. family members
/// trained on the same pre-training tokens.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AliasTable {
    aliases: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: impl Into<String>, source: impl Into<String>) -> Result<()> {
        let (alias, source) = (alias.into(), source.into());
        if alias == source || self.aliases.contains_key(&source) {
            return Err(Error::invalid(format!("alias `{alias}` -> `{source}` would chain or loop")));
        }
        if self.aliases.values().any(|s| *s == alias) {
            return Err(Error::invalid(format!("`{alias}` is already an alias source")));
        }
        self.aliases.insert(alias, source);
        Ok(())
    }

    pub fn resolve<'a>(&'a self, model: &'a str) -> &'a str {
        self.aliases.get(model).map_or(model, |s| s)
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    /// Adds an entry for every alias whose source has a score set.
    pub fn expand(&self, sets: &BTreeMap<String, PresenceScoreSet>) -> Result<BTreeMap<String, PresenceScoreSet>> {
        let mut out = sets.clone();
        for (alias, source) in &self.aliases {
            if out.contains_key(alias) {
                return Err(Error::DuplicateId { id: alias.clone() });
            }
            let set = sets.get(source).ok_or_else(|| Error::MissingModel(source.clone()))?;
            out.insert(alias.clone(), set.aliased(alias.clone()));
        }
        Ok(out)
    }
}

pub fn load_aliases(path: impl AsRef<Path>) -> Result<AliasTable> {
    let path = path.as_ref();
    read_aliases(open(path)?, path)
}

/// CSV with columns `alias, source`.
pub fn read_aliases<R: Read>(rdr: R, source: &Path) -> Result<AliasTable> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers()?.clone();
    let (Some(ai), Some(si)) = (header_index(&headers, "alias"), header_index(&headers, "source")) else {
        return Err(Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: "expected columns `alias, source`".into(),
        });
    };
    let mut table = AliasTable::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Some(a), Some(s)) = (rec.get(ai), rec.get(si)) else {
            return Err(Error::MalformedRow {
                path: source.to_path_buf(),
                line: line_of(&rec),
                reason: "missing alias or source".into(),
            });
        };
        table.insert(a, s)?;
    }
    Ok(table)
}

pub fn write_scores_csv<W: Write>(set: &PresenceScoreSet, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "doc_id", "category", "score"])?;
    for d in &set.docs {
        wtr.write_record([&set.model, &d.doc_id, d.category.name(), &d.score.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn write_matrix_csv<W: Write>(m: &JsdMatrix, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["model".to_string()];
    header.extend(m.models.iter().cloned());
    wtr.write_record(&header)?;
    for (name, row) in m.models.iter().zip(&m.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn doc(id: &str, cat: DataCategory, lp: Vec<f64>) -> TokenLogProbDoc {
        TokenLogProbDoc::new(id, cat, "m", lp).unwrap()
    }

    fn gaussian(n: usize, mu: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn presence_cases() {
        let d = doc("a", DataCategory::Book, vec![-1.0; 37]);
        assert_eq!(presence_score(&d, 2048).unwrap(), -1.0);
        assert_eq!(presence_score(&d, 5).unwrap(), -1.0);
        let mut lp = vec![-0.5; 2048];
        lp.extend(vec![-5.0; 2048]);
        let d = doc("b", DataCategory::Book, lp);
        assert_eq!(presence_score(&d, 2048).unwrap(), -0.5);
        assert!(presence_score(&d, 0).is_err());
        assert!(TokenLogProbDoc::new("e", DataCategory::Book, "m", vec![]).is_err());
        assert!(TokenLogProbDoc::new("e", DataCategory::Book, "m", vec![0.1]).is_err());
    }

    #[test]
    fn presence_matches_prefix_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lp: Vec<f64> = (0..3000).map(|_| -rng.random_range(0.0..8.0)).collect();
        let mut prefix = vec![0.0];
        for v in &lp {
            prefix.push(prefix.last().unwrap() + v);
        }
        let d = doc("r", DataCategory::ArXiv, lp);
        for n in [1, 7, 2048, 3000, 5000] {
            let m = n.min(3000);
            assert!((presence_score(&d, n).unwrap() - prefix[m] / m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn set_stats() {
        let docs: Vec<TokenLogProbDoc> = DataCategory::CANONICAL
            .iter()
            .map(|c| doc(c.name(), c.clone(), vec![-1.0; 10]))
            .collect();
        let s = score_set(&docs, "m", 2048).unwrap();
        assert!(s.categories.values().all(|c| c.mean == -1.0));
        assert_eq!(export_presence_features(&s).unwrap().iter().map(|x| x.1).collect::<Vec<_>>(), vec![-1.0; 5]);

        let two = vec![
            doc("x", DataCategory::Github, vec![-1.0]),
            doc("y", DataCategory::Github, vec![-3.0]),
        ];
        let s = score_set(&two, "m", 2048).unwrap();
        let g = &s.categories[&DataCategory::Github];
        assert_eq!(g.mean, -2.0);
        assert!((g.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        match export_presence_features(&s) {
            Err(Error::MissingCategory(c)) => assert_eq!(c, "Book"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_models_rejected() {
        let mut d = doc("x", DataCategory::Github, vec![-1.0]);
        d.model = "other".into();
        assert!(score_set(&[doc("y", DataCategory::Github, vec![-1.0]), d], "m", 10).is_err());
    }

    #[test]
    fn stats_match_streaming_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let docs: Vec<TokenLogProbDoc> = (0..10_000)
            .map(|i| {
                let c = DataCategory::CANONICAL[i % 5].clone();
                let len = rng.random_range(1..60);
                doc(&i.to_string(), c, (0..len).map(|_| -rng.random_range(0.0..6.0)).collect())
            })
            .collect();
        let s = score_set(&docs, "m", 32).unwrap();
        for c in DataCategory::CANONICAL.iter() {
            // Welford
            let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for d in docs.iter().filter(|d| &d.category == c) {
                let m = d.logprobs.len().min(32);
                let x = d.logprobs[..m].iter().sum::<f64>() / m as f64;
                n += 1.0;
                let delta = x - mean;
                mean += delta / n;
                m2 += delta * (x - mean);
            }
            let st = &s.categories[c];
            assert!((st.mean - mean).abs() < 1e-9);
            assert!((st.std.unwrap() - (m2 / (n - 1.0)).sqrt()).abs() < 1e-9);
        }
        let feats = export_presence_features(&s).unwrap();
        for (f, c) in feats.iter().zip(DataCategory::CANONICAL.iter()) {
            assert_eq!(f.1, s.categories[c].mean);
        }
    }

    #[test]
    fn jsd_cases() {
        let a = gaussian(500, -2.0, 0.5, 3);
        assert_eq!(jsd(&a, &a, 100).unwrap(), 0.0);
        let d = jsd(&vec![-1.0; 50], &vec![-9.0; 80], 10).unwrap();
        assert!((1.0 - 1e-6..=1.0).contains(&d), "{d}");
        assert!(jsd(&[], &a, 10).is_err());
        assert!(jsd(&a, &a, 1).is_err());
        assert_eq!(jsd(&[-1.0, -1.0], &[-1.0], 10).unwrap(), 0.0);
    }

    #[test]
    fn jsd_matches_kl_oracle() {
        let a = gaussian(2000, -2.0, 0.6, 4);
        let b = gaussian(3000, -2.4, 0.9, 5);
        let bins = 40;
        let lo = a.iter().chain(&b).cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().chain(&b).cloned().fold(f64::NEG_INFINITY, f64::max);
        let hist = |xs: &[f64]| {
            let mut c = vec![0.0; bins];
            for &x in xs {
                let i = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
                c[i.min(bins - 1)] += 1.0;
            }
            let n = xs.len() as f64;
            let p: Vec<f64> = c.iter().map(|v| v / n + 1e-12).collect();
            let z: f64 = p.iter().sum();
            p.iter().map(|v| v / z).collect::<Vec<f64>>()
        };
        let (p, q) = (hist(&a), hist(&b));
        let m: Vec<f64> = p.iter().zip(&q).map(|(x, y)| (x + y) / 2.0).collect();
        let kl = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * (u / v).ln()).sum::<f64>();
        let js = (0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)) / std::f64::consts::LN_2;
        assert!((jsd(&a, &b, bins).unwrap() - js.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn matrix_properties() {
        let sets = vec![
            ("a".to_string(), gaussian(300, -2.0, 0.5, 6)),
            ("b".to_string(), gaussian(300, -2.5, 0.5, 7)),
            ("c".to_string(), gaussian(300, -1.0, 1.0, 8)),
            ("a2".to_string(), gaussian(300, -2.0, 0.5, 6)),
        ];
        let m = jsd_matrix(&sets, 50).unwrap();
        for i in 0..4 {
            assert_eq!(m.values[i][i], 0.0);
            for j in 0..4 {
                assert_eq!(m.values[i][j], m.values[j][i]);
                assert!((0.0..=1.0).contains(&m.values[i][j]));
                let direct = jsd_with(&sets[i].1, &sets[j].1, &m.binning).unwrap();
                assert_eq!(m.values[i][j], direct);
            }
        }
        assert_eq!(m.values[0][3], 0.0);
        assert!(jsd_matrix(&sets[..1], 10).is_err());
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for t in 0..100 {
            let mk = |s: u64, rng: &mut ChaCha8Rng| {
                gaussian(200, rng.random_range(-4.0..-1.0), rng.random_range(0.2..1.5), s)
            };
            let (a, b, c) = (mk(3 * t, &mut rng), mk(3 * t + 1, &mut rng), mk(3 * t + 2, &mut rng));
            let bin = Binning::spanning([a.as_slice(), b.as_slice(), c.as_slice()], 30).unwrap();
            let ab = jsd_with(&a, &b, &bin).unwrap();
            let bc = jsd_with(&b, &c, &bin).unwrap();
            let ac = jsd_with(&a, &c, &bin).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn jsonl_bases_convert() {
        let text = r#"{"doc_id":"d1","category":"github","model":"m","base":"2","logprobs":[-1.0,-2.0]}

{"doc_id":"d2","category":"Books3","model":"m","base":"e","logprobs":[-0.5]}
"#;
        let docs = read_docs(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(docs[0].category, DataCategory::Github);
        assert_eq!(docs[0].logprobs, vec![-std::f64::consts::LN_2, -2.0 * std::f64::consts::LN_2]);
        assert_eq!(docs[1].category, DataCategory::Custom("Books3".into()));
        let missing_base = r#"{"doc_id":"d1","category":"Book","model":"m","logprobs":[-1.0]}"#;
        assert!(read_docs(missing_base.as_bytes(), Path::new("mem")).is_err());
        let mut buf = Vec::new();
        write_docs(&docs, &mut buf).unwrap();
        assert_eq!(read_docs(buf.as_slice(), Path::new("mem")).unwrap(), docs);
    }

    #[test]
    fn aliases_share_scores() {
        let docs: Vec<TokenLogProbDoc> = (0..20)
            .map(|i| doc(&i.to_string(), DataCategory::CANONICAL[i % 5].clone(), vec![-(i as f64) / 10.0 - 0.1]))
            .collect();
        let mut sets = BTreeMap::new();
        sets.insert("m".to_string(), score_set(&docs, "m", 2048).unwrap());
        let mut t = read_aliases("alias,source\nm-instruct,m\n".as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(t.resolve("m-instruct"), "m");
        assert_eq!(t.resolve("m"), "m");
        let all = t.expand(&sets).unwrap();
        assert_eq!(all["m-instruct"].docs, all["m"].docs);
        assert_eq!(
            export_presence_features(&all["m-instruct"]).unwrap(),
            export_presence_features(&all["m"]).unwrap()
        );
        assert!(t.insert("x", "m-instruct").is_err());
        t.insert("ghost", "nobody").unwrap();
        assert!(t.expand(&sets).is_err());
    }

    proptest! {
        #[test]
        fn truncation_invariance(
            head in prop::collection::vec(-10.0f64..0.0, 1..40),
            tail in prop::collection::vec(-10.0f64..0.0, 0..40),
        ) {
            let n = head.len();
            let a = doc("a", DataCategory::Book, head.clone());
            let mut long = head;
            long.extend(tail);
            let b = doc("b", DataCategory::Book, long);
            prop_assert_eq!(presence_score(&a, n).unwrap(), presence_score(&b, n).unwrap());
            prop_assert!(presence_score(&b, n).unwrap() <= 0.0);
        }

        #[test]
        fn jsd_symmetric_and_bounded(
            a in prop::collection::vec(-20.0f64..0.0, 1..60),
            b in prop::collection::vec(-20.0f64..0.0, 1..60),
            bins in 2usize..64,
        ) {
            let ab = jsd(&a, &b, bins).unwrap();
            let ba = jsd(&b, &a, bins).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(jsd(&a, &a, bins).unwrap(), 0.0);
        }
    }
}
