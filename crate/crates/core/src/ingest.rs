//! Data model and loaders.
//!
//! All tables are comma-separated UTF-8 with a header row. Lines starting
//! with `#` are treated as comments so that files written by this crate
//! (which carry a metadata header) can be read back unchanged.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Release date at month granularity, written `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: u16,
    pub month: u8,
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got `{s}`"))?;
        let year: u16 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month: u8 = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in `{s}`"));
        }
        Ok(YearMonth { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Metadata for one LLM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    pub publisher: String,
    /// Billions of parameters.
    pub params_b: f64,
    /// Trillions of pre-training tokens.
    pub pretrain_tokens_t: f64,
    pub release_date: YearMonth,
    /// Retained from the source table, unused by any analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downloads: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likes: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SizeGroup {
    /// Below 3B parameters.
    Small,
    /// At least 3B and below 6B.
    Medium,
    /// 6B and above.
    Large,
}

impl SizeGroup {
    pub const ALL: [SizeGroup; 3] = [SizeGroup::Small, SizeGroup::Medium, SizeGroup::Large];

    pub fn label(self) -> &'static str {
        match self {
            SizeGroup::Small => "SMALL",
            SizeGroup::Medium => "MEDIUM",
            SizeGroup::Large => "LARGE",
        }
    }
}

impl fmt::Display for SizeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Half-open intervals `[0, 3)`, `[3, 6)`, `[6, inf)` in billions of parameters.
pub fn size_group(params_b: f64) -> Result<SizeGroup> {
    if !(params_b > 0.0) || !params_b.is_finite() {
        return Err(Error::invalid(format!(
            "parameter count must be positive and finite, got {params_b}"
        )));
    }
    Ok(if params_b < 3.0 {
        SizeGroup::Small
    } else if params_b < 6.0 {
        SizeGroup::Medium
    } else {
        SizeGroup::Large
    })
}

/// RewardBench category, plus the aggregate overall score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Chat,
    ChatHard,
    Safety,
    Reasoning,
    Overall,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Chat,
        Category::ChatHard,
        Category::Safety,
        Category::Reasoning,
        Category::Overall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Chat => "chat",
            Category::ChatHard => "chat_hard",
            Category::Safety => "safety",
            Category::Reasoning => "reasoning",
            Category::Overall => "overall",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s.trim().to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::invalid(format!("unknown category `{s}`")))
    }
}

/// Overall deviation tolerated against the category mean (one-decimal rounding).
pub const OVERALL_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBenchScores {
    pub chat: f64,
    pub chat_hard: f64,
    pub safety: f64,
    pub reasoning: f64,
    pub overall: f64,
}

impl RewardBenchScores {
    pub fn get(&self, category: Category) -> f64 {
        match category {
            Category::Chat => self.chat,
            Category::ChatHard => self.chat_hard,
            Category::Safety => self.safety,
            Category::Reasoning => self.reasoning,
            Category::Overall => self.overall,
        }
    }

    pub fn category_mean(&self) -> f64 {
        (self.chat + self.chat_hard + self.safety + self.reasoning) / 4.0
    }

    /// Float-level consistency check; file loaders use exact decimal arithmetic instead.
    pub fn is_consistent(&self) -> bool {
        (self.overall - self.category_mean()).abs() <= OVERALL_TOLERANCE + 1e-9
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RewardBenchScores {
            chat: self.chat * factor,
            chat_hard: self.chat_hard * factor,
            safety: self.safety * factor,
            reasoning: self.reasoning * factor,
            overall: self.overall * factor,
        }
    }
}

pub type RewardBenchTable = BTreeMap<String, RewardBenchScores>;

/// Dense models x metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    rows: Vec<String>,
    columns: Vec<String>,
    topics: Vec<Option<String>>,
    /// Row-major.
    values: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<String>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        ensure_unique(&rows)?;
        ensure_unique(&columns)?;
        if values.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: values.len(),
            });
        }
        for row in &values {
            if row.len() != columns.len() {
                return Err(Error::LengthMismatch {
                    left: columns.len(),
                    right: row.len(),
                });
            }
        }
        let topics = vec![None; columns.len()];
        Ok(ScoreMatrix {
            rows,
            columns,
            topics,
            values,
        })
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn topics(&self) -> &[Option<String>] {
        &self.topics
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row][col]
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[row]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[col]).collect()
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == id)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column as an id -> value mapping.
    pub fn column_map(&self, col: usize) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .cloned()
            .zip(self.values.iter().map(|r| r[col]))
            .collect()
    }

    pub fn topic(&self, col: usize) -> Option<&str> {
        self.topics[col].as_deref()
    }

    /// Tags columns from a metric -> topic mapping. Metrics absent from the
    /// mapping stay untagged; mapping entries for absent metrics are ignored.
    pub fn apply_topics(&mut self, topics: &BTreeMap<String, String>) {
        for (slot, name) in self.topics.iter_mut().zip(&self.columns) {
            if let Some(t) = topics.get(name) {
                *slot = Some(t.clone());
            }
        }
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, ids: &[String]) -> Result<ScoreMatrix> {
        let mut values = Vec::with_capacity(ids.len());
        for id in ids {
            let i = self
                .row_index(id)
                .ok_or_else(|| Error::MissingModel(id.clone()))?;
            values.push(self.values[i].clone());
        }
        Ok(ScoreMatrix {
            rows: ids.to_vec(),
            columns: self.columns.clone(),
            topics: self.topics.clone(),
            values,
        })
    }

    /// Appends a column.
    pub fn with_column(&self, name: &str, topic: Option<&str>, values: &[f64]) -> Result<Self> {
        if values.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                left: self.rows.len(),
                right: values.len(),
            });
        }
        if self.column_index(name).is_some() {
            return Err(Error::DuplicateId { id: name.into() });
        }
        let mut out = self.clone();
        out.columns.push(name.into());
        out.topics.push(topic.map(str::to_owned));
        for (row, v) in out.values.iter_mut().zip(values) {
            row.push(*v);
        }
        Ok(out)
    }
}

fn ensure_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId { id: id.clone() });
        }
    }
    Ok(())
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(rdr)
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub(crate) fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

/// Exact fixed-point form of a plain decimal literal: `mantissa * 10^-scale`.
fn parse_decimal(s: &str) -> Option<(i128, u32)> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 18 {
        return None;
    }
    let digits: String = [int, frac].concat();
    let m: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    Some((if neg { -m } else { m }, frac.len() as u32))
}

fn rescale((m, s): (i128, u32), to: u32) -> i128 {
    m * 10i128.pow(to - s)
}

/// `|overall - mean(categories)| <= 0.05`, evaluated exactly on the decimal literals.
fn decimal_consistent(cats: &[(i128, u32); 4], overall: (i128, u32)) -> bool {
    let scale = cats.iter().map(|c| c.1).chain([overall.1, 2]).max().unwrap_or(2);
    let sum: i128 = cats.iter().map(|&c| rescale(c, scale)).sum();
    let four_overall = 4 * rescale(overall, scale);
    // 4 * 0.05 = 0.2 at the common scale
    let tol = 2 * 10i128.pow(scale - 1);
    (four_overall - sum).abs() <= tol
}

/// Loads model metadata. Required columns: `id, publisher, params_b,
/// pretrain_tokens_t, release_date`; `downloads` and `likes` are optional.
pub fn load_model_records(path: impl AsRef<Path>) -> Result<Vec<ModelRecord>> {
    let path = path.as_ref();
    read_model_records(open(path)?, path)
}

pub fn read_model_records<R: Read>(rdr: R, source: &Path) -> Result<Vec<ModelRecord>> {
    let mut rdr = csv_reader(rdr);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        _ => {
            return Err(Error::NoRecords {
                path: source.to_path_buf(),
            })
        }
    };
    let required = ["id", "publisher", "params_b", "pretrain_tokens_t", "release_date"];
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(required) {
        *slot = header_index(&headers, name).ok_or_else(|| Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: format!("missing column `{name}`"),
        })?;
    }
    let downloads = header_index(&headers, "downloads");
    let likes = header_index(&headers, "likes");

    let mut out: Vec<ModelRecord> = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let malformed = |reason: String| Error::MalformedRow {
            path: source.to_path_buf(),
            line,
            reason,
        };
        if rec.len() != headers.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                headers.len(),
                rec.len()
            )));
        }
        let id = rec[idx[0]].to_string();
        if id.is_empty() {
            return Err(malformed("empty id".into()));
        }
        let num = |i: usize, field: &str| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| malformed(format!("{field} is not a number: `{}`", &rec[i])))
        };
        let params_b = num(idx[2], "params_b")?;
        let pretrain_tokens_t = num(idx[3], "pretrain_tokens_t")?;
        let release_date: YearMonth = rec[idx[4]].parse().map_err(malformed)?;
        for (field, value) in [("params_b", params_b), ("pretrain_tokens_t", pretrain_tokens_t)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositive {
                    id: id.clone(),
                    field,
                    value,
                });
            }
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        out.push(ModelRecord {
            id,
            publisher: rec[idx[1]].to_string(),
            params_b,
            pretrain_tokens_t,
            release_date,
            downloads: downloads.map(|i| rec[i].to_string()),
            likes: likes.map(|i| rec[i].to_string()),
        });
    }
    if out.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    Ok(out)
}

pub fn write_model_records<W: Write>(records: &[ModelRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "id",
        "publisher",
        "params_b",
        "pretrain_tokens_t",
        "release_date",
        "downloads",
        "likes",
    ])?;
    for r in records {
        wtr.write_record([
            r.id.clone(),
            r.publisher.clone(),
            r.params_b.to_string(),
            r.pretrain_tokens_t.to_string(),
            r.release_date.to_string(),
            r.downloads.clone().unwrap_or_default(),
            r.likes.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Loads a dense score matrix. The first column holds model ids, the header
/// names the metrics. Every missing cell is reported at once.
pub fn load_score_matrix(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    read_score_matrix(open(path)?, path)
}

pub fn read_score_matrix<R: Read>(rdr: R, source: &Path) -> Result<ScoreMatrix> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: "header needs a model column and at least one metric".into(),
        });
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::RaggedRow {
                line: line_of(&rec),
                expected: headers.len(),
                found: rec.len(),
            });
        }
        let id = rec[0].to_string();
        let mut row = Vec::with_capacity(columns.len());
        for (cell, col) in rec.iter().skip(1).zip(&columns) {
            if cell.is_empty() {
                missing.push((id.clone(), col.clone()));
                row.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row: id.clone(),
                column: col.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: id.clone(),
                    column: col.clone(),
                    value: cell.to_string(),
                });
            }
            row.push(v);
        }
        rows.push(id);
        values.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells { cells: missing });
    }
    if rows.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    ScoreMatrix::new(rows, columns, values)
}

/// Writes values with Rust's shortest round-trip float formatting, so that
/// reading the file back yields bit-identical values.
pub fn write_score_matrix<W: Write>(m: &ScoreMatrix, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["model".to_string()];
    header.extend(m.columns.iter().cloned());
    wtr.write_record(&header)?;
    for (id, row) in m.rows.iter().zip(&m.values) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Two-column `metric,topic` sidecar.
pub fn load_topic_sidecar(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    read_topic_sidecar(open(path)?, path)
}

pub fn read_topic_sidecar<R: Read>(rdr: R, source: &Path) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv_reader(rdr);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::MalformedRow {
                path: source.to_path_buf(),
                line: line_of(&rec),
                reason: format!("expected `metric,topic`, found {} fields", rec.len()),
            });
        }
        if out.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
            return Err(Error::DuplicateId {
                id: rec[0].to_string(),
            });
        }
    }
    Ok(out)
}

/// Loads `model,chat,chat_hard,safety,reasoning,overall` and checks every
/// overall against the category mean using exact decimal arithmetic.
pub fn load_rewardbench(path: impl AsRef<Path>) -> Result<RewardBenchTable> {
    let path = path.as_ref();
    read_rewardbench(open(path)?, path)
}

pub fn read_rewardbench<R: Read>(rdr: R, source: &Path) -> Result<RewardBenchTable> {
    Ok(read_scored_rows(rdr, source, None)?
        .into_iter()
        .map(|(id, _, s)| (id, s))
        .collect())
}

/// Rows of `model[,role],chat,chat_hard,safety,reasoning,overall` in file order.
fn read_scored_rows<R: Read>(
    rdr: R,
    source: &Path,
    role_column: Option<&str>,
) -> Result<Vec<(String, String, RewardBenchScores)>> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers()?.clone();
    let names = ["chat", "chat_hard", "safety", "reasoning", "overall"];
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = header_index(&headers, name).ok_or_else(|| Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: format!("missing column `{name}`"),
        })?;
    }
    let role_idx = match role_column {
        Some(name) => Some(header_index(&headers, name).ok_or_else(|| Error::MalformedRow {
            path: source.to_path_buf(),
            line: 1,
            reason: format!("missing column `{name}`"),
        })?),
        None => None,
    };

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != headers.len() {
            return Err(Error::RaggedRow {
                line,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        let id = rec[0].to_string();
        let mut dec = [(0i128, 0u32); 5];
        let mut val = [0f64; 5];
        for k in 0..5 {
            let cell = &rec[idx[k]];
            let bad = || Error::NonNumericCell {
                row: id.clone(),
                column: names[k].into(),
                value: cell.to_string(),
            };
            dec[k] = parse_decimal(cell).ok_or_else(bad)?;
            val[k] = cell.parse().map_err(|_| bad())?;
        }
        let scores = RewardBenchScores {
            chat: val[0],
            chat_hard: val[1],
            safety: val[2],
            reasoning: val[3],
            overall: val[4],
        };
        if !decimal_consistent(&[dec[0], dec[1], dec[2], dec[3]], dec[4]) {
            return Err(Error::InconsistentOverall {
                model: id,
                overall: scores.overall,
                mean: scores.category_mean(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        let role = role_idx.map(|i| rec[i].to_string()).unwrap_or_default();
        out.push((id, role, scores));
    }
    if out.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    Ok(out)
}

pub fn write_rewardbench<W: Write>(table: &RewardBenchTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "chat", "chat_hard", "safety", "reasoning", "overall"])?;
    for (id, s) in table {
        wtr.write_record([
            id.clone(),
            s.chat.to_string(),
            s.chat_hard.to_string(),
            s.safety.to_string(),
            s.reasoning.to_string(),
            s.overall.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// A base checkpoint and its ordered post-training stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostTrainingTable {
    pub base_id: String,
    pub base: RewardBenchScores,
    pub stages: Vec<(String, RewardBenchScores)>,
}

/// Loads `model,role,chat,...,overall` where exactly one row has role `base`.
pub fn load_post_training(path: impl AsRef<Path>) -> Result<PostTrainingTable> {
    let path = path.as_ref();
    read_post_training(open(path)?, path)
}

pub fn read_post_training<R: Read>(rdr: R, source: &Path) -> Result<PostTrainingTable> {
    let rows = read_scored_rows(rdr, source, Some("role"))?;
    let mut base = None;
    let mut stages = Vec::new();
    for (id, role, scores) in rows {
        match role.as_str() {
            "base" if base.is_none() => base = Some((id, scores)),
            "base" => return Err(Error::invalid("more than one base row")),
            "stage" => stages.push((id, scores)),
            other => return Err(Error::invalid(format!("unknown role `{other}` for `{id}`"))),
        }
    }
    let (base_id, base) = base.ok_or_else(|| Error::invalid("no base row"))?;
    Ok(PostTrainingTable {
        base_id,
        base,
        stages,
    })
}

/// The appendix tables bundled with the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    pub models: Vec<ModelRecord>,
    pub regression: RewardBenchTable,
    pub bradley_terry: RewardBenchTable,
    pub post_training: PostTrainingTable,
}

pub mod fixture_data {
    pub const MODELS: &str = include_str!("../data/models.csv");
    pub const REWARDBENCH_REGRESSION: &str = include_str!("../data/rewardbench_regression.csv");
    pub const REWARDBENCH_BRADLEY_TERRY: &str =
        include_str!("../data/rewardbench_bradley_terry.csv");
    pub const POST_TRAINING: &str = include_str!("../data/post_training.csv");
    /// Delta percentages as printed in the post-training table.
    pub const POST_TRAINING_DELTAS_PRINTED: &str =
        include_str!("../data/post_training_deltas_printed.csv");
    pub const BENCHMARK_TOPICS: &str = include_str!("../data/benchmark_topics.csv");
}

impl FixtureSet {
    /// Parses the bundled tables through the same validating loaders used for files.
    pub fn bundled() -> Result<FixtureSet> {
        use fixture_data::*;
        Ok(FixtureSet {
            models: read_model_records(MODELS.as_bytes(), Path::new("models.csv"))?,
            regression: read_rewardbench(
                REWARDBENCH_REGRESSION.as_bytes(),
                Path::new("rewardbench_regression.csv"),
            )?,
            bradley_terry: read_rewardbench(
                REWARDBENCH_BRADLEY_TERRY.as_bytes(),
                Path::new("rewardbench_bradley_terry.csv"),
            )?,
            post_training: read_post_training(
                POST_TRAINING.as_bytes(),
                Path::new("post_training.csv"),
            )?,
        })
    }

    pub fn benchmark_topics() -> Result<BTreeMap<String, String>> {
        read_topic_sidecar(
            fixture_data::BENCHMARK_TOPICS.as_bytes(),
            Path::new("benchmark_topics.csv"),
        )
    }

    pub fn rewardbench(&self, method: Method) -> &RewardBenchTable {
        match method {
            Method::Regression => &self.regression,
            Method::BradleyTerry => &self.bradley_terry,
        }
    }
}

/// Reward-model training method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BradleyTerry,
    Regression,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::BradleyTerry, Method::Regression];

    pub fn name(self) -> &'static str {
        match self {
            Method::BradleyTerry => "bradley-terry",
            Method::Regression => "regression",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bt" | "bradley-terry" | "bradley_terry" => Ok(Method::BradleyTerry),
            "regression" | "reg" => Ok(Method::Regression),
            _ => Err(Error::invalid(format!("unknown method `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn parses_model_row() {
        let csv = "id,publisher,params_b,pretrain_tokens_t,release_date\n\
                   Phi-3.5-mini-instruct, Microsoft, 3.82, 3.4, 2024-08\n";
        let recs = read_model_records(csv.as_bytes(), p()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].params_b, 3.82);
        assert_eq!(recs[0].pretrain_tokens_t, 3.4);
        assert_eq!(recs[0].release_date, YearMonth { year: 2024, month: 8 });
        assert_eq!(recs[0].publisher, "Microsoft");
    }

    #[test]
    fn empty_model_file_has_no_records() {
        assert!(matches!(
            read_model_records("".as_bytes(), p()),
            Err(Error::NoRecords { .. })
        ));
        let header_only = "id,publisher,params_b,pretrain_tokens_t,release_date\n";
        assert!(matches!(
            read_model_records(header_only.as_bytes(), p()),
            Err(Error::NoRecords { .. })
        ));
    }

    #[test]
    fn duplicate_model_id() {
        let csv = "id,publisher,params_b,pretrain_tokens_t,release_date\n\
                   gemma-2-9b-it,Google,9.24,8.0,2024-06\n\
                   gemma-2-9b-it,Google,9.24,8.0,2024-06\n";
        match read_model_records(csv.as_bytes(), p()) {
            Err(Error::DuplicateId { id }) => assert_eq!(id, "gemma-2-9b-it"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_positive_and_malformed() {
        let csv = "id,publisher,params_b,pretrain_tokens_t,release_date\nm,P,0,1,2024-01\n";
        assert!(matches!(
            read_model_records(csv.as_bytes(), p()),
            Err(Error::NonPositive { field: "params_b", .. })
        ));
        let csv = "id,publisher,params_b,pretrain_tokens_t,release_date\nm,P,1,-2,2024-01\n";
        assert!(matches!(
            read_model_records(csv.as_bytes(), p()),
            Err(Error::NonPositive {
                field: "pretrain_tokens_t",
                ..
            })
        ));
        let csv = "id,publisher,params_b,pretrain_tokens_t,release_date\nm,P,abc,1,2024-01\n";
        assert!(matches!(
            read_model_records(csv.as_bytes(), p()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let csv = "id,publisher,params_b,pretrain_tokens_t,release_date\nm,P,1,1\n";
        assert!(matches!(
            read_model_records(csv.as_bytes(), p()),
            Err(Error::MalformedRow { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_kind() {
        let err = load_model_records("/nonexistent/models.csv").unwrap_err();
        assert!(matches!(err, Error::FileNotFound { .. }));
        assert_eq!(err.kind(), crate::ErrorKind::Io);
    }

    #[test]
    fn size_group_boundaries() {
        assert_eq!(size_group(2.61).unwrap(), SizeGroup::Small);
        assert_eq!(size_group(3.21).unwrap(), SizeGroup::Medium);
        assert_eq!(size_group(8.03).unwrap(), SizeGroup::Large);
        assert_eq!(size_group(3.0).unwrap(), SizeGroup::Medium);
        assert_eq!(size_group(6.0).unwrap(), SizeGroup::Large);
        assert_eq!(size_group(2.999_999).unwrap(), SizeGroup::Small);
        assert!(size_group(0.0).is_err());
        assert!(size_group(-1.0).is_err());
        assert!(size_group(f64::NAN).is_err());
    }

    #[test]
    fn small_matrix() {
        let csv = "model,a,b\nm1,1,2\nm2,3,4\n";
        let m = read_score_matrix(csv.as_bytes(), p()).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 2));
        assert_eq!(m.value(1, 0), 3.0);
        assert_eq!(m.column(1), vec![2.0, 4.0]);
    }

    #[test]
    fn matrix_errors() {
        let csv = "model,a,b\nm1,1,n/a\n";
        match read_score_matrix(csv.as_bytes(), p()) {
            Err(Error::NonNumericCell { row, column, value }) => {
                assert_eq!((row.as_str(), column.as_str(), value.as_str()), ("m1", "b", "n/a"))
            }
            other => panic!("{other:?}"),
        }
        let csv = "model,a,b\nm1,1\n";
        assert!(matches!(
            read_score_matrix(csv.as_bytes(), p()),
            Err(Error::RaggedRow { expected: 3, found: 2, .. })
        ));
        let csv = "model,a,b\nm1,,2\nm2,3,\n";
        match read_score_matrix(csv.as_bytes(), p()) {
            Err(Error::MissingCells { cells }) => assert_eq!(
                cells,
                vec![("m1".into(), "a".into()), ("m2".into(), "b".into())]
            ),
            other => panic!("{other:?}"),
        }
        let csv = "model,a,a\nm1,1,2\n";
        assert!(matches!(
            read_score_matrix(csv.as_bytes(), p()),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn rewardbench_rows() {
        let csv = "model,chat,chat_hard,safety,reasoning,overall\n\
                   gemma-2-9b-it,95.8,74.1,88.4,94.3,88.1\n\
                   Qwen2.5-7B-Instruct,90.5,61.8,78.1,74.1,76.1\n";
        let t = read_rewardbench(csv.as_bytes(), p()).unwrap();
        assert_eq!(t["gemma-2-9b-it"].overall, 88.1);
        assert!((t["Qwen2.5-7B-Instruct"].category_mean() - 76.125).abs() < 1e-12);

        let bad = "model,chat,chat_hard,safety,reasoning,overall\nx,90,60,80,70,99\n";
        match read_rewardbench(bad.as_bytes(), p()) {
            Err(Error::InconsistentOverall { model, .. }) => assert_eq!(model, "x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decimal_tolerance_is_exact() {
        // mean 88.15 vs 88.1: exactly on the boundary, must pass
        let d = |s| parse_decimal(s).unwrap();
        assert!(decimal_consistent(
            &[d("95.8"), d("74.1"), d("88.4"), d("94.3")],
            d("88.1")
        ));
        // mean 88.15 vs 88.09 is 0.06 away
        assert!(!decimal_consistent(
            &[d("95.8"), d("74.1"), d("88.4"), d("94.3")],
            d("88.09")
        ));
        assert_eq!(parse_decimal("-6.4"), Some((-64, 1)));
        assert_eq!(parse_decimal("72"), Some((72, 0)));
        assert_eq!(parse_decimal("n/a"), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn bundled_fixtures_load() {
        let f = FixtureSet::bundled().unwrap();
        assert_eq!(f.models.len(), 40);
        assert_eq!(f.regression.len(), 40);
        assert_eq!(f.bradley_terry.len(), 40);
        assert_eq!(f.post_training.base_id, "Llama-3.1-8B");
        assert_eq!(f.post_training.stages.len(), 5);
        let ids: HashSet<_> = f.models.iter().map(|m| m.id.as_str()).collect();
        assert!(f.regression.keys().all(|k| ids.contains(k.as_str())));
        assert!(f.bradley_terry.keys().all(|k| ids.contains(k.as_str())));
        let falcon = f.models.iter().find(|m| m.id == "Falcon3-10B-Instruct").unwrap();
        assert_eq!(falcon.downloads.as_deref(), Some("37,9k"));
    }

    #[test]
    fn post_training_roles() {
        let csv = "model,role,chat,chat_hard,safety,reasoning,overall\n\
                   a,stage,1,1,1,1,1\nb,base,2,2,2,2,2\n";
        let t = read_post_training(csv.as_bytes(), p()).unwrap();
        assert_eq!(t.base_id, "b");
        assert_eq!(t.stages[0].0, "a");
        let csv = "model,role,chat,chat_hard,safety,reasoning,overall\na,stage,1,1,1,1,1\n";
        assert!(read_post_training(csv.as_bytes(), p()).is_err());
    }
}
