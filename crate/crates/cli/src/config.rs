//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names without dashes prefix (`seed`, `threads`,
//! `k-max`, ...). Blank lines and lines starting with `#` are ignored.
//! A value given on the command line always wins over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rmselect::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "out",
    "models",
    "regression",
    "bradley-terry",
    "post-training",
    "rewardbench",
    "matrix",
    "topics",
    "method",
    "category",
    "reference",
    "alpha",
    "k-min",
    "k-max",
    "thresholds",
    "degrees",
    "alphas",
    "l1-ratios",
    "folds",
    "tol",
    "max-iter",
    "bins",
    "token-limit",
    "aliases",
    "subsample",
    "epochs",
    "learning-rate",
    "batch-size",
    "warmup-steps",
    "weight-decay",
    "eval-every",
    "optimizer",
    "synthetic-benchmarks",
    "standardize",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text, path)
    }

    pub fn parse(text: &str, source: &Path) -> Result<Config> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: String| Error::MalformedRow {
                path: source.to_path_buf(),
                line: i as u64 + 1,
                reason,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| malformed("expected `key = value`".into()))?;
            let key = k.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(malformed(format!("unknown key `{key}`")));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(malformed(format!("duplicate key `{key}`")));
            }
        }
        Ok(Config { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidArgument(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Comma-separated list.
    pub fn pick_list<T: FromStr>(&self, flag: Option<Vec<T>>, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_list(v).map_err(|_| Error::InvalidArgument(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(',').map(|p| p.trim().parse()).collect()
}
