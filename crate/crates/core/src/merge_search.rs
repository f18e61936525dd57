//! Exhaustive search for the attribute merge vector.
//!
//! Five attribute scores (helpfulness, correctness, coherence, complexity,
//! verbosity) are merged into one preference score by a weight vector drawn
//! from the grid `{0, 0.05, ..., 1}^4 x {0, -0.05, ..., -1}`. The search
//! returns the grid vector that orders the most chosen/rejected pairs
//! correctly.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{csv_reader, header_index, line_of, open};

pub const N_ATTRIBUTES: usize = 5;
pub const ATTRIBUTES: [&str; N_ATTRIBUTES] =
    ["helpfulness", "correctness", "coherence", "complexity", "verbosity"];

/// Steps per axis: `k = 0..=20`, weight `k / 20`.
pub const STEPS: usize = 21;
pub const GRID_SIZE: usize = STEPS * STEPS * STEPS * STEPS * STEPS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSample {
    pub pair_id: String,
    pub chosen: [f64; N_ATTRIBUTES],
    pub rejected: [f64; N_ATTRIBUTES],
}

impl AttributeSample {
    pub fn new(pair_id: impl Into<String>, chosen: [f64; 5], rejected: [f64; 5]) -> Result<Self> {
        let pair_id = pair_id.into();
        if chosen.iter().chain(&rejected).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("attributes of pair `{pair_id}`")));
        }
        Ok(AttributeSample {
            pair_id,
            chosen,
            rejected,
        })
    }

    fn diff(&self) -> [f64; N_ATTRIBUTES] {
        std::array::from_fn(|j| self.chosen[j] - self.rejected[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeResult {
    pub weights: [f64; N_ATTRIBUTES],
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub index: usize,
}

pub fn grid_size() -> usize {
    GRID_SIZE
}

fn step_weight(k: usize, negative: bool) -> f64 {
    let w = k as f64 / 20.0;
    if negative {
        -w
    } else {
        w
    }
}

fn axis_weight(axis: usize, k: usize) -> f64 {
    step_weight(k, axis == N_ATTRIBUTES - 1)
}

/// Grid vector at enumeration position `index` (odometer, last axis fastest).
pub fn weights_at(index: usize) -> Result<[f64; N_ATTRIBUTES]> {
    if index >= GRID_SIZE {
        return Err(Error::invalid(format!(
            "grid index {index} out of range (size {GRID_SIZE})"
        )));
    }
    let mut rest = index;
    let mut ks = [0usize; N_ATTRIBUTES];
    for k in ks.iter_mut().rev() {
        *k = rest % STEPS;
        rest /= STEPS;
    }
    Ok(std::array::from_fn(|j| axis_weight(j, ks[j])))
}

/// Every grid vector in enumeration order.
pub fn enumerate_grid() -> impl Iterator<Item = [f64; N_ATTRIBUTES]> {
    (0..GRID_SIZE).map(|i| weights_at(i).expect("index in range"))
}

pub fn merged_score(w: &[f64], attrs: &[f64]) -> Result<f64> {
    if w.len() != attrs.len() {
        return Err(Error::LengthMismatch {
            left: w.len(),
            right: attrs.len(),
        });
    }
    if w.len() != N_ATTRIBUTES {
        return Err(Error::LengthMismatch {
            left: N_ATTRIBUTES,
            right: w.len(),
        });
    }
    Ok(w.iter().zip(attrs).map(|(a, b)| a * b).sum())
}

// Margin of chosen over rejected. Summed left to right so the blocked
// search below reproduces it bit for bit.
fn margin(w: &[f64; N_ATTRIBUTES], d: &[f64; N_ATTRIBUTES]) -> f64 {
    let mut m = w[0] * d[0];
    for j in 1..N_ATTRIBUTES {
        m += w[j] * d[j];
    }
    m
}

/// Number of pairs whose merged chosen score is strictly above the rejected one.
pub fn correct_count(w: &[f64; N_ATTRIBUTES], samples: &[AttributeSample]) -> u64 {
    samples
        .iter()
        .filter(|s| margin(w, &s.diff()) > 0.0)
        .count() as u64
}

/// Fraction of pairs ordered correctly; ties count as wrong.
pub fn pair_accuracy(w: &[f64; N_ATTRIBUTES], samples: &[AttributeSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("pair accuracy needs at least one sample"));
    }
    Ok(correct_count(w, samples) as f64 / samples.len() as f64)
}

/// Column-major attribute differences.
struct Diffs {
    cols: [Vec<f64>; N_ATTRIBUTES],
}

impl Diffs {
    fn new(samples: &[AttributeSample]) -> Diffs {
        let d: Vec<[f64; N_ATTRIBUTES]> = samples.iter().map(|s| s.diff()).collect();
        Diffs {
            cols: std::array::from_fn(|j| d.iter().map(|r| r[j]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Best {
    count: u64,
    index: usize,
}

impl Best {
    fn merge(self, other: Best) -> Best {
        if other.count > self.count || (other.count == self.count && other.index < self.index) {
            other
        } else {
            self
        }
    }
}

/// Scans every grid vector sharing the first three coordinates `outer`.
fn scan_block(outer: usize, diffs: &Diffs, prefix: &mut Vec<f64>, partial: &mut Vec<f64>) -> Best {
    let n = diffs.cols[0].len();
    let (k1, k2, k3) = (outer / (STEPS * STEPS), (outer / STEPS) % STEPS, outer % STEPS);
    let (w1, w2, w3) = (axis_weight(0, k1), axis_weight(1, k2), axis_weight(2, k3));
    prefix.clear();
    prefix.extend((0..n).map(|i| {
        let mut m = w1 * diffs.cols[0][i];
        m += w2 * diffs.cols[1][i];
        m += w3 * diffs.cols[2][i];
        m
    }));
    let d4 = &diffs.cols[3];
    let d5 = &diffs.cols[4];
    let mut best = Best {
        count: 0,
        index: usize::MAX,
    };
    for k4 in 0..STEPS {
        let w4 = axis_weight(3, k4);
        partial.clear();
        partial.extend(prefix.iter().zip(d4).map(|(p, d)| p + w4 * d));
        for k5 in 0..STEPS {
            let w5 = axis_weight(4, k5);
            let count = partial
                .iter()
                .zip(d5)
                .filter(|(p, d)| **p + w5 * **d > 0.0)
                .count() as u64;
            let index = (outer * STEPS + k4) * STEPS + k5;
            best = best.merge(Best { count, index });
        }
    }
    best
}

fn finish(best: Best, total: usize) -> Result<MergeResult> {
    Ok(MergeResult {
        weights: weights_at(best.index)?,
        accuracy: best.count as f64 / total as f64,
        correct: best.count,
        total: total as u64,
        index: best.index,
    })
}

const OUTER_BLOCKS: usize = STEPS * STEPS * STEPS;

/// Grid argmax of pair accuracy, parallel over blocks of the grid. Ties go
/// to the smallest enumeration index, so the result does not depend on the
/// number of worker threads.
pub fn search(samples: &[AttributeSample]) -> Result<MergeResult> {
    if samples.is_empty() {
        return Err(Error::invalid("merge search needs at least one sample"));
    }
    let diffs = Diffs::new(samples);
    let best = (0..OUTER_BLOCKS)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(prefix, partial), outer| scan_block(outer, &diffs, prefix, partial),
        )
        .reduce(
            || Best {
                count: 0,
                index: usize::MAX,
            },
            Best::merge,
        );
    finish(best, samples.len())
}

/// Same result as [`search`], on the calling thread only.
pub fn search_sequential(samples: &[AttributeSample]) -> Result<MergeResult> {
    if samples.is_empty() {
        return Err(Error::invalid("merge search needs at least one sample"));
    }
    let diffs = Diffs::new(samples);
    let (mut prefix, mut partial) = (Vec::new(), Vec::new());
    let mut best = Best {
        count: 0,
        index: usize::MAX,
    };
    for outer in 0..OUTER_BLOCKS {
        best = best.merge(scan_block(outer, &diffs, &mut prefix, &mut partial));
    }
    finish(best, samples.len())
}

/// Seeded subsample of `n` pairs, kept in input order.
pub fn subsample(samples: &[AttributeSample], n: usize, seed: u64) -> Vec<AttributeSample> {
    if n >= samples.len() {
        return samples.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, samples.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| samples[i].clone()).collect()
}

fn column_names() -> Vec<String> {
    let mut names = vec!["pair_id".to_string()];
    for side in ["chosen", "rejected"] {
        names.extend(ATTRIBUTES.iter().map(|a| format!("{side}_{a}")));
    }
    names
}

pub fn load_attribute_samples(path: impl AsRef<Path>) -> Result<Vec<AttributeSample>> {
    let path = path.as_ref();
    read_attribute_samples(open(path)?, path)
}

/// Reads pairs from CSV with columns `pair_id`, `chosen_<attr>` and
/// `rejected_<attr>` for each of the five attributes.
pub fn read_attribute_samples<R: Read>(rdr: R, source: &Path) -> Result<Vec<AttributeSample>> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers()?.clone();
    let names = column_names();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header_index(&headers, n).ok_or_else(|| Error::MalformedRow {
                path: source.to_path_buf(),
                line: 1,
                reason: format!("missing column `{n}`"),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let mut vals = [0.0; 2 * N_ATTRIBUTES];
        for (j, v) in vals.iter_mut().enumerate() {
            let raw = field(j + 1);
            *v = raw.parse().map_err(|_| Error::MalformedRow {
                path: source.to_path_buf(),
                line,
                reason: format!("`{}` is not a number: `{raw}`", names[j + 1]),
            })?;
        }
        let chosen = std::array::from_fn(|j| vals[j]);
        let rejected = std::array::from_fn(|j| vals[N_ATTRIBUTES + j]);
        out.push(AttributeSample::new(field(0), chosen, rejected)?);
    }
    if out.is_empty() {
        return Err(Error::NoRecords {
            path: source.to_path_buf(),
        });
    }
    Ok(out)
}

pub fn write_attribute_samples<W: Write>(samples: &[AttributeSample], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(column_names())?;
    for s in samples {
        let mut row = vec![s.pair_id.clone()];
        row.extend(s.chosen.iter().chain(&s.rejected).map(|v| v.to_string()));
        wtr.write_record(row)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_samples(n: usize, seed: u64) -> Vec<AttributeSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let c = std::array::from_fn(|_| rng.random_range(0.0..4.0));
                let r = std::array::from_fn(|_| rng.random_range(0.0..4.0));
                AttributeSample::new(format!("p{i}"), c, r).unwrap()
            })
            .collect()
    }

    #[test]
    fn grid_counts() {
        assert_eq!(grid_size(), 4_084_101);
        let mut first = None;
        let mut n = 0;
        let mut with_w1_one = 0;
        for w in enumerate_grid() {
            first.get_or_insert(w);
            n += 1;
            if w[0] == 1.0 {
                with_w1_one += 1;
            }
        }
        assert_eq!(n, 4_084_101);
        assert_eq!(with_w1_one, 194_481);
        assert_eq!(first.unwrap(), [0.0; 5]);
    }

    #[test]
    fn odometer_order() {
        assert_eq!(weights_at(1).unwrap(), [0.0, 0.0, 0.0, 0.0, -0.05]);
        assert_eq!(weights_at(20).unwrap(), [0.0, 0.0, 0.0, 0.0, -1.0]);
        assert_eq!(weights_at(21).unwrap(), [0.0, 0.0, 0.0, 0.05, 0.0]);
        assert_eq!(weights_at(GRID_SIZE - 1).unwrap(), [1.0, 1.0, 1.0, 1.0, -1.0]);
        assert!(weights_at(GRID_SIZE).is_err());
    }

    #[test]
    fn grid_values_on_the_lattice() {
        for i in (0..GRID_SIZE).step_by(997) {
            let w = weights_at(i).unwrap();
            for (j, v) in w.iter().enumerate() {
                let k = (v.abs() * 20.0).round();
                assert!((v.abs() - k / 20.0).abs() < 1e-15 && k <= 20.0);
                assert!(if j == 4 { *v <= 0.0 } else { *v >= 0.0 });
            }
        }
    }

    #[test]
    fn merged_score_cases() {
        assert_eq!(merged_score(&[1.0, 0.0, 0.0, 0.0, 0.0], &[4.0, 1.0, 2.0, 3.0, 5.0]).unwrap(), 4.0);
        assert_eq!(merged_score(&[0.0; 5], &[4.0, 1.0, 2.0, 3.0, 5.0]).unwrap(), 0.0);
        assert!(merged_score(&[1.0; 4], &[1.0; 5]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut naive = 0.0;
            for j in 0..5 {
                naive += w[j] * a[j];
            }
            assert!((merged_score(&w, &a).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_cases() {
        let one = vec![AttributeSample::new("a", [1.0, 0.0, 0.0, 0.0, 0.0], [0.0; 5]).unwrap()];
        assert_eq!(pair_accuracy(&[0.05, 0.0, 0.0, 0.0, 0.0], &one).unwrap(), 1.0);
        let s = random_samples(300, 3);
        assert_eq!(pair_accuracy(&[0.0; 5], &s).unwrap(), 0.0);
        assert!(pair_accuracy(&[0.0; 5], &[]).is_err());
    }

    #[test]
    fn accuracy_matches_per_pair_oracle() {
        let s = random_samples(1000, 4);
        let w = [0.35, 0.1, 0.8, 0.05, -0.45];
        let mut correct = 0;
        for p in &s {
            let c = merged_score(&w, &p.chosen).unwrap();
            let r = merged_score(&w, &p.rejected).unwrap();
            let d: Vec<f64> = (0..5).map(|j| p.chosen[j] - p.rejected[j]).collect();
            // the data keeps both formulations away from ties
            assert_eq!(c > r, merged_score(&w, &d).unwrap() > 0.0);
            if c > r {
                correct += 1;
            }
        }
        assert_eq!(pair_accuracy(&w, &s).unwrap(), correct as f64 / 1000.0);
    }

    #[test]
    fn tied_pair_cannot_be_separated() {
        let s = vec![AttributeSample::new("t", [1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()];
        let r = search(&s).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.index, 0);
    }

    #[test]
    fn helpfulness_separable() {
        // chosen wins on helpfulness only; other attributes are noise
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s: Vec<AttributeSample> = (0..100)
            .map(|i| {
                let mut c: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..4.0));
                let r: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..4.0));
                c[0] = r[0] + rng.random_range(0.5..1.0);
                c[1] = r[1];
                c[2] = r[2];
                c[3] = r[3];
                c[4] = r[4];
                AttributeSample::new(format!("h{i}"), c, r).unwrap()
            })
            .collect();
        let r = search(&s).unwrap();
        assert_eq!(r.accuracy, 1.0);
        // smallest index with a positive helpfulness weight
        assert_eq!(r.weights, [0.05, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.index, 21usize.pow(4));
        assert_eq!(r, search_sequential(&s).unwrap());
    }

    #[test]
    fn search_matches_naive_scan() {
        let s = random_samples(40, 9);
        let mut best = (0u64, 0usize);
        for (i, w) in enumerate_grid().enumerate() {
            let c = correct_count(&w, &s);
            if c > best.0 {
                best = (c, i);
            }
        }
        let r = search(&s).unwrap();
        assert_eq!((r.correct, r.index), best);
        assert_eq!(r.accuracy, pair_accuracy(&r.weights, &s).unwrap());
        assert_eq!(r, search_sequential(&s).unwrap());
    }

    #[test]
    fn parallel_result_independent_of_threads() {
        let s = random_samples(150, 10);
        let reference = search_sequential(&s).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            assert_eq!(pool.install(|| search(&s)).unwrap(), reference);
        }
    }

    #[test]
    fn argmax_scale_invariant() {
        let s = random_samples(60, 11);
        let scaled: Vec<AttributeSample> = s
            .iter()
            .map(|p| {
                AttributeSample::new(
                    p.pair_id.clone(),
                    p.chosen.map(|v| v * 4.0),
                    p.rejected.map(|v| v * 4.0),
                )
                .unwrap()
            })
            .collect();
        assert_eq!(search(&s).unwrap().index, search(&scaled).unwrap().index);
    }

    #[test]
    fn csv_round_trip() {
        let s = random_samples(5, 12);
        let mut buf = Vec::new();
        write_attribute_samples(&s, &mut buf).unwrap();
        let back = read_attribute_samples(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, s);
        let bad = "pair_id,chosen_helpfulness\np,1\n";
        assert!(read_attribute_samples(bad.as_bytes(), Path::new("mem")).is_err());
    }

    #[test]
    fn subsample_is_seeded_and_ordered() {
        let s = random_samples(50, 13);
        let a = subsample(&s, 10, 1);
        assert_eq!(a, subsample(&s, 10, 1));
        assert_eq!(a.len(), 10);
        let pos: Vec<usize> = a.iter().map(|x| s.iter().position(|y| y == x).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(&s, 100, 1).len(), 50);
    }

    fn dyadic() -> impl Strategy<Value = f64> {
        (-64i32..64).prop_map(|k| k as f64 / 8.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn translation_leaves_accuracy(
            pairs in prop::collection::vec((prop::array::uniform5(dyadic()), prop::array::uniform5(dyadic())), 1..30),
            shift in prop::array::uniform5(dyadic()),
            idx in 0..GRID_SIZE,
        ) {
            let s: Vec<AttributeSample> = pairs.iter().enumerate()
                .map(|(i, (c, r))| AttributeSample::new(i.to_string(), *c, *r).unwrap())
                .collect();
            let t: Vec<AttributeSample> = s.iter()
                .map(|p| AttributeSample::new(
                    p.pair_id.clone(),
                    std::array::from_fn(|j| p.chosen[j] + shift[j]),
                    std::array::from_fn(|j| p.rejected[j] + shift[j]),
                ).unwrap())
                .collect();
            let w = weights_at(idx).unwrap();
            prop_assert_eq!(pair_accuracy(&w, &s).unwrap(), pair_accuracy(&w, &t).unwrap());
        }

        #[test]
        fn blocked_count_equals_direct(
            pairs in prop::collection::vec((prop::array::uniform5(-3.0f64..3.0), prop::array::uniform5(-3.0f64..3.0)), 1..20),
            outer in 0..OUTER_BLOCKS,
        ) {
            let s: Vec<AttributeSample> = pairs.iter().enumerate()
                .map(|(i, (c, r))| AttributeSample::new(i.to_string(), *c, *r).unwrap())
                .collect();
            let diffs = Diffs::new(&s);
            let best = scan_block(outer, &diffs, &mut Vec::new(), &mut Vec::new());
            let w = weights_at(best.index).unwrap();
            prop_assert_eq!(best.count, correct_count(&w, &s));
            for i in outer * STEPS * STEPS..(outer + 1) * STEPS * STEPS {
                prop_assert!(correct_count(&weights_at(i).unwrap(), &s) <= best.count);
            }
        }
    }
}
