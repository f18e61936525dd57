//! Derived leaderboard tables: relative gains inside size groups,
//! post-training deltas and per-model method differences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    size_group, Category, ModelRecord, RewardBenchScores, RewardBenchTable, SizeGroup,
};

/// Percent change of `score` relative to `reference`.
pub fn relative_gain(score: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::invalid(format!(
            "reference score must be positive, got {reference}"
        )));
    }
    Ok(100.0 * (score - reference) / reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeGain {
    pub model: String,
    pub reference: String,
    pub category: Category,
    pub gain_pct: f64,
}

/// How the per-group reference model is chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ReferencePolicy {
    /// Among Meta-published Llama-3.x candidates, the most recent release;
    /// ties go to the higher overall score.
    #[default]
    Latest,
    /// The candidate with the highest overall score.
    HighestOverall,
    /// The first listed id that falls in the group.
    Explicit(Vec<String>),
}

pub const REFERENCE_PREFIXES: [&str; 2] = ["Llama-3", "Meta-Llama-3"];
pub const REFERENCE_PUBLISHER: &str = "Meta";

/// Llama-3.x base models: id prefix match, restricted to the original
/// publisher so that third-party fine-tunes (Tulu, Hermes) are excluded.
pub fn is_reference_candidate(record: &ModelRecord) -> bool {
    record.publisher == REFERENCE_PUBLISHER
        && REFERENCE_PREFIXES.iter().any(|p| record.id.starts_with(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupGains {
    pub group: SizeGroup,
    pub reference: String,
    pub reference_score: f64,
    /// Every model in the group, reference included (at 0%), sorted by id.
    pub gains: Vec<RelativeGain>,
}

/// Relative gains of each model against its size group's reference.
/// Models present in `records` but absent from `rb` are skipped.
pub fn group_gains(
    rb: &RewardBenchTable,
    records: &[ModelRecord],
    policy: &ReferencePolicy,
    category: Category,
) -> Result<Vec<GroupGains>> {
    let mut groups: BTreeMap<SizeGroup, Vec<&ModelRecord>> = BTreeMap::new();
    for r in records {
        if rb.contains_key(&r.id) {
            groups.entry(size_group(r.params_b)?).or_default().push(r);
        }
    }
    let mut out = Vec::new();
    for (group, members) in groups {
        let reference = pick_reference(group, &members, rb, policy)?;
        let ref_score = rb[reference].get(category);
        let mut gains = members
            .iter()
            .map(|m| {
                Ok(RelativeGain {
                    model: m.id.clone(),
                    reference: reference.to_string(),
                    category,
                    gain_pct: if m.id == reference {
                        0.0
                    } else {
                        relative_gain(rb[&m.id].get(category), ref_score)?
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        gains.sort_by(|a, b| a.model.cmp(&b.model));
        out.push(GroupGains {
            group,
            reference: reference.to_string(),
            reference_score: ref_score,
            gains,
        });
    }
    Ok(out)
}

fn pick_reference<'a>(
    group: SizeGroup,
    members: &[&'a ModelRecord],
    rb: &RewardBenchTable,
    policy: &ReferencePolicy,
) -> Result<&'a str> {
    let missing = || Error::MissingReference {
        group: group.to_string(),
    };
    let overall = |r: &ModelRecord| rb[&r.id].overall;
    let candidates = members.iter().copied().filter(|r| is_reference_candidate(r));
    let chosen = match policy {
        ReferencePolicy::Latest => candidates.max_by(|a, b| {
            a.release_date
                .cmp(&b.release_date)
                .then(overall(a).total_cmp(&overall(b)))
                .then(b.id.cmp(&a.id))
        }),
        ReferencePolicy::HighestOverall => candidates.max_by(|a, b| {
            overall(a)
                .total_cmp(&overall(b))
                .then(b.id.cmp(&a.id))
        }),
        ReferencePolicy::Explicit(ids) => ids
            .iter()
            .find_map(|id| members.iter().copied().find(|m| &m.id == id)),
    };
    chosen.map(|r| r.id.as_str()).ok_or_else(missing)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDeltas {
    pub stage: String,
    pub scores: RewardBenchScores,
    /// Percent change per category, in [`Category::ALL`] order.
    pub deltas: Vec<(Category, f64)>,
}

/// Relative change of every stage against the base checkpoint, per category.
pub fn post_training_deltas(
    stages: &[(String, RewardBenchScores)],
    base: &RewardBenchScores,
) -> Result<Vec<StageDeltas>> {
    for c in Category::ALL {
        if !(base.get(c) > 0.0) {
            return Err(Error::invalid(format!(
                "base score for {c} must be positive, got {}",
                base.get(c)
            )));
        }
    }
    stages
        .iter()
        .map(|(stage, s)| {
            let deltas = Category::ALL
                .into_iter()
                .map(|c| Ok((c, relative_gain(s.get(c), base.get(c))?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(StageDeltas {
                stage: stage.clone(),
                scores: *s,
                deltas,
            })
        })
        .collect()
}

/// Regression overall minus Bradley-Terry overall.
pub fn method_diff_for(bt: &RewardBenchTable, reg: &RewardBenchTable, model: &str) -> Result<f64> {
    match (bt.get(model), reg.get(model)) {
        (Some(b), Some(r)) => Ok(r.overall - b.overall),
        _ => Err(Error::MissingModel(model.to_string())),
    }
}

/// [`method_diff_for`] over every model; both tables must cover the same models.
pub fn method_diff(bt: &RewardBenchTable, reg: &RewardBenchTable) -> Result<BTreeMap<String, f64>> {
    if let Some(m) = bt.keys().find(|k| !reg.contains_key(*k)) {
        return Err(Error::MissingModel(m.clone()));
    }
    if let Some(m) = reg.keys().find(|k| !bt.contains_key(*k)) {
        return Err(Error::MissingModel(m.clone()));
    }
    bt.keys()
        .map(|k| Ok((k.clone(), method_diff_for(bt, reg, k)?)))
        .collect()
}
