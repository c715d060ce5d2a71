//! Fair cross-model subsetting and dataset-level aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{diagnose, DimensionDiagnostics, LogBase, Outcome};
use crate::error::{Error, Result};
use crate::matching::Assignment;
use crate::model::Dimension;
use crate::similarity::SimilarityBundle;
use crate::thresholds::ThresholdTable;

/// One model's evaluation of one instance, before diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    pub instance_id: String,
    pub n_slots: usize,
    pub assignment: Assignment,
    /// `None` marks a dimension with no valid ground-truth slot.
    pub bundles: BTreeMap<Dimension, Option<SimilarityBundle>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionPolicy {
    #[default]
    AllModels,
    PerPair,
}

impl std::str::FromStr for IntersectionPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all-models" => Ok(Self::AllModels),
            "per-pair" => Ok(Self::PerPair),
            other => Err(format!("unknown intersection policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DroppedInstance {
    pub instance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSet {
    pub models: Vec<String>,
    /// Instances under consideration.
    pub instances: BTreeSet<String>,
    /// `model -> instance -> run`
    pub runs: BTreeMap<String, BTreeMap<String, InstanceRun>>,
    /// Slots every model is scored on, per instance. Filled by [`fair_intersection`].
    pub evaluated_slots: BTreeMap<String, BTreeSet<usize>>,
    pub dropped: Vec<DroppedInstance>,
}

/// Restricts every model to the instances all of them produced and, per
/// instance, to the slots all of them matched.
pub fn fair_intersection(rs: &RunSet) -> Result<RunSet> {
    let mut out = RunSet {
        models: rs.models.clone(),
        dropped: rs.dropped.clone(),
        ..RunSet::default()
    };
    for m in &rs.models {
        out.runs.insert(m.clone(), BTreeMap::new());
    }
    for inst in &rs.instances {
        let missing: Vec<&str> = rs
            .models
            .iter()
            .filter(|m| !rs.runs.get(*m).is_some_and(|r| r.contains_key(inst)))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            out.dropped.push(DroppedInstance {
                instance_id: inst.clone(),
                reason: format!("no output from {}", missing.join(", ")),
            });
            continue;
        }
        let mut common: Option<BTreeSet<usize>> = None;
        for m in &rs.models {
            let s = rs.runs[m][inst].assignment.matched_set();
            common = Some(match common {
                None => s,
                Some(c) => c.intersection(&s).copied().collect(),
            });
        }
        let common = common.unwrap_or_default();
        for m in &rs.models {
            let run = &rs.runs[m][inst];
            let bundles = run
                .bundles
                .iter()
                .map(|(d, b)| (*d, b.as_ref().map(|b| b.restrict_rows(&common))))
                .collect();
            out.runs
                .get_mut(m)
                .expect("inserted above")
                .insert(inst.clone(), InstanceRun { bundles, ..run.clone() });
        }
        out.instances.insert(inst.clone());
        out.evaluated_slots.insert(inst.clone(), common);
    }
    out.dropped.sort();
    out.dropped.dedup();
    if !rs.models.is_empty() && out.evaluated_slots.values().all(BTreeSet::is_empty) {
        return Err(Error::Aggregation(
            "fair intersection leaves no slot to evaluate".into(),
        ));
    }
    Ok(out)
}

/// Fair intersections of every unordered model pair.
pub fn pairwise_intersections(rs: &RunSet) -> Result<Vec<(String, String, RunSet)>> {
    let mut out = Vec::new();
    for (a_ix, a) in rs.models.iter().enumerate() {
        for b in &rs.models[a_ix + 1..] {
            let sub = RunSet {
                models: vec![a.clone(), b.clone()],
                runs: rs
                    .runs
                    .iter()
                    .filter(|(m, _)| *m == a || *m == b)
                    .map(|(m, r)| (m.clone(), r.clone()))
                    .collect(),
                ..rs.clone()
            };
            out.push((a.clone(), b.clone(), fair_intersection(&sub)?));
        }
    }
    Ok(out)
}

/// `model -> instance -> dimension -> diagnostics`; skipped dimensions are absent.
pub type Diagnostics = BTreeMap<String, BTreeMap<String, BTreeMap<Dimension, DimensionDiagnostics>>>;

pub fn diagnose_runset(rs: &RunSet, thresholds: &ThresholdTable, base: LogBase) -> Diagnostics {
    rs.runs
        .iter()
        .map(|(m, runs)| {
            let per_inst = runs
                .iter()
                .map(|(inst, run)| {
                    let dims = run
                        .bundles
                        .iter()
                        .filter_map(|(d, b)| b.as_ref().map(|b| (*d, diagnose(b, thresholds.get(*d), base))))
                        .collect();
                    (inst.clone(), dims)
                })
                .collect();
            (m.clone(), per_inst)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Every evaluated subject counts once.
    #[default]
    Pooled,
    /// Per-instance values first, then averaged over instances.
    InstanceWeighted,
}

impl std::str::FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "instance-weighted" => Ok(Self::InstanceWeighted),
            other => Err(format!("unknown weighting `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionRates {
    pub dimension: Dimension,
    /// Instances contributing at least one row.
    pub instances: usize,
    /// Instances where no ground-truth slot was valid.
    pub skipped_instances: usize,
    pub rows: usize,
    /// Rows whose off-diagonal terms were undefined (single valid column).
    pub single_column_rows: usize,
    pub success: Option<f64>,
    pub confused: Option<f64>,
    pub inconsistent: Option<f64>,
    pub drift: Option<f64>,
    pub pattern_eligible: usize,
    pub swap: Option<f64>,
    pub dominance: Option<f64>,
    pub blending: Option<f64>,
    pub js: Option<f64>,
    pub d_self: Option<f64>,
    pub c_mean: Option<f64>,
    pub c_worst: Option<f64>,
    pub sim_diag_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub weighting: Weighting,
    pub instances: usize,
    pub total_slots: usize,
    pub matched: usize,
    pub mean_iou: Option<f64>,
    pub dimensions: Vec<DimensionRates>,
}

/// `100 * num / den`, absent for an empty denominator.
pub fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Averages per-instance values over instances (instance weighting) or
/// pools every row (subject weighting).
fn weighted(
    per_inst: &[&DimensionDiagnostics],
    w: Weighting,
    f: impl Fn(&crate::diagnostics::RowDiagnostics) -> f64 + Copy,
) -> Option<f64> {
    match w {
        Weighting::Pooled => mean(per_inst.iter().flat_map(|d| d.rows.iter().map(f))),
        Weighting::InstanceWeighted => mean(per_inst.iter().filter_map(|d| mean(d.rows.iter().map(f)))),
    }
}

fn dimension_rates(
    d: Dimension,
    diags: &BTreeMap<String, BTreeMap<Dimension, DimensionDiagnostics>>,
    runs: &BTreeMap<String, InstanceRun>,
    w: Weighting,
) -> DimensionRates {
    let per_inst: Vec<&DimensionDiagnostics> = diags
        .values()
        .filter_map(|m| m.get(&d))
        .filter(|x| !x.rows.is_empty())
        .collect();
    let skipped = runs
        .values()
        .filter(|r| matches!(r.bundles.get(&d), Some(None)))
        .count();
    let rows: usize = per_inst.iter().map(|x| x.rows.len()).sum();
    let rate = |pred: &dyn Fn(&crate::diagnostics::RowDiagnostics) -> bool| -> Option<f64> {
        match w {
            Weighting::Pooled => percent(per_inst.iter().flat_map(|x| &x.rows).filter(|r| pred(r)).count(), rows),
            Weighting::InstanceWeighted => mean(
                per_inst
                    .iter()
                    .filter_map(|x| percent(x.rows.iter().filter(|r| pred(r)).count(), x.rows.len())),
            ),
        }
    };
    let eligible: Vec<_> = diags.values().filter_map(|m| m.get(&d)?.patterns).collect();
    let pat = |f: fn(&crate::diagnostics::ImagePatterns) -> bool| {
        percent(eligible.iter().filter(|p| f(p)).count(), eligible.len())
    };
    DimensionRates {
        dimension: d,
        instances: per_inst.len(),
        skipped_instances: skipped,
        rows,
        single_column_rows: per_inst
            .iter()
            .flat_map(|x| &x.rows)
            .filter(|r| r.single_column)
            .count(),
        success: rate(&|r| r.outcome == Outcome::Success),
        confused: rate(&|r| r.outcome == Outcome::Confused),
        inconsistent: rate(&|r| r.inconsistent),
        drift: rate(&|r| r.outcome == Outcome::Drift),
        pattern_eligible: eligible.len(),
        swap: pat(|p| p.swap),
        dominance: pat(|p| p.dominance),
        blending: pat(|p| p.blending),
        js: weighted(&per_inst, w, |r| r.js),
        d_self: weighted(&per_inst, w, |r| -r.delta_self),
        c_mean: weighted(&per_inst, w, |r| r.c_mean),
        c_worst: weighted(&per_inst, w, |r| r.c_worst),
        sim_diag_mean: weighted(&per_inst, w, |r| r.sim_diag),
    }
}

/// Aggregates one model over the instances present in `runs`.
pub fn aggregate_rates(
    model_id: &str,
    runs: &BTreeMap<String, InstanceRun>,
    diags: &BTreeMap<String, BTreeMap<Dimension, DimensionDiagnostics>>,
    w: Weighting,
) -> ModelSummary {
    ModelSummary {
        model_id: model_id.to_string(),
        weighting: w,
        instances: runs.len(),
        total_slots: runs.values().map(|r| r.n_slots).sum(),
        matched: runs.values().map(|r| r.assignment.pairs.len()).sum(),
        mean_iou: mean(runs.values().flat_map(|r| r.assignment.pairs.iter().map(|p| p.iou))),
        dimensions: Dimension::ALL
            .iter()
            .map(|&d| dimension_rates(d, diags, runs, w))
            .collect(),
    }
}

pub fn aggregate_runset(rs: &RunSet, diags: &Diagnostics, w: Weighting) -> Vec<ModelSummary> {
    let empty = BTreeMap::new();
    rs.models
        .iter()
        .map(|m| {
            aggregate_rates(
                m,
                rs.runs.get(m).unwrap_or(&empty),
                diags.get(m).unwrap_or(&BTreeMap::new()),
                w,
            )
        })
        .collect()
}
