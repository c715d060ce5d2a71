//! Threshold calibration against human labels and ROC-AUC meta-evaluation.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::{HumanLabel, LabelKey, LabelKind};
use crate::model::Dimension;
use crate::similarity::SimilarityBundle;

/// Bundles keyed by `(instance, model, dimension)`.
pub type BundleIndex = BTreeMap<(String, String, Dimension), SimilarityBundle>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabel {
    pub key: LabelKey,
    pub kind: LabelKind,
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Support {
    pub pos: usize,
    pub neg: usize,
}

/// Serializes non-finite values as the strings `"inf"` / `"-inf"`.
pub fn serialize_extended_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdFit {
    /// Predict positive when `score >= threshold`. May be infinite.
    #[serde(serialize_with = "serialize_extended_f64")]
    pub threshold: f64,
    pub f1: f64,
    pub support: Support,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub dimension: Dimension,
    pub kind: LabelKind,
    #[serde(flatten)]
    pub fit: ThresholdFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AucResult {
    pub dimension: Dimension,
    pub kind: LabelKind,
    pub auc: f64,
    pub support: Support,
}

fn support(samples: &[ScoredLabel]) -> Result<Support> {
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::Calibration(format!("non-finite score at {:?}", s.key)));
    }
    let pos = samples.iter().filter(|s| s.label).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Calibration(format!(
            "need both classes, got {pos} positive and {neg} negative"
        )));
    }
    Ok(Support { pos, neg })
}

/// F1-maximizing threshold over score midpoints and `±inf`; ties go to the
/// smallest threshold.
pub fn calibrate_threshold(samples: &[ScoredLabel]) -> Result<ThresholdFit> {
    let sup = support(samples)?;
    let mut sorted: Vec<(f64, bool)> = samples.iter().map(|s| (s.score, s.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Candidate k predicts positive for sorted[k..]; k = 0 is -inf.
    let mut cuts = vec![(f64::NEG_INFINITY, 0usize)];
    for k in 1..sorted.len() {
        let (lo, hi) = (sorted[k - 1].0, sorted[k].0);
        if lo < hi {
            cuts.push((lo + (hi - lo) / 2.0, k));
        }
    }
    cuts.push((f64::INFINITY, sorted.len()));

    let mut pos_below = vec![0u64; sorted.len() + 1];
    for (k, &(_, l)) in sorted.iter().enumerate() {
        pos_below[k + 1] = pos_below[k] + u64::from(l);
    }
    let n_pos = sup.pos as u64;
    let n = sorted.len() as u64;

    // F1 = 2tp / (2tp + fp + fn), compared exactly as a fraction
    let mut best: Option<(f64, u64, u64)> = None;
    for (t, k) in cuts {
        let tp = n_pos - pos_below[k];
        let predicted = n - k as u64;
        let fp = predicted - tp;
        let fn_ = n_pos - tp;
        let (num, den) = (2 * tp, 2 * tp + fp + fn_);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => (num as u128) * (bd as u128) > (bn as u128) * (den as u128),
        };
        if better {
            best = Some((t, num, den));
        }
    }
    let (threshold, num, den) = best.expect("candidate set is never empty");
    Ok(ThresholdFit {
        threshold,
        f1: num as f64 / den as f64,
        support: sup,
    })
}

/// Mann-Whitney AUC with ties counted as one half.
pub fn roc_auc(samples: &[ScoredLabel]) -> Result<f64> {
    let sup = support(samples)?;
    let mut neg: Vec<f64> = samples.iter().filter(|s| !s.label).map(|s| s.score).collect();
    neg.sort_by(f64::total_cmp);
    // twice the pairwise win count, kept integral
    let mut wins2: u128 = 0;
    for s in samples.iter().filter(|s| s.label) {
        let below = neg.partition_point(|&x| x < s.score);
        let not_above = neg.partition_point(|&x| x <= s.score);
        wins2 += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(wins2 as f64 / (2.0 * sup.pos as f64 * sup.neg as f64))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collected {
    pub samples: Vec<ScoredLabel>,
    pub unresolved: Vec<LabelKey>,
}

/// Joins labels of `kind` (or all kinds) to delta cells.
pub fn collect_scores(
    bundles: &BundleIndex,
    labels: &[HumanLabel],
    kind: Option<LabelKind>,
    strict: bool,
) -> Result<Collected> {
    let mut out = Collected::default();
    for l in labels.iter().filter(|l| kind.is_none_or(|k| l.kind == k)) {
        let score = bundles
            .get(&(l.instance_id.clone(), l.model_id.clone(), l.dimension))
            .and_then(|b| b.delta_at(l.i, l.j));
        match score {
            Some(score) => out.samples.push(ScoredLabel {
                key: l.key(),
                kind: l.kind,
                score,
                label: l.label,
            }),
            None if strict => {
                return Err(Error::Join(format!(
                    "label {:?} does not resolve to a computed delta cell",
                    l.key()
                )))
            }
            None => out.unresolved.push(l.key()),
        }
    }
    if !out.unresolved.is_empty() {
        log::warn!("{} label(s) unresolved", out.unresolved.len());
    }
    Ok(out)
}

fn grouped(samples: &[ScoredLabel]) -> BTreeMap<(Dimension, LabelKind), Vec<ScoredLabel>> {
    let mut g: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for s in samples {
        g.entry((s.key.2, s.kind)).or_default().push(s.clone());
    }
    g
}

/// Calibrates every `(dimension, kind)` group present in `samples`.
pub fn calibrate_all(samples: &[ScoredLabel]) -> Result<Vec<CalibrationResult>> {
    grouped(samples)
        .into_iter()
        .map(|((dimension, kind), g)| {
            calibrate_threshold(&g)
                .map(|fit| CalibrationResult { dimension, kind, fit })
                .map_err(|e| Error::Calibration(format!("{dimension}/{kind:?}: {e}")))
        })
        .collect()
}

pub fn auc_all(samples: &[ScoredLabel]) -> Result<Vec<AucResult>> {
    grouped(samples)
        .into_iter()
        .map(|((dimension, kind), g)| {
            let support = support(&g).map_err(|e| Error::Calibration(format!("{dimension}/{kind:?}: {e}")))?;
            Ok(AucResult {
                dimension,
                kind,
                auc: roc_auc(&g)?,
                support,
            })
        })
        .collect()
}
