//! Dimension-wise similarity matrices and the baseline-corrected delta.
//!
//! Rows range over matched slots with valid features on both sides, columns
//! over ground-truth slots with valid features. `s_gt[i, j]` compares the
//! ground-truth subjects `i` and `j`; `s_gen[i, j]` compares the generated
//! subject in slot `i` with ground-truth subject `j`.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Assignment;
use crate::model::{Dimension, FeatureMap, FeatureValue, GtSlot, InstanceManifest, KeypointSet};

/// Per-keypoint falloff constants of the 17-point COCO body layout
/// (`2σ` for the published per-keypoint σ).
pub const COCO_KAPPAS: [f64; 17] = [
    0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144, 0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178,
    0.178,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OksParams {
    pub kappas: Vec<f64>,
    /// A keypoint counts as visible when flagged visible with at least this confidence.
    pub vis_threshold: f64,
    /// Lower bound on the squared object scale.
    pub scale_floor: f64,
}

impl Default for OksParams {
    fn default() -> Self {
        Self {
            kappas: COCO_KAPPAS.to_vec(),
            vis_threshold: 0.3,
            scale_floor: 1e-4,
        }
    }
}

impl OksParams {
    fn is_confident(&self, k: &KeypointSet, idx: usize) -> bool {
        let p = &k.points[idx];
        p.visible && p.confidence >= self.vis_threshold
    }

    fn check_len(&self, k: &KeypointSet) -> Result<()> {
        if k.points.len() != self.kappas.len() {
            return Err(Error::Feature(format!(
                "skeleton has {} keypoints, expected {}",
                k.points.len(),
                self.kappas.len()
            )));
        }
        Ok(())
    }
}

pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Feature(format!(
            "embedding length mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Feature("zero-norm embedding".into()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn normalized(k: &KeypointSet, idx: usize) -> (f64, f64) {
    let p = &k.points[idx];
    (p.x / k.crop_size.0, p.y / k.crop_size.1)
}

/// Squared scale of a skeleton: area of the tight box around its visible
/// keypoints in crop-normalized coordinates, floored.
pub fn oks_scale_sq(k: &KeypointSet, params: &OksParams) -> Result<f64> {
    params.check_len(k)?;
    let pts: Vec<(f64, f64)> = (0..k.points.len())
        .filter(|&i| params.is_confident(k, i))
        .map(|i| normalized(k, i))
        .collect();
    if pts.is_empty() {
        return Err(Error::Feature("skeleton has no visible keypoint".into()));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    Ok(((x1 - x0) * (y1 - y0)).max(params.scale_floor))
}

/// Object keypoint similarity at a given squared scale, averaged over
/// keypoints visible in both skeletons.
pub fn oks_with_scale(a: &KeypointSet, b: &KeypointSet, scale_sq: f64, params: &OksParams) -> Result<f64> {
    params.check_len(a)?;
    params.check_len(b)?;
    let mut num = 0.0;
    let mut den = 0usize;
    for (k, kappa) in params.kappas.iter().enumerate() {
        if !(params.is_confident(a, k) && params.is_confident(b, k)) {
            continue;
        }
        let (ax, ay) = normalized(a, k);
        let (bx, by) = normalized(b, k);
        let d2 = (ax - bx).powi(2) + (ay - by).powi(2);
        num += (-d2 / (2.0 * scale_sq * kappa * kappa)).exp();
        den += 1;
    }
    if den == 0 {
        return Err(Error::Feature("no jointly visible keypoint".into()));
    }
    Ok(num / den as f64)
}

/// OKS of `a` against a ground-truth skeleton, scaled by the ground truth.
pub fn oks_sim(a: &KeypointSet, b_gt: &KeypointSet, params: &OksParams) -> Result<f64> {
    oks_with_scale(a, b_gt, oks_scale_sq(b_gt, params)?, params)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub oks: OksParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityBundle {
    pub dimension: Dimension,
    /// Row slot indices (matched and valid on both sides).
    pub rows: Vec<usize>,
    /// Column slot indices (valid ground truth).
    pub cols: Vec<usize>,
    pub s_gt: Array2<f64>,
    pub s_gen: Array2<f64>,
    pub delta: Array2<f64>,
    /// Matched slots in `cols` dropped because the generated feature was missing or unusable.
    pub dropped_rows: Vec<usize>,
}

impl SimilarityBundle {
    pub fn col_of(&self, slot: usize) -> Option<usize> {
        self.cols.iter().position(|&c| c == slot)
    }

    pub fn row_of(&self, slot: usize) -> Option<usize> {
        self.rows.iter().position(|&r| r == slot)
    }

    /// `delta` at slot coordinates `(i, j)`, if both are present.
    pub fn delta_at(&self, i: usize, j: usize) -> Option<f64> {
        Some(self.delta[[self.row_of(i)?, self.col_of(j)?]])
    }

    /// Keeps only the rows whose slot is in `keep`; columns are untouched.
    pub fn restrict_rows(&self, keep: &BTreeSet<usize>) -> Self {
        let idx: Vec<usize> = (0..self.rows.len()).filter(|&r| keep.contains(&self.rows[r])).collect();
        let take = |m: &Array2<f64>| m.select(Axis(0), &idx);
        Self {
            dimension: self.dimension,
            rows: idx.iter().map(|&r| self.rows[r]).collect(),
            cols: self.cols.clone(),
            s_gt: take(&self.s_gt),
            s_gen: take(&self.s_gen),
            delta: take(&self.delta),
            dropped_rows: self.dropped_rows.clone(),
        }
    }
}

enum Prepared<'a> {
    Embedding(&'a [f64]),
    Keypoints(&'a KeypointSet, f64),
}

/// Checks that a feature is usable for `d`; returns `None` (logged) otherwise.
fn prepare<'a>(
    f: Option<&'a FeatureValue>,
    d: Dimension,
    params: &OksParams,
    what: &str,
) -> Result<Option<Prepared<'a>>> {
    let Some(f) = f else { return Ok(None) };
    match (f, d.uses_keypoints()) {
        (FeatureValue::Embedding(e), false) => {
            if e.iter().all(|&x| x == 0.0) {
                log::warn!("{what}: zero-norm `{d}` embedding treated as invalid");
                return Ok(None);
            }
            Ok(Some(Prepared::Embedding(e)))
        }
        (FeatureValue::Keypoints(k), true) => match oks_scale_sq(k, params) {
            Ok(s) => Ok(Some(Prepared::Keypoints(k, s))),
            Err(Error::Feature(msg)) => {
                log::warn!("{what}: `{d}` skeleton unusable ({msg})");
                Ok(None)
            }
            Err(e) => Err(e),
        },
        _ => Err(Error::Feature(format!("{what}: wrong payload kind for `{d}`"))),
    }
}

fn pair_sim(row: &Prepared, col: &Prepared, scale_sq: f64, params: &OksParams) -> Result<f64> {
    match (row, col) {
        (Prepared::Embedding(u), Prepared::Embedding(v)) => cosine_sim(u, v),
        (Prepared::Keypoints(a, _), Prepared::Keypoints(b, _)) => {
            match oks_with_scale(a, b, scale_sq, params) {
                Ok(v) => Ok(v),
                // disjoint visibility: no evidence of agreement
                Err(Error::Feature(_)) => Ok(0.0),
                Err(e) => Err(e),
            }
        }
        _ => Err(Error::Feature("mixed payload kinds".into())),
    }
}

fn scale_of(p: &Prepared) -> f64 {
    match p {
        Prepared::Keypoints(_, s) => *s,
        Prepared::Embedding(_) => 1.0,
    }
}

/// Builds the similarity bundle for one dimension.
///
/// `gen` maps a matched slot to the features of its generated crop. Returns
/// `None` when no ground-truth slot is valid for `d`.
pub fn build_bundle(
    gt_slots: &[GtSlot],
    gen: &BTreeMap<usize, FeatureMap>,
    matched: &BTreeSet<usize>,
    d: Dimension,
    cfg: &SimilarityConfig,
) -> Result<Option<SimilarityBundle>> {
    let params = &cfg.oks;
    let mut slots: Vec<&GtSlot> = gt_slots.iter().collect();
    slots.sort_by_key(|s| s.slot_index);

    let mut cols = Vec::new();
    let mut col_feats = Vec::new();
    for s in &slots {
        let what = format!("gt slot {}", s.slot_index);
        if let Some(p) = prepare(s.features.get(&d), d, params, &what)? {
            cols.push(s.slot_index);
            col_feats.push(p);
        }
    }
    if cols.is_empty() {
        return Ok(None);
    }

    let mut rows = Vec::new();
    let mut row_feats = Vec::new();
    let mut dropped_rows = Vec::new();
    for (ci, &slot) in cols.iter().enumerate() {
        if !matched.contains(&slot) {
            continue;
        }
        let what = format!("generated slot {slot}");
        match prepare(gen.get(&slot).and_then(|f| f.get(&d)), d, params, &what)? {
            Some(p) => {
                rows.push((slot, ci));
                row_feats.push(p);
            }
            None => dropped_rows.push(slot),
        }
    }

    // symmetric pair scale from the two ground-truth skeletons
    let pair_scale = |a: usize, b: usize| {
        let s = (scale_of(&col_feats[a]).sqrt() + scale_of(&col_feats[b]).sqrt()) / 2.0;
        s * s
    };

    let shape = (rows.len(), cols.len());
    let mut s_gt = Array2::zeros(shape);
    let mut s_gen = Array2::zeros(shape);
    for (r, (&(_, ci), gen_f)) in rows.iter().zip(&row_feats).enumerate() {
        for (c, col_f) in col_feats.iter().enumerate() {
            let scale = pair_scale(ci, c);
            s_gt[[r, c]] = pair_sim(&col_feats[ci], col_f, scale, params)?;
            s_gen[[r, c]] = pair_sim(gen_f, col_f, scale, params)?;
        }
    }
    let delta = &s_gen - &s_gt;
    Ok(Some(SimilarityBundle {
        dimension: d,
        rows: rows.into_iter().map(|(s, _)| s).collect(),
        cols,
        s_gt,
        s_gen,
        delta,
        dropped_rows,
    }))
}

/// Builds a bundle from a manifest whose detections carry generated features.
pub fn build_bundle_from_manifest(
    m: &InstanceManifest,
    a: &Assignment,
    d: Dimension,
    cfg: &SimilarityConfig,
) -> Result<Option<SimilarityBundle>> {
    let gen: BTreeMap<usize, FeatureMap> = a
        .pairs
        .iter()
        .map(|p| (p.slot, m.detections[p.detection].features.clone()))
        .collect();
    build_bundle(&m.gt_slots, &gen, &a.matched_set(), d, cfg)
}
