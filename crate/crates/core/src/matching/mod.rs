//! Slot matching (`topk_area_ltr`): filter detections, drop near-duplicates,
//! then pair by left-to-right rank when enough detections survive, or by
//! maximum total mask IoU otherwise.

pub mod hungarian;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{mask_iou, mask_overlap_min, LtrKey};
use crate::model::{Detection, GtSlot, InstanceManifest};

pub use hungarian::max_weight_assignment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Minimum detection confidence.
    pub det_conf: f64,
    /// Fraction of the smallest normalized GT box area a detection box must reach.
    pub area_factor: f64,
    /// Min-area overlap at which two detections count as duplicates.
    pub dup_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            det_conf: 0.3,
            area_factor: 0.35,
            dup_threshold: 0.5,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.det_conf) || !in_unit(self.dup_threshold) || !in_unit(self.area_factor) {
            return Err(Error::Validation(format!(
                "match parameters must lie in [0, 1]: {self:?}"
            )));
        }
        if self.area_factor <= 0.0 {
            return Err(Error::Validation("area factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    /// 1-based slot index.
    pub slot: usize,
    /// 0-based index into the detection list.
    pub detection: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchBranch {
    /// At least N detections survived; paired by left-to-right rank.
    RankOrder,
    /// Fewer than N survived; paired by maximum total IoU.
    Hungarian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub n_slots: usize,
    pub branch: MatchBranch,
    /// Sorted by slot.
    pub pairs: Vec<MatchedPair>,
    /// Detection indices surviving filtering and de-duplication, in keep order.
    pub kept: Vec<usize>,
}

impl Assignment {
    pub fn matched_set(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.slot).collect()
    }

    pub fn pair_for_slot(&self, slot: usize) -> Option<&MatchedPair> {
        self.pairs.iter().find(|p| p.slot == slot)
    }

    pub fn mean_iou(&self) -> Option<f64> {
        if self.pairs.is_empty() {
            return None;
        }
        Some(self.pairs.iter().map(|p| p.iou).sum::<f64>() / self.pairs.len() as f64)
    }
}

/// Indices of detections passing the confidence, non-empty and minimum-area checks.
pub fn filter_detections(dets: &[Detection], gt: &[GtSlot], image_area: f64, cfg: &MatchConfig) -> Vec<usize> {
    let min_gt = gt
        .iter()
        .map(|s| s.bbox.area() / image_area)
        .fold(f64::INFINITY, f64::min);
    let t_area = cfg.area_factor * min_gt;
    dets.iter()
        .enumerate()
        .filter(|(_, d)| d.confidence >= cfg.det_conf && !d.mask.is_empty() && d.bbox.area() / image_area >= t_area)
        .map(|(j, _)| j)
        .collect()
}

/// Greedy de-duplication in order of decreasing box area (then decreasing
/// confidence). Returns surviving indices in keep order.
pub fn dedup_detections(dets: &[Detection], candidates: &[usize], dup_threshold: f64) -> Result<Vec<usize>> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| {
        dets[b]
            .bbox
            .area()
            .total_cmp(&dets[a].bbox.area())
            .then(dets[b].confidence.total_cmp(&dets[a].confidence))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for j in order {
        let mut duplicate = false;
        for &k in &kept {
            if mask_overlap_min(&dets[j].mask, &dets[k].mask)? >= dup_threshold {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// Assigns surviving detections (in keep order, largest first) to slots.
pub fn assign_slots(dets: &[Detection], kept: &[usize], gt: &[GtSlot]) -> Result<Assignment> {
    let n = gt.len();
    if kept.len() >= n {
        let selected = &kept[..n];
        let mut gt_order: Vec<(LtrKey, usize)> = gt
            .iter()
            .map(|s| Ok((LtrKey::of(&s.mask, &s.bbox)?, s.slot_index)))
            .collect::<Result<_>>()?;
        gt_order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut det_order: Vec<(LtrKey, usize)> = selected
            .iter()
            .map(|&j| Ok((LtrKey::of(&dets[j].mask, &dets[j].bbox)?, j)))
            .collect::<Result<_>>()?;
        det_order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut pairs = Vec::with_capacity(n);
        for ((_, slot), (_, j)) in gt_order.iter().zip(&det_order) {
            let s = gt.iter().find(|s| s.slot_index == *slot).expect("slot exists");
            pairs.push(MatchedPair {
                slot: *slot,
                detection: *j,
                iou: mask_iou(&s.mask, &dets[*j].mask)?,
            });
        }
        pairs.sort_by_key(|p| p.slot);
        return Ok(Assignment {
            n_slots: n,
            branch: MatchBranch::RankOrder,
            pairs,
            kept: kept.to_vec(),
        });
    }

    let mut iou = vec![vec![0.0; kept.len()]; n];
    for (r, s) in gt.iter().enumerate() {
        for (c, &j) in kept.iter().enumerate() {
            iou[r][c] = mask_iou(&s.mask, &dets[j].mask)?;
        }
    }
    let mut pairs: Vec<MatchedPair> = max_weight_assignment(&iou)
        .into_iter()
        .map(|(r, c)| MatchedPair {
            slot: gt[r].slot_index,
            detection: kept[c],
            iou: iou[r][c],
        })
        .collect();
    pairs.sort_by_key(|p| p.slot);
    Ok(Assignment {
        n_slots: n,
        branch: MatchBranch::Hungarian,
        pairs,
        kept: kept.to_vec(),
    })
}

/// Full matching for one set of detections against the ground-truth slots.
pub fn match_detections(gt: &[GtSlot], dets: &[Detection], image_area: f64, cfg: &MatchConfig) -> Result<Assignment> {
    if gt.is_empty() {
        return Err(Error::Validation("no ground-truth slots to match".into()));
    }
    let candidates = filter_detections(dets, gt, image_area, cfg);
    let kept = dedup_detections(dets, &candidates, cfg.dup_threshold)?;
    assign_slots(dets, &kept, gt)
}

pub fn match_instance(m: &InstanceManifest, cfg: &MatchConfig) -> Result<Assignment> {
    match_detections(&m.gt_slots, &m.detections, m.image_area(), cfg)
}
