//! Domain types shared across the engine.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, BitMask, LtrKey};

/// Attribute dimension evaluated by a specialist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    FaceIdentity,
    Appearance,
    Pose,
    Expression,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::FaceIdentity,
        Dimension::Appearance,
        Dimension::Pose,
        Dimension::Expression,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::FaceIdentity => "face_identity",
            Dimension::Appearance => "appearance",
            Dimension::Pose => "pose",
            Dimension::Expression => "expression",
        }
    }

    /// Whether this dimension compares keypoints (OKS) rather than embeddings (cosine).
    pub fn uses_keypoints(&self) -> bool {
        matches!(self, Dimension::Pose)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown dimension `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
    pub confidence: f64,
}

/// Skeleton in crop-pixel coordinates together with the crop dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    /// `(width, height)` of the crop the coordinates refer to.
    pub crop_size: (f64, f64),
    pub points: Vec<Keypoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Embedding(Vec<f64>),
    Keypoints(KeypointSet),
}

impl FeatureValue {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeatureValue::Embedding(v) => {
                if v.is_empty() {
                    return Err(Error::Feature("empty embedding".into()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Feature("non-finite embedding entry".into()));
                }
            }
            FeatureValue::Keypoints(k) => {
                let (w, h) = k.crop_size;
                if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
                    return Err(Error::Feature(format!("bad crop size {w}x{h}")));
                }
                for p in &k.points {
                    if !(p.x.is_finite() && p.y.is_finite()) {
                        return Err(Error::Feature("non-finite keypoint".into()));
                    }
                    if !(0.0..=1.0).contains(&p.confidence) {
                        return Err(Error::Feature(format!(
                            "keypoint confidence {} outside [0, 1]",
                            p.confidence
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Valid specialist outputs of one crop, keyed by dimension.
pub type FeatureMap = BTreeMap<Dimension, FeatureValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct GtSlot {
    /// 1-based, left-to-right.
    pub slot_index: usize,
    /// Index as written in the source document, before re-ordering.
    pub source_index: usize,
    pub mask: BitMask,
    pub bbox: BBox,
    pub features: FeatureMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mask: BitMask,
    pub bbox: BBox,
    pub confidence: f64,
    pub features: FeatureMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceManifest {
    pub instance_id: String,
    /// `(width, height)` of the ground-truth image. Detection masks live at this
    /// resolution too, since the generated image is resized before matching.
    pub image_size: (usize, usize),
    /// Native resolution of the generated image, if known.
    pub gen_image_size: Option<(usize, usize)>,
    pub gt_slots: Vec<GtSlot>,
    pub detections: Vec<Detection>,
}

impl InstanceManifest {
    pub fn image_area(&self) -> f64 {
        (self.image_size.0 * self.image_size.1) as f64
    }

    pub fn slot(&self, index: usize) -> Option<&GtSlot> {
        self.gt_slots.iter().find(|s| s.slot_index == index)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gt_slots.len();
        if !(2..=4).contains(&n) {
            return Err(Error::Validation(format!(
                "instance {}: expected 2..=4 subject slots, found {n}",
                self.instance_id
            )));
        }
        let (w, h) = self.image_size;
        for s in &self.gt_slots {
            if s.mask.width() != w || s.mask.height() != h {
                return Err(Error::Validation(format!(
                    "instance {}: slot {} mask is {}x{}, image is {w}x{h}",
                    self.instance_id,
                    s.slot_index,
                    s.mask.width(),
                    s.mask.height()
                )));
            }
            if s.mask.is_empty() {
                return Err(Error::Validation(format!(
                    "instance {}: slot {} has an empty mask",
                    self.instance_id, s.slot_index
                )));
            }
        }
        let mut seen: Vec<usize> = self.gt_slots.iter().map(|s| s.slot_index).collect();
        seen.sort_unstable();
        if seen != (1..=n).collect::<Vec<_>>() {
            return Err(Error::Validation(format!(
                "instance {}: slot indices {seen:?} are not 1..={n}",
                self.instance_id
            )));
        }
        for (j, d) in self.detections.iter().enumerate() {
            if d.mask.width() != w || d.mask.height() != h {
                return Err(Error::Validation(format!(
                    "instance {}: detection {j} mask is {}x{}, expected {w}x{h}",
                    self.instance_id,
                    d.mask.width(),
                    d.mask.height()
                )));
            }
            if !d.confidence.is_finite() {
                return Err(Error::Validation(format!(
                    "instance {}: detection {j} has non-finite confidence",
                    self.instance_id
                )));
            }
        }
        Ok(())
    }
}

/// Sorts slots left to right by mask centroid (ties: centroid y, then box x1)
/// and renumbers them `1..=N`.
pub fn order_slots_left_to_right(slots: &mut [GtSlot]) -> Result<()> {
    let mut keyed = Vec::with_capacity(slots.len());
    for s in slots.iter() {
        keyed.push((LtrKey::of(&s.mask, &s.bbox)?, s.source_index));
    }
    let mut order: Vec<usize> = (0..slots.len()).collect();
    // source_index as last resort keeps the order total for identical masks
    order.sort_by(|&a, &b| keyed[a].0.cmp(&keyed[b].0).then(keyed[a].1.cmp(&keyed[b].1)));
    let mut rank = vec![0; slots.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    for (s, r) in slots.iter_mut().zip(rank) {
        s.slot_index = r;
    }
    slots.sort_by_key(|s| s.slot_index);
    Ok(())
}
