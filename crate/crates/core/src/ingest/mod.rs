//! Reading and writing the `multibind/1` interchange documents.
//!
//! Every document is a JSON object with a top-level `"schema": "multibind/1"`.
//! Slot indices are 1-based and refer to the left-to-right order; detection
//! indices are 0-based positions in the detection list. Field-level layouts
//! are documented in `docs/FORMATS.md`.

pub mod rle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, BitMask};
use crate::model::{
    order_slots_left_to_right, Detection, Dimension, FeatureMap, FeatureValue, GtSlot, InstanceManifest, Keypoint,
    KeypointSet,
};
use crate::thresholds::{DimensionThresholds, ThresholdTable};

pub use rle::Rle;

pub const SCHEMA: &str = "multibind/1";

// ---------------------------------------------------------------------------
// documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Compressed(String),
    Runs(Vec<u32>),
}

/// A mask as COCO RLE (`size` is `[height, width]`) or a grayscale raster path
/// relative to the referencing document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskDoc {
    Rle { size: [usize; 2], counts: RleCounts },
    Raster { raster: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotDoc {
    pub slot_index: usize,
    pub mask: MaskDoc,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDoc {
    pub mask: MaskDoc,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub schema: String,
    pub instance_id: String,
    /// `[width, height]`
    pub image_size: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_image_size: Option<[usize; 2]>,
    pub gt_slots: Vec<SlotDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detections: Vec<DetectionDoc>,
}

/// Per-model detections for one instance, masks at ground-truth resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionsDoc {
    pub schema: String,
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub image_size: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_image_size: Option<[usize; 2]>,
    pub detections: Vec<DetectionDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Gt,
    Gen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indexing {
    #[default]
    Slot,
    Detection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointsDoc {
    /// `[width, height]` of the crop.
    pub crop_size: [f64; 2],
    /// `[x, y, visibility, confidence]`; visible when `visibility > 0`.
    pub points: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordDoc {
    pub index: usize,
    pub dimension: Dimension,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<KeypointsDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFileDoc {
    pub schema: String,
    pub instance_id: String,
    pub side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default)]
    pub indexing: Indexing,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, serde_json::Value>,
    pub records: Vec<RecordDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Consistency,
    Confusion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanLabel {
    pub instance_id: String,
    pub model_id: String,
    pub dimension: Dimension,
    pub i: usize,
    pub j: usize,
    pub label: bool,
    pub kind: LabelKind,
}

impl HumanLabel {
    pub fn key(&self) -> LabelKey {
        (
            self.instance_id.clone(),
            self.model_id.clone(),
            self.dimension,
            self.i,
            self.j,
        )
    }
}

/// `(instance, model, dimension, i, j)`
pub type LabelKey = (String, String, Dimension, usize, usize);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsDoc {
    pub schema: String,
    pub labels: Vec<HumanLabel>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsDoc {
    pub schema: String,
    /// When true, dimensions absent from the file keep their builtin values.
    #[serde(default = "default_true")]
    pub merge: bool,
    pub thresholds: BTreeMap<Dimension, DimensionThresholds>,
}

// ---------------------------------------------------------------------------
// in-memory feature files

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub valid: bool,
    pub value: Option<FeatureValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub instance_id: String,
    pub side: Side,
    pub model_id: Option<String>,
    pub indexing: Indexing,
    pub meta: BTreeMap<String, serde_json::Value>,
    pub records: BTreeMap<(usize, Dimension), FeatureRecord>,
}

impl FeatureFile {
    pub fn new(instance_id: impl Into<String>, side: Side) -> Self {
        Self {
            instance_id: instance_id.into(),
            side,
            model_id: None,
            indexing: Indexing::Slot,
            meta: BTreeMap::new(),
            records: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, index: usize, dimension: Dimension, value: Option<FeatureValue>) {
        self.records.insert(
            (index, dimension),
            FeatureRecord {
                valid: value.is_some(),
                value,
            },
        );
    }

    /// Valid payloads grouped by index. Missing or invalid records are absent.
    pub fn valid_features(&self) -> BTreeMap<usize, FeatureMap> {
        let mut out: BTreeMap<usize, FeatureMap> = BTreeMap::new();
        for ((index, dim), rec) in &self.records {
            if let (true, Some(v)) = (rec.valid, &rec.value) {
                out.entry(*index).or_default().insert(*dim, v.clone());
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// helpers

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_doc<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::ingest(origin, field, e.into_inner().to_string())
    })
}

fn check_schema(schema: &str, origin: &Path) -> Result<()> {
    if schema != SCHEMA {
        return Err(Error::ingest(
            origin,
            "schema",
            format!("expected `{SCHEMA}`, found `{schema}`"),
        ));
    }
    Ok(())
}

fn base_dir(origin: &Path) -> PathBuf {
    origin
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Serializes `value` as pretty JSON with a trailing newline, creating parent
/// directories as needed.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn decode_mask(
    doc: &MaskDoc,
    image_size: (usize, usize),
    base: &Path,
    origin: &Path,
    field: &str,
) -> Result<BitMask> {
    let (w, h) = image_size;
    let mask = match doc {
        MaskDoc::Rle { size, counts } => {
            let [mh, mw] = *size;
            if (mw, mh) != (w, h) {
                return Err(Error::ingest(
                    origin,
                    format!("{field}.size"),
                    format!("mask is {mw}x{mh}, image is {w}x{h}"),
                ));
            }
            let rle = match counts {
                RleCounts::Compressed(s) => Rle::from_compressed(s, mh, mw),
                RleCounts::Runs(c) => Ok(Rle {
                    height: mh,
                    width: mw,
                    counts: c.clone(),
                }),
            }
            .and_then(|r| r.decode())
            .map_err(|e| Error::ingest(origin, format!("{field}.counts"), e.to_string()))?;
            rle
        }
        MaskDoc::Raster { raster } => {
            let p = base.join(raster);
            let img = image::open(&p)
                .map_err(|e| Error::ingest(origin, format!("{field}.raster"), e.to_string()))?
                .to_luma8();
            let (rw, rh) = (img.width() as usize, img.height() as usize);
            if (rw, rh) != (w, h) {
                return Err(Error::ingest(
                    origin,
                    format!("{field}.raster"),
                    format!("raster is {rw}x{rh}, image is {w}x{h}"),
                ));
            }
            BitMask::from_row_major(w, h, img.as_raw()).map_err(|e| Error::ingest(origin, field, e.to_string()))?
        }
    };
    Ok(mask)
}

pub fn encode_mask(mask: &BitMask) -> MaskDoc {
    let rle = Rle::encode(mask);
    MaskDoc::Rle {
        size: [rle.height, rle.width],
        counts: RleCounts::Compressed(rle.to_compressed()),
    }
}

fn bbox_from_doc(b: Option<[f64; 4]>, mask: &BitMask, origin: &Path, field: &str) -> Result<BBox> {
    match b {
        Some([x1, y1, x2, y2]) => BBox::new(x1, y1, x2, y2).map_err(|e| Error::ingest(origin, field, e.to_string())),
        None => mask
            .bounding_box()
            .ok_or_else(|| Error::ingest(origin, field, "box is required when the mask is empty")),
    }
}

fn bbox_to_doc(b: &BBox) -> [f64; 4] {
    [b.x1, b.y1, b.x2, b.y2]
}

fn size_tuple(s: [usize; 2], origin: &Path, field: &str) -> Result<(usize, usize)> {
    if s[0] == 0 || s[1] == 0 {
        return Err(Error::ingest(origin, field, "image size must be positive"));
    }
    Ok((s[0], s[1]))
}

fn convert_detections(
    docs: &[DetectionDoc],
    image_size: (usize, usize),
    base: &Path,
    origin: &Path,
) -> Result<Vec<Detection>> {
    docs.iter()
        .enumerate()
        .map(|(j, d)| {
            let field = format!("detections[{j}]");
            let mask = decode_mask(&d.mask, image_size, base, origin, &format!("{field}.mask"))?;
            let bbox = bbox_from_doc(d.bbox, &mask, origin, &format!("{field}.box"))?;
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::ingest(
                    origin,
                    format!("{field}.confidence"),
                    format!("{} outside [0, 1]", d.confidence),
                ));
            }
            Ok(Detection {
                mask,
                bbox,
                confidence: d.confidence,
                features: FeatureMap::new(),
            })
        })
        .collect()
}

fn detections_to_docs(dets: &[Detection]) -> Vec<DetectionDoc> {
    dets.iter()
        .map(|d| DetectionDoc {
            mask: encode_mask(&d.mask),
            bbox: Some(bbox_to_doc(&d.bbox)),
            confidence: d.confidence,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// manifests

pub fn load_manifest(path: &Path) -> Result<InstanceManifest> {
    parse_manifest(&read_text(path)?, path)
}

/// Parses a manifest. `origin` is used for error messages and to resolve
/// raster paths.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<InstanceManifest> {
    let doc: ManifestDoc = parse_doc(text, origin)?;
    manifest_from_doc(&doc, origin)
}

pub fn manifest_from_doc(doc: &ManifestDoc, origin: &Path) -> Result<InstanceManifest> {
    check_schema(&doc.schema, origin)?;
    let base = base_dir(origin);
    let image_size = size_tuple(doc.image_size, origin, "image_size")?;
    let gen_image_size = doc
        .gen_image_size
        .map(|s| size_tuple(s, origin, "gen_image_size"))
        .transpose()?;

    let n = doc.gt_slots.len();
    if !(2..=4).contains(&n) {
        return Err(Error::Validation(format!(
            "{}: expected 2..=4 subject slots, found {n}",
            doc.instance_id
        )));
    }
    let mut seen = BTreeSet::new();
    let mut slots = Vec::with_capacity(n);
    for (k, s) in doc.gt_slots.iter().enumerate() {
        let field = format!("gt_slots[{k}]");
        if !seen.insert(s.slot_index) {
            return Err(Error::Validation(format!(
                "{}: duplicate slot index {}",
                doc.instance_id, s.slot_index
            )));
        }
        let mask = decode_mask(&s.mask, image_size, &base, origin, &format!("{field}.mask"))?;
        if mask.is_empty() {
            return Err(Error::ingest(origin, format!("{field}.mask"), "empty mask"));
        }
        let bbox = bbox_from_doc(s.bbox, &mask, origin, &format!("{field}.box"))?;
        slots.push(GtSlot {
            slot_index: s.slot_index,
            source_index: s.slot_index,
            mask,
            bbox,
            features: FeatureMap::new(),
        });
    }
    order_slots_left_to_right(&mut slots)?;
    if slots.iter().any(|s| s.slot_index != s.source_index) {
        log::warn!(
            "{}: slots re-indexed left to right (source order {:?})",
            doc.instance_id,
            slots.iter().map(|s| s.source_index).collect::<Vec<_>>()
        );
    }
    let detections = convert_detections(&doc.detections, image_size, &base, origin)?;
    let m = InstanceManifest {
        instance_id: doc.instance_id.clone(),
        image_size,
        gen_image_size,
        gt_slots: slots,
        detections,
    };
    m.validate()?;
    Ok(m)
}

pub fn manifest_to_doc(m: &InstanceManifest) -> ManifestDoc {
    ManifestDoc {
        schema: SCHEMA.to_string(),
        instance_id: m.instance_id.clone(),
        image_size: [m.image_size.0, m.image_size.1],
        gen_image_size: m.gen_image_size.map(|(w, h)| [w, h]),
        gt_slots: m
            .gt_slots
            .iter()
            .map(|s| SlotDoc {
                slot_index: s.slot_index,
                mask: encode_mask(&s.mask),
                bbox: Some(bbox_to_doc(&s.bbox)),
            })
            .collect(),
        detections: detections_to_docs(&m.detections),
    }
}

// ---------------------------------------------------------------------------
// per-model detections

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub instance_id: String,
    pub model_id: Option<String>,
    pub gen_image_size: Option<(usize, usize)>,
    pub detections: Vec<Detection>,
}

/// Loads a detections document; masks must be at `image_size` (the ground-truth resolution).
pub fn load_detections(path: &Path, image_size: (usize, usize)) -> Result<DetectionSet> {
    let text = read_text(path)?;
    let doc: DetectionsDoc = parse_doc(&text, path)?;
    check_schema(&doc.schema, path)?;
    let declared = size_tuple(doc.image_size, path, "image_size")?;
    if declared != image_size {
        return Err(Error::ingest(
            path,
            "image_size",
            format!(
                "detections declared at {}x{}, ground truth is {}x{}",
                declared.0, declared.1, image_size.0, image_size.1
            ),
        ));
    }
    let detections = convert_detections(&doc.detections, image_size, &base_dir(path), path)?;
    Ok(DetectionSet {
        instance_id: doc.instance_id,
        model_id: doc.model_id,
        gen_image_size: doc
            .gen_image_size
            .map(|s| size_tuple(s, path, "gen_image_size"))
            .transpose()?,
        detections,
    })
}

pub fn detections_to_doc(set: &DetectionSet, image_size: (usize, usize)) -> DetectionsDoc {
    DetectionsDoc {
        schema: SCHEMA.to_string(),
        instance_id: set.instance_id.clone(),
        model_id: set.model_id.clone(),
        image_size: [image_size.0, image_size.1],
        gen_image_size: set.gen_image_size.map(|(w, h)| [w, h]),
        detections: detections_to_docs(&set.detections),
    }
}

// ---------------------------------------------------------------------------
// feature files

pub fn load_features(path: &Path) -> Result<FeatureFile> {
    parse_features(&read_text(path)?, path)
}

pub fn parse_features(text: &str, origin: &Path) -> Result<FeatureFile> {
    let doc: FeatureFileDoc = parse_doc(text, origin)?;
    features_from_doc(doc, origin)
}

pub fn features_from_doc(doc: FeatureFileDoc, origin: &Path) -> Result<FeatureFile> {
    check_schema(&doc.schema, origin)?;
    let mut records = BTreeMap::new();
    let mut lengths: BTreeMap<Dimension, usize> = BTreeMap::new();
    for (k, r) in doc.records.into_iter().enumerate() {
        let field = format!("records[{k}]");
        if doc.indexing == Indexing::Slot && r.index == 0 {
            return Err(Error::ingest(
                origin,
                format!("{field}.index"),
                "slot indices are 1-based",
            ));
        }
        let value = match (r.embedding, r.keypoints) {
            (Some(_), Some(_)) => {
                return Err(Error::ingest(
                    origin,
                    field,
                    "record carries both an embedding and keypoints",
                ))
            }
            (Some(e), None) => Some(FeatureValue::Embedding(e)),
            (None, Some(kp)) => Some(FeatureValue::Keypoints(KeypointSet {
                crop_size: (kp.crop_size[0], kp.crop_size[1]),
                points: kp
                    .points
                    .iter()
                    .map(|p| Keypoint {
                        x: p[0],
                        y: p[1],
                        visible: p[2] > 0.0,
                        confidence: p[3],
                    })
                    .collect(),
            })),
            (None, None) => None,
        };
        if r.valid && value.is_none() {
            return Err(Error::ingest(origin, field, "valid record without payload"));
        }
        if let Some(v) = &value {
            let expects_keypoints = r.dimension.uses_keypoints();
            let is_keypoints = matches!(v, FeatureValue::Keypoints(_));
            if expects_keypoints != is_keypoints {
                return Err(Error::ingest(
                    origin,
                    field,
                    format!("wrong payload kind for `{}`", r.dimension),
                ));
            }
            v.validate()
                .map_err(|e| Error::ingest(origin, format!("records[{k}]"), e.to_string()))?;
            if let FeatureValue::Embedding(e) = v {
                let len = *lengths.entry(r.dimension).or_insert(e.len());
                if len != e.len() {
                    return Err(Error::ingest(
                        origin,
                        format!("records[{k}].embedding"),
                        format!("length {} differs from {len} used for `{}`", e.len(), r.dimension),
                    ));
                }
            }
        }
        let key = (r.index, r.dimension);
        if records.insert(key, FeatureRecord { valid: r.valid, value }).is_some() {
            return Err(Error::Validation(format!(
                "{}: duplicate feature record (index {}, {})",
                doc.instance_id, key.0, key.1
            )));
        }
    }
    Ok(FeatureFile {
        instance_id: doc.instance_id,
        side: doc.side,
        model_id: doc.model_id,
        indexing: doc.indexing,
        meta: doc.meta,
        records,
    })
}

pub fn features_to_doc(f: &FeatureFile) -> FeatureFileDoc {
    let records = f
        .records
        .iter()
        .map(|((index, dimension), rec)| {
            let (embedding, keypoints) = match &rec.value {
                Some(FeatureValue::Embedding(e)) => (Some(e.clone()), None),
                Some(FeatureValue::Keypoints(k)) => (
                    None,
                    Some(KeypointsDoc {
                        crop_size: [k.crop_size.0, k.crop_size.1],
                        points: k
                            .points
                            .iter()
                            .map(|p| [p.x, p.y, if p.visible { 1.0 } else { 0.0 }, p.confidence])
                            .collect(),
                    }),
                ),
                None => (None, None),
            };
            RecordDoc {
                index: *index,
                dimension: *dimension,
                valid: rec.valid,
                embedding,
                keypoints,
            }
        })
        .collect();
    FeatureFileDoc {
        schema: SCHEMA.to_string(),
        instance_id: f.instance_id.clone(),
        side: f.side,
        model_id: f.model_id.clone(),
        indexing: f.indexing,
        meta: f.meta.clone(),
        records,
    }
}

// ---------------------------------------------------------------------------
// labels

pub fn load_labels(path: &Path) -> Result<Vec<HumanLabel>> {
    parse_labels(&read_text(path)?, path)
}

/// Parses and validates labels, returned sorted by key.
pub fn parse_labels(text: &str, origin: &Path) -> Result<Vec<HumanLabel>> {
    let doc: LabelsDoc = parse_doc(text, origin)?;
    check_schema(&doc.schema, origin)?;
    validate_labels(doc.labels)
}

pub fn validate_labels(labels: Vec<HumanLabel>) -> Result<Vec<HumanLabel>> {
    let mut by_key = BTreeMap::new();
    for l in labels {
        if l.i == 0 || l.j == 0 {
            return Err(Error::Validation(format!(
                "label {:?}: slot indices are 1-based",
                l.key()
            )));
        }
        let expected = if l.i == l.j {
            LabelKind::Consistency
        } else {
            LabelKind::Confusion
        };
        if l.kind != expected {
            return Err(Error::Validation(format!(
                "label {:?}: kind {:?} does not match (i={}, j={})",
                l.key(),
                l.kind,
                l.i,
                l.j
            )));
        }
        let key = l.key();
        if by_key.insert(key.clone(), l).is_some() {
            return Err(Error::Validation(format!("duplicate label {key:?}")));
        }
    }
    Ok(by_key.into_values().collect())
}

// ---------------------------------------------------------------------------
// thresholds

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ThresholdSource {
    #[default]
    Builtin,
    File(PathBuf),
}

pub fn load_thresholds(source: &ThresholdSource) -> Result<ThresholdTable> {
    match source {
        ThresholdSource::Builtin => Ok(ThresholdTable::builtin()),
        ThresholdSource::File(path) => parse_thresholds(&read_text(path)?, path),
    }
}

pub fn parse_thresholds(text: &str, origin: &Path) -> Result<ThresholdTable> {
    let doc: ThresholdsDoc = parse_doc(text, origin)?;
    check_schema(&doc.schema, origin)?;
    if doc.merge {
        ThresholdTable::builtin().merged(&doc.thresholds)
    } else {
        ThresholdTable::from_map(doc.thresholds)
    }
}

pub fn thresholds_to_doc(t: &ThresholdTable) -> ThresholdsDoc {
    ThresholdsDoc {
        schema: SCHEMA.to_string(),
        merge: false,
        thresholds: t.iter().collect(),
    }
}
