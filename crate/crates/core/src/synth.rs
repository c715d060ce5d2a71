//! Deterministic synthetic datasets with planted binding failures.
//!
//! Subjects are side-by-side rectangles. Features are constructed directly:
//! embeddings from a random orthonormal frame with a small shared component,
//! skeletons as a fixed stick figure placed at a distinct corner of the crop
//! per subject.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{detections_to_doc, features_to_doc, manifest_to_doc, write_json, DetectionSet, FeatureFile, Side};
use crate::mask::{mask_overlap_min, BitMask};
use crate::model::{
    order_slots_left_to_right, Detection, Dimension, FeatureMap, FeatureValue, GtSlot, InstanceManifest, Keypoint,
    KeypointSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    Perfect,
    Drift,
    Swap,
    Dominance,
    Blending,
    /// A random failure mode per instance, model and dimension.
    Mixed,
}

impl SynthMode {
    const CONCRETE: [SynthMode; 5] = [
        SynthMode::Perfect,
        SynthMode::Drift,
        SynthMode::Swap,
        SynthMode::Dominance,
        SynthMode::Blending,
    ];
}

impl std::str::FromStr for SynthMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "perfect" => Self::Perfect,
            "drift" => Self::Drift,
            "swap" => Self::Swap,
            "dominance" => Self::Dominance,
            "blending" => Self::Blending,
            "mixed" => Self::Mixed,
            other => return Err(format!("unknown synth mode `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub instances: usize,
    pub models: Vec<String>,
    pub mode: SynthMode,
    /// Subjects per instance; drawn from 2..=4 when unset.
    pub subjects: Option<usize>,
    /// Dimensions the mode is applied to; the rest are reconstructed perfectly.
    pub dimensions: Vec<Dimension>,
    pub embed_dim: usize,
    /// `(width, height)`
    pub image_size: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 8,
            models: vec!["model_a".into()],
            mode: SynthMode::Perfect,
            subjects: None,
            dimensions: Dimension::ALL.to_vec(),
            embed_dim: 32,
            image_size: (256, 128),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    /// Ground-truth slots carry their features; detections are empty.
    pub manifest: InstanceManifest,
    pub gt_features: FeatureFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub detections: DetectionSet,
    pub features: FeatureFile,
    /// Mode planted per dimension.
    pub modes: BTreeMap<Dimension, SynthMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub instances: Vec<SynthInstance>,
    /// `model -> instance -> output`
    pub outputs: BTreeMap<String, BTreeMap<String, SynthOutput>>,
}

/// Shared-component weight giving a ground-truth cross similarity of about 0.05.
const BETA: f64 = 0.229_415_733_870_562_2;

/// Stick figure in COCO keypoint order, spanning the unit square.
const TEMPLATE: [(f64, f64); 17] = [
    (0.50, 0.08),
    (0.55, 0.00),
    (0.45, 0.00),
    (0.62, 0.06),
    (0.38, 0.06),
    (0.70, 0.25),
    (0.30, 0.25),
    (0.85, 0.42),
    (0.15, 0.42),
    (1.00, 0.55),
    (0.00, 0.55),
    (0.62, 0.60),
    (0.38, 0.60),
    (0.64, 0.80),
    (0.36, 0.80),
    (0.66, 1.00),
    (0.34, 1.00),
];

const FIGURE_SIZE: f64 = 0.1;
const CORNERS: [(f64, f64); 4] = [(0.05, 0.05), (0.85, 0.05), (0.05, 0.85), (0.85, 0.85)];
const CENTRE: (f64, f64) = (0.45, 0.45);
/// Keypoints a blended skeleton keeps from its own subject.
const BLEND_KEEP: usize = 10;

fn skeleton(origin: (f64, f64), crop: (f64, f64)) -> KeypointSet {
    KeypointSet {
        crop_size: crop,
        points: TEMPLATE
            .iter()
            .map(|&(x, y)| Keypoint {
                x: (origin.0 + x * FIGURE_SIZE) * crop.0,
                y: (origin.1 + y * FIGURE_SIZE) * crop.1,
                visible: true,
                confidence: 0.9,
            })
            .collect(),
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + q).collect()
}

/// `k` orthonormal vectors in `dim` dimensions (Gram-Schmidt on random draws).
fn orthonormal_frame(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    while frame.len() < k {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for u in &frame {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v = axpy(-dot, u, &v);
        }
        if v.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6 {
            frame.push(normalize(v));
        }
    }
    frame
}

/// Generated features for one dimension, by slot (0-based), under `mode`.
fn planted<T: Clone>(mode: SynthMode, gt: &[T], drift: impl Fn(usize) -> T, blend: impl Fn(&T, &T) -> T) -> Vec<T> {
    let n = gt.len();
    match mode {
        SynthMode::Perfect | SynthMode::Mixed => gt.to_vec(),
        SynthMode::Drift => (0..n).map(drift).collect(),
        SynthMode::Swap => {
            let mut g = gt.to_vec();
            g.swap(0, 1);
            g
        }
        SynthMode::Dominance => vec![gt[0].clone(); n],
        SynthMode::Blending => {
            let mut g = gt.to_vec();
            g[0] = blend(&gt[0], &gt[1]);
            g
        }
    }
}

fn subject_masks(w: usize, h: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<BitMask>> {
    let cell = w / n;
    (0..n)
        .map(|i| {
            let jitter = rng.gen_range(0..=cell / 16);
            let x1 = i * cell + cell / 8 + jitter;
            let x2 = (i + 1) * cell - cell / 8 + jitter.min(cell / 16);
            BitMask::from_rect(w, h, x1, h / 8, x2.min(w), h - h / 8)
        })
        .collect()
}

fn detection(mask: BitMask, confidence: f64) -> Result<Detection> {
    let bbox = mask
        .bounding_box()
        .ok_or_else(|| Error::Validation("synthetic detection mask is empty".into()))?;
    Ok(Detection {
        mask,
        bbox,
        confidence,
        features: FeatureMap::new(),
    })
}

/// Ground-truth masks shuffled, plus a contained duplicate, a tiny false
/// positive and a low-confidence detection that matching must discard.
fn model_detections(gt: &[GtSlot], rng: &mut ChaCha8Rng) -> Result<Vec<Detection>> {
    let (w, h) = (gt[0].mask.width(), gt[0].mask.height());
    let mut dets = Vec::new();
    for s in gt {
        dets.push(detection(s.mask.clone(), rng.gen_range(0.8..0.99))?);
    }
    let b = &gt[0].bbox;
    let (x1, y1, x2, y2) = (b.x1 as usize, b.y1 as usize, b.x2 as usize, b.y2 as usize);
    dets.push(detection(
        BitMask::from_rect(w, h, x1, y1, x2, y1 + (y2 - y1) / 2)?,
        rng.gen_range(0.5..0.7),
    )?);
    dets.push(detection(BitMask::from_rect(w, h, 0, 0, 3, 3)?, 0.95)?);
    dets.push(detection(
        BitMask::from_rect(w, h, w / 4, h / 4, 3 * w / 4, 3 * h / 4)?,
        0.1,
    )?);
    dets.shuffle(rng);
    Ok(dets)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    if cfg.embed_dim < 9 {
        return Err(Error::Validation("embed_dim must be at least 9".into()));
    }
    if let Some(n) = cfg.subjects {
        if !(2..=4).contains(&n) {
            return Err(Error::Validation(format!("subjects must lie in 2..=4, got {n}")));
        }
    }
    for m in &cfg.models {
        crate::report::check_id("model", m)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = cfg.image_size;
    let crop = (64.0, 128.0);
    let mut ds = SynthDataset {
        config: cfg.clone(),
        instances: Vec::new(),
        outputs: cfg.models.iter().map(|m| (m.clone(), BTreeMap::new())).collect(),
    };

    for k in 0..cfg.instances {
        let id = format!("inst_{k:04}");
        let n = cfg.subjects.unwrap_or_else(|| rng.gen_range(2..=4));
        let masks = subject_masks(w, h, n, &mut rng)?;

        // per-dimension ground truth and drift targets
        let mut gt_emb: BTreeMap<Dimension, Vec<Vec<f64>>> = BTreeMap::new();
        let mut drift_emb: BTreeMap<Dimension, Vec<Vec<f64>>> = BTreeMap::new();
        for d in Dimension::ALL.into_iter().filter(|d| !d.uses_keypoints()) {
            let frame = orthonormal_frame(&mut rng, 1 + 2 * n, cfg.embed_dim);
            let mk = |u: &Vec<f64>| normalize(axpy(BETA, &frame[0], u));
            gt_emb.insert(d, frame[1..=n].iter().map(mk).collect());
            drift_emb.insert(d, frame[n + 1..].iter().map(mk).collect());
        }
        let gt_pose: Vec<KeypointSet> = (0..n).map(|i| skeleton(CORNERS[i], crop)).collect();

        let mut slots: Vec<GtSlot> = masks
            .into_iter()
            .enumerate()
            .map(|(i, mask)| {
                let mut features = FeatureMap::new();
                for (d, e) in &gt_emb {
                    features.insert(*d, FeatureValue::Embedding(e[i].clone()));
                }
                features.insert(Dimension::Pose, FeatureValue::Keypoints(gt_pose[i].clone()));
                Ok(GtSlot {
                    slot_index: i + 1,
                    source_index: i + 1,
                    bbox: mask.bounding_box().expect("non-empty rectangle"),
                    mask,
                    features,
                })
            })
            .collect::<Result<_>>()?;
        order_slots_left_to_right(&mut slots)?;
        let manifest = InstanceManifest {
            instance_id: id.clone(),
            image_size: (w, h),
            gen_image_size: None,
            gt_slots: slots,
            detections: Vec::new(),
        };
        manifest.validate()?;
        let mut gt_features = FeatureFile::new(&id, Side::Gt);
        for s in &manifest.gt_slots {
            for (d, v) in &s.features {
                gt_features.insert(s.slot_index, *d, Some(v.clone()));
            }
        }

        for model in &cfg.models {
            let mut modes = BTreeMap::new();
            let mut features = FeatureFile::new(&id, Side::Gen);
            features.model_id = Some(model.clone());
            for d in Dimension::ALL {
                let mode = if !cfg.dimensions.contains(&d) {
                    SynthMode::Perfect
                } else if cfg.mode == SynthMode::Mixed {
                    *SynthMode::CONCRETE.choose(&mut rng).expect("non-empty")
                } else {
                    cfg.mode
                };
                modes.insert(d, mode);
                let values: Vec<FeatureValue> = if d.uses_keypoints() {
                    planted(
                        mode,
                        &gt_pose,
                        |_| skeleton(CENTRE, crop),
                        |a, b| KeypointSet {
                            crop_size: a.crop_size,
                            points: a.points[..BLEND_KEEP]
                                .iter()
                                .chain(&b.points[BLEND_KEEP..])
                                .copied()
                                .collect(),
                        },
                    )
                    .into_iter()
                    .map(FeatureValue::Keypoints)
                    .collect()
                } else {
                    let drift = &drift_emb[&d];
                    planted(
                        mode,
                        &gt_emb[&d],
                        |i| drift[i].clone(),
                        |a, b| normalize(axpy(1.0, a, b)),
                    )
                    .into_iter()
                    .map(FeatureValue::Embedding)
                    .collect()
                };
                for (i, v) in values.into_iter().enumerate() {
                    features.insert(i + 1, d, Some(v));
                }
            }
            let detections = DetectionSet {
                instance_id: id.clone(),
                model_id: Some(model.clone()),
                gen_image_size: None,
                detections: model_detections(&manifest.gt_slots, &mut rng)?,
            };
            ds.outputs.get_mut(model).expect("initialised").insert(
                id.clone(),
                SynthOutput {
                    detections,
                    features,
                    modes,
                },
            );
        }
        ds.instances.push(SynthInstance { manifest, gt_features });
    }
    Ok(ds)
}

impl SynthDataset {
    fn output_mut(&mut self, model: &str, instance: &str) -> Result<&mut SynthOutput> {
        self.outputs
            .get_mut(model)
            .and_then(|m| m.get_mut(instance))
            .ok_or_else(|| Error::Validation(format!("no output for {model}/{instance}")))
    }

    /// Removes every detection lying inside `slot`, so the model misses that subject.
    pub fn drop_slot_detection(&mut self, model: &str, instance: &str, slot: usize) -> Result<()> {
        let mask = self
            .instances
            .iter()
            .find(|i| i.manifest.instance_id == instance)
            .and_then(|i| i.manifest.slot(slot))
            .map(|s| s.mask.clone())
            .ok_or_else(|| Error::Validation(format!("no slot {slot} in {instance}")))?;
        let out = self.output_mut(model, instance)?;
        let before = out.detections.detections.len();
        out.detections
            .detections
            .retain(|d| mask_overlap_min(&d.mask, &mask).map_or(true, |o| o < 1.0));
        if out.detections.detections.len() == before {
            return Err(Error::Validation(format!("no detection for slot {slot}")));
        }
        Ok(())
    }

    /// Removes a model's whole output for an instance.
    pub fn drop_output(&mut self, model: &str, instance: &str) -> Result<()> {
        self.outputs
            .get_mut(model)
            .and_then(|m| m.remove(instance))
            .map(|_| ())
            .ok_or_else(|| Error::Validation(format!("no output for {model}/{instance}")))
    }

    /// Writes `dataset/<instance>/{manifest,features_gt}.json` and
    /// `models/<model>/<instance>/{detections,features_gen_<model>}.json`.
    pub fn write(&self, root: &Path) -> Result<()> {
        for inst in &self.instances {
            let id = &inst.manifest.instance_id;
            let dir = root.join("dataset").join(id);
            write_json(&dir.join("manifest.json"), &manifest_to_doc(&inst.manifest))?;
            write_json(&dir.join("features_gt.json"), &features_to_doc(&inst.gt_features))?;
        }
        for (model, outs) in &self.outputs {
            for (id, out) in outs {
                let dir = root.join("models").join(model).join(id);
                write_json(
                    &dir.join("detections.json"),
                    &detections_to_doc(&out.detections, self.config.image_size),
                )?;
                write_json(
                    &dir.join(format!("features_gen_{model}.json")),
                    &features_to_doc(&out.features),
                )?;
            }
        }
        let truth: BTreeMap<&String, BTreeMap<&String, &BTreeMap<Dimension, SynthMode>>> = self
            .outputs
            .iter()
            .map(|(m, o)| (m, o.iter().map(|(i, out)| (i, &out.modes)).collect()))
            .collect();
        write_json(&root.join("synth_truth.json"), &truth)
    }
}
