//! End-to-end batch commands over a dataset directory and model output roots.
//!
//! ```text
//! <dataset>/<instance>/manifest.json
//! <dataset>/<instance>/features_gt.json
//! <model root>/<instance>/detections.json
//! <model root>/<instance>/features_gen_<model>.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregation::{
    aggregate_runset, diagnose_runset, fair_intersection, pairwise_intersections, InstanceRun, IntersectionPolicy,
    RunSet, Weighting,
};
use crate::calibration::{auc_all, calibrate_all, collect_scores, AucResult, BundleIndex, CalibrationResult};
use crate::diagnostics::LogBase;
use crate::error::{Error, Result};
use crate::ingest::{
    load_detections, load_features, load_labels, load_manifest, load_thresholds, write_json, FeatureFile, Indexing,
    LabelKey, Side, ThresholdSource, ThresholdsDoc, SCHEMA,
};
use crate::matching::{match_detections, match_instance, Assignment, MatchBranch, MatchConfig, MatchedPair};
use crate::model::{Dimension, FeatureMap, InstanceManifest};
use crate::report::{
    check_id, emit_report, EmitOptions, EvaluationReport, PairSummary, ReportMetadata, SkipRecord, PATTERN_ELIGIBILITY,
};
use crate::similarity::{build_bundle, SimilarityConfig};
use crate::synth::{generate, SynthConfig};
use crate::thresholds::{DimensionThresholds, ThresholdTable};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSource {
    pub id: String,
    pub root: PathBuf,
}

impl std::str::FromStr for ModelSource {
    type Err = String;
    /// Parses `<id>=<path>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (id, root) = s
            .split_once('=')
            .ok_or_else(|| format!("expected <id>=<path>, got `{s}`"))?;
        check_id("model", id).map_err(|e| e.to_string())?;
        if root.is_empty() {
            return Err(format!("empty path for model `{id}`"));
        }
        Ok(Self {
            id: id.to_string(),
            root: PathBuf::from(root),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub models: Vec<ModelSource>,
    pub thresholds: ThresholdSource,
    pub match_config: MatchConfig,
    pub similarity: SimilarityConfig,
    pub jobs: usize,
    pub strict: bool,
    pub out: PathBuf,
    pub js_log_base: LogBase,
    pub weighting: Weighting,
    pub intersection: IntersectionPolicy,
    pub dump_matrices: bool,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            models: Vec::new(),
            thresholds: ThresholdSource::Builtin,
            match_config: MatchConfig::default(),
            similarity: SimilarityConfig::default(),
            jobs: 1,
            strict: false,
            out: out.into(),
            js_log_base: LogBase::Natural,
            weighting: Weighting::Pooled,
            intersection: IntersectionPolicy::AllModels,
            dump_matrices: true,
        }
    }

    pub fn with_model(mut self, id: &str, root: impl Into<PathBuf>) -> Self {
        self.models.push(ModelSource {
            id: id.to_string(),
            root: root.into(),
        });
        self
    }

    fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Validation("jobs must be at least 1".into()));
        }
        self.match_config.validate()?;
        if !self.dataset.is_dir() {
            return Err(Error::Validation(format!(
                "dataset directory {} does not exist",
                self.dataset.display()
            )));
        }
        let mut seen = BTreeSet::new();
        for m in &self.models {
            check_id("model", &m.id)?;
            if !seen.insert(&m.id) {
                return Err(Error::Validation(format!("model `{}` given twice", m.id)));
            }
            if !m.root.is_dir() {
                return Err(Error::Validation(format!(
                    "output root {} of model `{}` does not exist",
                    m.root.display(),
                    m.id
                )));
            }
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))
    }
}

/// Instance directories under the dataset root, sorted by name.
pub fn discover_instances(dataset: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dataset).map_err(|e| Error::io(dataset, e))? {
        let entry = entry.map_err(|e| Error::io(dataset, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

fn skip(instance_id: &str, model_id: Option<&str>, stage: &str, e: &Error) -> SkipRecord {
    SkipRecord {
        instance_id: instance_id.to_string(),
        model_id: model_id.map(str::to_string),
        stage: stage.to_string(),
        error: e.to_string(),
    }
}

fn check_feature_file(f: &FeatureFile, inst: &str, side: Side, path: &Path) -> Result<()> {
    if f.instance_id != inst {
        return Err(Error::Validation(format!(
            "{}: instance `{}` does not match `{inst}`",
            path.display(),
            f.instance_id
        )));
    }
    if f.side != side {
        return Err(Error::Validation(format!(
            "{}: wrong side {:?}",
            path.display(),
            f.side
        )));
    }
    Ok(())
}

/// Loads a manifest and attaches valid ground-truth features to its slots.
pub fn load_instance(dataset: &Path, id: &str) -> Result<InstanceManifest> {
    check_id("instance", id)?;
    let dir = dataset.join(id);
    let mut m = load_manifest(&dir.join("manifest.json"))?;
    if m.instance_id != id {
        return Err(Error::Validation(format!(
            "manifest in `{id}` declares instance `{}`",
            m.instance_id
        )));
    }
    let path = dir.join("features_gt.json");
    let f = load_features(&path)?;
    check_feature_file(&f, id, Side::Gt, &path)?;
    if f.indexing != Indexing::Slot {
        return Err(Error::Validation(format!(
            "{}: ground-truth features must be slot-indexed",
            path.display()
        )));
    }
    let mut feats = f.valid_features();
    let n = m.gt_slots.len();
    if let Some(bad) = f.records.keys().map(|k| k.0).find(|&i| i > n) {
        return Err(Error::Validation(format!(
            "{}: slot {bad} exceeds N = {n}",
            path.display()
        )));
    }
    for s in &mut m.gt_slots {
        s.features = feats.remove(&s.slot_index).unwrap_or_default();
    }
    Ok(m)
}

/// Generated features per matched slot.
fn generated_by_slot(f: &FeatureFile, a: &Assignment) -> BTreeMap<usize, FeatureMap> {
    let mut feats = f.valid_features();
    match f.indexing {
        Indexing::Slot => feats.retain(|slot, _| a.pair_for_slot(*slot).is_some()),
        Indexing::Detection => {
            feats = a
                .pairs
                .iter()
                .filter_map(|p| Some((p.slot, feats.remove(&p.detection)?)))
                .collect()
        }
    }
    feats
}

/// Matches one model's output and builds its bundles. `Ok(None)` means the
/// model has no output for the instance.
fn run_model(cfg: &RunConfig, m: &InstanceManifest, model: &ModelSource) -> Result<Option<InstanceRun>> {
    let dir = model.root.join(&m.instance_id);
    if !dir.is_dir() {
        return Ok(None);
    }
    let dets = load_detections(&dir.join("detections.json"), m.image_size)?;
    if dets.instance_id != m.instance_id {
        return Err(Error::Validation(format!(
            "detections for `{}` declare instance `{}`",
            m.instance_id, dets.instance_id
        )));
    }
    let assignment = match_detections(&m.gt_slots, &dets.detections, m.image_area(), &cfg.match_config)?;
    let path = dir.join(format!("features_gen_{}.json", model.id));
    let f = load_features(&path)?;
    check_feature_file(&f, &m.instance_id, Side::Gen, &path)?;
    let gen = generated_by_slot(&f, &assignment);
    let matched = assignment.matched_set();
    let bundles = Dimension::ALL
        .iter()
        .map(|&d| Ok((d, build_bundle(&m.gt_slots, &gen, &matched, d, &cfg.similarity)?)))
        .collect::<Result<_>>()?;
    Ok(Some(InstanceRun {
        instance_id: m.instance_id.clone(),
        n_slots: m.gt_slots.len(),
        assignment,
        bundles,
    }))
}

/// Result of the per-instance stage, merged afterwards in instance order.
struct InstanceResult {
    id: String,
    loaded: bool,
    runs: Vec<(String, InstanceRun)>,
    skipped: Vec<SkipRecord>,
}

fn process_instance(cfg: &RunConfig, id: &str) -> InstanceResult {
    let mut res = InstanceResult {
        id: id.to_string(),
        loaded: false,
        runs: Vec::new(),
        skipped: Vec::new(),
    };
    let m = match load_instance(&cfg.dataset, id) {
        Ok(m) => m,
        Err(e) => {
            res.skipped.push(skip(id, None, "manifest", &e));
            return res;
        }
    };
    res.loaded = true;
    for model in &cfg.models {
        match run_model(cfg, &m, model) {
            Ok(Some(r)) => res.runs.push((model.id.clone(), r)),
            Ok(None) => {}
            Err(e) => res.skipped.push(skip(id, Some(&model.id), "model_output", &e)),
        }
    }
    res
}

/// Matches and builds bundles for every instance and model, without intersection.
pub fn collect_runs(cfg: &RunConfig) -> Result<(RunSet, Vec<SkipRecord>)> {
    cfg.validate()?;
    let ids = discover_instances(&cfg.dataset)?;
    log::info!(
        "{} instance(s), {} model(s), {} worker(s)",
        ids.len(),
        cfg.models.len(),
        cfg.jobs
    );
    let results: Vec<InstanceResult> = cfg
        .pool()?
        .install(|| ids.par_iter().map(|id| process_instance(cfg, id)).collect());

    let mut rs = RunSet {
        models: cfg.models.iter().map(|m| m.id.clone()).collect(),
        runs: cfg.models.iter().map(|m| (m.id.clone(), BTreeMap::new())).collect(),
        ..RunSet::default()
    };
    let mut skipped = Vec::new();
    for r in results {
        if let Some(first) = r.skipped.first() {
            if cfg.strict {
                return Err(Error::Validation(format!(
                    "strict mode: {} ({}): {}",
                    first.instance_id, first.stage, first.error
                )));
            }
            for s in &r.skipped {
                log::warn!("skipping {} [{}]: {}", s.instance_id, s.stage, s.error);
            }
        }
        if r.loaded {
            rs.instances.insert(r.id.clone());
        }
        for (model, run) in r.runs {
            rs.runs.get_mut(&model).expect("initialised").insert(r.id.clone(), run);
        }
        skipped.extend(r.skipped);
    }
    Ok((rs, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRecord {
    pub instance_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub n_slots: usize,
    pub matched: usize,
    pub mean_iou: Option<f64>,
    pub branch: MatchBranch,
    pub pairs: Vec<MatchedPair>,
    pub kept: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchOutput {
    pub schema: String,
    pub match_config: MatchConfig,
    pub records: Vec<MatchRecord>,
    pub skipped: Vec<SkipRecord>,
}

fn match_one(cfg: &RunConfig, id: &str) -> (Vec<MatchRecord>, Vec<SkipRecord>) {
    let record = |model: Option<&str>, n, a: Assignment| MatchRecord {
        instance_id: id.to_string(),
        model_id: model.map(str::to_string),
        n_slots: n,
        matched: a.pairs.len(),
        mean_iou: a.mean_iou(),
        branch: a.branch,
        pairs: a.pairs,
        kept: a.kept,
    };
    let m = match check_id("instance", id).and_then(|_| load_manifest(&cfg.dataset.join(id).join("manifest.json"))) {
        Ok(m) => m,
        Err(e) => return (vec![], vec![skip(id, None, "manifest", &e)]),
    };
    let n = m.gt_slots.len();
    if cfg.models.is_empty() {
        return match match_instance(&m, &cfg.match_config) {
            Ok(a) => (vec![record(None, n, a)], vec![]),
            Err(e) => (vec![], vec![skip(id, None, "match", &e)]),
        };
    }
    let mut recs = Vec::new();
    let mut skips = Vec::new();
    for model in &cfg.models {
        let dir = model.root.join(id);
        if !dir.is_dir() {
            continue;
        }
        let res = load_detections(&dir.join("detections.json"), m.image_size)
            .and_then(|d| match_detections(&m.gt_slots, &d.detections, m.image_area(), &cfg.match_config));
        match res {
            Ok(a) => recs.push(record(Some(&model.id), n, a)),
            Err(e) => skips.push(skip(id, Some(&model.id), "match", &e)),
        }
    }
    (recs, skips)
}

/// Slot matching only. With no models, matches the detections embedded in
/// each manifest. Writes `<out>/match/assignments.json`.
pub fn cmd_match(cfg: &RunConfig) -> Result<MatchOutput> {
    cfg.validate()?;
    let ids = discover_instances(&cfg.dataset)?;
    let results: Vec<_> = cfg
        .pool()?
        .install(|| ids.par_iter().map(|id| match_one(cfg, id)).collect());
    let mut out = MatchOutput {
        schema: SCHEMA.to_string(),
        match_config: cfg.match_config,
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for (recs, skips) in results {
        if cfg.strict {
            if let Some(s) = skips.first() {
                return Err(Error::Validation(format!(
                    "strict mode: {} ({}): {}",
                    s.instance_id, s.stage, s.error
                )));
            }
        }
        out.records.extend(recs);
        out.skipped.extend(skips);
    }
    write_json(&cfg.out.join("match").join("assignments.json"), &out)?;
    Ok(out)
}

/// Full evaluation; writes the report under `<out>/report`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvaluationReport> {
    let thresholds = load_thresholds(&cfg.thresholds)?;
    let (rs, skipped) = collect_runs(cfg)?;
    let fair = if rs.models.is_empty() {
        rs.clone()
    } else {
        fair_intersection(&rs)?
    };
    let diagnostics = diagnose_runset(&fair, &thresholds, cfg.js_log_base);
    let summaries = aggregate_runset(&fair, &diagnostics, cfg.weighting);

    let mut pairwise = Vec::new();
    if cfg.intersection == IntersectionPolicy::PerPair {
        for (a, b, sub) in pairwise_intersections(&rs)? {
            let d = diagnose_runset(&sub, &thresholds, cfg.js_log_base);
            pairwise.push(PairSummary {
                models: [a, b],
                instances_evaluated: sub.instances.len(),
                dropped_instances: sub.dropped.clone(),
                summaries: aggregate_runset(&sub, &d, cfg.weighting),
            });
        }
    }

    let report = EvaluationReport {
        metadata: ReportMetadata {
            schema: SCHEMA.to_string(),
            thresholds,
            match_config: cfg.match_config,
            js_log_base: cfg.js_log_base,
            weighting: cfg.weighting,
            intersection: cfg.intersection,
            pattern_eligibility: PATTERN_ELIGIBILITY.to_string(),
            models: fair.models.clone(),
            instances_evaluated: fair.instances.len(),
            dropped_instances: fair.dropped.clone(),
            evaluated_slots: fair
                .evaluated_slots
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().copied().collect()))
                .collect(),
            skipped,
        },
        summaries,
        pairwise,
        runs: fair,
        diagnostics,
    };
    emit_report(
        &report,
        &cfg.out,
        EmitOptions {
            dump_matrices: cfg.dump_matrices,
        },
    )?;
    Ok(report)
}

fn bundle_index(rs: &RunSet) -> BundleIndex {
    let mut idx = BundleIndex::new();
    for (model, runs) in &rs.runs {
        for (inst, run) in runs {
            for (d, b) in &run.bundles {
                if let Some(b) = b {
                    idx.insert((inst.clone(), model.clone(), *d), b.clone());
                }
            }
        }
    }
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOutput {
    pub schema: String,
    pub results: Vec<CalibrationResult>,
    pub unresolved: Vec<LabelKey>,
}

/// Re-derives thresholds from human labels. Writes
/// `<out>/calibration/calibration.json` and, for every dimension with finite
/// thresholds of both kinds, `<out>/calibration/thresholds.json`.
pub fn cmd_calibrate(cfg: &RunConfig, labels: &Path) -> Result<CalibrationOutput> {
    let labels = load_labels(labels)?;
    let (rs, _) = collect_runs(cfg)?;
    let c = collect_scores(&bundle_index(&rs), &labels, None, cfg.strict)?;
    let results = calibrate_all(&c.samples)?;
    let out = CalibrationOutput {
        schema: SCHEMA.to_string(),
        results,
        unresolved: c.unresolved,
    };
    let dir = cfg.out.join("calibration");
    write_json(&dir.join("calibration.json"), &out)?;

    let mut table: BTreeMap<Dimension, DimensionThresholds> = BTreeMap::new();
    for d in Dimension::ALL {
        let get = |k| {
            out.results
                .iter()
                .find(|r| r.dimension == d && r.kind == k)
                .map(|r| r.fit.threshold)
                .filter(|t| t.is_finite())
        };
        match (
            get(crate::ingest::LabelKind::Consistency),
            get(crate::ingest::LabelKind::Confusion),
        ) {
            (Some(cons), Some(conf)) => {
                table.insert(d, DimensionThresholds { cons, conf });
            }
            _ => log::warn!("{d}: no finite calibrated threshold pair; builtin values kept"),
        }
    }
    if table.is_empty() {
        log::warn!("no dimension calibrated to finite thresholds; thresholds.json not written");
    } else {
        ThresholdTable::builtin().merged(&table)?;
        write_json(
            &dir.join("thresholds.json"),
            &ThresholdsDoc {
                schema: SCHEMA.to_string(),
                merge: true,
                thresholds: table,
            },
        )?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucOutput {
    pub schema: String,
    pub results: Vec<AucResult>,
    pub unresolved: Vec<LabelKey>,
}

/// ROC-AUC of raw delta scores against labels, per dimension and kind.
/// Writes `<out>/auc/auc.json` and `<out>/auc/auc.csv`.
pub fn cmd_auc(cfg: &RunConfig, labels: &Path) -> Result<AucOutput> {
    let labels = load_labels(labels)?;
    let (rs, _) = collect_runs(cfg)?;
    let c = collect_scores(&bundle_index(&rs), &labels, None, cfg.strict)?;
    let out = AucOutput {
        schema: SCHEMA.to_string(),
        results: auc_all(&c.samples)?,
        unresolved: c.unresolved,
    };
    let dir = cfg.out.join("auc");
    write_json(&dir.join("auc.json"), &out)?;
    let mut csv = String::from("dimension,kind,auc,pos,neg\n");
    for r in &out.results {
        let kind = match r.kind {
            crate::ingest::LabelKind::Consistency => "consistency",
            crate::ingest::LabelKind::Confusion => "confusion",
        };
        csv.push_str(&format!(
            "{},{kind},{:.4},{},{}\n",
            r.dimension, r.auc, r.support.pos, r.support.neg
        ));
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let p = dir.join("auc.csv");
    std::fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
    Ok(out)
}

/// Writes a synthetic dataset under `out`.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<()> {
    let ds = generate(cfg)?;
    ds.write(out)?;
    log::info!(
        "wrote {} instance(s) for {} model(s) to {}",
        ds.instances.len(),
        cfg.models.len(),
        out.display()
    );
    Ok(())
}
