//! Report emission: machine-readable tables, a text summary and matrix dumps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::aggregation::{
    Diagnostics, DimensionRates, DroppedInstance, IntersectionPolicy, ModelSummary, RunSet, Weighting,
};
use crate::diagnostics::LogBase;
use crate::error::{Error, Result};
use crate::ingest::write_json;
use crate::matching::MatchConfig;
use crate::model::Dimension;
use crate::thresholds::ThresholdTable;

pub const PATTERN_ELIGIBILITY: &str =
    "image-level pattern rates count instances with at least 2 evaluated rows and 2 valid columns";

/// An input that could not be processed in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SkipRecord {
    pub instance_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub schema: String,
    pub thresholds: ThresholdTable,
    pub match_config: MatchConfig,
    pub js_log_base: LogBase,
    pub weighting: Weighting,
    pub intersection: IntersectionPolicy,
    pub pattern_eligibility: String,
    pub models: Vec<String>,
    pub instances_evaluated: usize,
    pub dropped_instances: Vec<DroppedInstance>,
    /// Slots all models are scored on, per instance.
    pub evaluated_slots: BTreeMap<String, Vec<usize>>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub models: [String; 2],
    pub instances_evaluated: usize,
    pub dropped_instances: Vec<DroppedInstance>,
    pub summaries: Vec<ModelSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub summaries: Vec<ModelSummary>,
    pub pairwise: Vec<PairSummary>,
    /// Intersected runs the summaries were computed from.
    pub runs: RunSet,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitOptions {
    pub dump_matrices: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self { dump_matrices: true }
    }
}

/// Accepts identifiers that are safe as a single path component.
pub fn check_id(kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{kind} id `{id}` must be non-empty and use only [A-Za-z0-9._-]"
        )))
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const SUMMARY_HEADER: &str = "model,dimension,instances,rows,success,confused,inconsistent,drift,\
eligible,swap,dominance,blending,js,d_self,c_mean,c_worst,sim_diag_mean,matched,total_slots,mean_iou";

fn csv_dimension_row(model: &str, r: &DimensionRates) -> String {
    let rate = |v| fmt_opt(v, 1);
    let cont = |v| fmt_opt(v, 4);
    format!(
        "{model},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},,,",
        r.dimension,
        r.instances,
        r.rows,
        rate(r.success),
        rate(r.confused),
        rate(r.inconsistent),
        rate(r.drift),
        r.pattern_eligible,
        rate(r.swap),
        rate(r.dominance),
        rate(r.blending),
        cont(r.js),
        cont(r.d_self),
        cont(r.c_mean),
        cont(r.c_worst),
        cont(r.sim_diag_mean),
    )
}

/// Four dimension rows and one holistic row per model.
pub fn summary_csv(summaries: &[ModelSummary]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for m in summaries {
        for r in &m.dimensions {
            s.push_str(&csv_dimension_row(&m.model_id, r));
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "{},holistic,{},,,,,,,,,,,,,,,{},{},{}",
            m.model_id,
            m.instances,
            m.matched,
            m.total_slots,
            fmt_opt(m.mean_iou, 4)
        );
    }
    s
}

pub fn summary_text(meta: &ReportMetadata, summaries: &[ModelSummary]) -> String {
    let dash = |v: String| if v.is_empty() { "-".to_string() } else { v };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} instance(s) evaluated, {} dropped by fair intersection, {} skipped input(s)",
        meta.instances_evaluated,
        meta.dropped_instances.len(),
        meta.skipped.len()
    );
    for m in summaries {
        let _ = writeln!(
            s,
            "\nmodel {}: matched {}/{}, mean IoU {}",
            m.model_id,
            m.matched,
            m.total_slots,
            dash(fmt_opt(m.mean_iou, 4))
        );
        let _ = writeln!(
            s,
            "{:<15}{:>6}{:>9}{:>10}{:>8}{:>8}{:>8}{:>8}{:>10}{:>10}{:>9}{:>9}{:>9}{:>9}",
            "dimension",
            "rows",
            "success",
            "confused",
            "incons",
            "drift",
            "elig",
            "swap",
            "dominance",
            "blending",
            "js",
            "d_self",
            "c_mean",
            "c_worst"
        );
        for r in &m.dimensions {
            let rate = |v| dash(fmt_opt(v, 1));
            let cont = |v| dash(fmt_opt(v, 4));
            let _ = writeln!(
                s,
                "{:<15}{:>6}{:>9}{:>10}{:>8}{:>8}{:>8}{:>8}{:>10}{:>10}{:>9}{:>9}{:>9}{:>9}",
                r.dimension.as_str(),
                r.rows,
                rate(r.success),
                rate(r.confused),
                rate(r.inconsistent),
                rate(r.drift),
                r.pattern_eligible,
                rate(r.swap),
                rate(r.dominance),
                rate(r.blending),
                cont(r.js),
                cont(r.d_self),
                cont(r.c_mean),
                cont(r.c_worst),
            );
        }
    }
    s
}

pub const OUTCOMES_HEADER: &str =
    "instance_id,dimension,slot,outcome,inconsistent,confused,delta_self,sim_diag,c_mean,c_worst,js,single_column";

/// One line per evaluated row, full precision.
pub fn outcomes_csv(diags: &BTreeMap<String, BTreeMap<Dimension, crate::diagnostics::DimensionDiagnostics>>) -> String {
    let mut s = String::from(OUTCOMES_HEADER);
    s.push('\n');
    for (inst, dims) in diags {
        for (d, dd) in dims {
            for r in &dd.rows {
                let _ = writeln!(
                    s,
                    "{inst},{d},{},{},{},{},{},{},{},{},{},{}",
                    r.slot,
                    r.outcome.as_str(),
                    u8::from(r.inconsistent),
                    u8::from(r.confused),
                    r.delta_self,
                    r.sim_diag,
                    r.c_mean,
                    r.c_worst,
                    r.js,
                    u8::from(r.single_column)
                );
            }
        }
    }
    s
}

pub const PATTERNS_HEADER: &str = "instance_id,dimension,rows,cols,n_conf,eligible,swap,dominance,blending";

pub fn patterns_csv(diags: &BTreeMap<String, BTreeMap<Dimension, crate::diagnostics::DimensionDiagnostics>>) -> String {
    let mut s = String::from(PATTERNS_HEADER);
    s.push('\n');
    for (inst, dims) in diags {
        for (d, dd) in dims {
            let (nr, nc) = dd.cons.dim();
            let p = dd.patterns.unwrap_or_default();
            let _ = writeln!(
                s,
                "{inst},{d},{nr},{nc},{},{},{},{},{}",
                dd.n_conf,
                u8::from(dd.patterns.is_some()),
                u8::from(p.swap),
                u8::from(p.dominance),
                u8::from(p.blending)
            );
        }
    }
    s
}

#[derive(Serialize)]
struct MatrixDump<'a> {
    instance_id: &'a str,
    model_id: &'a str,
    dimension: Dimension,
    rows: &'a [usize],
    cols: &'a [usize],
    s_gt: Vec<Vec<f64>>,
    s_gen: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    cons: Vec<Vec<u8>>,
    conf: Vec<Vec<u8>>,
}

fn nested<T: Copy, U>(m: &ndarray::Array2<T>, f: impl Fn(T) -> U + Copy) -> Vec<Vec<U>> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|&x| f(x)).collect())
        .collect()
}

fn emit_matrices(report: &EvaluationReport, root: &Path) -> Result<()> {
    for (model, runs) in &report.runs.runs {
        for (inst, run) in runs {
            for (d, b) in &run.bundles {
                let (Some(b), Some(dd)) = (
                    b,
                    report
                        .diagnostics
                        .get(model)
                        .and_then(|m| m.get(inst))
                        .and_then(|m| m.get(d)),
                ) else {
                    continue;
                };
                let dump = MatrixDump {
                    instance_id: inst,
                    model_id: model,
                    dimension: *d,
                    rows: &b.rows,
                    cols: &b.cols,
                    s_gt: nested(&b.s_gt, |x| x),
                    s_gen: nested(&b.s_gen, |x| x),
                    delta: nested(&b.delta, |x| x),
                    cons: nested(&dd.cons, u8::from),
                    conf: nested(&dd.conf, u8::from),
                };
                write_json(
                    &root.join("matrices").join(inst).join(model).join(format!("{d}.json")),
                    &dump,
                )?;
            }
        }
    }
    Ok(())
}

/// Writes the report under `out/report`. An empty model list writes nothing.
pub fn emit_report(report: &EvaluationReport, out: &Path, opts: EmitOptions) -> Result<()> {
    if report.metadata.models.is_empty() {
        log::warn!("no models to report; nothing written");
        return Ok(());
    }
    let root = out.join("report");
    write_json(&root.join("metadata.json"), &report.metadata)?;
    for s in &report.summaries {
        check_id("model", &s.model_id)?;
        let dir = root.join(&s.model_id);
        write_json(&dir.join("rates.json"), s)?;
        let empty = BTreeMap::new();
        let diags = report.diagnostics.get(&s.model_id).unwrap_or(&empty);
        write_text(&dir.join("outcomes.csv"), &outcomes_csv(diags))?;
        write_text(&dir.join("patterns.csv"), &patterns_csv(diags))?;
    }
    write_text(&root.join("summary.csv"), &summary_csv(&report.summaries))?;
    write_text(
        &root.join("summary.txt"),
        &summary_text(&report.metadata, &report.summaries),
    )?;
    for p in &report.pairwise {
        write_json(
            &root
                .join("pairs")
                .join(format!("{}__{}.json", p.models[0], p.models[1])),
            p,
        )?;
    }
    if opts.dump_matrices {
        emit_matrices(report, &root)?;
    }
    Ok(())
}

/// Canonical form of the threshold table as written into report metadata.
pub fn thresholds_json(t: &ThresholdTable) -> String {
    serde_json::to_string(t).expect("threshold table serializes")
}
