//! Acceptance gate. Each criterion runs in isolation and prints one line:
//!
//! ```text
//! PASS  thresholds            builtin table and report metadata   (3 ms)
//! ```
//!
//! Oracles below are written independently of the library: plain nested
//! `Vec`s, explicit loops and exhaustive search.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::cmp_owned)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use multibind::aggregation::DimensionRates;
use multibind::calibration::{calibrate_threshold, roc_auc, ScoredLabel};
use multibind::diagnostics::{image_patterns, subject_outcomes, Outcome};
use multibind::ingest::{FeatureFile, LabelKind};
use multibind::matching::max_weight_assignment;
use multibind::model::{Dimension, FeatureValue, KeypointSet};
use multibind::pipeline::{cmd_eval, RunConfig};
use multibind::report::{thresholds_json, EvaluationReport};
use multibind::synth::{generate, SynthConfig, SynthDataset, SynthMode};
use multibind::thresholds::ThresholdTable;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let checks: &[(&str, Check)] = &[
        ("thresholds", thresholds),
        ("pattern-oracle", pattern_oracle),
        ("hungarian", hungarian),
        ("perfect-fixture", perfect_fixture),
        ("synthetic-failures", synthetic_failures),
        ("calibration", calibration),
        ("auc", auc),
        ("partition", partition),
        ("fair-intersection", fair_intersection),
        ("performance", performance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS  {name:<20}{detail}  ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<20}{why}  ({ms} ms)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// shared fixtures

fn synth_cfg(seed: u64, instances: usize, models: &[&str], mode: SynthMode) -> SynthConfig {
    SynthConfig {
        seed,
        instances,
        models: models.iter().map(|m| m.to_string()).collect(),
        mode,
        ..SynthConfig::default()
    }
}

fn run_config(root: &Path, models: &[String]) -> RunConfig {
    let mut cfg = RunConfig::new(root.join("dataset"), root.join("out"));
    for m in models {
        cfg = cfg.with_model(m, root.join("models").join(m));
    }
    cfg
}

fn eval(ds: &SynthDataset, root: &Path) -> EvaluationReport {
    ds.write(root).expect("write synthetic dataset");
    cmd_eval(&run_config(root, &ds.config.models)).expect("eval")
}

fn rates<'a>(r: &'a EvaluationReport, model: &str, d: Dimension) -> &'a DimensionRates {
    let s = r.summaries.iter().find(|s| s.model_id == model).expect("model summary");
    s.dimensions.iter().find(|x| x.dimension == d).expect("dimension rates")
}

/// Success + Drift + Confused = 100 for every model and populated dimension.
fn check_partition(r: &EvaluationReport) -> Result<usize, String> {
    let mut n = 0;
    for s in &r.summaries {
        for x in &s.dimensions {
            if x.rows == 0 {
                continue;
            }
            let total = x.success.unwrap_or(f64::NAN) + x.drift.unwrap_or(f64::NAN) + x.confused.unwrap_or(f64::NAN);
            ensure!(
                (total - 100.0).abs() <= 1e-9,
                "{} {}: partition sums to {total}",
                s.model_id,
                x.dimension
            );
            n += 1;
        }
    }
    Ok(n)
}

// ---------------------------------------------------------------------------
// thresholds

fn thresholds() -> Result<String, String> {
    let expected = [
        (Dimension::FaceIdentity, "-0.9111", "0.1086"),
        (Dimension::Appearance, "-0.3662", "0.1117"),
        (Dimension::Pose, "-0.5289", "0.2912"),
        (Dimension::Expression, "-0.4203", "0.0714"),
    ];
    let table = ThresholdTable::builtin();
    for (d, cons, conf) in expected {
        let t = table.get(d);
        ensure!(
            t.cons.to_string() == cons && t.conf.to_string() == conf,
            "{d}: got ({}, {})",
            t.cons,
            t.conf
        );
    }
    let json = thresholds_json(&table);
    for (d, cons, conf) in expected {
        let needle = format!(r#""{d}":{{"cons":{cons},"conf":{conf}}}"#);
        ensure!(json.contains(&needle), "config serialization lacks {needle}");
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    eval(
        &generate(&synth_cfg(1, 2, &["m"], SynthMode::Perfect)).unwrap(),
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("out/report/metadata.json")).map_err(|e| e.to_string())?;
    let meta: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for (d, cons, conf) in expected {
        let t = &meta["thresholds"][d.as_str()];
        ensure!(
            t["cons"].to_string() == cons && t["conf"].to_string() == conf,
            "metadata {d}: {t}"
        );
        for (key, v) in [("cons", cons), ("conf", conf)] {
            ensure!(
                text.contains(&format!("\"{key}\": {v}")),
                "metadata.json lacks literal {key} {v}"
            );
        }
    }
    Ok("builtin table, config JSON and report metadata byte-exact".into())
}

// ---------------------------------------------------------------------------
// pattern oracle

/// Straight transcription of the row outcomes and image patterns over 0/1
/// matrices with the diagonal at `j == i`.
struct Oracle {
    outcomes: Vec<Outcome>,
    swap: bool,
    dominance: bool,
    blending: bool,
}

fn oracle(cons: &[Vec<u8>], conf: &[Vec<u8>]) -> Oracle {
    let ni = cons.len();
    let nv = cons[0].len();
    let mut outcomes = Vec::new();
    for i in 0..ni {
        let mut confused = false;
        for j in 0..nv {
            if j != i && conf[i][j] == 1 {
                confused = true;
            }
        }
        let consistent = cons[i][i] == 1;
        outcomes.push(if consistent && !confused {
            Outcome::Success
        } else if !consistent && !confused {
            Outcome::Drift
        } else {
            Outcome::Confused
        });
    }
    let mut r = vec![0; ni];
    let mut c = vec![0; nv];
    let mut n_conf = 0;
    for i in 0..ni {
        for j in 0..nv {
            let m = cons[i][j] | conf[i][j];
            r[i] += m as usize;
            c[j] += m as usize;
            if j != i {
                n_conf += conf[i][j] as usize;
            }
        }
    }
    let mut full_columns = 0;
    for &cj in &c {
        if cj == ni {
            full_columns += 1;
        }
    }
    Oracle {
        outcomes,
        swap: n_conf > 0 && r.iter().all(|&x| x <= 1) && c.iter().all(|&x| x <= 1),
        dominance: full_columns == 1,
        blending: r.iter().any(|&x| x >= 2),
    }
}

fn from_bits(n: usize, bits: u64) -> Vec<Vec<u8>> {
    (0..n)
        .map(|i| (0..n).map(|j| ((bits >> (i * n + j)) & 1) as u8).collect())
        .collect()
}

fn to_array(m: &[Vec<u8>]) -> Array2<bool> {
    Array2::from_shape_fn((m.len(), m[0].len()), |(i, j)| m[i][j] == 1)
}

fn compare_case(cons: &[Vec<u8>], conf: &[Vec<u8>]) -> Result<(), String> {
    let n = cons.len();
    let diag: Vec<usize> = (0..n).collect();
    let (a, b) = (to_array(cons), to_array(conf));
    let want = oracle(cons, conf);
    let got = image_patterns(&a, &b, &diag).ok_or("pattern check declined an eligible case")?;
    ensure!(
        (got.swap, got.dominance, got.blending) == (want.swap, want.dominance, want.blending),
        "cons {cons:?} conf {conf:?}: got {got:?}"
    );
    ensure!(
        subject_outcomes(&a, &b, &diag) == want.outcomes,
        "outcomes differ for cons {cons:?} conf {conf:?}"
    );
    Ok(())
}

fn pattern_oracle() -> Result<String, String> {
    let mut cases = 0u64;
    for n in [2usize, 3] {
        let cells = (n * n) as u64;
        for bits in 0..1u64 << (2 * cells) {
            let cons = from_bits(n, bits & ((1 << cells) - 1));
            let conf = from_bits(n, bits >> cells);
            compare_case(&cons, &conf)?;
            cases += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..10_000 {
        let cons = from_bits(4, rng.gen::<u64>() & 0xffff);
        let conf = from_bits(4, rng.gen::<u64>() & 0xffff);
        compare_case(&cons, &conf)?;
        cases += 1;
    }
    Ok(format!("{cases} cases exact (2x2, 3x3 exhaustive; 10^4 random 4x4)"))
}

// ---------------------------------------------------------------------------
// hungarian

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn hungarian() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ties = 0;
    for n in 2..=4usize {
        let perms = permutations(n);
        for trial in 0..1000 {
            // every other matrix on an eighths grid, where optima tie often
            let grid = trial % 2 == 0;
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if grid {
                                rng.gen_range(0..=8) as f64 / 8.0
                            } else {
                                rng.gen::<f64>()
                            }
                        })
                        .collect()
                })
                .collect();
            let value = |p: &[usize]| (0..n).fold(0.0, |acc, i| acc + w[i][p[i]]);
            let best = perms.iter().map(|p| value(p)).fold(f64::NEG_INFINITY, f64::max);
            let optima: Vec<&Vec<usize>> = perms.iter().filter(|p| value(p) == best).collect();

            let mut pairs = max_weight_assignment(&w);
            pairs.sort();
            ensure!(pairs.len() == n, "N={n}: {} pairs", pairs.len());
            let got: Vec<usize> = pairs.iter().map(|&(_, c)| c).collect();
            ensure!(
                value(&got) == best,
                "N={n}: value {} vs exhaustive {best} on {w:?}",
                value(&got)
            );
            if grid {
                ties += usize::from(optima.len() > 1);
                ensure!(
                    &got == optima[0],
                    "N={n}: tie-break {got:?}, expected {:?} on {w:?}",
                    optima[0]
                );
            }
        }
    }
    Ok(format!(
        "3000 matrices exact, {ties} with tied optima resolved lexicographically"
    ))
}

// ---------------------------------------------------------------------------
// perfect reconstruction

fn perfect_fixture() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = eval(
        &generate(&synth_cfg(2, 10, &["m"], SynthMode::Perfect)).unwrap(),
        dir.path(),
    );
    let elapsed = start.elapsed();
    let s = &r.summaries[0];
    ensure!(s.mean_iou == Some(1.0), "mean IoU {:?}", s.mean_iou);
    ensure!(s.matched == s.total_slots, "matched {} of {}", s.matched, s.total_slots);
    for d in Dimension::ALL {
        let x = rates(&r, "m", d);
        ensure!(x.success == Some(100.0), "{d}: success {:?}", x.success);
        for (name, v) in [("swap", x.swap), ("dominance", x.dominance), ("blending", x.blending)] {
            ensure!(v == Some(0.0), "{d}: {name} {v:?}");
        }
        for (name, v) in [
            ("js", x.js),
            ("d_self", x.d_self),
            ("c_mean", x.c_mean),
            ("c_worst", x.c_worst),
        ] {
            let v = v.ok_or(format!("{d}: {name} missing"))?;
            ensure!(v.abs() <= 1e-12, "{d}: {name} = {v}");
        }
    }
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "{} subjects, all dimensions success 100%, metrics 0 within 1e-12",
        s.total_slots
    ))
}

// ---------------------------------------------------------------------------
// synthetic failure modes with one hand-traced instance each

const COCO_SIGMAS: [f64; 17] = [
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089,
    0.089,
];

fn hand_cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

fn confident(k: &KeypointSet) -> Vec<Option<(f64, f64)>> {
    k.points
        .iter()
        .map(|p| (p.visible && p.confidence >= 0.3).then(|| (p.x / k.crop_size.0, p.y / k.crop_size.1)))
        .collect()
}

fn hand_scale(k: &KeypointSet) -> f64 {
    let pts: Vec<(f64, f64)> = confident(k).into_iter().flatten().collect();
    let w = pts.iter().map(|p| p.0).fold(f64::MIN, f64::max) - pts.iter().map(|p| p.0).fold(f64::MAX, f64::min);
    let h = pts.iter().map(|p| p.1).fold(f64::MIN, f64::max) - pts.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    (w * h).max(1e-4).sqrt()
}

fn hand_oks(a: &KeypointSet, b: &KeypointSet, s: f64) -> f64 {
    let (pa, pb) = (confident(a), confident(b));
    let mut sum = 0.0;
    let mut n = 0.0;
    for k in 0..17 {
        if let (Some(x), Some(y)) = (pa[k], pb[k]) {
            let kappa = 2.0 * COCO_SIGMAS[k];
            let d2 = (x.0 - y.0).powi(2) + (x.1 - y.1).powi(2);
            sum += (-d2 / (2.0 * s * s * kappa * kappa)).exp();
            n += 1.0;
        }
    }
    if n == 0.0 {
        0.0
    } else {
        sum / n
    }
}

fn payloads(f: &FeatureFile, d: Dimension) -> BTreeMap<usize, FeatureValue> {
    f.records
        .iter()
        .filter(|((_, dim), rec)| *dim == d && rec.valid)
        .filter_map(|((i, _), rec)| rec.value.clone().map(|v| (*i, v)))
        .collect()
}

/// Recomputes one instance's Δ, binary matrices, outcomes and patterns by
/// hand and compares them with the evaluated report.
fn hand_trace(ds: &SynthDataset, r: &EvaluationReport, model: &str, k: usize, d: Dimension) -> Result<(), String> {
    let inst = &ds.instances[k];
    let id = &inst.manifest.instance_id;
    let gt = payloads(&inst.gt_features, d);
    let gen = payloads(&ds.outputs[model][id].features, d);
    let slots: Vec<usize> = gt.keys().copied().collect();
    let n = slots.len();
    let sim = |a: &FeatureValue, b: &FeatureValue, ci: usize, cj: usize| match (a, b) {
        (FeatureValue::Embedding(u), FeatureValue::Embedding(v)) => hand_cos(u, v),
        (FeatureValue::Keypoints(x), FeatureValue::Keypoints(y)) => {
            let (FeatureValue::Keypoints(gi), FeatureValue::Keypoints(gj)) = (&gt[&slots[ci]], &gt[&slots[cj]]) else {
                unreachable!()
            };
            hand_oks(x, y, (hand_scale(gi) + hand_scale(gj)) / 2.0)
        }
        _ => panic!("mixed payloads"),
    };
    let t = ThresholdTable::builtin().get(d);
    let mut delta = vec![vec![0.0; n]; n];
    let mut cons = vec![vec![0u8; n]; n];
    let mut conf = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in 0..n {
            let s_gt = sim(&gt[&slots[i]], &gt[&slots[j]], i, j);
            let s_gen = sim(&gen[&slots[i]], &gt[&slots[j]], i, j);
            delta[i][j] = s_gen - s_gt;
            if i == j {
                cons[i][j] = u8::from(delta[i][j] >= t.cons);
            } else {
                conf[i][j] = u8::from(delta[i][j] >= t.conf);
            }
        }
    }
    let want = oracle(&cons, &conf);

    let dd = &r.diagnostics[model][id][&d];
    let bundle = r.runs.runs[model][id].bundles[&d].as_ref().ok_or("no bundle")?;
    ensure!(
        bundle.rows == slots && bundle.cols == slots,
        "{id} {d}: rows {:?}",
        bundle.rows
    );
    for i in 0..n {
        for j in 0..n {
            let got = bundle.delta[[i, j]];
            ensure!(
                (got - delta[i][j]).abs() <= 1e-12,
                "{id} {d} Δ[{i},{j}] {got} vs hand {}",
                delta[i][j]
            );
        }
    }
    let outcomes: Vec<Outcome> = dd.rows.iter().map(|x| x.outcome).collect();
    ensure!(
        outcomes == want.outcomes,
        "{id} {d}: outcomes {outcomes:?} vs hand {:?}",
        want.outcomes
    );
    let p = dd.patterns.ok_or("instance not pattern-eligible")?;
    ensure!(
        (p.swap, p.dominance, p.blending) == (want.swap, want.dominance, want.blending),
        "{id} {d}: patterns {p:?} vs hand ({}, {}, {})",
        want.swap,
        want.dominance,
        want.blending
    );
    Ok(())
}

fn synthetic_failures() -> Result<String, String> {
    let cases = [
        (SynthMode::Swap, 2, Dimension::FaceIdentity),
        (SynthMode::Dominance, 3, Dimension::Appearance),
        (SynthMode::Blending, 3, Dimension::Pose),
        (SynthMode::Drift, 3, Dimension::Expression),
        (SynthMode::Swap, 3, Dimension::Pose),
        (SynthMode::Dominance, 4, Dimension::Pose),
        (SynthMode::Drift, 2, Dimension::Pose),
        (SynthMode::Blending, 4, Dimension::FaceIdentity),
    ];
    let start = Instant::now();
    for (mode, subjects, dim) in cases {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ds = generate(&SynthConfig {
            subjects: Some(subjects),
            dimensions: vec![dim],
            ..synth_cfg(40 + subjects as u64, 6, &["m"], mode)
        })
        .map_err(|e| e.to_string())?;
        let r = eval(&ds, dir.path());
        check_partition(&r)?;
        let x = rates(&r, "m", dim);
        let flag = match mode {
            SynthMode::Swap => x.swap,
            SynthMode::Dominance => x.dominance,
            SynthMode::Blending => x.blending,
            _ => x.drift,
        };
        ensure!(flag == Some(100.0), "{mode:?} on {dim} (N={subjects}): rate {flag:?}");
        if mode == SynthMode::Drift {
            ensure!(x.confused == Some(0.0), "drift on {dim}: confused {:?}", x.confused);
        }
        for other in Dimension::ALL.into_iter().filter(|&o| o != dim) {
            let y = rates(&r, "m", other);
            ensure!(
                y.success == Some(100.0),
                "{mode:?}: untouched {other} success {:?}",
                y.success
            );
        }
        hand_trace(&ds, &r, "m", 0, dim)?;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "{} planted runs flagged at 100%, hand traces agree",
        cases.len()
    ))
}

// ---------------------------------------------------------------------------
// calibration and AUC

fn scored(scores: &[f64], labels: &[bool]) -> Vec<ScoredLabel> {
    scores
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(k, (&score, &label))| ScoredLabel {
            key: (format!("i{k}"), "m".into(), Dimension::Pose, 0, 1),
            kind: LabelKind::Confusion,
            score,
            label,
        })
        .collect()
}

fn f1_at(scores: &[f64], labels: &[bool], t: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= t, l) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    2.0 * tp / (2.0 * tp + fp + fn_)
}

fn calibration() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let planted = 0.137;
    let scores: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels: Vec<bool> = scores.iter().map(|&s| s >= planted).collect();
    let fit = calibrate_threshold(&scored(&scores, &labels)).map_err(|e| e.to_string())?;
    ensure!(fit.f1 == 1.0, "planted F1 {}", fit.f1);
    let max_neg = scores.iter().copied().filter(|&s| s < planted).fold(f64::MIN, f64::max);
    let min_pos = scores
        .iter()
        .copied()
        .filter(|&s| s >= planted)
        .fold(f64::MAX, f64::min);
    ensure!(
        max_neg < fit.threshold && fit.threshold <= min_pos,
        "threshold {} outside the gap",
        fit.threshold
    );
    ensure!(
        f1_at(&scores, &labels, fit.threshold) == 1.0,
        "threshold does not reproduce labels"
    );

    // exhaustive sweep over every observed score plus both infinities
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..60).map(|_| (rng.gen_range(0..20) as f64) / 10.0).collect();
        let l: Vec<bool> = s.iter().map(|&x| rng.gen_bool((x / 2.0).clamp(0.1, 0.9))).collect();
        if l.iter().all(|&x| x) || l.iter().all(|&x| !x) {
            continue;
        }
        let mut cands: Vec<f64> = s.clone();
        cands.extend([f64::NEG_INFINITY, f64::INFINITY]);
        let best = cands.iter().map(|&t| f1_at(&s, &l, t)).fold(0.0, f64::max);
        let fit = calibrate_threshold(&scored(&s, &l)).map_err(|e| e.to_string())?;
        ensure!(
            (fit.f1 - best).abs() <= 1e-15,
            "seed {seed}: F1 {} vs sweep {best}",
            fit.f1
        );
    }

    let worked = calibrate_threshold(&scored(&[0.9, 0.8, 0.3], &[true, false, true])).map_err(|e| e.to_string())?;
    ensure!(worked.f1 == 0.8, "worked case F1 {}", worked.f1);
    ensure!(
        f1_at(&[0.9, 0.8, 0.3], &[true, false, true], worked.threshold) == 0.8,
        "worked threshold {} does not reach 0.8",
        worked.threshold
    );
    Ok(format!(
        "planted F1 = 1 (t = {:.4}); worked case F1 = 0.8 at t = {}",
        fit.threshold, worked.threshold
    ))
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn auc() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let coarse = seed % 2 == 0;
        let scores: Vec<f64> = (0..200)
            .map(|_| {
                if coarse {
                    rng.gen_range(0..10) as f64 / 10.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.gen_bool(0.25 + 0.5 * s)).collect();
        let got = roc_auc(&scored(&scores, &labels)).map_err(|e| e.to_string())?;
        let want = pairwise_auc(&scores, &labels);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-12, "seed {seed}: {got} vs oracle {want}");
    }
    let worked = roc_auc(&scored(&[0.9, 0.8, 0.3], &[true, false, true])).map_err(|e| e.to_string())?;
    ensure!(worked == 0.5, "worked case {worked}");
    Ok(format!(
        "50 sets of 200 within {worst:.1e} of pairwise oracle; worked case 0.5"
    ))
}

// ---------------------------------------------------------------------------
// partition and fair intersection

fn partition() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let r = eval(
        &generate(&synth_cfg(7, 30, &["a", "b", "c"], SynthMode::Mixed)).unwrap(),
        dir.path(),
    );
    let n = check_partition(&r)?;
    // recount from the per-row outcomes
    let csv = std::fs::read_to_string(dir.path().join("out/report/a/outcomes.csv")).map_err(|e| e.to_string())?;
    let mut counts: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let c = counts.entry(f[1].to_string()).or_default();
        match f[3] {
            "success" => c[0] += 1,
            "drift" => c[1] += 1,
            "confused" => c[2] += 1,
            other => return Err(format!("unknown outcome {other}")),
        }
    }
    for d in Dimension::ALL {
        let c = counts.get(d.as_str()).copied().unwrap_or_default();
        let x = rates(&r, "a", d);
        ensure!(
            c.iter().sum::<usize>() == x.rows,
            "{d}: {} outcome lines for {} rows",
            c.iter().sum::<usize>(),
            x.rows
        );
        let pct = |k: usize| 100.0 * c[k] as f64 / x.rows as f64;
        ensure!(
            x.success.map(|v| (v - pct(0)).abs() < 1e-9) == Some(true)
                && x.drift.map(|v| (v - pct(1)).abs() < 1e-9) == Some(true),
            "{d}: rates disagree with outcome rows"
        );
    }
    Ok(format!("{n} model-dimension cells sum to 100% on a mixed run"))
}

fn fair_intersection() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ds = generate(&SynthConfig {
        subjects: Some(3),
        ..synth_cfg(5, 5, &["a", "b"], SynthMode::Mixed)
    })
    .map_err(|e| e.to_string())?;
    ds.drop_slot_detection("b", "inst_0002", 1).map_err(|e| e.to_string())?;
    ds.drop_output("b", "inst_0004").map_err(|e| e.to_string())?;
    let r = eval(&ds, dir.path());
    check_partition(&r)?;

    let m = &r.metadata;
    ensure!(
        m.instances_evaluated == 4,
        "{} instances evaluated",
        m.instances_evaluated
    );
    ensure!(
        m.dropped_instances.len() == 1 && m.dropped_instances[0].instance_id == "inst_0004",
        "dropped {:?}",
        m.dropped_instances
    );
    ensure!(
        m.evaluated_slots["inst_0002"] == [2, 3],
        "evaluated slots {:?}",
        m.evaluated_slots["inst_0002"]
    );
    for model in ["a", "b"] {
        ensure!(
            !r.diagnostics[model].contains_key("inst_0004"),
            "{model} still scored on inst_0004"
        );
        for d in Dimension::ALL {
            let rows: Vec<usize> = r.diagnostics[model]["inst_0002"][&d]
                .rows
                .iter()
                .map(|x| x.slot)
                .collect();
            ensure!(rows == [2, 3], "{model} {d}: rows {rows:?}");
            ensure!(
                rates(&r, model, d).rows == 3 * 3 + 2,
                "{model} {d}: {} rows",
                rates(&r, model, d).rows
            );
        }
    }
    let (a, b) = (&r.summaries[0], &r.summaries[1]);
    ensure!(
        a.matched == 12 && b.matched == 11,
        "matched a={} b={}",
        a.matched,
        b.matched
    );
    Ok("missing slot removed for both models; missing instance dropped for both".into())
}

// ---------------------------------------------------------------------------
// performance

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).expect("read_dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).expect("read"));
            }
        }
    }
    out
}

fn performance() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let models = ["m1", "m2", "m3", "m4", "m5", "m6"];
    let ds = generate(&synth_cfg(2024, 500, &models, SynthMode::Mixed)).map_err(|e| e.to_string())?;
    ds.write(dir.path()).map_err(|e| e.to_string())?;
    let mut cfg = run_config(dir.path(), &ds.config.models);
    cfg.dump_matrices = false;

    cfg.jobs = 1;
    cfg.out = dir.path().join("serial");
    let start = Instant::now();
    let r = cmd_eval(&cfg).map_err(|e| e.to_string())?;
    let serial = start.elapsed();
    check_partition(&r)?;
    ensure!(
        r.metadata.instances_evaluated == 500,
        "{} instances",
        r.metadata.instances_evaluated
    );

    cfg.jobs = 4;
    cfg.out = dir.path().join("parallel");
    let start = Instant::now();
    cmd_eval(&cfg).map_err(|e| e.to_string())?;
    let parallel = start.elapsed();

    let a = files_under(&dir.path().join("serial"));
    let b = files_under(&dir.path().join("parallel"));
    ensure!(a.keys().eq(b.keys()), "output file sets differ");
    for (k, v) in &a {
        ensure!(&b[k] == v, "{k} differs between 1 and 4 workers");
    }
    ensure!(serial < Duration::from_secs(10), "single worker took {serial:?}");
    Ok(format!(
        "500 x 6 x 4 in {:.2} s single-worker ({:.2} s on 4); {} files byte-identical",
        serial.as_secs_f64(),
        parallel.as_secs_f64(),
        a.len()
    ))
}
