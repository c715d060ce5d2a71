//! Frozen machine-readable report for a fixed synthetic run.
//!
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p multibind-core --test golden`
//! after an intended format or numeric change.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use multibind::pipeline::{cmd_eval, RunConfig};
use multibind::synth::{generate, SynthConfig, SynthMode};

const FILES: [&str; 9] = [
    "metadata.json",
    "summary.csv",
    "summary.txt",
    "a/rates.json",
    "a/outcomes.csv",
    "a/patterns.csv",
    "b/rates.json",
    "b/outcomes.csv",
    "b/patterns.csv",
];

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn run(root: &Path) -> PathBuf {
    let mut ds = generate(&SynthConfig {
        seed: 20,
        instances: 5,
        models: vec!["a".into(), "b".into()],
        mode: SynthMode::Mixed,
        ..SynthConfig::default()
    })
    .unwrap();
    ds.drop_slot_detection("b", "inst_0001", 1).unwrap();
    ds.drop_output("a", "inst_0003").unwrap();
    ds.write(root).unwrap();
    let mut cfg = RunConfig::new(root.join("dataset"), root.join("out"));
    cfg = cfg
        .with_model("a", root.join("models/a"))
        .with_model("b", root.join("models/b"));
    cfg.dump_matrices = false;
    cmd_eval(&cfg).unwrap();
    root.join("out/report")
}

#[test]
fn report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(dir.path());
    let golden = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        for f in FILES {
            let dst = golden.join(f);
            std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
            std::fs::copy(report.join(f), dst).unwrap();
        }
    }
    for f in FILES {
        let got = std::fs::read_to_string(report.join(f)).unwrap();
        let want = std::fs::read_to_string(golden.join(f)).unwrap_or_else(|_| panic!("missing golden {f}"));
        assert!(got == want, "{f} differs from the golden copy");
    }
}

/// Rates re-derived from the per-row and per-instance dumps alone.
#[test]
fn golden_rates_recomputed_from_dumps() {
    let golden = golden_dir();
    for model in ["a", "b"] {
        let rates: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(golden.join(model).join("rates.json")).unwrap()).unwrap();
        let outcomes = std::fs::read_to_string(golden.join(model).join("outcomes.csv")).unwrap();
        let patterns = std::fs::read_to_string(golden.join(model).join("patterns.csv")).unwrap();

        let mut rows: BTreeMap<&str, Vec<Vec<&str>>> = BTreeMap::new();
        for line in outcomes.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            rows.entry(f[1]).or_default().push(f);
        }
        let mut pats: BTreeMap<&str, Vec<Vec<&str>>> = BTreeMap::new();
        for line in patterns.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[5] == "1" {
                pats.entry(f[1]).or_default().push(f);
            }
        }

        for d in rates["dimensions"].as_array().unwrap() {
            let name = d["dimension"].as_str().unwrap();
            let r = rows.get(name).cloned().unwrap_or_default();
            assert_eq!(d["rows"], r.len(), "{model} {name}");
            let pct = |n: usize, of: usize| 100.0 * n as f64 / of as f64;
            let count = |col: usize, v: &str| r.iter().filter(|f| f[col] == v).count();
            assert_eq!(d["success"], pct(count(3, "success"), r.len()), "{model} {name}");
            assert_eq!(d["drift"], pct(count(3, "drift"), r.len()), "{model} {name}");
            assert_eq!(d["confused"], pct(count(3, "confused"), r.len()), "{model} {name}");
            assert_eq!(d["inconsistent"], pct(count(4, "1"), r.len()), "{model} {name}");

            let mean = |col: usize, sign: f64| {
                r.iter().map(|f| sign * f[col].parse::<f64>().unwrap()).sum::<f64>() / r.len() as f64
            };
            assert_eq!(d["d_self"], mean(6, -1.0), "{model} {name}");
            assert_eq!(d["sim_diag_mean"], mean(7, 1.0), "{model} {name}");
            assert_eq!(d["c_mean"], mean(8, 1.0), "{model} {name}");
            assert_eq!(d["c_worst"], mean(9, 1.0), "{model} {name}");
            assert_eq!(d["js"], mean(10, 1.0), "{model} {name}");

            let p = pats.get(name).cloned().unwrap_or_default();
            assert_eq!(d["pattern_eligible"], p.len());
            for (key, col) in [("swap", 6), ("dominance", 7), ("blending", 8)] {
                let n = p.iter().filter(|f| f[col] == "1").count();
                assert_eq!(d[key], pct(n, p.len()), "{model} {name} {key}");
            }
        }
    }
}
