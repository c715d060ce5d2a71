//! Thresholded binding diagnostics and continuous confusion metrics.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::model::Dimension;
use crate::similarity::SimilarityBundle;
use crate::thresholds::DimensionThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    fn ln_scale(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "e" | "natural" | "ln" => Ok(LogBase::Natural),
            "2" | "two" => Ok(LogBase::Two),
            other => Err(format!("unknown log base `{other}` (expected `e` or `2`)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Drift,
    Confused,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Drift => "drift",
            Outcome::Confused => "confused",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImagePatterns {
    pub swap: bool,
    pub dominance: bool,
    pub blending: bool,
}

/// Per-row (generated subject) record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostics {
    pub slot: usize,
    pub outcome: Outcome,
    pub inconsistent: bool,
    pub confused: bool,
    pub delta_self: f64,
    pub sim_diag: f64,
    pub c_mean: f64,
    pub c_worst: f64,
    pub js: f64,
    /// Only one valid column: off-diagonal terms are undefined and set to 0.
    pub single_column: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousDiagnostics {
    pub d_self: f64,
    pub c_mean: f64,
    pub c_worst: f64,
    pub js: f64,
    pub sim_diag_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionDiagnostics {
    pub dimension: Dimension,
    pub cons: Array2<bool>,
    pub conf: Array2<bool>,
    pub n_conf: usize,
    pub rows: Vec<RowDiagnostics>,
    /// `None` when fewer than two rows or columns.
    pub patterns: Option<ImagePatterns>,
    /// `None` when there are no rows.
    pub continuous: Option<ContinuousDiagnostics>,
}

/// Binarizes `delta`; `diag[r]` is the column holding row `r`'s own slot.
pub fn binarize(delta: &Array2<f64>, diag: &[usize], t: DimensionThresholds) -> (Array2<bool>, Array2<bool>) {
    let shape = delta.dim();
    let mut cons = Array2::from_elem(shape, false);
    let mut conf = Array2::from_elem(shape, false);
    for ((r, c), &v) in delta.indexed_iter() {
        if c == diag[r] {
            cons[[r, c]] = v >= t.cons;
        } else {
            conf[[r, c]] = v >= t.conf;
        }
    }
    (cons, conf)
}

/// Subject-level outcome per row.
pub fn subject_outcomes(cons: &Array2<bool>, conf: &Array2<bool>, diag: &[usize]) -> Vec<Outcome> {
    (0..cons.nrows())
        .map(|r| {
            let confused = conf.row(r).iter().enumerate().any(|(c, &x)| x && c != diag[r]);
            if confused {
                Outcome::Confused
            } else if cons[[r, diag[r]]] {
                Outcome::Success
            } else {
                Outcome::Drift
            }
        })
        .collect()
}

/// Image-level failure patterns, or `None` if the instance is ineligible.
/// Only off-diagonal confusion links count towards `n_conf`.
pub fn image_patterns(cons: &Array2<bool>, conf: &Array2<bool>, diag: &[usize]) -> Option<ImagePatterns> {
    let (ni, nv) = cons.dim();
    if ni < 2 || nv < 2 {
        return None;
    }
    let m = Array2::from_shape_fn((ni, nv), |ix| cons[ix] || conf[ix]);
    let count = |v: ArrayView1<bool>| v.iter().filter(|&&x| x).count();
    let r: Vec<usize> = m.rows().into_iter().map(count).collect();
    let c: Vec<usize> = m.columns().into_iter().map(count).collect();
    let n_conf = conf.indexed_iter().filter(|&((r, c), &x)| x && c != diag[r]).count();
    let max_r = r.iter().copied().max().unwrap_or(0);
    let max_c = c.iter().copied().max().unwrap_or(0);
    Some(ImagePatterns {
        swap: n_conf > 0 && max_r <= 1 && max_c <= 1,
        dominance: c.iter().filter(|&&cj| cj == ni).count() == 1,
        blending: max_r >= 2,
    })
}

fn softmax(row: ArrayView1<f64>) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Jensen-Shannon divergence between two distributions.
pub fn js_divergence(p: &[f64], q: &[f64], base: LogBase) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            acc += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            acc += 0.5 * b * (b / m).ln();
        }
    }
    (acc / base.ln_scale()).max(0.0)
}

/// Row-wise JS shift between the softmaxed rows of `s_gt` and `s_gen`.
pub fn js_rows(s_gt: &Array2<f64>, s_gen: &Array2<f64>, base: LogBase) -> Vec<f64> {
    s_gt.rows()
        .into_iter()
        .zip(s_gen.rows())
        .map(|(g, h)| js_divergence(&softmax(g), &softmax(h), base))
        .collect()
}

pub fn js_shift(s_gt: &Array2<f64>, s_gen: &Array2<f64>, base: LogBase) -> Option<f64> {
    mean(&js_rows(s_gt, s_gen, base))
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// `(c_mean, c_worst)` contribution of one row; zero for a single column.
fn row_confusion(delta: ArrayView1<f64>, diag: usize) -> (f64, f64) {
    let off: Vec<f64> = delta
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != diag)
        .map(|(_, &v)| v.max(0.0))
        .collect();
    match mean(&off) {
        Some(m) => (m, off.iter().copied().fold(0.0, f64::max)),
        None => (0.0, 0.0),
    }
}

/// `(d_self, c_mean, c_worst)` over all rows of `delta`.
pub fn continuous_metrics(delta: &Array2<f64>, diag: &[usize]) -> Option<(f64, f64, f64)> {
    if delta.nrows() == 0 {
        return None;
    }
    let n = delta.nrows() as f64;
    let mut d = 0.0;
    let mut cm = 0.0;
    let mut cw = 0.0;
    for (r, row) in delta.rows().into_iter().enumerate() {
        d -= row[diag[r]];
        let (m, w) = row_confusion(row, diag[r]);
        cm += m;
        cw += w;
    }
    Some((d / n, cm / n, cw / n))
}

/// Column index of every row's own slot.
pub fn diag_columns(b: &SimilarityBundle) -> Vec<usize> {
    b.rows
        .iter()
        .map(|&s| b.col_of(s).expect("row slots are a subset of column slots"))
        .collect()
}

/// Runs every diagnostic on one bundle.
pub fn diagnose(b: &SimilarityBundle, t: DimensionThresholds, base: LogBase) -> DimensionDiagnostics {
    let diag = diag_columns(b);
    let (cons, conf) = binarize(&b.delta, &diag, t);
    let outcomes = subject_outcomes(&cons, &conf, &diag);
    let js = js_rows(&b.s_gt, &b.s_gen, base);
    let single_column = b.cols.len() < 2;
    let rows: Vec<RowDiagnostics> = outcomes
        .iter()
        .enumerate()
        .map(|(r, &outcome)| {
            let (c_mean, c_worst) = row_confusion(b.delta.row(r), diag[r]);
            RowDiagnostics {
                slot: b.rows[r],
                outcome,
                inconsistent: !cons[[r, diag[r]]],
                confused: outcome == Outcome::Confused,
                delta_self: b.delta[[r, diag[r]]],
                sim_diag: b.s_gen[[r, diag[r]]],
                c_mean,
                c_worst,
                js: js[r],
                single_column,
            }
        })
        .collect();
    let continuous = continuous_metrics(&b.delta, &diag).map(|(d_self, c_mean, c_worst)| {
        let sims: Vec<f64> = rows.iter().map(|r| r.sim_diag).collect();
        ContinuousDiagnostics {
            d_self,
            c_mean,
            c_worst,
            js: mean(&js).unwrap_or(0.0),
            sim_diag_mean: mean(&sims).unwrap_or(0.0),
        }
    });
    DimensionDiagnostics {
        dimension: b.dimension,
        n_conf: conf.iter().filter(|&&x| x).count(),
        patterns: image_patterns(&cons, &conf, &diag),
        cons,
        conf,
        rows,
        continuous,
    }
}
