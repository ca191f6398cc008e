use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::geometry::PoseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svd,
    Silhouette,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Svd => "svd",
            Method::Silhouette => "silhouette",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svd" => Ok(Method::Svd),
            "silhouette" => Ok(Method::Silhouette),
            other => Err(format!(
                "unknown method `{other}` (expected svd or silhouette)"
            )),
        }
    }
}

/// Success thresholds on position (mm) and attitude (deg) error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub position_mm: f64,
    pub attitude_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            position_mm: 300.0,
            attitude_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame_index: usize,
    pub method: Method,
    pub converged: bool,
    /// mm; `None` when the pipeline did not converge.
    pub e_t: Option<f64>,
    /// deg; `None` when the pipeline did not converge.
    pub e_theta: Option<f64>,
    pub success: bool,
    pub runtime_ms: Option<f64>,
}

impl FrameResult {
    /// Errors are kept only for converged frames; success needs both errors
    /// strictly below their thresholds.
    pub fn classify(
        frame_index: usize,
        method: Method,
        converged: bool,
        error: Option<PoseError>,
        runtime_ms: Option<f64>,
        thresholds: &Thresholds,
    ) -> Self {
        let error = error.filter(|_| converged);
        let success = error
            .is_some_and(|e| e.e_t < thresholds.position_mm && e.e_theta < thresholds.attitude_deg);
        Self {
            frame_index,
            method,
            converged,
            e_t: error.map(|e| e.e_t),
            e_theta: error.map(|e| e.e_theta),
            success,
            runtime_ms,
        }
    }
}

/// Empirical CDF: sorted values with cumulative fractions `k/n`.
/// Infinite values (non-converged frames) sort last.
pub fn emit_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(k, x)| (x, (k + 1) as f64 / n))
        .collect()
}

/// Aggregate over the frames of one method. Means are taken over the
/// successful frames only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Method,
    pub total: usize,
    pub converged: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_e_t_mm: Option<f64>,
    pub mean_e_theta_deg: Option<f64>,
    pub thresholds: Thresholds,
    /// Position errors, non-converged frames as `+inf`.
    #[serde(skip)]
    pub cdf_e_t: Vec<(f64, f64)>,
    #[serde(skip)]
    pub cdf_e_theta: Vec<(f64, f64)>,
}

impl Report {
    pub fn from_frames(method: Method, frames: &[FrameResult], thresholds: &Thresholds) -> Self {
        let total = frames.len();
        let ok: Vec<&FrameResult> = frames.iter().filter(|f| f.success).collect();
        let mean = |get: fn(&FrameResult) -> Option<f64>| {
            if ok.is_empty() {
                None
            } else {
                Some(
                    ok.iter()
                        .map(|f| get(f).expect("successful frames carry errors"))
                        .sum::<f64>()
                        / ok.len() as f64,
                )
            }
        };
        let inf = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
        Self {
            method,
            total,
            converged: frames.iter().filter(|f| f.converged).count(),
            successes: ok.len(),
            success_rate: if total == 0 {
                0.0
            } else {
                ok.len() as f64 / total as f64
            },
            mean_e_t_mm: mean(|f| f.e_t),
            mean_e_theta_deg: mean(|f| f.e_theta),
            thresholds: *thresholds,
            cdf_e_t: emit_cdf(&frames.iter().map(|f| inf(f.e_t)).collect::<Vec<_>>()),
            cdf_e_theta: emit_cdf(&frames.iter().map(|f| inf(f.e_theta)).collect::<Vec<_>>()),
        }
    }
}

pub const FRAMES_HEADER: [&str; 7] = [
    "frame",
    "method",
    "converged",
    "e_t_mm",
    "e_theta_deg",
    "success",
    "runtime_ms",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> EvalError {
    EvalError::malformed(path.display().to_string(), e)
}

pub fn write_frames_csv(path: &Path, frames: &[FrameResult]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(FRAMES_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for f in frames {
        w.write_record([
            f.frame_index.to_string(),
            f.method.to_string(),
            f.converged.to_string(),
            fmt_opt(f.e_t),
            fmt_opt(f.e_theta),
            f.success.to_string(),
            fmt_opt(f.runtime_ms),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| EvalError::io(path, e))
}

pub fn read_frames_csv(path: &Path) -> Result<Vec<FrameResult>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(FRAMES_HEADER) {
        return Err(EvalError::malformed(
            path.display().to_string(),
            format!("unexpected header {header:?}"),
        ));
    }
    let bad = |line: usize, what: &str| {
        EvalError::malformed(
            path.display().to_string(),
            format!("row {line}: bad {what}"),
        )
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let opt = |i: usize, what: &str| -> Result<Option<f64>, EvalError> {
            match &rec[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(line, what)),
            }
        };
        out.push(FrameResult {
            frame_index: rec[0].parse().map_err(|_| bad(line, "frame"))?,
            method: rec[1].parse().map_err(|_| bad(line, "method"))?,
            converged: rec[2].parse().map_err(|_| bad(line, "converged"))?,
            e_t: opt(3, "e_t_mm")?,
            e_theta: opt(4, "e_theta_deg")?,
            success: rec[5].parse().map_err(|_| bad(line, "success"))?,
            runtime_ms: opt(6, "runtime_ms")?,
        });
    }
    Ok(out)
}

/// `value,fraction` rows; infinite values are written as `inf`.
pub fn write_cdf_csv(path: &Path, cdf: &[(f64, f64)]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["value", "fraction"])
        .map_err(|e| csv_err(path, e))?;
    for (v, p) in cdf {
        let v = if v.is_infinite() {
            "inf".to_string()
        } else {
            v.to_string()
        };
        w.write_record([v, p.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| EvalError::io(path, e))
}
