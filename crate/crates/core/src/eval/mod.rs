//! Dataset I/O, per-frame evaluation of either pipeline and report files.

mod dataset;
mod report;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dataset::{frame_path, write_dataset, Dataset, DatasetMeta};
pub use report::{
    emit_cdf, read_frames_csv, write_cdf_csv, write_frames_csv, FrameResult, Method, Report,
    Thresholds, FRAMES_HEADER,
};

use crate::error::EvalError;
use crate::geometry::PoseError;
use crate::silhouette::{solve_silhouette, Mismatch, SilhouetteConfig, SilhouetteDatabase};
use crate::svd::{solve_svd, SvdConfig};
use dataset::pretty_json;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub svd: SvdConfig,
    pub silhouette: SilhouetteConfig,
    pub thresholds: Thresholds,
    /// Frame `i` runs its RANSAC with seed `seed + i`.
    pub seed: u64,
    /// When false `runtime_ms` is left empty, making `frames.csv` a pure
    /// function of the inputs.
    pub record_timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            svd: SvdConfig::default(),
            silhouette: SilhouetteConfig::default(),
            thresholds: Thresholds::default(),
            seed: 0,
            record_timing: true,
        }
    }
}

/// `summary.json` of a single run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub report: Report,
    pub seed: u64,
    pub config: EvalConfig,
    pub model_hash: String,
    pub tool_version: String,
}

fn run_frame(
    dataset: &Dataset,
    frame: usize,
    truth: &crate::geometry::RigidTransform,
    method: Method,
    db: Option<&SilhouetteDatabase>,
    cfg: &EvalConfig,
) -> FrameResult {
    let seed = cfg.seed.wrapping_add(frame as u64);
    let start = Instant::now();
    let outcome = dataset
        .load_frame(frame)
        .map_err(|e| e.to_string())
        .and_then(|img| match method {
            Method::Svd => {
                let mut c = cfg.svd;
                c.ransac.rng_seed = seed;
                solve_svd(&img, &dataset.model, &dataset.camera, &c).map_err(|e| e.to_string())
            }
            Method::Silhouette => {
                let mut c = cfg.silhouette;
                c.ransac.rng_seed = seed;
                let db = db.expect("database checked before the run");
                solve_silhouette(&img, db, &dataset.model, &dataset.camera, &c)
                    .map_err(|e| e.to_string())
            }
        });
    let runtime = cfg
        .record_timing
        .then(|| start.elapsed().as_secs_f64() * 1e3);
    match outcome {
        Ok(r) => FrameResult::classify(
            frame,
            method,
            r.converged,
            Some(PoseError::between(&r.pose, truth)),
            runtime,
            &cfg.thresholds,
        ),
        Err(e) => {
            log::info!("frame {frame} ({method}): {e}");
            FrameResult::classify(frame, method, false, None, runtime, &cfg.thresholds)
        }
    }
}

/// Runs `method` on every frame of the dataset on the current rayon pool.
/// Failures on single frames are recorded as non-converged.
pub fn evaluate(
    dataset: &Dataset,
    method: Method,
    db: Option<&SilhouetteDatabase>,
    cfg: &EvalConfig,
) -> Result<(Vec<FrameResult>, Report), EvalError> {
    if method == Method::Silhouette {
        let db = db.ok_or(EvalError::MissingDatabase)?;
        db.check_compatible(&dataset.model, &dataset.camera)
            .map_err(|m| {
                EvalError::DatabaseMismatch(match m {
                    Mismatch::Model => "model",
                    Mismatch::Intrinsics => "intrinsics",
                })
            })?;
        let s = &cfg.silhouette;
        if (db.header.n_samples, db.header.r_bins, db.header.theta_bins)
            != (s.n_samples, s.r_bins, s.theta_bins)
        {
            return Err(EvalError::DatabaseMismatch("descriptor settings"));
        }
    }
    let frames: Vec<FrameResult> = dataset
        .ground_truth
        .par_iter()
        .map(|(i, truth)| run_frame(dataset, *i, truth, method, db, cfg))
        .collect();
    let report = Report::from_frames(method, &frames, &cfg.thresholds);
    Ok((frames, report))
}

/// [`evaluate`] on a single worker thread.
pub fn evaluate_serial(
    dataset: &Dataset,
    method: Method,
    db: Option<&SilhouetteDatabase>,
    cfg: &EvalConfig,
) -> Result<(Vec<FrameResult>, Report), EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("a one-thread pool can always be built");
    pool.install(|| evaluate(dataset, method, db, cfg))
}

fn write_text(path: &Path, text: &str) -> Result<(), EvalError> {
    fs::write(path, text).map_err(|e| EvalError::io(path, e))
}

/// Writes `frames.csv`, `summary.json`, `cdf_position.csv` and
/// `cdf_attitude.csv` into `out` (created if needed).
pub fn write_run(
    out: &Path,
    frames: &[FrameResult],
    report: &Report,
    cfg: &EvalConfig,
    model_hash: &str,
) -> Result<Summary, EvalError> {
    fs::create_dir_all(out).map_err(|e| EvalError::io(out, e))?;
    write_frames_csv(&out.join("frames.csv"), frames)?;
    write_cdf_csv(&out.join("cdf_position.csv"), &report.cdf_e_t)?;
    write_cdf_csv(&out.join("cdf_attitude.csv"), &report.cdf_e_theta)?;
    let summary = Summary {
        report: report.clone(),
        seed: cfg.seed,
        config: *cfg,
        model_hash: model_hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_text(&out.join("summary.json"), &pretty_json(&summary))?;
    Ok(summary)
}

/// Re-aggregates per-frame CSVs, reclassifying every frame with
/// `thresholds`. Writes `summary.json` keyed by method and one pair of
/// `cdf_position_<method>.csv` / `cdf_attitude_<method>.csv` per method.
pub fn merge_reports(
    inputs: &[&Path],
    out: &Path,
    thresholds: &Thresholds,
) -> Result<Vec<Report>, EvalError> {
    let mut all = Vec::new();
    for p in inputs {
        all.extend(read_frames_csv(p)?);
    }
    let mut methods: Vec<Method> = all.iter().map(|f| f.method).collect();
    methods.sort();
    methods.dedup();
    fs::create_dir_all(out).map_err(|e| EvalError::io(out, e))?;
    let mut reports = Vec::new();
    let mut summary = serde_json::Map::new();
    for m in methods {
        let mut frames: Vec<FrameResult> = all
            .iter()
            .filter(|f| f.method == m)
            .map(|f| {
                let err = f
                    .e_t
                    .zip(f.e_theta)
                    .map(|(e_t, e_theta)| PoseError { e_t, e_theta });
                FrameResult::classify(f.frame_index, m, f.converged, err, f.runtime_ms, thresholds)
            })
            .collect();
        frames.sort_by_key(|f| f.frame_index);
        let r = Report::from_frames(m, &frames, thresholds);
        write_cdf_csv(&out.join(format!("cdf_position_{m}.csv")), &r.cdf_e_t)?;
        write_cdf_csv(&out.join(format!("cdf_attitude_{m}.csv")), &r.cdf_e_theta)?;
        summary.insert(
            m.to_string(),
            serde_json::to_value(&r).expect("plain data serializes"),
        );
        reports.push(r);
    }
    write_text(&out.join("summary.json"), &pretty_json(&summary))?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::geometry::CameraModel;
    use crate::scene::{build_cubesat_2u, TrajectorySpec};
    use crate::silhouette::{generate_database, ViewGrid};

    struct Fixture {
        _dir: tempfile::TempDir,
        dataset: Dataset,
    }

    fn fixture() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            let spec = TrajectorySpec {
                frame_count: 6,
                step: 15.0,
                ..Default::default()
            };
            let dataset = write_dataset(
                dir.path(),
                &spec,
                &build_cubesat_2u(),
                &CameraModel::wide_fov_1080p(),
                3,
            )
            .unwrap();
            Fixture { _dir: dir, dataset }
        })
    }

    fn no_timing() -> EvalConfig {
        EvalConfig {
            record_timing: false,
            ..Default::default()
        }
    }

    #[test]
    fn parallel_and_serial_runs_agree() {
        let ds = &fixture().dataset;
        let (par, rp) = evaluate(ds, Method::Svd, None, &no_timing()).unwrap();
        let (ser, rs) = evaluate_serial(ds, Method::Svd, None, &no_timing()).unwrap();
        assert_eq!(par, ser);
        assert_eq!(rp, rs);
        assert_eq!(par.len(), 6);
        assert!(par.iter().enumerate().all(|(i, f)| f.frame_index == i));
    }

    #[test]
    fn summary_matches_frames_csv() {
        let ds = &fixture().dataset;
        let cfg = EvalConfig::default();
        let (frames, report) = evaluate(ds, Method::Svd, None, &cfg).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_run(out.path(), &frames, &report, &cfg, &ds.meta.model_hash).unwrap();
        let back = read_frames_csv(&out.path().join("frames.csv")).unwrap();
        let again = Report::from_frames(Method::Svd, &back, &cfg.thresholds);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap())
                .unwrap();
        for key in [
            "method",
            "total",
            "converged",
            "successes",
            "success_rate",
            "mean_e_t_mm",
            "mean_e_theta_deg",
            "thresholds",
            "seed",
            "config",
        ] {
            assert!(json.get(key).is_some(), "summary lacks {key}");
        }
        assert_eq!(json["total"], again.total);
        assert_eq!(json["successes"], again.successes);
        assert!((json["success_rate"].as_f64().unwrap() - again.success_rate).abs() < 1e-9);
        match again.mean_e_t_mm {
            Some(m) => assert!((json["mean_e_t_mm"].as_f64().unwrap() - m).abs() < 1e-9),
            None => assert!(json["mean_e_t_mm"].is_null()),
        }
        match again.mean_e_theta_deg {
            Some(m) => assert!((json["mean_e_theta_deg"].as_f64().unwrap() - m).abs() < 1e-9),
            None => assert!(json["mean_e_theta_deg"].is_null()),
        }
    }

    #[test]
    fn silhouette_needs_a_matching_database() {
        let ds = &fixture().dataset;
        assert!(matches!(
            evaluate(ds, Method::Silhouette, None, &no_timing()),
            Err(EvalError::MissingDatabase)
        ));
        let grid = ViewGrid {
            radii: vec![1600.0],
            inclinations: vec![0.0],
            azimuth_step: 90.0,
            ..Default::default()
        };
        let other_cam = CameraModel {
            fx: ds.camera.fx * 1.1,
            ..ds.camera
        };
        let db =
            generate_database(&ds.model, &grid, &other_cam, &SilhouetteConfig::default()).unwrap();
        assert!(matches!(
            evaluate(ds, Method::Silhouette, Some(&db), &no_timing()),
            Err(EvalError::DatabaseMismatch("intrinsics"))
        ));
        let db =
            generate_database(&ds.model, &grid, &ds.camera, &SilhouetteConfig::default()).unwrap();
        let (frames, _) = evaluate(ds, Method::Silhouette, Some(&db), &no_timing()).unwrap();
        assert_eq!(frames.len(), 6);
    }

    #[test]
    fn unreadable_frames_are_recorded_not_fatal() {
        let src = &fixture().dataset;
        let dir = tempfile::tempdir().unwrap();
        let ds = write_dataset(
            dir.path(),
            &TrajectorySpec {
                frame_count: 2,
                ..Default::default()
            },
            &src.model,
            &src.camera,
            0,
        )
        .unwrap();
        fs::write(frame_path(dir.path(), 1), b"not a png").unwrap();
        let (frames, report) = evaluate(&ds, Method::Svd, None, &no_timing()).unwrap();
        assert!(!frames[1].converged && frames[1].e_t.is_none());
        assert_eq!(report.total, 2);
    }

    #[test]
    fn cdf_at_threshold_equals_success_rate() {
        // Attitude always passes, so success is decided by position alone.
        let th = Thresholds::default();
        let frames: Vec<FrameResult> = (0..475)
            .map(|i| {
                let converged = i % 7 != 0;
                let e_t = (i * 37 % 600) as f64 + 0.5;
                let err = PoseError { e_t, e_theta: 1.0 };
                FrameResult::classify(i, Method::Svd, converged, Some(err), None, &th)
            })
            .collect();
        let r = Report::from_frames(Method::Svd, &frames, &th);
        let at = r
            .cdf_e_t
            .iter()
            .take_while(|(v, _)| *v < th.position_mm)
            .last()
            .map_or(0.0, |&(_, p)| p);
        assert!((at - r.success_rate).abs() <= 1.0 / 475.0);
    }

    #[test]
    fn merged_reports_reclassify() {
        let th = Thresholds::default();
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<FrameResult> = (0..4)
            .map(|i| {
                let err = PoseError {
                    e_t: 100.0 * i as f64,
                    e_theta: 1.0,
                };
                FrameResult::classify(i, Method::Svd, true, Some(err), None, &th)
            })
            .collect();
        let b = vec![FrameResult::classify(
            0,
            Method::Silhouette,
            false,
            None,
            None,
            &th,
        )];
        let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_frames_csv(&pa, &a).unwrap();
        write_frames_csv(&pb, &b).unwrap();
        let out = dir.path().join("merged");
        let tight = Thresholds {
            position_mm: 150.0,
            attitude_deg: 10.0,
        };
        let reports = merge_reports(&[&pa, &pb], &out, &tight).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].method, Method::Svd);
        assert_eq!(reports[0].successes, 2);
        assert_eq!(reports[1].successes, 0);
        assert!(out.join("cdf_position_silhouette.csv").exists());
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["svd"]["successes"], 2);
    }
}
