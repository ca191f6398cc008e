use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::geometry::{CameraModel, RigidTransform};
use crate::image::{load_png, save_png, GrayImage};
use crate::model::WireframeModel;
use crate::scene::{render_frame, TrajectorySpec};

/// `dataset.json`: how the sequence was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub trajectory: TrajectorySpec,
    pub seed: u64,
    /// Acquisition interval implied by the step and turntable speed, s.
    pub seconds_per_frame: f64,
    pub model_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct GroundTruthRow {
    frame: usize,
    tx_mm: f64,
    ty_mm: f64,
    tz_mm: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

/// A dataset directory: `frames/frame_%05d.png`, `ground_truth.csv`,
/// `intrinsics.json`, `dataset.json` and `model.json`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub meta: DatasetMeta,
    pub camera: CameraModel,
    pub model: WireframeModel,
    /// (frame index, target → camera), in file order.
    pub ground_truth: Vec<(usize, RigidTransform)>,
}

pub fn frame_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join("frames").join(format!("frame_{frame:05}.png"))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), EvalError> {
    fs::write(path, contents).map_err(|e| EvalError::io(path, e))
}

pub(crate) fn pretty_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes")
}

fn read_file(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|e| EvalError::io(path, e))
}

/// Renders the sequence and writes it to `dir` (created if needed).
pub fn write_dataset(
    dir: &Path,
    spec: &TrajectorySpec,
    model: &WireframeModel,
    cam: &CameraModel,
    seed: u64,
) -> Result<Dataset, EvalError> {
    spec.validate()?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| EvalError::io(&frames_dir, e))?;
    let poses = (0..spec.frame_count)
        .into_par_iter()
        .map(|i| -> Result<(usize, RigidTransform), EvalError> {
            let frame = render_frame(spec, model, cam, seed, i)?;
            save_png(&frame.image, &frame_path(dir, i))?;
            Ok((i, frame.ground_truth))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let gt_path = dir.join("ground_truth.csv");
    let mut w = csv::Writer::from_path(&gt_path)
        .map_err(|e| EvalError::malformed("ground_truth.csv", e))?;
    for (frame, pose) in &poses {
        let [qw, qx, qy, qz] = pose.wxyz();
        let t = pose.translation();
        w.serialize(GroundTruthRow {
            frame: *frame,
            tx_mm: t.x,
            ty_mm: t.y,
            tz_mm: t.z,
            qw,
            qx,
            qy,
            qz,
        })
        .map_err(|e| EvalError::malformed("ground_truth.csv", e))?;
    }
    w.flush().map_err(|e| EvalError::io(&gt_path, e))?;

    let meta = DatasetMeta {
        trajectory: *spec,
        seed,
        seconds_per_frame: spec.seconds_per_frame(),
        model_hash: model.content_hash(),
    };
    write_file(&dir.join("intrinsics.json"), pretty_json(cam))?;
    write_file(&dir.join("dataset.json"), pretty_json(&meta))?;
    write_file(&dir.join("model.json"), model.to_json())?;
    Ok(Dataset {
        dir: dir.to_path_buf(),
        meta,
        camera: *cam,
        model: model.clone(),
        ground_truth: poses,
    })
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, EvalError> {
        let required = [
            "ground_truth.csv",
            "intrinsics.json",
            "dataset.json",
            "model.json",
            "frames",
        ];
        if !dir.is_dir() || required.iter().any(|f| !dir.join(f).exists()) {
            return Err(EvalError::DatasetNotFound(dir.to_path_buf()));
        }
        let camera: CameraModel = serde_json::from_str(&read_file(&dir.join("intrinsics.json"))?)
            .map_err(|e| EvalError::malformed("intrinsics.json", e))?;
        camera
            .validate()
            .map_err(|e| EvalError::malformed("intrinsics.json", e))?;
        let meta: DatasetMeta = serde_json::from_str(&read_file(&dir.join("dataset.json"))?)
            .map_err(|e| EvalError::malformed("dataset.json", e))?;
        let model = WireframeModel::from_json(&read_file(&dir.join("model.json"))?)?;

        let gt_path = dir.join("ground_truth.csv");
        let mut r = csv::Reader::from_path(&gt_path)
            .map_err(|e| EvalError::malformed("ground_truth.csv", e))?;
        let ground_truth = r
            .deserialize::<GroundTruthRow>()
            .map(|row| {
                let row = row.map_err(|e| EvalError::malformed("ground_truth.csv", e))?;
                let pose = RigidTransform::from_wxyz(
                    [row.qw, row.qx, row.qy, row.qz],
                    [row.tx_mm, row.ty_mm, row.tz_mm],
                );
                Ok((row.frame, pose))
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            camera,
            model,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground_truth.is_empty()
    }

    pub fn load_frame(&self, frame: usize) -> Result<GrayImage, EvalError> {
        Ok(load_png(&frame_path(&self.dir, frame))?)
    }
}
