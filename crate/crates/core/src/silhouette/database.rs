use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::descriptor::ShapeContextDescriptor;
use super::{extract_query_silhouette, SilhouetteConfig};
use crate::error::SilhouetteError;
use crate::geometry::{CameraModel, PixelPoint, RigidTransform};
use crate::image::{Contour, ImageMoments};
use crate::model::WireframeModel;
use crate::scene::{render_silhouette, AnchorMap, TrajectorySpec};

const MAGIC: &[u8; 8] = b"PSILDB01";

/// Camera positions on spheres around the target centroid.
///
/// `vertical` and `azimuth_origin` (target frame) fix the spherical
/// coordinates: inclination is measured from the plane normal to
/// `vertical`, azimuth from `azimuth_origin` towards `azimuth_origin ×
/// vertical`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewGrid {
    /// mm, ascending.
    pub radii: Vec<f64>,
    /// deg.
    pub inclinations: Vec<f64>,
    /// deg, divides 360.
    pub azimuth_step: f64,
    pub vertical: [f64; 3],
    pub azimuth_origin: [f64; 3],
}

impl Default for ViewGrid {
    fn default() -> Self {
        Self::for_trajectory(&TrajectorySpec::default())
    }
}

impl ViewGrid {
    /// Grid whose vertical is the turntable axis of `spec` and whose zero
    /// azimuth is the frame-0 view.
    pub fn for_trajectory(spec: &TrajectorySpec) -> Self {
        Self {
            radii: vec![1500.0, 1600.0, 1700.0],
            inclinations: (-3..=3).map(|k| k as f64 * 10.0).collect(),
            azimuth_step: 10.0,
            vertical: spec.vertical_axis().into(),
            azimuth_origin: spec.rest_view_direction().into(),
        }
    }

    pub fn validate(&self) -> Result<(), SilhouetteError> {
        let bad = |m: &str| Err(SilhouetteError::Format(format!("invalid view grid: {m}")));
        if self.radii.is_empty() || self.inclinations.is_empty() {
            return bad("radii and inclinations must be nonempty");
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return bad("radii must be positive and ascending");
        }
        if self.inclinations.iter().any(|b| !(b.abs() < 90.0)) {
            return bad("inclinations must lie in (-90, 90)");
        }
        let steps = 360.0 / self.azimuth_step;
        if !(self.azimuth_step > 0.0) || (steps - steps.round()).abs() > 1e-9 {
            return bad("azimuth_step must divide 360");
        }
        let (v, a) = (
            Vector3::from(self.vertical),
            Vector3::from(self.azimuth_origin),
        );
        if v.norm() < 1e-9 || v.cross(&a).norm() < 1e-9 * a.norm().max(1.0) {
            return bad("vertical and azimuth_origin must be nonzero and not parallel");
        }
        Ok(())
    }

    pub fn azimuths(&self) -> Vec<f64> {
        let n = (360.0 / self.azimuth_step).round() as usize;
        (0..n).map(|k| k as f64 * self.azimuth_step).collect()
    }

    /// Every (ρ, β, α) cell, radius-major.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let az = self.azimuths();
        let mut out = Vec::with_capacity(self.radii.len() * self.inclinations.len() * az.len());
        for &rho in &self.radii {
            for &beta in &self.inclinations {
                for &alpha in &az {
                    out.push((rho, beta, alpha));
                }
            }
        }
        out
    }

    /// Target → camera pose of the camera at (ρ, β, α) looking at `centre`,
    /// image up aligned with the vertical projected normal to the boresight.
    pub fn camera_pose(
        &self,
        centre: &Vector3<f64>,
        rho: f64,
        beta_deg: f64,
        alpha_deg: f64,
    ) -> RigidTransform {
        let v = Vector3::from(self.vertical).normalize();
        let a = Vector3::from(self.azimuth_origin);
        let e1 = (a - v * v.dot(&a)).normalize();
        let e2 = e1.cross(&v);
        let (b, al) = (beta_deg.to_radians(), alpha_deg.to_radians());
        let dir = (e1 * al.cos() + e2 * al.sin()) * b.cos() + v * b.sin();
        let position = centre + dir * rho;
        let z = -dir;
        let up = (v - z * z.dot(&v)).normalize();
        let y = -up;
        let x = y.cross(&z);
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        RigidTransform::from_rotation_matrix(&r, -(r * position))
    }
}

/// One synthetic view of the database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteEntry {
    /// deg.
    pub alpha: f64,
    /// deg.
    pub beta: f64,
    /// mm.
    pub rho: f64,
    /// Rendering camera pose (target → camera).
    pub pose: RigidTransform,
    pub contour: Contour,
    pub moments: ImageMoments,
    /// Range prior of the view's ROI, mm.
    pub range_estimate: f64,
    pub sampled_points: Vec<PixelPoint>,
    pub descriptors: Vec<ShapeContextDescriptor>,
    /// Target-frame surface point seen at each sampled point, mm. `None`
    /// where the extracted outline bridges background (closed gaps between
    /// thin parts) and no surface pixel lies within the anchor radius.
    pub anchors_3d: Vec<Option<Vector3<f64>>>,
}

/// Everything a query must agree on to be comparable with the entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseHeader {
    pub grid: ViewGrid,
    pub n_samples: usize,
    pub r_bins: usize,
    pub theta_bins: usize,
    pub model_hash: String,
    pub intrinsics_hash: String,
    pub entry_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteDatabase {
    pub header: DatabaseHeader,
    pub entries: Vec<SilhouetteEntry>,
}

/// SHA-256 of the compact JSON encoding of the intrinsics, hex.
pub fn intrinsics_hash(cam: &CameraModel) -> String {
    let bytes = serde_json::to_vec(cam).expect("camera serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Which of the stored hashes disagrees with the supplied model or camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mismatch {
    Model,
    Intrinsics,
}

impl SilhouetteDatabase {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_compatible(
        &self,
        model: &WireframeModel,
        cam: &CameraModel,
    ) -> Result<(), Mismatch> {
        if self.header.model_hash != model.content_hash() {
            return Err(Mismatch::Model);
        }
        if self.header.intrinsics_hash != intrinsics_hash(cam) {
            return Err(Mismatch::Intrinsics);
        }
        Ok(())
    }

    /// Magic, little-endian u32 header length, JSON header, bincode entries.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), SilhouetteError> {
        let header =
            serde_json::to_vec(&self.header).map_err(|e| SilhouetteError::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        bincode::serialize_into(&mut w, &self.entries)
            .map_err(|e| SilhouetteError::Format(e.to_string()))?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, SilhouetteError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SilhouetteError::Format("not a silhouette database".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header: DatabaseHeader = serde_json::from_slice(&header)
            .map_err(|e| SilhouetteError::Format(format!("header: {e}")))?;
        let entries: Vec<SilhouetteEntry> = bincode::deserialize_from(r)
            .map_err(|e| SilhouetteError::Format(format!("entries: {e}")))?;
        if entries.len() != header.entry_count {
            return Err(SilhouetteError::Format(format!(
                "header announces {} entries, found {}",
                header.entry_count,
                entries.len()
            )));
        }
        Ok(Self { header, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), SilhouetteError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SilhouetteError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Renders one grid cell and turns it into an entry through the query
/// extraction path.
pub fn build_entry(
    model: &WireframeModel,
    grid: &ViewGrid,
    cam: &CameraModel,
    cfg: &SilhouetteConfig,
    (rho, beta, alpha): (f64, f64, f64),
) -> Result<SilhouetteEntry, SilhouetteError> {
    let pose = grid.camera_pose(&model.centroid(), rho, beta, alpha);
    let (img, anchors) = render_silhouette(model, &pose, cam)?;
    let q = extract_query_silhouette(&img, model, cam, cfg)?;
    let anchors_3d = q
        .sampled_points
        .iter()
        .map(|p| nearest_anchor(&anchors, &pose, cam, p, cfg.anchor_radius))
        .collect();
    Ok(SilhouetteEntry {
        alpha,
        beta,
        rho,
        pose,
        contour: q.contour,
        moments: q.moments,
        range_estimate: q.range_estimate,
        sampled_points: q.sampled_points,
        descriptors: q.descriptors,
        anchors_3d,
    })
}

/// Surface point whose projection lands closest to `p`, if within `radius`.
///
/// Candidates are the anchors of pixels around `p`; antenna anchors lie on
/// the antenna axis, so the pixel distance alone does not bound the
/// reprojection distance.
fn nearest_anchor(
    anchors: &AnchorMap,
    pose: &RigidTransform,
    cam: &CameraModel,
    p: &PixelPoint,
    radius: f64,
) -> Option<Vector3<f64>> {
    let reach = radius.ceil() as isize + 1;
    let (cx, cy) = (p.u.round() as isize, p.v.round() as isize);
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for y in cy - reach..=cy + reach {
        for x in cx - reach..=cx + reach {
            if x < 0 || y < 0 {
                continue;
            }
            let Some(a) = anchors.get(x as usize, y as usize) else {
                continue;
            };
            let Ok(q) = cam.project_pinhole(&pose.apply(&a)) else {
                continue;
            };
            let d = q.distance(p);
            if d <= radius && best.is_none_or(|b| d < b.0) {
                best = Some((d, a));
            }
        }
    }
    best.map(|b| b.1)
}

/// Renders and describes every grid cell in parallel. Cells that fail are
/// logged and skipped; the order follows [`ViewGrid::cells`].
pub fn generate_database(
    model: &WireframeModel,
    grid: &ViewGrid,
    cam: &CameraModel,
    cfg: &SilhouetteConfig,
) -> Result<SilhouetteDatabase, SilhouetteError> {
    grid.validate()?;
    cfg.validate()?;
    let pinhole = CameraModel {
        k1: 0.0,
        k2: 0.0,
        p1: 0.0,
        p2: 0.0,
        ..*cam
    };
    let entries: Vec<SilhouetteEntry> = grid
        .cells()
        .into_par_iter()
        .filter_map(|cell| match build_entry(model, grid, &pinhole, cfg, cell) {
            Ok(e) => Some(e),
            Err(err) => {
                log::warn!("skipping view {cell:?}: {err}");
                None
            }
        })
        .collect();
    if entries.is_empty() {
        return Err(SilhouetteError::EmptyDatabase);
    }
    Ok(SilhouetteDatabase {
        header: DatabaseHeader {
            grid: grid.clone(),
            n_samples: cfg.n_samples,
            r_bins: cfg.r_bins,
            theta_bins: cfg.theta_bins,
            model_hash: model.content_hash(),
            intrinsics_hash: intrinsics_hash(cam),
            entry_count: entries.len(),
        },
        entries,
    })
}
