//! Shared pose back-end: P3P minimal solver, RANSAC and Levenberg-Marquardt
//! refinement of the reprojection cost.
//!
//! All pixels handed to this module are undistorted; projection is the ideal
//! pinhole of the camera model.

mod lm;
mod p3p;
mod ransac;

pub use lm::{
    apply_increment, refine_lm, refine_lm_traced, reprojection_jacobian, LmOptions, LmTrace,
};
pub use p3p::p3p;
pub use ransac::{ransac_pnp, solve_pnp, RansacParams};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraModel, PixelPoint, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence2D3D {
    /// Undistorted image point, px.
    pub pixel: PixelPoint,
    /// Target-frame point, mm.
    pub model_point: Vector3<f64>,
}

impl Correspondence2D3D {
    pub fn new(pixel: PixelPoint, model_point: Vector3<f64>) -> Self {
        Self { pixel, model_point }
    }

    pub fn is_finite(&self) -> bool {
        self.pixel.is_finite() && self.model_point.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnPResult {
    /// Target frame → camera frame.
    pub pose: RigidTransform,
    pub inlier_indices: Vec<usize>,
    /// RMS reprojection error over the inliers, px.
    pub rms_reprojection: f64,
    pub converged: bool,
}

impl PnPResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_indices.len()
    }
}

/// Pinhole reprojection error of each correspondence, px. Points at or
/// behind the camera get `f64::INFINITY`.
pub fn reprojection_errors(
    pose: &RigidTransform,
    corrs: &[Correspondence2D3D],
    cam: &CameraModel,
) -> Vec<f64> {
    corrs
        .iter()
        .map(|c| match cam.project_pinhole(&pose.apply(&c.model_point)) {
            Ok(p) => p.distance(&c.pixel),
            Err(_) => f64::INFINITY,
        })
        .collect()
}

/// Indices with error below `threshold` and the RMS error over them.
pub(crate) fn inliers_and_rms(errors: &[f64], threshold: f64) -> (Vec<usize>, f64) {
    let inliers: Vec<usize> = (0..errors.len())
        .filter(|&i| errors[i] < threshold)
        .collect();
    if inliers.is_empty() {
        return (inliers, f64::INFINITY);
    }
    let ss: f64 = inliers.iter().map(|&i| errors[i] * errors[i]).sum();
    let rms = (ss / inliers.len() as f64).sqrt();
    (inliers, rms)
}

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::{UnitQuaternion, Vector3};
    use rand::Rng;

    use super::Correspondence2D3D;
    use crate::geometry::{CameraModel, RigidTransform};

    pub fn camera() -> CameraModel {
        CameraModel::wide_fov_1080p()
    }

    /// Random pose placing a 400 mm cloud around the origin 1-3 m ahead.
    pub fn random_pose(rng: &mut impl Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let q = UnitQuaternion::from_scaled_axis(axis.normalize() * angle);
        let t = Vector3::new(
            rng.random_range(-300.0..300.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(1000.0..3000.0),
        );
        RigidTransform::new(q, t)
    }

    pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-200.0..200.0),
                    rng.random_range(-200.0..200.0),
                    rng.random_range(-200.0..200.0),
                )
            })
            .collect()
    }

    pub fn project_all(
        pose: &RigidTransform,
        pts: &[Vector3<f64>],
        cam: &CameraModel,
    ) -> Vec<Correspondence2D3D> {
        pts.iter()
            .map(|p| Correspondence2D3D::new(cam.project_pinhole(&pose.apply(p)).unwrap(), *p))
            .collect()
    }
}
