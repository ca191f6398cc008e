use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::render_edges;
use crate::error::SceneError;
use crate::geometry::{CameraModel, RigidTransform};
use crate::image::GrayImage;
use crate::model::WireframeModel;

/// Turntable speed of the reference experiment, deg/s.
pub const ROTATION_RATE_DEG_PER_S: f64 = 1.5;

/// Rotary-stage sequence: the target spins about a fixed vertical axis in
/// front of a static camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    /// Camera to target-centroid distance, mm.
    pub range: f64,
    /// Rotation per frame, deg.
    pub step: f64,
    pub frame_count: usize,
    /// Angle between the rotation axis and the target long axis, deg.
    pub axis_tilt: f64,
    /// Standard deviation of additive intensity noise.
    pub noise_sigma: f64,
    /// Drawn edge width, px.
    pub line_width: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            range: 1630.0,
            step: 0.84,
            frame_count: 475,
            axis_tilt: 30.0,
            noise_sigma: 0.0,
            line_width: 2.0,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidTrajectory(m.into()));
        if !(self.range > 0.0) {
            return bad("range must be > 0");
        }
        if !(self.step > 0.0) {
            return bad("step must be > 0");
        }
        if self.frame_count < 1 {
            return bad("frame_count must be >= 1");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0");
        }
        if !(self.line_width > 0.0) {
            return bad("line_width must be > 0");
        }
        Ok(())
    }

    /// Acquisition interval implied by the step and the turntable speed, s.
    pub fn seconds_per_frame(&self) -> f64 {
        self.step / ROTATION_RATE_DEG_PER_S
    }

    /// Orientation of frame 0 (target → camera).
    fn rest_rotation(&self) -> UnitQuaternion<f64> {
        // Target x → camera x, target y → camera z, target z → camera -y.
        let base = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        let base = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(base));
        let tilt = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.axis_tilt.to_radians());
        tilt * base
    }

    /// Turntable axis (pointing up) in the target frame. It does not move
    /// with the spin.
    pub fn vertical_axis(&self) -> Vector3<f64> {
        self.rest_rotation().inverse() * -Vector3::y()
    }

    /// Target-frame direction from the centroid towards the camera at frame 0.
    pub fn rest_view_direction(&self) -> Vector3<f64> {
        self.rest_rotation().inverse() * -Vector3::z()
    }

    /// Ground truth (target → camera) of frame `i`.
    ///
    /// Camera axes are x right, y down, z forward; the vertical rotation axis
    /// is camera -y. At rest the target long axis points up, tilted
    /// `axis_tilt` towards the camera about camera x; frame `i` adds
    /// `i·step` about the vertical.
    pub fn frame_pose(&self, i: usize) -> RigidTransform {
        let spin = UnitQuaternion::from_axis_angle(
            &-Vector3::y_axis(),
            (i as f64 * self.step).rem_euclid(360.0).to_radians(),
        );
        RigidTransform::new(
            spin * self.rest_rotation(),
            Vector3::new(0.0, 0.0, self.range),
        )
    }
}

#[derive(Debug, Clone)]
pub struct DatasetFrame {
    pub frame_index: usize,
    pub image: GrayImage,
    /// Target → camera.
    pub ground_truth: RigidTransform,
}

/// Per-frame noise stream derived from the dataset seed and frame index.
fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn render_frame(
    spec: &TrajectorySpec,
    model: &WireframeModel,
    cam: &CameraModel,
    seed: u64,
    i: usize,
) -> Result<DatasetFrame, SceneError> {
    let pose = spec.frame_pose(i);
    let mut image = render_edges(model, &pose, cam, spec.line_width)?;
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        let mut rng = frame_rng(seed, i);
        let noisy: Vec<f32> = image
            .pixels()
            .iter()
            .map(|&p| (p as f64 + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32)
            .collect();
        image = GrayImage::from_pixels(image.width(), image.height(), noisy).expect("clamped");
    }
    Ok(DatasetFrame {
        frame_index: i,
        image,
        ground_truth: pose,
    })
}

/// Renders every frame of the sequence. Frames are independent and rendered
/// in parallel; the output is in frame order.
pub fn generate_sequence(
    spec: &TrajectorySpec,
    model: &WireframeModel,
    cam: &CameraModel,
    seed: u64,
) -> Result<Vec<DatasetFrame>, SceneError> {
    spec.validate()?;
    (0..spec.frame_count)
        .into_par_iter()
        .map(|i| render_frame(spec, model, cam, seed, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_error;
    use crate::scene::build_cubesat_2u;

    #[test]
    fn first_frame_centroid_on_axis_at_range() {
        let spec = TrajectorySpec::default();
        let model = build_cubesat_2u();
        let pose = spec.frame_pose(0);
        let c = pose.apply(&model.centroid());
        assert!((c - Vector3::new(0.0, 0.0, 1630.0)).norm() < 1e-9);
        for i in [0, 17, 300] {
            assert!((spec.frame_pose(i).apply(&model.centroid()).z - spec.range).abs() < 1.0);
        }
    }

    #[test]
    fn long_axis_is_tilted_from_the_rotation_axis() {
        let spec = TrajectorySpec::default();
        for i in [0, 50, 200] {
            let axis = spec.frame_pose(i).rotation() * Vector3::z();
            let angle = axis.dot(&-Vector3::y()).acos().to_degrees();
            assert!((angle - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn timing_metadata() {
        assert!((TrajectorySpec::default().seconds_per_frame() - 0.56).abs() < 1e-12);
    }

    #[test]
    fn sequence_wraps_after_a_full_turn() {
        let spec = TrajectorySpec {
            step: 3.0,
            ..Default::default()
        };
        for i in 0..5 {
            let a = spec.frame_pose(i);
            let b = spec.frame_pose(i + 120);
            assert!(rotation_error(a.rotation(), b.rotation()) < 1e-9);
        }
    }

    #[test]
    fn every_frame_shows_the_target() {
        let spec = TrajectorySpec::default();
        let model = build_cubesat_2u();
        let cam = CameraModel::wide_fov_1080p();
        for i in 0..spec.frame_count {
            let pose = spec.frame_pose(i);
            let visible = model
                .vertices
                .iter()
                .filter_map(|v| cam.project_camera_point(&pose.apply(v)).ok())
                .any(|p| cam.contains(&p));
            assert!(visible, "frame {i}");
        }
    }

    #[test]
    fn noiseless_frames_are_reproducible_and_noise_is_seeded() {
        let spec = TrajectorySpec {
            frame_count: 2,
            ..Default::default()
        };
        let model = build_cubesat_2u();
        let cam = CameraModel::wide_fov_1080p();
        let a = render_frame(&spec, &model, &cam, 1, 1).unwrap();
        let b = render_frame(&spec, &model, &cam, 2, 1).unwrap();
        assert_eq!(a.image, b.image);
        let noisy = TrajectorySpec {
            noise_sigma: 0.05,
            ..spec
        };
        let c = render_frame(&noisy, &model, &cam, 1, 1).unwrap();
        let d = render_frame(&noisy, &model, &cam, 1, 1).unwrap();
        let e = render_frame(&noisy, &model, &cam, 2, 1).unwrap();
        assert_eq!(c.image, d.image);
        assert_ne!(c.image, e.image);
        assert!(TrajectorySpec { step: 0.0, ..spec }.validate().is_err());
    }
}
