//! Fixtures shared by the benchmarks.

use nalgebra::{UnitQuaternion, Vector3};
use poseinit_core::scene::{build_cubesat_2u, render_frame, TrajectorySpec};
use poseinit_core::{
    CameraModel, Correspondence2D3D, GrayImage, PixelPoint, RigidTransform, WireframeModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn camera() -> CameraModel {
    CameraModel::wide_fov_1080p()
}

/// `inliers` exact projections of random points plus `outliers` random
/// pixels, with the pose that generated them.
pub fn correspondences(
    seed: u64,
    inliers: usize,
    outliers: usize,
) -> (RigidTransform, Vec<Correspondence2D3D>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = camera();
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let pose = RigidTransform::new(
        UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(0.0..3.0)),
        Vector3::new(0.0, 0.0, rng.random_range(1200.0..2500.0)),
    );
    let mut point = || {
        Vector3::new(
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
        )
    };
    let mut c: Vec<Correspondence2D3D> = (0..inliers)
        .map(|_| {
            let p = point();
            Correspondence2D3D::new(cam.project_pinhole(&pose.apply(&p)).unwrap(), p)
        })
        .collect();
    for k in 0..outliers {
        let px = PixelPoint::new((k * 389 % 1920) as f64, (k * 211 % 1080) as f64);
        c.push(Correspondence2D3D::new(px, point()));
    }
    (pose, c)
}

/// One noiseless turntable frame and the model that produced it.
pub fn frame(index: usize) -> (GrayImage, WireframeModel) {
    let model = build_cubesat_2u();
    let spec = TrajectorySpec {
        step: 3.0,
        frame_count: 120,
        ..Default::default()
    };
    let f =
        render_frame(&spec, &model, &camera(), 0, index).expect("trajectory frames are in view");
    (f.image, model)
}
