use nalgebra::{Matrix2x6, Matrix3, Matrix6, UnitQuaternion, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::Correspondence2D3D;
use crate::error::PnpError;
use crate::geometry::{CameraModel, RigidTransform, MIN_DEPTH_MM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

/// Record of one refinement run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmTrace {
    pub pose: RigidTransform,
    pub rms: f64,
    /// Sum of squared residuals: the initial value, then one entry per
    /// accepted step.
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub rejected_behind_camera: usize,
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Left-multiplicative update: `R ← exp(ω)·R`, `t ← t + v`, with the
/// increment ordered `(ω, v)`.
pub fn apply_increment(pose: &RigidTransform, delta: &Vector6<f64>) -> RigidTransform {
    let w = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    RigidTransform::new(
        UnitQuaternion::from_scaled_axis(w) * pose.rotation(),
        pose.translation() + v,
    )
}

/// Residual `π(R·X + t) − x` of one correspondence and its Jacobian with
/// respect to the increment of [`apply_increment`]. `None` when the point is
/// not in front of the camera.
pub fn reprojection_jacobian(
    pose: &RigidTransform,
    c: &Correspondence2D3D,
    cam: &CameraModel,
) -> Option<(Vector2<f64>, Matrix2x6<f64>)> {
    let rx = pose.rotation() * c.model_point;
    let p = rx + pose.translation();
    if p.z <= MIN_DEPTH_MM {
        return None;
    }
    let iz = 1.0 / p.z;
    let r = Vector2::new(
        cam.fx * p.x * iz + cam.cx - c.pixel.u,
        cam.fy * p.y * iz + cam.cy - c.pixel.v,
    );
    let dpi = nalgebra::Matrix2x3::new(
        cam.fx * iz,
        0.0,
        -cam.fx * p.x * iz * iz,
        0.0,
        cam.fy * iz,
        -cam.fy * p.y * iz * iz,
    );
    let mut dp = nalgebra::Matrix3x6::zeros();
    dp.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&rx)));
    dp.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&Matrix3::identity());
    Some((r, dpi * dp))
}

fn cost(pose: &RigidTransform, corrs: &[Correspondence2D3D], cam: &CameraModel) -> Option<f64> {
    let mut total = 0.0;
    for c in corrs {
        let p = pose.apply(&c.model_point);
        if p.z <= MIN_DEPTH_MM {
            return None;
        }
        let u = cam.fx * p.x / p.z + cam.cx - c.pixel.u;
        let v = cam.fy * p.y / p.z + cam.cy - c.pixel.v;
        total += u * u + v * v;
    }
    Some(total)
}

/// Levenberg-Marquardt on the stacked pixel residuals, returning the full
/// iteration record.
///
/// Damping is Marquardt's (`λ·diag(JᵀJ)`), starting at
/// `opts.initial_lambda`, divided by 10 on an accepted step and multiplied by
/// 10 on a rejected one. A candidate that puts any point at or behind the
/// camera is rejected like a cost increase.
pub fn refine_lm_traced(
    initial: &RigidTransform,
    inliers: &[Correspondence2D3D],
    cam: &CameraModel,
    opts: &LmOptions,
) -> Result<LmTrace, PnpError> {
    if inliers.len() < 4 {
        return Err(PnpError::TooFewCorrespondences {
            required: 4,
            actual: inliers.len(),
        });
    }
    let mut pose = initial.clone();
    let mut current = cost(&pose, inliers, cam).ok_or(PnpError::DivergedBehindCamera)?;
    let mut costs = vec![current];
    let mut lambda = opts.initial_lambda;
    let mut behind = 0;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut jtj = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for c in inliers {
            let (r, j) =
                reprojection_jacobian(&pose, c, cam).ok_or(PnpError::DivergedBehindCamera)?;
            jtj += j.transpose() * j;
            g += j.transpose() * r;
        }
        if g.amax() < opts.gradient_tolerance {
            break;
        }
        let mut a = jtj;
        for i in 0..6 {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let Some(delta) = a.cholesky().map(|ch| ch.solve(&(-g))) else {
            lambda *= 10.0;
            continue;
        };
        if delta.norm() < opts.step_tolerance {
            break;
        }
        let candidate = apply_increment(&pose, &delta);
        match cost(&candidate, inliers, cam) {
            Some(c) if c < current => {
                pose = candidate;
                current = c;
                costs.push(c);
                lambda = (lambda / 10.0).max(1e-15);
            }
            Some(_) => lambda *= 10.0,
            None => {
                behind += 1;
                lambda *= 10.0;
            }
        }
        if lambda > 1e16 {
            break;
        }
    }
    if costs.len() == 1 && behind > 0 && behind == iterations {
        return Err(PnpError::DivergedBehindCamera);
    }
    Ok(LmTrace {
        rms: (current / inliers.len() as f64).sqrt(),
        pose,
        costs,
        iterations,
        rejected_behind_camera: behind,
    })
}

/// Refined pose and RMS reprojection error over `inliers`, px.
pub fn refine_lm(
    initial: &RigidTransform,
    inliers: &[Correspondence2D3D],
    cam: &CameraModel,
    opts: &LmOptions,
) -> Result<(RigidTransform, f64), PnpError> {
    refine_lm_traced(initial, inliers, cam, opts).map(|t| (t.pose, t.rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_error;
    use crate::pnp::testutil::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn perturb(pose: &RigidTransform, rng: &mut impl Rng, deg: f64, mm: f64) -> RigidTransform {
        let axis = Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        )
        .normalize();
        let dir = Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        )
        .normalize();
        RigidTransform::new(
            UnitQuaternion::from_scaled_axis(axis * deg.to_radians()) * pose.rotation(),
            pose.translation() + dir * mm,
        )
    }

    #[test]
    fn ground_truth_start_is_a_fixed_point() {
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pose = random_pose(&mut rng);
        let corr = project_all(&pose, &random_points(&mut rng, 12), &cam);
        let (out, rms) = refine_lm(&pose, &corr, &cam, &LmOptions::default()).unwrap();
        assert!(rms < 1e-9);
        assert!(rotation_error(out.rotation(), pose.rotation()) < 1e-9);
        assert!((out.translation() - pose.translation()).norm() < 1e-6);
    }

    #[test]
    fn perturbed_start_converges_to_truth() {
        let cam = camera();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pose = random_pose(&mut rng);
            let corr = project_all(&pose, &random_points(&mut rng, 12), &cam);
            let start = perturb(&pose, &mut rng, 5.0, 50.0);
            let trace = refine_lm_traced(&start, &corr, &cam, &LmOptions::default()).unwrap();
            assert!(trace.costs.windows(2).all(|w| w[1] <= w[0]));
            assert!(rotation_error(trace.pose.rotation(), pose.rotation()) < 1e-6);
            assert!((trace.pose.translation() - pose.translation()).norm() < 1e-4);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let p = random_points(&mut rng, 1)[0];
            let mut c = project_all(&pose, &[p], &cam)[0];
            c.pixel.u += rng.random_range(-5.0..5.0);
            let (_, j) = reprojection_jacobian(&pose, &c, &cam).unwrap();
            for k in 0..6 {
                let h = if k < 3 { 1e-6 } else { 1e-4 };
                let mut d = Vector6::zeros();
                d[k] = h;
                let (rp, _) = reprojection_jacobian(&apply_increment(&pose, &d), &c, &cam).unwrap();
                d[k] = -h;
                let (rm, _) = reprojection_jacobian(&apply_increment(&pose, &d), &c, &cam).unwrap();
                let fd = (rp - rm) / (2.0 * h);
                let an = j.column(k);
                let scale = an.norm().max(fd.norm()).max(1e-6);
                assert!((fd - an).norm() / scale < 1e-5, "column {k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn noisy_refinement_statistics() {
        let cam = camera();
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rms_values = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let pose = random_pose(&mut rng);
            let mut corr = project_all(&pose, &random_points(&mut rng, 30), &cam);
            for c in &mut corr {
                c.pixel.u += noise.sample(&mut rng);
                c.pixel.v += noise.sample(&mut rng);
            }
            let start = perturb(&pose, &mut rng, 5.0, 50.0);
            let (out, rms) = refine_lm(&start, &corr, &cam, &LmOptions::default()).unwrap();
            rms_values.push(rms);
            assert!(
                rotation_error(out.rotation(), pose.rotation())
                    < rotation_error(start.rotation(), pose.rotation())
            );
            assert!(
                (out.translation() - pose.translation()).norm()
                    < (start.translation() - pose.translation()).norm()
            );
        }
        // Per-point RMS of a 2-D residual with σ = 0.5 px per axis is about 0.67 px.
        let mean = rms_values.iter().sum::<f64>() / rms_values.len() as f64;
        assert!((0.3..=0.8).contains(&mean), "mean rms {mean}");
        let inside = rms_values
            .iter()
            .filter(|r| (0.3..=0.8).contains(*r))
            .count();
        assert!(inside >= 95, "{inside}/100 trials inside [0.3, 0.8]");
    }

    #[test]
    fn start_behind_camera_is_an_error() {
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pose = random_pose(&mut rng);
        let corr = project_all(&pose, &random_points(&mut rng, 6), &cam);
        let flipped = RigidTransform::new(*pose.rotation(), -pose.translation());
        assert_eq!(
            refine_lm(&flipped, &corr, &cam, &LmOptions::default()),
            Err(PnpError::DivergedBehindCamera)
        );
    }
}
