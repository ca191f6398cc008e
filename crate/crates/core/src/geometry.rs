//! Rigid transforms, the pinhole + Brown-Conrady camera, and the two pose
//! error metrics.
//!
//! Lengths are millimetres and angles at the API boundary are degrees.

use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Minimum camera-frame depth accepted by [`project`], mm.
pub const MIN_DEPTH_MM: f64 = 1e-6;

const UNDISTORT_MAX_ITERATIONS: usize = 50;
const UNDISTORT_TOLERANCE: f64 = 1e-8;

/// Proper rigid motion `x -> R x + t`.
///
/// Serialized as `{"rotation": [qw, qx, qy, qz], "translation": [x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
            translation,
        }
    }

    /// `rotation` must be orthonormal with determinant +1.
    pub fn from_rotation_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Builds from a scalar-first quaternion; the quaternion is normalized.
    pub fn from_wxyz(q: [f64; 4], translation: [f64; 3]) -> Self {
        let quat = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
        Self::new(
            UnitQuaternion::new_normalize(quat),
            Vector3::from(translation),
        )
    }

    /// Rotation given as axis-angle vector (radians) and a translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::from_scaled_axis(axis_angle), translation)
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Scalar-first quaternion components.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.apply(&p.coords))
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(inv, -(inv * self.translation))
    }

    /// `self ∘ other`: maps `x` to `self(other(x))`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// `a ∘ b`; see [`RigidTransform::compose`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

#[derive(Serialize, Deserialize)]
struct RigidTransformRepr {
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RigidTransformRepr {
            rotation: self.wxyz(),
            translation: self.translation.into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = RigidTransformRepr::deserialize(d)?;
        Ok(RigidTransform::from_wxyz(repr.rotation, repr.translation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl From<Vector2<f64>> for PixelPoint {
    fn from(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }
}

/// Pinhole intrinsics with Brown-Conrady (k1, k2, p1, p2) distortion.
///
/// Pixel centres sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    /// Distortion-free camera.
    pub fn pinhole(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            k1: 0.0,
            k2: 0.0,
            p1: 0.0,
            p2: 0.0,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// 1920x1080 sensor with a 110° horizontal field of view and no
    /// distortion: `fx = fy = 960 / tan(55°) ≈ 672.2 px`.
    pub fn wide_fov_1080p() -> Self {
        let f = 960.0 / 55f64.to_radians().tan();
        Self::pinhole(f, f, 960.0, 540.0, 1920, 1080).expect("valid built-in intrinsics")
    }

    pub fn with_distortion(mut self, k1: f64, k2: f64, p1: f64, p2: f64) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self.p1 = p1;
        self.p2 = p2;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [
            self.fx, self.fy, self.cx, self.cy, self.k1, self.k2, self.p1, self.p2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidCamera("non-finite value".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidCamera(
                "focal lengths must be positive".into(),
            ));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(GeometryError::InvalidCamera(
                "principal point outside the sensor".into(),
            ));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0 || self.p1 != 0.0 || self.p2 != 0.0
    }

    /// Applies the distortion model to normalized image coordinates.
    pub fn distort_normalized(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        Vector2::new(
            x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x),
            y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y,
        )
    }

    /// Fixed-point inversion of [`Self::distort_normalized`].
    pub fn undistort_normalized(&self, pd: Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
        if !self.has_distortion() {
            return Ok(pd);
        }
        // Stop once the re-distortion residual is below a hundredth of a
        // micro-pixel equivalent, or the normalized tolerance, whichever is tighter.
        let tol = UNDISTORT_TOLERANCE.min(1e-8 / self.fx.max(self.fy));
        let mut p = pd;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let (x, y) = (p.x, p.y);
            let r2 = x * x + y * y;
            let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
            let dx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
            let dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
            if radial.abs() < 1e-12 || !radial.is_finite() {
                break;
            }
            p = Vector2::new((pd.x - dx) / radial, (pd.y - dy) / radial);
            let residual = (self.distort_normalized(p) - pd).norm();
            if residual < tol {
                return Ok(p);
            }
        }
        Err(GeometryError::NoConvergence {
            iterations: UNDISTORT_MAX_ITERATIONS,
        })
    }

    pub fn pixel_to_normalized(&self, p: PixelPoint) -> Vector2<f64> {
        Vector2::new((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy)
    }

    pub fn normalized_to_pixel(&self, n: Vector2<f64>) -> PixelPoint {
        PixelPoint::new(self.fx * n.x + self.cx, self.fy * n.y + self.cy)
    }

    /// Unit bearing vector of an undistorted pixel.
    pub fn bearing(&self, p: PixelPoint) -> Vector3<f64> {
        let n = self.pixel_to_normalized(p);
        Vector3::new(n.x, n.y, 1.0).normalize()
    }

    /// Ideal pinhole projection of a camera-frame point, ignoring distortion.
    pub fn project_pinhole(&self, pc: &Vector3<f64>) -> Result<PixelPoint, GeometryError> {
        if pc.z <= MIN_DEPTH_MM {
            return Err(GeometryError::PointBehindCamera { depth: pc.z });
        }
        Ok(self.normalized_to_pixel(Vector2::new(pc.x / pc.z, pc.y / pc.z)))
    }

    /// Full projection of a camera-frame point including distortion.
    pub fn project_camera_point(&self, pc: &Vector3<f64>) -> Result<PixelPoint, GeometryError> {
        if pc.z <= MIN_DEPTH_MM {
            return Err(GeometryError::PointBehindCamera { depth: pc.z });
        }
        let n = Vector2::new(pc.x / pc.z, pc.y / pc.z);
        Ok(self.normalized_to_pixel(self.distort_normalized(n)))
    }

    pub fn contains(&self, p: &PixelPoint) -> bool {
        p.u >= -0.5
            && p.v >= -0.5
            && p.u < self.width as f64 - 0.5
            && p.v < self.height as f64 - 0.5
    }
}

/// Projects a world point seen from `pose` (world → camera) to distorted pixels.
pub fn project(
    point: &Vector3<f64>,
    pose: &RigidTransform,
    cam: &CameraModel,
) -> Result<PixelPoint, GeometryError> {
    cam.project_camera_point(&pose.apply(point))
}

/// Maps a distorted pixel to the pixel an ideal pinhole camera would see.
pub fn undistort_pixel(p: PixelPoint, cam: &CameraModel) -> Result<PixelPoint, GeometryError> {
    if !cam.has_distortion() {
        return Ok(p);
    }
    let n = cam.undistort_normalized(cam.pixel_to_normalized(p))?;
    Ok(cam.normalized_to_pixel(n))
}

/// Maps an ideal pinhole pixel to where the distorted camera images it.
pub fn distort_pixel(p: PixelPoint, cam: &CameraModel) -> PixelPoint {
    cam.normalized_to_pixel(cam.distort_normalized(cam.pixel_to_normalized(p)))
}

/// Position error, mm.
pub fn translation_error(p: &Vector3<f64>, p_star: &Vector3<f64>) -> f64 {
    (p - p_star).norm()
}

/// Geodesic angle between two rotations, degrees.
///
/// The cosine is `(Tr(Rᵀ R*) - 1) / 2`, clamped to [-1, 1]. The angle is
/// recovered with `atan2` against the sine taken from the antisymmetric part
/// of `Rᵀ R*`, which keeps full precision near 0° and 180°.
pub fn rotation_error(r: &UnitQuaternion<f64>, r_star: &UnitQuaternion<f64>) -> f64 {
    let m =
        r.to_rotation_matrix().into_inner().transpose() * r_star.to_rotation_matrix().into_inner();
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5
        * Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        )
        .norm();
    sin.atan2(cos).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// Translation error, mm.
    pub e_t: f64,
    /// Rotation error, degrees.
    pub e_theta: f64,
}

impl PoseError {
    pub fn between(estimate: &RigidTransform, truth: &RigidTransform) -> Self {
        Self {
            e_t: translation_error(estimate.translation(), truth.translation()),
            e_theta: rotation_error(estimate.rotation(), truth.rotation()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_turn_matrices_convert_exactly() {
        for axis in [
            Vector3::x(),
            Vector3::y(),
            Vector3::z(),
            Vector3::new(1.0, -2.0, 0.5).normalize(),
        ] {
            let q = UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                std::f64::consts::PI,
            );
            let m = q.to_rotation_matrix().into_inner();
            let t = RigidTransform::from_rotation_matrix(&m, Vector3::zeros());
            assert!((t.rotation_matrix() - m).norm() < 1e-12);
        }
    }

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let q = nalgebra::Quaternion::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        );
        RigidTransform::new(
            UnitQuaternion::new_normalize(q),
            Vector3::new(
                rng.random_range(-500.0..500.0),
                rng.random_range(-500.0..500.0),
                rng.random_range(-500.0..500.0),
            ),
        )
    }

    #[test]
    fn on_axis_point_hits_principal_point() {
        let cam = CameraModel::pinhole(500.0, 500.0, 960.0, 540.0, 1920, 1080).unwrap();
        let p = project(
            &Vector3::new(0.0, 0.0, 1630.0),
            &RigidTransform::identity(),
            &cam,
        )
        .unwrap();
        assert_eq!(p, PixelPoint::new(960.0, 540.0));
    }

    #[test]
    fn field_of_view_edge_maps_to_sensor_edge() {
        let cam = CameraModel::wide_fov_1080p();
        assert_relative_eq!(cam.fx, 672.2, epsilon = 0.05);
        let x = 1630.0 * 55f64.to_radians().tan();
        let p = project(
            &Vector3::new(x, 0.0, 1630.0),
            &RigidTransform::identity(),
            &cam,
        )
        .unwrap();
        assert_relative_eq!(p.u, 1920.0, epsilon = 1e-9);
        assert_relative_eq!(p.v, 540.0, epsilon = 1e-9);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let cam = CameraModel::wide_fov_1080p();
        let err = project(
            &Vector3::new(0.0, 0.0, -5.0),
            &RigidTransform::identity(),
            &cam,
        );
        assert!(matches!(err, Err(GeometryError::PointBehindCamera { .. })));
        let err = project(
            &Vector3::new(0.0, 0.0, 1e-7),
            &RigidTransform::identity(),
            &cam,
        );
        assert!(matches!(err, Err(GeometryError::PointBehindCamera { .. })));
    }

    #[test]
    fn distortion_round_trip_on_grid() {
        let cam = CameraModel::wide_fov_1080p().with_distortion(-0.1, 0.01, 0.0, 0.0);
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                let n = Vector2::new(-0.9 + 0.2 * i as f64, -0.5 + 0.11 * j as f64);
                let back = cam.undistort_normalized(cam.distort_normalized(n)).unwrap();
                worst = worst.max((back - n).norm());
            }
        }
        assert!(worst < 1e-6, "worst round trip error {worst}");
    }

    #[test]
    fn undistort_zero_coefficients_is_identity() {
        let cam = CameraModel::wide_fov_1080p();
        let p = undistort_pixel(PixelPoint::new(100.0, 200.0), &cam).unwrap();
        assert_eq!(p, PixelPoint::new(100.0, 200.0));
    }

    #[test]
    fn undistort_recovers_forward_distorted_pixel() {
        let cam = CameraModel::wide_fov_1080p().with_distortion(-0.1, 0.0, 0.0, 0.0);
        let truth = PixelPoint::new(500.0, 300.0);
        let distorted = distort_pixel(truth, &cam);
        assert!(distorted.distance(&truth) > 1.0);
        let back = undistort_pixel(distorted, &cam).unwrap();
        assert!(back.distance(&truth) < 1e-6);
        // residual re-distortion error in pixels
        assert!(distort_pixel(back, &cam).distance(&distorted) < 1e-6);
    }

    #[test]
    fn principal_point_is_fixed_under_distortion() {
        let cam = CameraModel::wide_fov_1080p().with_distortion(0.3, -0.2, 0.01, -0.02);
        let pp = PixelPoint::new(cam.cx, cam.cy);
        assert_eq!(undistort_pixel(pp, &cam).unwrap(), pp);
    }

    #[test]
    fn undistort_reports_non_convergence() {
        // Radial factor crosses zero inside 2x the sensor: the fixed point diverges.
        let cam = CameraModel::wide_fov_1080p().with_distortion(-0.9, 0.0, 0.0, 0.0);
        let p = PixelPoint::new(3500.0, 1900.0);
        assert!(matches!(
            undistort_pixel(p, &cam),
            Err(GeometryError::NoConvergence { iterations: 50 })
        ));
    }

    #[test]
    fn compose_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let t = random_transform(&mut rng);
            let same = t.compose(&RigidTransform::identity());
            assert!(rotation_error(same.rotation(), t.rotation()) < 1e-9);
            assert!(translation_error(same.translation(), t.translation()) < 1e-9);
            let id = t.compose(&t.inverse());
            assert!(rotation_error(id.rotation(), &UnitQuaternion::identity()) < 1e-9);
            assert!(id.translation().norm() < 1e-9);
            assert!((t.rotation().quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_transform(&mut rng);
            let b = random_transform(&mut rng);
            let expected = a.to_homogeneous() * b.to_homogeneous();
            let got = a.compose(&b).to_homogeneous();
            assert!((expected - got).amax() < 1e-9);
        }
    }

    #[test]
    fn translation_error_examples() {
        let zero = Vector3::zeros();
        assert_eq!(translation_error(&zero, &zero), 0.0);
        assert_relative_eq!(
            translation_error(&Vector3::new(10.0, 20.0, 20.0), &zero),
            30.0,
            epsilon = 1e-12
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let b: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let oracle =
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            assert_relative_eq!(
                translation_error(&Vector3::from(a), &Vector3::from(b)),
                oracle,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rotation_error_examples() {
        let id = UnitQuaternion::identity();
        assert_eq!(rotation_error(&id, &id), 0.0);
        let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 10f64.to_radians());
        assert_relative_eq!(rotation_error(&r, &id), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_error_matches_quaternion_geodesic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = *random_transform(&mut rng).rotation();
            let b = *random_transform(&mut rng).rotation();
            let oracle = 2.0 * a.quaternion().dot(b.quaternion()).abs().min(1.0).acos();
            assert!((rotation_error(&a, &b) - oracle.to_degrees()).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_error_never_nan_at_trace_limit() {
        // Product of many rotations accumulates rounding, pushing the trace above 3.
        let mut q = UnitQuaternion::identity();
        let step = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 1e-9);
        for _ in 0..1000 {
            q = step * q * step.inverse();
        }
        let e = rotation_error(&q, &UnitQuaternion::identity());
        assert!(e.is_finite() && e >= 0.0);
        let flipped = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI);
        let e = rotation_error(&flipped, &UnitQuaternion::identity());
        assert!((e - 180.0).abs() < 1e-9);
    }

    #[test]
    fn intrinsics_json_round_trip() {
        let cam = CameraModel::wide_fov_1080p().with_distortion(-0.1, 0.01, 0.001, 0.002);
        let json = serde_json::to_string(&cam).unwrap();
        for key in [
            "fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2", "width", "height",
        ] {
            assert!(json.contains(&format!("\"{key}\"")), "missing {key}");
        }
        let back: CameraModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cam);
    }

    #[test]
    fn invalid_intrinsics_are_rejected() {
        assert!(CameraModel::pinhole(-1.0, 1.0, 10.0, 10.0, 20, 20).is_err());
        assert!(CameraModel::pinhole(1.0, 1.0, 20.0, 10.0, 20, 20).is_err());
    }

    proptest! {
        #[test]
        fn rotation_error_is_symmetric_and_bounded(
            a in prop::array::uniform4(-1.0f64..1.0),
            b in prop::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let qa = UnitQuaternion::new_normalize(nalgebra::Quaternion::new(a[0], a[1], a[2], a[3]));
            let qb = UnitQuaternion::new_normalize(nalgebra::Quaternion::new(b[0], b[1], b[2], b[3]));
            let ab = rotation_error(&qa, &qb);
            let ba = rotation_error(&qb, &qa);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&ab));
            // equal up to quaternion sign
            let neg = UnitQuaternion::new_unchecked(-qa.into_inner());
            prop_assert!(rotation_error(&qa, &neg) < 1e-6);
        }

        #[test]
        fn projection_is_consistent_with_composition(
            seed in 0u64..10_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cam = CameraModel::wide_fov_1080p().with_distortion(-0.05, 0.01, 0.001, 0.0);
            let a = RigidTransform::from_axis_angle(
                Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-3.0..3.0)),
                Vector3::new(0.0, 0.0, 1500.0),
            );
            let b = random_transform(&mut rng);
            let x = Vector3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            let direct = project(&x, &a.compose(&b), &cam);
            let staged = project(&b.apply(&x), &a, &cam);
            match (direct, staged) {
                (Ok(p), Ok(q)) => prop_assert!(p.distance(&q) < 1e-9),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "projection validity differs"),
            }
        }
    }
}
