//! Perspective-three-point by Grunert elimination.
//!
//! With depths `s1, s2 = u·s1, s3 = v·s1` along the unit bearings, the three
//! law-of-cosines constraints reduce to `u` rational in `v` and a quartic in
//! `v`. Real roots are polished with Newton on the depth equations and the
//! pose follows from absolute orientation between model and camera points.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::Correspondence2D3D;
use crate::error::PnpError;
use crate::geometry::{rotation_error, CameraModel, RigidTransform};

/// Triangles smaller than this (mm²) are treated as collinear.
const MIN_TRIANGLE_AREA: f64 = 1e-6;
/// Acceptance bound on the reprojection of the three input points, px.
const MAX_SELF_REPROJECTION: f64 = 1e-6;

/// Low-to-high coefficient polynomial product.
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64], scale_b: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += scale_b * y;
    }
    out
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Real roots of a polynomial (low-to-high coefficients) via the companion
/// matrix, each polished by a few Newton steps.
pub(crate) fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut p: Vec<f64> = coeffs.iter().map(|c| c / scale).collect();
    while p.len() > 1 && p.last().unwrap().abs() < 1e-14 {
        p.pop();
    }
    let deg = p.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 0..deg {
        comp[(0, i)] = -p[deg - 1 - i] / lead;
        if i + 1 < deg {
            comp[(i + 1, i)] = 1.0;
        }
    }
    let dp: Vec<f64> = (1..=deg).map(|i| i as f64 * p[i]).collect();
    let mut roots = Vec::new();
    for z in comp.complex_eigenvalues().iter() {
        if z.im.abs() > 1e-6 * (1.0 + z.re.abs()) {
            continue;
        }
        let mut x = z.re;
        for _ in 0..8 {
            let d = poly_eval(&dp, x);
            if d == 0.0 {
                break;
            }
            let step = poly_eval(&p, x) / d;
            x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        roots.push(x);
    }
    roots
}

/// Rotation and translation with `cam_pts[i] ≈ R·model_pts[i] + t` in the
/// least-squares sense (Kabsch with reflection guard).
pub(crate) fn absolute_orientation(
    model_pts: &[Vector3<f64>],
    cam_pts: &[Vector3<f64>],
) -> RigidTransform {
    let n = model_pts.len() as f64;
    let mc = model_pts.iter().sum::<Vector3<f64>>() / n;
    let cc = cam_pts.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (m, c) in model_pts.iter().zip(cam_pts) {
        h += (m - mc) * (c - cc).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    RigidTransform::from_rotation_matrix(&r, cc - r * mc)
}

/// Newton on the three law-of-cosines equations in the depths.
fn polish_depths(s: &mut Vector3<f64>, cos: &Vector3<f64>, d2: &Vector3<f64>) {
    let (ca, cb, cg) = (cos[0], cos[1], cos[2]);
    for _ in 0..5 {
        let (s1, s2, s3) = (s[0], s[1], s[2]);
        let f = Vector3::new(
            s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - d2[0],
            s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - d2[1],
            s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - d2[2],
        );
        let j = Matrix3::new(
            0.0,
            2.0 * s2 - 2.0 * s3 * ca,
            2.0 * s3 - 2.0 * s2 * ca,
            2.0 * s1 - 2.0 * s3 * cb,
            0.0,
            2.0 * s3 - 2.0 * s1 * cb,
            2.0 * s1 - 2.0 * s2 * cg,
            2.0 * s2 - 2.0 * s1 * cg,
            0.0,
        );
        let Some(step) = j.lu().solve(&f) else { return };
        *s -= step;
        if step.norm() < 1e-14 * s.norm() {
            return;
        }
    }
}

/// All real P3P solutions (target → camera) for three undistorted pixels.
pub fn p3p(
    c: &[Correspondence2D3D; 3],
    cam: &CameraModel,
) -> Result<Vec<RigidTransform>, PnpError> {
    let x = [c[0].model_point, c[1].model_point, c[2].model_point];
    if 0.5 * (x[1] - x[0]).cross(&(x[2] - x[0])).norm() <= MIN_TRIANGLE_AREA {
        return Err(PnpError::DegenerateConfiguration);
    }
    let f = [
        cam.bearing(c[0].pixel),
        cam.bearing(c[1].pixel),
        cam.bearing(c[2].pixel),
    ];
    // Side lengths opposite each point and cosines of the bearing angles.
    let a2 = (x[1] - x[2]).norm_squared();
    let b2 = (x[0] - x[2]).norm_squared();
    let c2 = (x[0] - x[1]).norm_squared();
    let (ca, cb, cg) = (f[1].dot(&f[2]), f[0].dot(&f[2]), f[0].dot(&f[1]));
    let k = (a2 - c2) / b2;

    let num = [1.0 + k, -2.0 * k * cb, k - 1.0];
    let den = [2.0 * cg, -2.0 * ca];
    let q = [1.0, -2.0 * cb, 1.0];
    let den2 = poly_mul(&den, &den);
    let quartic = poly_add(
        &poly_add(
            &poly_add(&den2, &poly_mul(&num, &num), 1.0),
            &poly_mul(&num, &den),
            -2.0 * cg,
        ),
        &poly_mul(&q, &den2),
        -c2 / b2,
    );

    let cos = Vector3::new(ca, cb, cg);
    let d2 = Vector3::new(a2, b2, c2);
    let mut out: Vec<RigidTransform> = Vec::new();
    for v in real_roots(&quartic) {
        let dv = poly_eval(&den, v);
        let qv = poly_eval(&q, v);
        if dv.abs() < 1e-12 || qv <= 0.0 {
            continue;
        }
        let u = poly_eval(&num, v) / dv;
        let s1 = (b2 / qv).sqrt();
        let mut s = Vector3::new(s1, u * s1, v * s1);
        if s.iter().any(|&d| d <= 0.0) {
            continue;
        }
        polish_depths(&mut s, &cos, &d2);
        if s.iter().any(|&d| !(d > 0.0)) {
            continue;
        }
        let cam_pts = [f[0] * s[0], f[1] * s[1], f[2] * s[2]];
        let pose = absolute_orientation(&x, &cam_pts);
        let consistent = c.iter().all(|k| {
            cam.project_pinhole(&pose.apply(&k.model_point))
                .map(|p| p.distance(&k.pixel) < MAX_SELF_REPROJECTION)
                .unwrap_or(false)
        });
        let duplicate = out.iter().any(|o| {
            rotation_error(o.rotation(), pose.rotation()) < 1e-9
                && (o.translation() - pose.translation()).norm() < 1e-6
        });
        if consistent && !duplicate {
            out.push(pose);
        }
    }
    if out.is_empty() {
        return Err(PnpError::NoRealSolution);
    }
    Ok(out)
}
