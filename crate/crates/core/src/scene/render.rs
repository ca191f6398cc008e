//! Per-pixel ray casting of the wireframe model.
//!
//! Body faces are intersected exactly; antennas are thick segments of a given
//! image-space width. Line distances are measured in ideal pinhole pixels, so
//! lens distortion bends projected edges the way a real lens would.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::geometry::{CameraModel, PixelPoint, RigidTransform};
use crate::image::GrayImage;
use crate::model::WireframeModel;

/// Closest depth at which geometry is considered, mm.
const NEAR_PLANE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    /// Drawn width of edges and antennas, px.
    pub line_width: f64,
    pub background: f32,
    pub body: f32,
    pub edge: f32,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            line_width: 2.0,
            background: 0.35,
            body: 0.75,
            edge: 0.05,
        }
    }
}

/// Target-frame surface point seen through each pixel of a rectangular window.
#[derive(Debug, Clone)]
pub struct AnchorMap {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    points: Vec<Option<Vector3<f64>>>,
}

impl AnchorMap {
    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.width || y >= self.y0 + self.height {
            return None;
        }
        self.points[(y - self.y0) * self.width + (x - self.x0)]
    }

    /// Anchored pixel nearest to `p` within a Chebyshev radius.
    pub fn nearest(&self, p: PixelPoint, radius: isize) -> Option<(PixelPoint, Vector3<f64>)> {
        let (cx, cy) = (p.u.round() as isize, p.v.round() as isize);
        let mut best: Option<(f64, PixelPoint, Vector3<f64>)> = None;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || y < 0 {
                    continue;
                }
                if let Some(a) = self.get(x as usize, y as usize) {
                    let q = PixelPoint::new(x as f64, y as f64);
                    let d = q.distance(&p);
                    if best.as_ref().is_none_or(|b| d < b.0) {
                        best = Some((d, q, a));
                    }
                }
            }
        }
        best.map(|(_, q, a)| (q, a))
    }

    pub fn count(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }
}

struct Triangle {
    a: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

struct Segment3 {
    a: Vector3<f64>,
    b: Vector3<f64>,
    /// Pinhole projections of the (near-clipped) endpoints.
    pa: Vector2<f64>,
    pb: Vector2<f64>,
}

impl Segment3 {
    fn clipped(a: Vector3<f64>, b: Vector3<f64>, cam: &CameraModel) -> Option<Self> {
        let (a, b) = match (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE) {
            (true, true) => (a, b),
            (false, false) => return None,
            (true, false) => (a, a + (b - a) * ((a.z - NEAR_PLANE) / (a.z - b.z))),
            (false, true) => (b + (a - b) * ((b.z - NEAR_PLANE) / (b.z - a.z)), b),
        };
        let proj = |p: Vector3<f64>| {
            Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy)
        };
        Some(Self {
            pa: proj(a),
            pb: proj(b),
            a,
            b,
        })
    }

    /// Image distance from ideal pixel `q` to the projected segment, and the
    /// segment parameter of the nearest projected point.
    fn image_distance(&self, q: &Vector2<f64>) -> (f64, f64) {
        let ab = self.pb - self.pa;
        let len2 = ab.norm_squared();
        let s = if len2 > 0.0 {
            ((q - self.pa).dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((self.pa + ab * s - q).norm(), s)
    }

    /// Camera-frame point on the segment nearest to the ray through `dir`.
    fn point_near_ray(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        let u = self.b - self.a;
        let d = dir.normalize();
        // Minimize |a + s·u - t·d| over s ∈ [0, 1].
        let a = self.a;
        let uu = u.dot(&u);
        let ud = u.dot(&d);
        let ad = a.dot(&d);
        let au = a.dot(&u);
        let denom = uu - ud * ud;
        let s = if denom.abs() > 1e-12 {
            ((ud * ad - au) / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        a + u * s
    }
}

/// Result of casting one pixel ray.
#[derive(Debug, Clone, Copy)]
pub struct PixelHit {
    /// Nearest body intersection (camera frame).
    pub body: Option<Vector3<f64>>,
    /// Nearest visible antenna point within half the line width (camera frame).
    pub antenna: Option<Vector3<f64>>,
    /// Coverage in [0, 1] of the nearest visible edge or antenna line.
    pub line_coverage: f32,
}

/// Model transformed into the camera frame, ready for per-pixel queries.
pub struct SceneView<'a> {
    cam: &'a CameraModel,
    pose: RigidTransform,
    triangles: Vec<Triangle>,
    edges: Vec<Segment3>,
    antennas: Vec<Segment3>,
    line_width: f64,
    window: (usize, usize, usize, usize),
}

impl<'a> SceneView<'a> {
    pub fn new(
        model: &WireframeModel,
        pose: &RigidTransform,
        cam: &'a CameraModel,
        line_width: f64,
    ) -> Result<Self, SceneError> {
        let cv: Vec<Vector3<f64>> = model.vertices.iter().map(|v| pose.apply(v)).collect();
        let triangles = model
            .faces
            .iter()
            .map(|f| Triangle {
                a: cv[f[0]],
                e1: cv[f[1]] - cv[f[0]],
                e2: cv[f[2]] - cv[f[0]],
            })
            .collect();
        let antenna_ids = model.antenna_edges();
        let visible = visible_edges(model, pose);
        let edges = visible
            .iter()
            .filter(|e| !antenna_ids.contains(e))
            .filter_map(|&e| Segment3::clipped(cv[model.edges[e][0]], cv[model.edges[e][1]], cam))
            .collect();
        let antennas = if line_width > 0.0 {
            antenna_ids
                .iter()
                .filter_map(|&e| {
                    Segment3::clipped(cv[model.edges[e][0]], cv[model.edges[e][1]], cam)
                })
                .collect()
        } else {
            Vec::new()
        };

        let in_front: Vec<&Vector3<f64>> = cv.iter().filter(|p| p.z >= NEAR_PLANE).collect();
        if in_front.is_empty() {
            return Err(SceneError::OutOfFrame);
        }
        let window = if in_front.len() < cv.len() || cam.has_distortion() {
            (0, 0, cam.width, cam.height)
        } else {
            let pad = line_width.ceil() + 2.0;
            let (mut lo, mut hi) = (
                Vector2::repeat(f64::INFINITY),
                Vector2::repeat(f64::NEG_INFINITY),
            );
            for p in &in_front {
                let q = Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
                lo = lo.inf(&q);
                hi = hi.sup(&q);
            }
            let x0 = (lo.x - pad).floor().max(0.0);
            let y0 = (lo.y - pad).floor().max(0.0);
            let x1 = (hi.x + pad).ceil().min(cam.width as f64);
            let y1 = (hi.y + pad).ceil().min(cam.height as f64);
            if x0 >= x1 || y0 >= y1 {
                return Err(SceneError::OutOfFrame);
            }
            (x0 as usize, y0 as usize, x1 as usize, y1 as usize)
        };
        Ok(Self {
            cam,
            pose: pose.clone(),
            triangles,
            edges,
            antennas,
            line_width,
            window,
        })
    }

    /// Inclusive-exclusive pixel window that can contain geometry.
    pub fn window(&self) -> (usize, usize, usize, usize) {
        self.window
    }

    /// Ray direction (camera frame, z = 1) and ideal pinhole position of a
    /// sensor pixel.
    fn ray(&self, p: PixelPoint) -> Option<(Vector3<f64>, Vector2<f64>)> {
        let n = self.cam.pixel_to_normalized(p);
        let n = if self.cam.has_distortion() {
            self.cam.undistort_normalized(n).ok()?
        } else {
            n
        };
        let ideal = Vector2::new(
            self.cam.fx * n.x + self.cam.cx,
            self.cam.fy * n.y + self.cam.cy,
        );
        Some((Vector3::new(n.x, n.y, 1.0), ideal))
    }

    fn body_hit(&self, d: &Vector3<f64>) -> Option<Vector3<f64>> {
        let mut best: Option<f64> = None;
        for t in &self.triangles {
            // Möller-Trumbore with the ray origin at the camera centre.
            let p = d.cross(&t.e2);
            let det = t.e1.dot(&p);
            if det.abs() < 1e-12 {
                continue;
            }
            let inv = 1.0 / det;
            let s = -t.a;
            let u = s.dot(&p) * inv;
            if !(-1e-9..=1.0 + 1e-9).contains(&u) {
                continue;
            }
            let q = s.cross(&t.e1);
            let v = d.dot(&q) * inv;
            if v < -1e-9 || u + v > 1.0 + 1e-9 {
                continue;
            }
            let depth = t.e2.dot(&q) * inv;
            if depth >= NEAR_PLANE && best.is_none_or(|b| depth < b) {
                best = Some(depth);
            }
        }
        best.map(|z| d * z)
    }

    /// Casts the ray through a sensor pixel.
    pub fn cast(&self, p: PixelPoint) -> PixelHit {
        let Some((d, ideal)) = self.ray(p) else {
            return PixelHit {
                body: None,
                antenna: None,
                line_coverage: 0.0,
            };
        };
        let body = self.body_hit(&d);
        let half = self.line_width / 2.0;
        let coverage = |dist: f64| (half + 0.5 - dist).clamp(0.0, 1.0) as f32;
        let mut line_coverage = 0.0f32;
        for e in &self.edges {
            line_coverage = line_coverage.max(coverage(e.image_distance(&ideal).0));
        }
        let mut antenna: Option<Vector3<f64>> = None;
        for a in &self.antennas {
            let (dist, _) = a.image_distance(&ideal);
            let cov = coverage(dist);
            if cov <= 0.0 {
                continue;
            }
            let point = a.point_near_ray(&d);
            let occluded = body.is_some_and(|b| b.z < point.z - 1e-6);
            if occluded {
                continue;
            }
            line_coverage = line_coverage.max(cov);
            if dist <= half && antenna.is_none_or(|q| point.z < q.z) {
                antenna = Some(point);
            }
        }
        PixelHit {
            body,
            antenna,
            line_coverage,
        }
    }

    /// Target-frame point seen at `p`: the nearer of body and antenna hits.
    pub fn anchor(&self, p: PixelPoint) -> Option<Vector3<f64>> {
        let hit = self.cast(p);
        let cam_point = match (hit.body, hit.antenna) {
            (Some(b), Some(a)) => Some(if a.z < b.z { a } else { b }),
            (b, a) => b.or(a),
        }?;
        Some(self.pose.inverse().apply(&cam_point))
    }

    fn render_rows(&self, shade: impl Fn(PixelHit) -> f32 + Sync, fill: f32) -> GrayImage {
        let (w, h) = (self.cam.width, self.cam.height);
        let (x0, y0, x1, y1) = self.window;
        let mut px = vec![fill; w * h];
        px.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            if y < y0 || y >= y1 {
                return;
            }
            for (x, out) in row.iter_mut().enumerate().take(x1).skip(x0) {
                *out = shade(self.cast(PixelPoint::new(x as f64, y as f64)));
            }
        });
        GrayImage::from_pixels(w, h, px).expect("shades stay in [0, 1]")
    }
}

/// Edges adjacent to at least one front-facing face, plus all antennas.
pub fn visible_edges(model: &WireframeModel, pose: &RigidTransform) -> Vec<usize> {
    let antennas = model.antenna_edges();
    let front: Vec<bool> = (0..model.faces.len())
        .map(|f| {
            let n = pose.rotation() * model.face_normal(f);
            let c = pose.apply(&model.face_centroid(f));
            n.dot(&c) < 0.0
        })
        .collect();
    (0..model.edges.len())
        .filter(|&e| antennas.contains(&e) || model.edge_faces(e).iter().any(|&f| front[f]))
        .collect()
}

/// Binary silhouette (foreground 1, background 0) of the body and antennas,
/// and the target-frame anchor of every foreground pixel.
///
/// Antennas are drawn `antenna_width` px wide; 0 renders the body only.
pub fn render_silhouette_with(
    model: &WireframeModel,
    pose: &RigidTransform,
    cam: &CameraModel,
    antenna_width: f64,
) -> Result<(GrayImage, AnchorMap), SceneError> {
    let view = SceneView::new(model, pose, cam, antenna_width)?;
    let (x0, y0, x1, y1) = view.window();
    let (ww, wh) = (x1 - x0, y1 - y0);
    let inverse = pose.inverse();
    let mut anchors: Vec<Option<Vector3<f64>>> = vec![None; ww * wh];
    anchors.par_chunks_mut(ww).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let hit = view.cast(PixelPoint::new((x0 + i) as f64, (y0 + j) as f64));
            let p = match (hit.body, hit.antenna) {
                (Some(b), Some(a)) => Some(if a.z < b.z { a } else { b }),
                (b, a) => b.or(a),
            };
            *out = p.map(|p| inverse.apply(&p));
        }
    });
    if anchors.iter().all(Option::is_none) {
        return Err(SceneError::OutOfFrame);
    }
    let img = GrayImage::from_fn(cam.width, cam.height, |x, y| {
        let inside = x >= x0 && x < x1 && y >= y0 && y < y1;
        if inside && anchors[(y - y0) * ww + (x - x0)].is_some() {
            1.0
        } else {
            0.0
        }
    });
    Ok((
        img,
        AnchorMap {
            x0,
            y0,
            width: ww,
            height: wh,
            points: anchors,
        },
    ))
}

/// Silhouette with antennas at the default line width.
pub fn render_silhouette(
    model: &WireframeModel,
    pose: &RigidTransform,
    cam: &CameraModel,
) -> Result<(GrayImage, AnchorMap), SceneError> {
    render_silhouette_with(model, pose, cam, RenderStyle::default().line_width)
}

/// Flat-shaded body with dark visible edges on a mid-gray background.
pub fn render_edges_styled(
    model: &WireframeModel,
    pose: &RigidTransform,
    cam: &CameraModel,
    style: &RenderStyle,
) -> Result<GrayImage, SceneError> {
    let view = SceneView::new(model, pose, cam, style.line_width)?;
    let s = *style;
    let img = view.render_rows(
        move |hit| {
            let base = if hit.body.is_some() {
                s.body
            } else {
                s.background
            };
            base * (1.0 - hit.line_coverage) + s.edge * hit.line_coverage
        },
        style.background,
    );
    if img.pixels().iter().all(|&p| p == style.background) {
        return Err(SceneError::OutOfFrame);
    }
    Ok(img)
}

pub fn render_edges(
    model: &WireframeModel,
    pose: &RigidTransform,
    cam: &CameraModel,
    line_width: f64,
) -> Result<GrayImage, SceneError> {
    render_edges_styled(
        model,
        pose,
        cam,
        &RenderStyle {
            line_width,
            ..Default::default()
        },
    )
}
