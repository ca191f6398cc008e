//! Straight-line segments via the (ρ, θ) Hough transform.
//!
//! ρ is measured from the image centre so that 90° rotations of the input map
//! accumulator cells onto accumulator cells.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::BinaryImage;
use crate::geometry::PixelPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoughParams {
    /// ρ bin size, px.
    pub rho_resolution: f64,
    /// θ bin size, degrees.
    pub theta_resolution_deg: f64,
    /// Minimum votes for a peak and minimum support for a segment.
    pub threshold: usize,
    /// Minimum segment length, px.
    pub min_length: f64,
    /// Largest gap bridged inside one segment, px.
    pub max_gap: f64,
    /// Distance from a peak line within which edge pixels are traced, px.
    pub band: f64,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            rho_resolution: 1.0,
            theta_resolution_deg: 1.0,
            threshold: 30,
            min_length: 20.0,
            max_gap: 5.0,
            band: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub p0: PixelPoint,
    pub p1: PixelPoint,
    /// Number of edge pixels that contributed to the segment.
    pub support: usize,
}

impl LineSegment {
    pub fn new(p0: PixelPoint, p1: PixelPoint, support: usize) -> Self {
        Self { p0, p1, support }
    }

    pub fn length(&self) -> f64 {
        self.p0.distance(&self.p1)
    }

    pub fn direction(&self) -> Vector2<f64> {
        (self.p1.to_vector() - self.p0.to_vector()).normalize()
    }

    /// Direction angle folded into [0°, 180°).
    pub fn angle_deg(&self) -> f64 {
        let d = self.p1.to_vector() - self.p0.to_vector();
        d.y.atan2(d.x).to_degrees().rem_euclid(180.0)
    }

    pub fn midpoint(&self) -> PixelPoint {
        PixelPoint::new((self.p0.u + self.p1.u) / 2.0, (self.p0.v + self.p1.v) / 2.0)
    }

    pub fn endpoints(&self) -> [PixelPoint; 2] {
        [self.p0, self.p1]
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.p1, self.p0, self.support)
    }

    /// Euclidean distance from `p` to the closed segment.
    pub fn distance_to_point(&self, p: &PixelPoint) -> f64 {
        let a = self.p0.to_vector();
        let b = self.p1.to_vector();
        let q = p.to_vector();
        let ab = b - a;
        let len2 = ab.norm_squared();
        if len2 == 0.0 {
            return (q - a).norm();
        }
        let t = ((q - a).dot(&ab) / len2).clamp(0.0, 1.0);
        (a + ab * t - q).norm()
    }

    /// Distance from `p` to the infinite supporting line.
    pub fn line_distance(&self, p: &PixelPoint) -> f64 {
        let d = self.direction();
        let r = p.to_vector() - self.p0.to_vector();
        (d.x * r.y - d.y * r.x).abs()
    }

    /// Normal-form parameters `(ρ, θ°)` with `θ` in [0, 180) and ρ measured
    /// from `origin`.
    pub fn normal_form(&self, origin: PixelPoint) -> (f64, f64) {
        let theta = (self.angle_deg() + 90.0).rem_euclid(180.0);
        let t = theta.to_radians();
        let m = self.midpoint();
        let rho = (m.u - origin.u) * t.cos() + (m.v - origin.v) * t.sin();
        (rho, theta)
    }

    /// Intersection of the two supporting lines, if not near-parallel.
    pub fn intersection(&self, other: &LineSegment) -> Option<PixelPoint> {
        let d1 = self.p1.to_vector() - self.p0.to_vector();
        let d2 = other.p1.to_vector() - other.p0.to_vector();
        let m = Matrix2::new(d1.x, -d2.x, d1.y, -d2.y);
        let det = m.determinant();
        if det.abs() < 1e-9 * d1.norm() * d2.norm() {
            return None;
        }
        let rhs = other.p0.to_vector() - self.p0.to_vector();
        let st = m.try_inverse()? * rhs;
        Some(PixelPoint::from(self.p0.to_vector() + d1 * st.x))
    }
}

/// Smallest angle between two undirected lines, degrees in [0, 90].
pub fn line_angle_difference(a: &LineSegment, b: &LineSegment) -> f64 {
    let d = (a.angle_deg() - b.angle_deg()).abs();
    d.min(180.0 - d)
}

/// Detects line segments in a binary edge map.
///
/// Accumulator peaks at or above `threshold` that are maximal in their 3x3
/// (ρ, θ) neighbourhood are visited in decreasing vote order. Unclaimed edge
/// pixels within `band` of each peak line are ordered along the line, split
/// at gaps larger than `max_gap`, and every run long enough and with enough
/// support becomes a segment refitted by total least squares. Pixels of an
/// accepted segment are not reused. Output is sorted by support, descending.
pub fn hough_lines(edges: &BinaryImage, params: &HoughParams) -> Vec<LineSegment> {
    let pts: Vec<(f64, f64)> = {
        let cx = (edges.width() as f64 - 1.0) / 2.0;
        let cy = (edges.height() as f64 - 1.0) / 2.0;
        edges
            .iter_set()
            .map(|(x, y)| (x as f64 - cx, y as f64 - cy))
            .collect()
    };
    if pts.len() < params.threshold.max(2) {
        return Vec::new();
    }
    let origin = (
        (edges.width() as f64 - 1.0) / 2.0,
        (edges.height() as f64 - 1.0) / 2.0,
    );
    let n_theta = (180.0 / params.theta_resolution_deg).round().max(1.0) as usize;
    let thetas: Vec<(f64, f64)> = (0..n_theta)
        .map(|k| {
            let t = (k as f64 * params.theta_resolution_deg).to_radians();
            (t.cos(), t.sin())
        })
        .collect();
    let rho_max = (edges.width() as f64).hypot(edges.height() as f64) / 2.0 + 2.0;
    let half = (rho_max / params.rho_resolution).ceil() as isize;
    let n_rho = (2 * half + 1) as usize;
    let mut acc = vec![0u32; n_theta * n_rho];
    for &(x, y) in &pts {
        for (k, &(c, s)) in thetas.iter().enumerate() {
            let r = ((x * c + y * s) / params.rho_resolution).round() as isize + half;
            acc[k * n_rho + r as usize] += 1;
        }
    }

    let mut peaks: Vec<(u32, usize, usize)> = Vec::new();
    for k in 0..n_theta {
        for r in 0..n_rho {
            let v = acc[k * n_rho + r];
            if (v as usize) < params.threshold {
                continue;
            }
            let mut is_max = true;
            'nbhd: for dk in -1isize..=1 {
                for dr in -1isize..=1 {
                    if dk == 0 && dr == 0 {
                        continue;
                    }
                    let (kk, rr) = (k as isize + dk, r as isize + dr);
                    if kk < 0 || rr < 0 || kk >= n_theta as isize || rr >= n_rho as isize {
                        continue;
                    }
                    let nv = acc[kk as usize * n_rho + rr as usize];
                    let earlier = (dk, dr) < (0, 0);
                    if nv > v || (earlier && nv == v) {
                        is_max = false;
                        break 'nbhd;
                    }
                }
            }
            if is_max {
                peaks.push((v, k, r));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used = vec![false; pts.len()];
    let mut segments: Vec<LineSegment> = Vec::new();
    for &(_, k, r) in &peaks {
        let (c, s) = thetas[k];
        let rho = (r as f64 - half as f64) * params.rho_resolution;
        // Position along the line direction (-sin, cos). Claimed pixels still
        // bridge gaps but do not count as support.
        let mut on_line: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .filter(|(_, &(x, y))| (x * c + y * s - rho).abs() <= params.band)
            .map(|(i, &(x, y))| (-x * s + y * c, i))
            .collect();
        if on_line.iter().filter(|(_, i)| !used[*i]).count() < params.threshold {
            continue;
        }
        on_line.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut start = 0;
        for end in 1..=on_line.len() {
            let split =
                end == on_line.len() || on_line[end].0 - on_line[end - 1].0 > params.max_gap;
            if !split {
                continue;
            }
            let run = &on_line[start..end];
            start = end;
            let fresh = run.iter().filter(|(_, i)| !used[*i]).count();
            let length = run[run.len() - 1].0 - run[0].0;
            if fresh < params.threshold || length < params.min_length {
                continue;
            }
            if let Some(seg) = fit_segment(run.iter().map(|&(_, i)| pts[i]), origin) {
                if seg.length() >= params.min_length {
                    for &(_, i) in run {
                        used[i] = true;
                    }
                    segments.push(LineSegment {
                        support: fresh,
                        ..seg
                    });
                }
            }
        }
    }
    segments.sort_by(|a, b| b.support.cmp(&a.support));
    segments
}

/// Total-least-squares line through centred points, clipped to their extent.
fn fit_segment(
    points: impl Iterator<Item = (f64, f64)>,
    origin: (f64, f64),
) -> Option<LineSegment> {
    let pts: Vec<Vector2<f64>> = points.map(|(x, y)| Vector2::new(x, y)).collect();
    if pts.len() < 2 {
        return None;
    }
    let mean = pts.iter().sum::<Vector2<f64>>() / pts.len() as f64;
    let mut cov = Matrix2::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let major = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        0
    } else {
        1
    };
    let dir: Vector2<f64> = eig.eigenvectors.column(major).into();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        let t = (p - mean).dot(&dir);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    let shift = Vector2::new(origin.0, origin.1);
    let a = mean + dir * lo + shift;
    let b = mean + dir * hi + shift;
    // Orient consistently: left-to-right, then top-to-bottom.
    let (a, b) = if (a.x, a.y) <= (b.x, b.y) {
        (a, b)
    } else {
        (b, a)
    };
    Some(LineSegment::new(
        PixelPoint::from(a),
        PixelPoint::from(b),
        pts.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Marks the pixels of a Bresenham line.
    fn raster_line(img: &mut BinaryImage, a: (i64, i64), b: (i64, i64)) {
        let (mut x, mut y) = a;
        let dx = (b.0 - a.0).abs();
        let dy = -(b.1 - a.1).abs();
        let sx = if a.0 < b.0 { 1 } else { -1 };
        let sy = if a.1 < b.1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            img.set(x as usize, y as usize, true);
            if (x, y) == b {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    #[test]
    fn diagonal_line_is_recovered() {
        let mut img = BinaryImage::new(128, 128);
        raster_line(&mut img, (10, 10), (100, 100));
        let segs = hough_lines(&img, &HoughParams::default());
        assert_eq!(segs.len(), 1);
        let s = &segs[0];
        assert!((s.angle_deg() - 45.0).abs() <= 1.0);
        let ends = [s.p0, s.p1];
        assert!(ends
            .iter()
            .any(|p| p.distance(&PixelPoint::new(10.0, 10.0)) <= 2.0));
        assert!(ends
            .iter()
            .any(|p| p.distance(&PixelPoint::new(100.0, 100.0)) <= 2.0));
        // (ρ, θ) of the ideal line x - y = 0 about the image centre.
        let (rho, theta) = s.normal_form(PixelPoint::new(63.5, 63.5));
        assert!((theta - 135.0).abs() <= 1.0);
        assert!(rho.abs() <= 1.0);
    }

    #[test]
    fn empty_image_has_no_lines() {
        assert!(hough_lines(&BinaryImage::new(50, 40), &HoughParams::default()).is_empty());
    }

    #[test]
    fn perpendicular_lines_give_two_segments() {
        let mut img = BinaryImage::new(160, 160);
        raster_line(&mut img, (20, 30), (140, 30));
        raster_line(&mut img, (80, 10), (80, 150));
        let segs = hough_lines(&img, &HoughParams::default());
        assert_eq!(segs.len(), 2, "{segs:?}");
        let diff = line_angle_difference(&segs[0], &segs[1]);
        assert!((diff - 90.0).abs() <= 2.0);
    }

    #[test]
    fn gaps_split_segments() {
        let mut img = BinaryImage::new(200, 60);
        raster_line(&mut img, (10, 30), (80, 30));
        raster_line(&mut img, (100, 30), (180, 30));
        let segs = hough_lines(&img, &HoughParams::default());
        assert_eq!(segs.len(), 2);
        let p = HoughParams {
            max_gap: 25.0,
            ..Default::default()
        };
        assert_eq!(hough_lines(&img, &p).len(), 1);
    }

    #[test]
    fn output_is_deterministic() {
        let mut img = BinaryImage::new(120, 120);
        raster_line(&mut img, (5, 100), (110, 20));
        raster_line(&mut img, (10, 10), (100, 110));
        raster_line(&mut img, (60, 5), (62, 115));
        let a = hough_lines(&img, &HoughParams::default());
        let b = hough_lines(&img, &HoughParams::default());
        assert_eq!(a, b);
        assert_eq!(a.len(), 3, "{a:#?}");
    }

    #[test]
    fn segment_geometry_helpers() {
        let s = LineSegment::new(PixelPoint::new(0.0, 0.0), PixelPoint::new(10.0, 0.0), 10);
        let t = LineSegment::new(PixelPoint::new(5.0, -5.0), PixelPoint::new(5.0, 5.0), 10);
        let x = s.intersection(&t).unwrap();
        assert!(x.distance(&PixelPoint::new(5.0, 0.0)) < 1e-12);
        assert_eq!(s.distance_to_point(&PixelPoint::new(13.0, 4.0)), 5.0);
        assert_eq!(s.line_distance(&PixelPoint::new(13.0, 4.0)), 4.0);
        assert!(s.intersection(&s).is_none());
    }
}
