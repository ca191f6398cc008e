use serde::{Deserialize, Serialize};

use super::morphology::{
    clear_border_structures, connected_components, dilate, erode, flood_fill_holes, Connectivity,
};
use super::{BinaryImage, GrayImage, RegionOfInterest};
use crate::error::ImageError;
use crate::geometry::PixelPoint;

/// Smallest accepted silhouette component, px.
pub const MIN_SILHOUETTE_AREA: usize = 25;

/// Moore neighbourhood in clockwise order (image y points down), starting west.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(dx: isize, dy: isize) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("unit offset")
}

/// Closed, ordered boundary of a shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    points: Vec<PixelPoint>,
}

impl Contour {
    /// Drops consecutive duplicates (including last-to-first).
    pub fn from_points(mut points: Vec<PixelPoint>) -> Self {
        points.dedup();
        while points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        Self { points }
    }

    pub fn points(&self) -> &[PixelPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the closed polygon through the points.
    pub fn perimeter(&self) -> f64 {
        closed_length(&self.points)
    }

    /// Shoelace area of the closed polygon (positive when clockwise on screen).
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.u * b.v - b.u * a.v
            })
            .sum::<f64>()
            / 2.0
    }

    /// Every consecutive pair, including last-to-first, is 8-adjacent.
    pub fn is_closed_8_connected(&self) -> bool {
        let n = self.points.len();
        n >= 1
            && (0..n).all(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                n == 1 || (a.u - b.u).abs().max((a.v - b.v).abs()) == 1.0
            })
    }
}

fn closed_length(points: &[PixelPoint]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    (0..n)
        .map(|i| points[i].distance(&points[(i + 1) % n]))
        .sum()
}

/// Moore-neighbour boundary trace of the 8-connected component containing
/// the first set pixel in raster order, with Jacob's stopping criterion.
pub fn trace_boundary(shape: &BinaryImage) -> Option<Contour> {
    let (sx, sy) = shape.iter_set().next()?;
    let start = (sx as isize, sy as isize);
    let fg = |p: (isize, isize)| shape.get_or_false(p.0, p.1);
    // The west neighbour of the raster-first pixel is background.
    let start_back = 0usize;
    let mut points = vec![PixelPoint::new(sx as f64, sy as f64)];
    let (mut cur, mut back) = (start, start_back);
    let cap = 4 * shape.count() + 16;
    for _ in 0..cap {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let cand = (cur.0 + RING[d].0, cur.1 + RING[d].1);
            if fg(cand) {
                let prev = RING[(back + k - 1) % 8];
                let b = (cur.0 + prev.0 - cand.0, cur.1 + prev.1 - cand.1);
                next = Some((cand, ring_index(b.0, b.1)));
                break;
            }
        }
        let Some((p, b)) = next else { break };
        if p == start && b == start_back {
            break;
        }
        points.push(PixelPoint::new(p.0 as f64, p.1 as f64));
        cur = p;
        back = b;
    }
    Some(Contour::from_points(points))
}

/// Thresholds the ROI and returns the cleaned silhouette (full-image mask)
/// with its boundary.
///
/// Intensities are min-max normalized inside the ROI; a pixel is foreground
/// when it differs from the background level (median of the ROI border) by
/// more than `threshold`. The mask then goes through dilation (r=1), hole
/// filling, removal of structures touching the ROI border and erosion (r=1),
/// and the largest 8-connected component is kept.
pub fn extract_silhouette(
    img: &GrayImage,
    roi: &RegionOfInterest,
    threshold: f64,
) -> Result<(BinaryImage, Contour), ImageError> {
    if !roi.fits(img.width(), img.height()) {
        return Err(ImageError::InvalidRoi(format!("{roi:?}")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ImageError::InvalidParameter(format!(
            "silhouette threshold {threshold} outside (0, 1)"
        )));
    }
    let none = ImageError::NoSilhouette {
        min_area: MIN_SILHOUETTE_AREA,
    };
    let (w, h) = (roi.width(), roi.height());
    let crop = |x: usize, y: usize| img.get(roi.x0 + x, roi.y0 + y);
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for y in 0..h {
        for x in 0..w {
            lo = lo.min(crop(x, y));
            hi = hi.max(crop(x, y));
        }
    }
    if hi - lo < 1e-6 {
        return Err(none);
    }
    let norm = |x: usize, y: usize| ((crop(x, y) - lo) / (hi - lo)) as f64;
    let mut border: Vec<f64> = Vec::with_capacity(2 * (w + h));
    for x in 0..w {
        border.push(norm(x, 0));
        border.push(norm(x, h - 1));
    }
    for y in 0..h {
        border.push(norm(0, y));
        border.push(norm(w - 1, y));
    }
    border.sort_by(f64::total_cmp);
    let background = border[border.len() / 2];
    let raw = BinaryImage::from_fn(w, h, |x, y| (norm(x, y) - background).abs() > threshold);

    let cleaned = erode(
        &clear_border_structures(&flood_fill_holes(&dilate(&raw, 1))),
        1,
    );
    let cc = connected_components(&cleaned, Connectivity::Eight);
    let label = cc.largest().ok_or(ImageError::NoSilhouette {
        min_area: MIN_SILHOUETTE_AREA,
    })?;
    if cc.sizes[label as usize - 1] < MIN_SILHOUETTE_AREA {
        return Err(none);
    }
    let local = cc.mask(label);
    let contour = trace_boundary(&local).ok_or(ImageError::NoSilhouette {
        min_area: MIN_SILHOUETTE_AREA,
    })?;
    let mask = BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        roi.contains(x, y) && local.get(x - roi.x0, y - roi.y0)
    });
    let shifted = contour
        .points()
        .iter()
        .map(|p| PixelPoint::new(p.u + roi.x0 as f64, p.v + roi.y0 as f64))
        .collect();
    Ok((mask, Contour::from_points(shifted)))
}

/// `n` points at equal arc-length spacing along the closed polygon, starting
/// at its first vertex.
pub fn resample_closed(points: &[PixelPoint], n: usize) -> Vec<PixelPoint> {
    if points.is_empty() || n == 0 {
        return Vec::new();
    }
    let total = closed_length(points);
    if total == 0.0 {
        return vec![points[0]; n];
    }
    let step = total / n as f64;
    let m = points.len();
    let mut out = Vec::with_capacity(n);
    let (mut seg, mut seg_start) = (0usize, 0.0f64);
    for k in 0..n {
        let target = k as f64 * step;
        loop {
            let len = points[seg].distance(&points[(seg + 1) % m]);
            if target <= seg_start + len || seg + 1 == m {
                let t = if len > 0.0 {
                    ((target - seg_start) / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (a, b) = (points[seg], points[(seg + 1) % m]);
                out.push(PixelPoint::new(
                    a.u + t * (b.u - a.u),
                    a.v + t * (b.v - a.v),
                ));
                break;
            }
            seg_start += len;
            seg += 1;
        }
    }
    out
}
