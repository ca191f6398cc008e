use serde::{Deserialize, Serialize};

use super::morphology::{connected_components, Connectivity};
use super::{BinaryImage, GradientField};
use crate::error::ImageError;
use crate::geometry::CameraModel;

/// Total growth of the ROI relative to the component bounding box (split
/// evenly between the two sides of each axis).
pub const ROI_MARGIN: f64 = 0.10;

/// Axis-aligned box, inclusive-exclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RegionOfInterest {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self, ImageError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(ImageError::InvalidRoi(format!("[{x0},{x1})x[{y0},{y1})")));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= width && self.y1 <= height
    }

    /// Grows each side by `fraction` of the corresponding dimension, clipped
    /// to the image.
    pub fn padded(&self, fraction: f64, width: usize, height: usize) -> Self {
        let px = (self.width() as f64 * fraction).ceil() as usize;
        let py = (self.height() as f64 * fraction).ceil() as usize;
        Self {
            x0: self.x0.saturating_sub(px),
            y0: self.y0.saturating_sub(py),
            x1: (self.x1 + px).min(width),
            y1: (self.y1 + py).min(height),
        }
    }
}

/// Weak Gradient Elimination.
///
/// Keeps pixels whose gradient magnitude reaches the `percentile` of the
/// nonzero magnitudes (ties at the threshold survive). The ROI is the
/// bounding box of the largest 8-connected surviving component, grown by
/// [`ROI_MARGIN`] and clipped to the image.
pub fn weak_gradient_elimination(
    grad: &GradientField,
    percentile: f64,
) -> Result<(BinaryImage, RegionOfInterest), ImageError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(ImageError::InvalidParameter(format!(
            "percentile {percentile} outside (0, 1)"
        )));
    }
    let mut nonzero: Vec<f32> = grad
        .magnitude
        .iter()
        .copied()
        .filter(|&m| m > 0.0)
        .collect();
    if nonzero.is_empty() {
        return Err(ImageError::EmptyImage);
    }
    let rank = ((nonzero.len() - 1) as f64 * percentile).floor() as usize;
    let (_, &mut threshold, _) = nonzero.select_nth_unstable_by(rank, f32::total_cmp);
    let strong = BinaryImage::from_fn(grad.width, grad.height, |x, y| {
        let m = grad.magnitude_at(x, y);
        m > 0.0 && m >= threshold
    });
    let cc = connected_components(&strong, Connectivity::Eight);
    let label = cc.largest().ok_or(ImageError::EmptyImage)?;
    let (x0, y0, x1, y1) = cc.bounds[label as usize - 1];
    let bbox = RegionOfInterest { x0, y0, x1, y1 };
    let roi = bbox.padded(ROI_MARGIN / 2.0, grad.width, grad.height);
    Ok((strong, roi))
}

/// Similar-triangles range prior: `model_extent * fx / max(roi side)`, mm.
pub fn estimate_range_from_roi(
    roi: &RegionOfInterest,
    cam: &CameraModel,
    model_extent: f64,
) -> f64 {
    let side = roi.width().max(roi.height()).max(1) as f64;
    model_extent * cam.fx / side
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{sobel, GrayImage};

    #[test]
    fn roi_contains_bright_square() {
        let img = GrayImage::from_fn(640, 480, |x, y| {
            if (300..340).contains(&x) && (200..240).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let grad = sobel(&img).unwrap();
        let (mask, roi) = weak_gradient_elimination(&grad, 0.9).unwrap();
        assert!(!mask.is_empty());
        assert!(roi.x0 <= 300 && roi.x1 >= 340 && roi.y0 <= 200 && roi.y1 >= 240);
        assert!(roi.area() as f64 <= (40.0 * 1.2f64).powi(2), "roi {roi:?}");
    }

    #[test]
    fn zero_gradient_is_empty() {
        let grad = sobel(&GrayImage::filled(32, 32, 0.5)).unwrap();
        assert!(matches!(
            weak_gradient_elimination(&grad, 0.85),
            Err(ImageError::EmptyImage)
        ));
    }

    #[test]
    fn bad_percentile_is_rejected() {
        let grad = sobel(&GrayImage::filled(8, 8, 0.5)).unwrap();
        assert!(weak_gradient_elimination(&grad, 1.0).is_err());
        assert!(weak_gradient_elimination(&grad, 0.0).is_err());
    }

    #[test]
    fn range_prior_follows_pinhole_similarity() {
        let cam = CameraModel::pinhole(672.2, 672.2, 960.0, 540.0, 1920, 1080).unwrap();
        let roi = RegionOfInterest::new(700, 300, 1150, 700).unwrap();
        let r = estimate_range_from_roi(&roi, &cam, 1057.0);
        assert!((r - 1057.0 * 672.2 / 450.0).abs() < 1e-9);
        assert!((1500.0..=1700.0).contains(&r));
        let double = RegionOfInterest::new(700, 300, 1600, 700).unwrap();
        assert!((estimate_range_from_roi(&double, &cam, 1057.0) - r / 2.0).abs() < 1e-9);
        let tiny = RegionOfInterest::new(5, 5, 6, 6).unwrap();
        assert_eq!(estimate_range_from_roi(&tiny, &cam, 1057.0), 1057.0 * 672.2);
    }
}
