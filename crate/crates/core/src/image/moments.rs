use serde::{Deserialize, Serialize};

use super::BinaryImage;
use crate::error::ImageError;

/// Area, centroid and second-order central moments of a binary shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMoments {
    pub m00: f64,
    pub centroid: (f64, f64),
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
}

impl ImageMoments {
    /// Scale-invariant central moments `η_pq = μ_pq / m00^(1 + (p+q)/2)`,
    /// as `[η20, η02, η11]`.
    pub fn normalized(&self) -> [f64; 3] {
        let s = self.m00 * self.m00;
        [self.mu20 / s, self.mu02 / s, self.mu11 / s]
    }

    /// Euclidean distance between normalized moment vectors.
    pub fn signature_distance(&self, other: &ImageMoments) -> f64 {
        let (a, b) = (self.normalized(), other.normalized());
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn image_moments(shape: &BinaryImage) -> Result<ImageMoments, ImageError> {
    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    for (x, y) in shape.iter_set() {
        m00 += 1.0;
        m10 += x as f64;
        m01 += y as f64;
    }
    if m00 == 0.0 {
        return Err(ImageError::EmptyShape);
    }
    let (xb, yb) = (m10 / m00, m01 / m00);
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for (x, y) in shape.iter_set() {
        let (dx, dy) = (x as f64 - xb, y as f64 - yb);
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    Ok(ImageMoments {
        m00,
        centroid: (xb, yb),
        mu20,
        mu02,
        mu11,
    })
}
