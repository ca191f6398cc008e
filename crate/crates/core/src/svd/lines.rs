use super::SvdConfig;
use crate::error::ImageError;
use crate::geometry::CameraModel;
use crate::image::{
    gaussian_blur, hough_lines, line_angle_difference, sobel, thin_edges,
    weak_gradient_elimination, BinaryImage, GrayImage, LineSegment, RegionOfInterest,
};

/// Line segments of both detection streams after duplicate suppression,
/// together with the WGE region of interest.
#[derive(Debug, Clone)]
pub struct LineDetection {
    pub segments: Vec<LineSegment>,
    pub roi: RegionOfInterest,
    pub filtered_stream: usize,
    pub sobel_stream: usize,
}

/// Dual-stream line detection on an undistorted image.
///
/// Stream 1 runs the Hough transform on the WGE-thresholded gradient of the
/// Gaussian-filtered image. Stream 2 runs it on a Sobel edge map of the raw
/// image (magnitude above `sobel_fraction` of the ROI maximum) restricted to
/// the WGE ROI. The union is reduced by [`merge_segments`].
pub fn detect_lines(
    img: &GrayImage,
    _cam: &CameraModel,
    cfg: &SvdConfig,
) -> Result<Vec<LineSegment>, ImageError> {
    detect_lines_detailed(img, cfg).map(|d| d.segments)
}

pub fn detect_lines_detailed(
    img: &GrayImage,
    cfg: &SvdConfig,
) -> Result<LineDetection, ImageError> {
    let blurred = gaussian_blur(img, cfg.blur_sigma);
    let grad = sobel(&blurred)?;
    let (strong, roi) = weak_gradient_elimination(&grad, cfg.wge_percentile)?;
    let stream1 = hough_lines(&thin_edges(&grad, &strong.masked_to(&roi)), &cfg.hough);

    let raw = sobel(img)?;
    let mut peak = 0f32;
    for y in roi.y0..roi.y1 {
        for x in roi.x0..roi.x1 {
            peak = peak.max(raw.magnitude_at(x, y));
        }
    }
    let cut = peak * cfg.sobel_fraction as f32;
    let edges = BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        roi.contains(x, y) && raw.magnitude_at(x, y) > cut
    });
    let stream2 = hough_lines(&thin_edges(&raw, &edges), &cfg.hough);

    let (n1, n2) = (stream1.len(), stream2.len());
    let mut all = stream1;
    all.extend(stream2);
    Ok(LineDetection {
        segments: merge_segments(all, cfg.merge_angle_deg, cfg.merge_distance),
        roi,
        filtered_stream: n1,
        sobel_stream: n2,
    })
}

/// True if `a` and `b` differ by less than `max_angle` degrees and both
/// endpoints of the shorter one lie within `max_distance` of the longer one.
pub fn is_duplicate(a: &LineSegment, b: &LineSegment, max_angle: f64, max_distance: f64) -> bool {
    if line_angle_difference(a, b) >= max_angle {
        return false;
    }
    let (short, long) = if a.length() <= b.length() {
        (a, b)
    } else {
        (b, a)
    };
    long.distance_to_point(&short.p0) < max_distance
        && long.distance_to_point(&short.p1) < max_distance
}

/// Stable-sorts by support (descending) and drops every segment that
/// duplicates an already kept one.
pub fn merge_segments(
    mut segments: Vec<LineSegment>,
    max_angle: f64,
    max_distance: f64,
) -> Vec<LineSegment> {
    segments.sort_by(|a, b| b.support.cmp(&a.support));
    let mut kept: Vec<LineSegment> = Vec::with_capacity(segments.len());
    for s in segments {
        if !kept
            .iter()
            .any(|k| is_duplicate(k, &s, max_angle, max_distance))
        {
            kept.push(s);
        }
    }
    kept
}
