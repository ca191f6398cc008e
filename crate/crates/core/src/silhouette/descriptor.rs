use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::SilhouetteError;
use crate::geometry::PixelPoint;

/// Inner and outer radius of the log-polar grid, in units of the mean
/// pairwise point distance.
pub const RADIAL_RANGE: (f64, f64) = (0.125, 2.0);

/// Log-polar histogram of the positions of all other contour points,
/// row-major over (radius, angle) bins, normalized to sum 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeContextDescriptor {
    pub histogram: Vec<f64>,
}

/// Shape context of every point.
///
/// Radii are log-spaced over [`RADIAL_RANGE`] times the mean pairwise
/// distance; points outside that annulus are not counted. Angles are
/// measured in image coordinates, so the descriptor is not rotation
/// invariant.
pub fn shape_context(
    points: &[PixelPoint],
    r_bins: usize,
    theta_bins: usize,
) -> Result<Vec<ShapeContextDescriptor>, SilhouetteError> {
    let n = points.len();
    if n < 2 || r_bins == 0 || theta_bins == 0 {
        return Err(SilhouetteError::DegenerateContour);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += points[i].distance(&points[j]);
        }
    }
    let mean = total / (n * (n - 1) / 2) as f64;
    if !(mean > 0.0) {
        return Err(SilhouetteError::DegenerateContour);
    }
    let (lo, hi) = (RADIAL_RANGE.0.ln(), RADIAL_RANGE.1.ln());
    let r_step = (hi - lo) / r_bins as f64;
    let t_step = TAU / theta_bins as f64;

    let descriptors = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut h = vec![0.0; r_bins * theta_bins];
            for (j, q) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let (du, dv) = (q.u - p.u, q.v - p.v);
                let r = (du.hypot(dv) / mean).ln();
                if !(r >= lo && r < hi) {
                    continue;
                }
                let rb = (((r - lo) / r_step) as usize).min(r_bins - 1);
                let tb = ((dv.atan2(du).rem_euclid(TAU) / t_step) as usize).min(theta_bins - 1);
                h[rb * theta_bins + tb] += 1.0;
            }
            let sum: f64 = h.iter().sum();
            if sum > 0.0 {
                h.iter_mut().for_each(|x| *x /= sum);
            }
            ShapeContextDescriptor { histogram: h }
        })
        .collect();
    Ok(descriptors)
}

/// χ² distance `½ Σ (a−b)² / (a+b)` over bins where `a + b > 0`.
pub fn chi_squared(a: &ShapeContextDescriptor, b: &ShapeContextDescriptor) -> f64 {
    a.histogram
        .iter()
        .zip(&b.histogram)
        .filter(|(x, y)| **x + **y > 0.0)
        .map(|(x, y)| (x - y).powi(2) / (x + y))
        .sum::<f64>()
        * 0.5
}

/// Greedy minimum-cost one-to-one pairing between two descriptor sets.
///
/// All pairs are visited in order of increasing χ² cost (ties by query then
/// entry index) and accepted while both sides are free. Returns the pairs as
/// (query, entry) indices and their mean cost.
pub fn greedy_assignment(
    query: &[ShapeContextDescriptor],
    entry: &[ShapeContextDescriptor],
) -> (Vec<(usize, usize)>, f64) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(query.len() * entry.len());
    for (i, a) in query.iter().enumerate() {
        for (j, b) in entry.iter().enumerate() {
            pairs.push((chi_squared(a, b), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_q, mut used_e) = (vec![false; query.len()], vec![false; entry.len()]);
    let mut matched = Vec::with_capacity(query.len().min(entry.len()));
    let mut cost = 0.0;
    for (c, i, j) in pairs {
        if used_q[i] || used_e[j] {
            continue;
        }
        used_q[i] = true;
        used_e[j] = true;
        matched.push((i, j));
        cost += c;
    }
    let mean = if matched.is_empty() {
        f64::INFINITY
    } else {
        cost / matched.len() as f64
    };
    (matched, mean)
}
