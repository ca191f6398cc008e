use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lm::{refine_lm, LmOptions};
use super::{inliers_and_rms, p3p, reprojection_errors, Correspondence2D3D, PnPResult};
use crate::error::PnpError;
use crate::geometry::CameraModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// Reprojection error below which a correspondence is an inlier, px.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub rng_seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            inlier_threshold: 3.0,
            min_inliers: 4,
            rng_seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), PnpError> {
        if self.max_iterations < 1 {
            return Err(PnpError::InvalidParams(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(PnpError::InvalidParams(
                "inlier_threshold must be > 0".into(),
            ));
        }
        if self.min_inliers < 4 {
            return Err(PnpError::InvalidParams("min_inliers must be >= 4".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }
}

/// Fixed-iteration RANSAC over P3P samples.
///
/// Every root of every sample is scored; the best hypothesis has the most
/// inliers, ties going to the lower inlier RMS and then to the earlier
/// hypothesis. The returned pose is the raw P3P solution.
pub fn ransac_pnp(
    c: &[Correspondence2D3D],
    cam: &CameraModel,
    params: &RansacParams,
) -> Result<PnPResult, PnpError> {
    params.validate()?;
    if c.len() < 4 {
        return Err(PnpError::TooFewCorrespondences {
            required: 4,
            actual: c.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut best: Option<PnPResult> = None;
    for _ in 0..params.max_iterations {
        let idx = rand::seq::index::sample(&mut rng, c.len(), 3);
        let sample = [c[idx.index(0)], c[idx.index(1)], c[idx.index(2)]];
        let Ok(poses) = p3p(&sample, cam) else {
            continue;
        };
        for pose in poses {
            let errors = reprojection_errors(&pose, c, cam);
            let (inliers, rms) = inliers_and_rms(&errors, params.inlier_threshold);
            let better = match &best {
                None => true,
                Some(b) => {
                    inliers.len() > b.inlier_indices.len()
                        || (inliers.len() == b.inlier_indices.len() && rms < b.rms_reprojection)
                }
            };
            if better {
                best = Some(PnPResult {
                    pose,
                    inlier_indices: inliers,
                    rms_reprojection: rms,
                    converged: false,
                });
            }
        }
    }
    let best_count = best.as_ref().map_or(0, |b| b.inlier_count());
    match best {
        Some(mut b) if best_count >= params.min_inliers => {
            b.converged = true;
            Ok(b)
        }
        _ => Err(PnpError::NoConsensus {
            min_inliers: params.min_inliers,
            best: best_count,
        }),
    }
}

/// RANSAC, then Levenberg-Marquardt on the inliers, then inliers re-counted
/// over all correspondences under the refined pose. The refined pose is kept
/// only if it does not lose inliers.
pub fn solve_pnp(
    c: &[Correspondence2D3D],
    cam: &CameraModel,
    params: &RansacParams,
    lm: &LmOptions,
) -> Result<PnPResult, PnpError> {
    let initial = ransac_pnp(c, cam, params)?;
    let subset: Vec<Correspondence2D3D> = initial.inlier_indices.iter().map(|&i| c[i]).collect();
    let Ok((pose, _)) = refine_lm(&initial.pose, &subset, cam, lm) else {
        return Ok(initial);
    };
    let errors = reprojection_errors(&pose, c, cam);
    let (inliers, rms) = inliers_and_rms(&errors, params.inlier_threshold);
    if inliers.len() < initial.inlier_count() {
        return Ok(initial);
    }
    Ok(PnPResult {
        pose,
        converged: inliers.len() >= params.min_inliers,
        inlier_indices: inliers,
        rms_reprojection: rms,
    })
}
