//! Silhouette-matching pose initialization: a database of rendered target
//! silhouettes on a view sphere, shape-context matching of the measured
//! outline and resection from the matched view's surface anchors.

mod database;
mod descriptor;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use database::{
    build_entry, generate_database, intrinsics_hash, DatabaseHeader, Mismatch, SilhouetteDatabase,
    SilhouetteEntry, ViewGrid,
};
pub use descriptor::{
    chi_squared, greedy_assignment, shape_context, ShapeContextDescriptor, RADIAL_RANGE,
};

use crate::error::SilhouetteError;
use crate::geometry::{CameraModel, PixelPoint};
use crate::image::{
    estimate_range_from_roi, extract_silhouette, gaussian_blur, image_moments, resample_closed,
    sobel, undistort_image, weak_gradient_elimination, BinaryImage, Contour, GrayImage,
    ImageMoments, RegionOfInterest,
};
use crate::model::WireframeModel;
use crate::pnp::{solve_pnp, Correspondence2D3D, LmOptions, PnPResult, RansacParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SilhouetteConfig {
    pub blur_sigma: f64,
    pub wge_percentile: f64,
    /// Foreground threshold on ROI-normalized intensity.
    pub threshold: f64,
    /// Contour samples per silhouette.
    pub n_samples: usize,
    pub r_bins: usize,
    pub theta_bins: usize,
    /// Entries kept by the moment ranking.
    pub shortlist: usize,
    /// Accepted difference between query and entry range priors, mm.
    pub range_margin: f64,
    /// Largest distance from a contour sample to its anchored pixel, px.
    pub anchor_radius: f64,
    pub ransac: RansacParams,
    pub lm: LmOptions,
}

impl Default for SilhouetteConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 0.8,
            wge_percentile: 0.5,
            threshold: 0.3,
            n_samples: 100,
            r_bins: 5,
            theta_bins: 12,
            shortlist: 40,
            range_margin: 150.0,
            anchor_radius: 1.5,
            ransac: RansacParams {
                inlier_threshold: 5.0,
                min_inliers: 6,
                ..RansacParams::default()
            },
            lm: LmOptions::default(),
        }
    }
}

impl SilhouetteConfig {
    pub fn validate(&self) -> Result<(), SilhouetteError> {
        let bad = |m: &str| {
            Err(SilhouetteError::Format(format!(
                "invalid silhouette config: {m}"
            )))
        };
        if self.n_samples < 20 {
            return bad("n_samples must be >= 20");
        }
        if self.r_bins == 0 || self.theta_bins == 0 {
            return bad("bins must be >= 1");
        }
        if self.shortlist == 0 {
            return bad("shortlist must be >= 1");
        }
        if !(self.range_margin >= 0.0) || !(self.anchor_radius > 0.0) {
            return bad("range_margin must be >= 0 and anchor_radius > 0");
        }
        self.ransac.validate()?;
        Ok(())
    }
}

/// Measured silhouette prepared for matching.
#[derive(Debug, Clone)]
pub struct SilhouetteQuery {
    pub roi: RegionOfInterest,
    pub mask: BinaryImage,
    pub contour: Contour,
    pub moments: ImageMoments,
    pub range_estimate: f64,
    pub sampled_points: Vec<PixelPoint>,
    pub descriptors: Vec<ShapeContextDescriptor>,
}

/// WGE region of interest, silhouette extraction, equal-arc-length
/// resampling and shape context, on an undistorted image. Database entries
/// and queries both go through here.
pub fn extract_query_silhouette(
    img: &GrayImage,
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SilhouetteConfig,
) -> Result<SilhouetteQuery, SilhouetteError> {
    let grad = sobel(&gaussian_blur(img, cfg.blur_sigma))?;
    let (_, roi) = weak_gradient_elimination(&grad, cfg.wge_percentile)?;
    let (mask, contour) = extract_silhouette(img, &roi, cfg.threshold)?;
    let moments = image_moments(&mask)?;
    let sampled_points = resample_closed(contour.points(), cfg.n_samples);
    let descriptors = shape_context(&sampled_points, cfg.r_bins, cfg.theta_bins)?;
    Ok(SilhouetteQuery {
        roi,
        mask,
        contour,
        moments,
        range_estimate: estimate_range_from_roi(&roi, cam, model.extent()),
        sampled_points,
        descriptors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteMatch {
    pub entry_index: usize,
    /// Mean χ² cost of the point pairing.
    pub similarity_cost: f64,
    /// (query sample index, entry sample index).
    pub point_correspondences: Vec<(usize, usize)>,
}

/// Entries compatible with the query's range prior, ranked by moment
/// signature distance (ties by index), truncated to `cfg.shortlist`.
///
/// An entry is compatible when its own ROI range prior is within
/// `cfg.range_margin` of the query's, which cancels the view-dependent bias
/// of the prior. If no entry is compatible, all of them are ranked.
pub fn shortlist(
    query: &SilhouetteQuery,
    db: &SilhouetteDatabase,
    cfg: &SilhouetteConfig,
) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..db.entries.len())
        .filter(|&i| {
            (db.entries[i].range_estimate - query.range_estimate).abs() <= cfg.range_margin
        })
        .collect();
    if ids.is_empty() {
        ids = (0..db.entries.len()).collect();
    }
    let dist: Vec<f64> = ids
        .iter()
        .map(|&i| query.moments.signature_distance(&db.entries[i].moments))
        .collect();
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(ids[a].cmp(&ids[b])));
    order
        .into_iter()
        .take(cfg.shortlist)
        .map(|k| ids[k])
        .collect()
}

/// Moment shortlist, then greedy shape-context pairing against every
/// shortlisted entry. The lowest mean cost wins, ties by entry index.
pub fn match_silhouette(
    query: &SilhouetteQuery,
    db: &SilhouetteDatabase,
    cfg: &SilhouetteConfig,
) -> Result<SilhouetteMatch, SilhouetteError> {
    if db.entries.is_empty() {
        return Err(SilhouetteError::EmptyDatabase);
    }
    shortlist(query, db, cfg)
        .into_par_iter()
        .map(|i| {
            let (pairs, cost) = greedy_assignment(&query.descriptors, &db.entries[i].descriptors);
            SilhouetteMatch {
                entry_index: i,
                similarity_cost: cost,
                point_correspondences: pairs,
            }
        })
        .reduce_with(|a, b| {
            let b_first = b
                .similarity_cost
                .total_cmp(&a.similarity_cost)
                .then(b.entry_index.cmp(&a.entry_index))
                .is_lt();
            if b_first {
                b
            } else {
                a
            }
        })
        .ok_or(SilhouetteError::EmptyDatabase)
}

#[derive(Debug, Clone)]
pub struct SilhouetteSolution {
    pub result: PnPResult,
    pub matched: SilhouetteMatch,
    /// Query sample ↔ entry anchor pairs fed to the solver; the result's
    /// inlier indices refer to this list.
    pub correspondences: Vec<Correspondence2D3D>,
    pub query: SilhouetteQuery,
}

/// Undistort, extract and match the silhouette, then solve PnP on (query
/// sample, entry anchor) pairs.
pub fn solve_silhouette_detailed(
    img: &GrayImage,
    db: &SilhouetteDatabase,
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SilhouetteConfig,
) -> Result<SilhouetteSolution, SilhouetteError> {
    let fail = |e: SilhouetteError| SilhouetteError::InitializationFailed(Box::new(e));
    cfg.validate().map_err(fail)?;
    let img = undistort_image(img, cam);
    let query = extract_query_silhouette(&img, model, cam, cfg).map_err(fail)?;
    let matched = match_silhouette(&query, db, cfg).map_err(fail)?;
    let entry = &db.entries[matched.entry_index];
    let correspondences: Vec<Correspondence2D3D> = matched
        .point_correspondences
        .iter()
        .filter_map(|&(q, e)| {
            entry.anchors_3d[e].map(|a| Correspondence2D3D::new(query.sampled_points[q], a))
        })
        .collect();
    let result = match solve_pnp(&correspondences, cam, &cfg.ransac, &cfg.lm) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("silhouette resection failed: {e}");
            PnPResult {
                pose: entry.pose,
                inlier_indices: vec![],
                rms_reprojection: f64::INFINITY,
                converged: false,
            }
        }
    };
    Ok(SilhouetteSolution {
        result,
        matched,
        correspondences,
        query,
    })
}

pub fn solve_silhouette(
    img: &GrayImage,
    db: &SilhouetteDatabase,
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SilhouetteConfig,
) -> Result<PnPResult, SilhouetteError> {
    solve_silhouette_detailed(img, db, model, cam, cfg).map(|s| s.result)
}
