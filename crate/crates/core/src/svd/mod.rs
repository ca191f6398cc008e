//! Edge-feature pose initialization: dual-stream line detection,
//! perceptual grouping into six feature kinds, model-feature hypotheses and
//! pose scoring against the full wireframe.

mod grouping;
mod hypotheses;
mod lines;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use grouping::{
    are_parallel, is_isolated_antenna, junction, perceptual_grouping, GroupedFeature, Grouping,
    GroupingParams,
};
pub use hypotheses::{alignments, generate_hypotheses, Hypothesis};
pub use lines::{detect_lines, detect_lines_detailed, is_duplicate, merge_segments, LineDetection};

use nalgebra::Vector3;

use crate::error::SvdError;
use crate::geometry::{CameraModel, PixelPoint, RigidTransform};
use crate::image::{line_angle_difference, undistort_image, GrayImage, HoughParams, LineSegment};
use crate::model::WireframeModel;
use crate::pnp::{refine_lm, solve_pnp, Correspondence2D3D, LmOptions, PnPResult, RansacParams};
use crate::scene::visible_edges;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdConfig {
    /// Gaussian pre-filter of stream 1.
    pub blur_sigma: f64,
    pub wge_percentile: f64,
    /// Stream 2 edge threshold as a fraction of the largest Sobel magnitude
    /// inside the ROI.
    pub sobel_fraction: f64,
    pub hough: HoughParams,
    pub merge_angle_deg: f64,
    pub merge_distance: f64,
    pub grouping: GroupingParams,
    pub max_hypotheses: usize,
    /// RANSAC iterations per hypothesis.
    pub hypothesis_iterations: usize,
    /// Rounds of segment-to-edge association and LM applied to the winner.
    pub edge_refinement_rounds: usize,
    /// `inlier_threshold` is also the vertex-to-keypoint verification radius,
    /// and `min_inliers` the number of verified vertices needed to converge.
    pub ransac: RansacParams,
    pub lm: LmOptions,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 0.8,
            wge_percentile: 0.5,
            sobel_fraction: 0.25,
            hough: HoughParams {
                threshold: 15,
                min_length: 15.0,
                ..HoughParams::default()
            },
            merge_angle_deg: 5.0,
            merge_distance: 5.0,
            grouping: GroupingParams::default(),
            max_hypotheses: 2000,
            hypothesis_iterations: 40,
            edge_refinement_rounds: 5,
            ransac: RansacParams {
                inlier_threshold: 4.0,
                min_inliers: 6,
                ..RansacParams::default()
            },
            lm: LmOptions::default(),
        }
    }
}

/// A scored hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseHypothesis {
    pub index: usize,
    pub hypothesis: Hypothesis,
    pub result: PnPResult,
    /// Model vertices verified against image keypoints.
    pub verified: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SvdSolution {
    pub result: PnPResult,
    /// Verified `(keypoint pixel, model vertex)` pairs behind `result`;
    /// `result.inlier_indices` index into this list.
    pub correspondences: Vec<Correspondence2D3D>,
    pub vertex_ids: Vec<usize>,
    pub segments: usize,
    pub groups: usize,
    pub hypotheses: usize,
    pub best: Option<PoseHypothesis>,
}

/// One-to-one matching of projected model vertices to keypoints within
/// `radius`, greedy by distance: `(vertex, keypoint, distance)`.
pub fn verify_vertices(
    pose: &RigidTransform,
    model: &WireframeModel,
    keypoints: &[PixelPoint],
    cam: &CameraModel,
    radius: f64,
) -> Vec<(usize, usize, f64)> {
    let mut cand = Vec::new();
    for (v, x) in model.vertices.iter().enumerate() {
        let Ok(p) = cam.project_pinhole(&pose.apply(x)) else {
            continue;
        };
        for (k, q) in keypoints.iter().enumerate() {
            let d = p.distance(q);
            if d <= radius {
                cand.push((v, k, d));
            }
        }
    }
    cand.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_v = vec![false; model.vertices.len()];
    let mut used_k = vec![false; keypoints.len()];
    let mut out = Vec::new();
    for (v, k, d) in cand {
        if !used_v[v] && !used_k[k] {
            used_v[v] = true;
            used_k[k] = true;
            out.push((v, k, d));
        }
    }
    out.sort_unstable_by_key(|m| m.0);
    out
}

fn rms(matches: &[(usize, usize, f64)]) -> f64 {
    if matches.is_empty() {
        return f64::INFINITY;
    }
    (matches.iter().map(|m| m.2 * m.2).sum::<f64>() / matches.len() as f64).sqrt()
}

fn score_hypothesis(
    index: usize,
    h: &Hypothesis,
    grouping: &Grouping,
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SvdConfig,
) -> Option<PoseHypothesis> {
    let corrs: Vec<Correspondence2D3D> = h
        .assignment
        .iter()
        .map(|&(k, v)| Correspondence2D3D::new(grouping.keypoints[k], model.vertices[v]))
        .collect();
    let params = RansacParams {
        max_iterations: cfg.hypothesis_iterations,
        inlier_threshold: cfg.ransac.inlier_threshold,
        min_inliers: 4,
        rng_seed: cfg.ransac.rng_seed.wrapping_add(index as u64),
    };
    let result = solve_pnp(&corrs, cam, &params, &cfg.lm).ok()?;
    let matches = verify_vertices(
        &result.pose,
        model,
        &grouping.keypoints,
        cam,
        cfg.ransac.inlier_threshold,
    );
    Some(PoseHypothesis {
        index,
        hypothesis: h.clone(),
        result: PnPResult {
            rms_reprojection: rms(&matches),
            ..result
        },
        verified: matches.iter().map(|m| (m.0, m.1)).collect(),
    })
}

/// Closest point to the viewing ray through `q` on the camera-frame line
/// `a + λ (b - a)`, as `λ`.
fn ray_edge_parameter(
    q: &PixelPoint,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    cam: &CameraModel,
) -> f64 {
    let r = cam.bearing(*q);
    let d = b - a;
    // Minimize |a + λ d - μ r| over λ, μ.
    let (dd, dr, rr) = (d.dot(&d), d.dot(&r), r.dot(&r));
    let (ad, ar) = (a.dot(&d), a.dot(&r));
    let den = dd * rr - dr * dr;
    if den.abs() < 1e-12 {
        return 0.0;
    }
    ((dr * ar - rr * ad) / den).clamp(0.0, 1.0)
}

/// Pairs every detected segment with the visible model edge it runs along
/// (angle within `parallel_tol`, both endpoints within `radius` of the
/// projected edge) and turns each segment endpoint into a correspondence
/// with the model point whose projection is nearest to it.
pub fn edge_correspondences(
    pose: &RigidTransform,
    segments: &[LineSegment],
    model: &WireframeModel,
    cam: &CameraModel,
    radius: f64,
    parallel_tol: f64,
) -> Vec<Correspondence2D3D> {
    let mut projected = Vec::new();
    for e in visible_edges(model, pose) {
        let [a, b] = model.edges[e];
        let (ca, cb) = (
            pose.apply(&model.vertices[a]),
            pose.apply(&model.vertices[b]),
        );
        if let (Ok(pa), Ok(pb)) = (cam.project_pinhole(&ca), cam.project_pinhole(&cb)) {
            projected.push((e, ca, cb, LineSegment::new(pa, pb, 0)));
        }
    }
    let mut out = Vec::new();
    for s in segments {
        let best = projected
            .iter()
            .filter(|(_, _, _, l)| l.length() > 1.0 && line_angle_difference(s, l) < parallel_tol)
            .map(|p| {
                (
                    p.3.distance_to_point(&s.p0)
                        .max(p.3.distance_to_point(&s.p1)),
                    p,
                )
            })
            .filter(|(d, _)| *d <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1 .0.cmp(&b.1 .0)));
        let Some((_, &(e, ca, cb, _))) = best else {
            continue;
        };
        let [a, b] = model.edges[e];
        let (ma, mb) = (model.vertices[a], model.vertices[b]);
        for q in [s.p0, s.p1] {
            let t = ray_edge_parameter(&q, &ca, &cb, cam);
            out.push(Correspondence2D3D::new(q, ma + (mb - ma) * t));
        }
    }
    out
}

/// Alternates edge association and LM on point-to-edge correspondences.
fn refine_on_edges(
    pose: &RigidTransform,
    segments: &[LineSegment],
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SvdConfig,
) -> RigidTransform {
    let mut pose = *pose;
    for _ in 0..cfg.edge_refinement_rounds {
        let corrs = edge_correspondences(
            &pose,
            segments,
            model,
            cam,
            cfg.ransac.inlier_threshold,
            cfg.grouping.parallel_tol_deg,
        );
        if corrs.len() < 6 {
            break;
        }
        match refine_lm(&pose, &corrs, cam, &cfg.lm) {
            Ok((p, _)) => pose = p,
            Err(_) => break,
        }
    }
    pose
}

/// Best scored hypothesis: most verified vertices, then lowest RMS, then
/// lowest index.
fn better(a: &PoseHypothesis, b: &PoseHypothesis) -> bool {
    (a.verified.len(), b.result.rms_reprojection, b.index)
        .partial_cmp(&(b.verified.len(), a.result.rms_reprojection, a.index))
        .is_some_and(|o| o.is_gt())
}

/// Edge-feature pose initialization with diagnostics.
///
/// Every hypothesis is solved by RANSAC + LM on its own correspondences and
/// then verified against the whole wireframe: model vertices (antenna ends
/// included) are matched one-to-one to image keypoints within the inlier
/// threshold. The winner is refined by LM on its verified matches and then
/// on the detected segments associated with visible model edges.
pub fn solve_svd_detailed(
    img: &GrayImage,
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SvdConfig,
) -> Result<SvdSolution, SvdError> {
    let fail = |e: SvdError| SvdError::InitializationFailed(Box::new(e));
    cfg.ransac.validate().map_err(|e| fail(e.into()))?;
    let img = undistort_image(img, cam);
    let segments = detect_lines(&img, cam, cfg).map_err(|e| fail(e.into()))?;
    let grouping = perceptual_grouping(&segments, &cfg.grouping);
    let hyps = generate_hypotheses(&grouping, model, cfg.max_hypotheses).map_err(fail)?;

    let best = hyps
        .par_iter()
        .enumerate()
        .filter_map(|(i, h)| score_hypothesis(i, h, &grouping, model, cam, cfg))
        .reduce_with(|a, b| if better(&b, &a) { b } else { a });

    let mut solution = SvdSolution {
        result: PnPResult {
            pose: RigidTransform::identity(),
            inlier_indices: vec![],
            rms_reprojection: f64::INFINITY,
            converged: false,
        },
        correspondences: vec![],
        vertex_ids: vec![],
        segments: segments.len(),
        groups: grouping.groups.len(),
        hypotheses: hyps.len(),
        best: None,
    };
    let Some(best) = best else {
        return Ok(solution);
    };

    let radius = cfg.ransac.inlier_threshold;
    let to_corrs = |m: &[(usize, usize, f64)]| -> Vec<Correspondence2D3D> {
        m.iter()
            .map(|&(v, k, _)| Correspondence2D3D::new(grouping.keypoints[k], model.vertices[v]))
            .collect()
    };
    let mut pose = best.result.pose;
    let mut matches = verify_vertices(&pose, model, &grouping.keypoints, cam, radius);
    if matches.len() >= 4 {
        if let Ok((refined, _)) = refine_lm(&pose, &to_corrs(&matches), cam, &cfg.lm) {
            let rematched = verify_vertices(&refined, model, &grouping.keypoints, cam, radius);
            if rematched.len() >= matches.len() {
                pose = refined;
                matches = rematched;
            }
        }
    }
    let polished = refine_on_edges(&pose, &segments, model, cam, cfg);
    let rematched = verify_vertices(&polished, model, &grouping.keypoints, cam, radius);
    if rematched.len() >= matches.len() {
        pose = polished;
        matches = rematched;
    }
    solution.result = PnPResult {
        pose,
        inlier_indices: (0..matches.len()).collect(),
        rms_reprojection: rms(&matches),
        converged: matches.len() >= cfg.ransac.min_inliers,
    };
    solution.correspondences = to_corrs(&matches);
    solution.vertex_ids = matches.iter().map(|m| m.0).collect();
    solution.best = Some(best);
    Ok(solution)
}

/// Edge-feature pose initialization. Fails only when no hypothesis can be
/// formed; a pose that no hypothesis supports is reported with
/// `converged = false`.
pub fn solve_svd(
    img: &GrayImage,
    model: &WireframeModel,
    cam: &CameraModel,
    cfg: &SvdConfig,
) -> Result<PnPResult, SvdError> {
    solve_svd_detailed(img, model, cam, cfg).map(|s| s.result)
}
