use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grouping::{GroupedFeature, Grouping};
use crate::error::SvdError;
use crate::geometry::PixelPoint;
use crate::model::{FeatureKind, WireframeModel};

/// One candidate pairing of two image groups with two model features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Indices into [`Grouping::groups`].
    pub groups: [usize; 2],
    /// Kind and annotation index of each matched model feature.
    pub model_features: [(FeatureKind, usize); 2],
    /// `(keypoint, model vertex)` pairs sorted by keypoint; injective both
    /// ways.
    pub assignment: Vec<(usize, usize)>,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Shoelace area of the closed polygon through `pts`, px². Negative for
/// polygons that appear counter-clockwise to the viewer (y axis down).
fn signed_area(pts: &[PixelPoint]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.u * b.v - b.u * a.v
        })
        .sum::<f64>()
        / 2.0
}

/// Image polygons smaller than this give no reliable winding, px².
const MIN_WINDING_AREA: f64 = 20.0;

/// +1 if the vertex chain runs counter-clockwise seen from outside the face
/// that contains it, -1 if clockwise, 0 if no face contains three of its
/// vertices.
fn model_winding(model: &WireframeModel, seq: &[usize]) -> f64 {
    let Some(f) = (0..model.faces.len())
        .find(|&f| model.faces[f].iter().filter(|v| seq.contains(v)).count() == 3)
    else {
        return 0.0;
    };
    let p: Vec<_> = seq.iter().map(|&v| model.vertices[v]).collect();
    let mut n = nalgebra::Vector3::zeros();
    for i in 0..p.len() {
        n += p[i].cross(&p[(i + 1) % p.len()]);
    }
    n.dot(&model.face_normal(f)).signum()
}

/// Model vertex sequences aligned with `group.points`, one per admissible
/// traversal of the model feature `edges`.
///
/// Closed chains admit four rotations in both directions, open chains and
/// antennas both directions, proximity pairs both segment orders. A face
/// whose three or four edges are all visible faces the camera, so polygonal
/// traversals must keep the winding of the image polygon (unless it is too
/// small to tell). Parallel groups admit every segment permutation with a
/// common direction flip; each segment's direction relative to the first
/// must agree between the image and the model.
pub fn alignments(
    group: &GroupedFeature,
    keypoints: &[PixelPoint],
    model: &WireframeModel,
    edges: &[usize],
) -> Vec<Vec<usize>> {
    let winding_ok = |seq: &Vec<usize>| {
        let pts: Vec<PixelPoint> = group.points.iter().map(|&k| keypoints[k]).collect();
        let area = signed_area(&pts);
        area.abs() < MIN_WINDING_AREA || model_winding(model, seq) == -area.signum()
    };
    match group.kind {
        FeatureKind::PolygonalTetrad => {
            let Some(v) = model.chain_vertices(edges) else {
                return vec![];
            };
            if v.len() != 4 {
                return vec![];
            }
            let mut out: Vec<Vec<usize>> = Vec::with_capacity(8);
            for shift in 0..4 {
                out.push((0..4).map(|k| v[(shift + k) % 4]).collect());
                out.push((0..4).map(|k| v[(shift + 4 - k) % 4]).collect());
            }
            out.retain(winding_ok);
            out
        }
        FeatureKind::PolygonalTriad => {
            let Some(v) = model.chain_vertices(edges) else {
                return vec![];
            };
            if v.len() != 4 {
                return vec![];
            }
            let r: Vec<usize> = v.iter().rev().copied().collect();
            let mut out = vec![v, r];
            out.retain(winding_ok);
            out
        }
        FeatureKind::ProximityPair => {
            let [a0, a1] = model.edges[edges[0]];
            let [b0, b1] = model.edges[edges[1]];
            let shared = if a0 == b0 || a0 == b1 { a0 } else { a1 };
            let oa = if a0 == shared { a1 } else { a0 };
            let ob = if b0 == shared { b1 } else { b0 };
            vec![vec![oa, shared, ob], vec![ob, shared, oa]]
        }
        FeatureKind::Antenna => {
            let [a, b] = model.edges[edges[0]];
            vec![vec![a, b], vec![b, a]]
        }
        FeatureKind::ParallelPair | FeatureKind::ParallelTriad => {
            let k = group.segments.len();
            let d0 = group.segments[0].direction();
            let img_sign: Vec<bool> = group
                .segments
                .iter()
                .map(|s| s.direction().dot(&d0) >= 0.0)
                .collect();
            let mut out = Vec::new();
            for perm in permutations(k) {
                let u0 = model.edge_direction(edges[perm[0]]);
                for flip in [false, true] {
                    let mut seq = Vec::with_capacity(2 * k);
                    for (m, e) in perm.iter().map(|&p| edges[p]).enumerate() {
                        let [va, vb] = model.edges[e];
                        let model_sign = model.edge_direction(e).dot(&u0) >= 0.0;
                        // Oriented with the first model edge; then matched to
                        // the image segment's own orientation.
                        let (fa, fb) = if model_sign { (va, vb) } else { (vb, va) };
                        let (fa, fb) = if img_sign[m] != flip {
                            (fa, fb)
                        } else {
                            (fb, fa)
                        };
                        seq.push(fa);
                        seq.push(fb);
                    }
                    out.push(seq);
                }
            }
            out
        }
    }
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// Merges two point-to-vertex maps; `None` if a keypoint would take two
/// vertices or a vertex two keypoints.
fn combine(pa: &[usize], va: &[usize], pb: &[usize], vb: &[usize]) -> Option<Vec<(usize, usize)>> {
    let mut fwd: BTreeMap<usize, usize> = BTreeMap::new();
    let mut back: BTreeMap<usize, usize> = BTreeMap::new();
    for (&p, &v) in pa.iter().zip(va).chain(pb.iter().zip(vb)) {
        match (fwd.get(&p), back.get(&v)) {
            (Some(&v0), _) if v0 != v => return None,
            (_, Some(&p0)) if p0 != p => return None,
            _ => {
                fwd.insert(p, v);
                back.insert(v, p);
            }
        }
    }
    Some(fwd.into_iter().collect())
}

/// Enumerates candidate correspondence sets.
///
/// Image group pairs `(i, j)`, `i < j`, are visited in group order (groups
/// are emitted by decreasing complexity), first the pairs that share a
/// keypoint and then the disjoint ones. Pairs where one group's segments
/// are a subset of the other's carry no new information and are skipped.
/// Every pair is crossed with the kind-matching model annotations and their
/// [`alignments`]; a candidate is kept if the combined keypoint-to-vertex
/// map is a bijection covering at least four points. Enumeration stops at
/// `max_hypotheses`.
pub fn generate_hypotheses(
    grouping: &Grouping,
    model: &WireframeModel,
    max_hypotheses: usize,
) -> Result<Vec<Hypothesis>, SvdError> {
    let groups = &grouping.groups;
    if groups.len() < 2 {
        return Err(SvdError::NoHypotheses);
    }
    let empty = Vec::new();
    let features = |k: FeatureKind| model.annotations.get(&k).unwrap_or(&empty);
    let mut aligned: BTreeMap<(usize, usize), Vec<Vec<usize>>> = BTreeMap::new();
    let mut align = |g: usize, f: usize| -> Vec<Vec<usize>> {
        aligned
            .entry((g, f))
            .or_insert_with(|| {
                alignments(
                    &groups[g],
                    &grouping.keypoints,
                    model,
                    &features(groups[g].kind)[f],
                )
            })
            .clone()
    };

    let touching = |i: usize, j: usize| {
        groups[i]
            .points
            .iter()
            .any(|p| groups[j].points.contains(p))
    };
    let pairs: Vec<(usize, usize)> = [true, false]
        .into_iter()
        .flat_map(|shared| {
            (0..groups.len())
                .flat_map(move |i| (i + 1..groups.len()).map(move |j| (i, j)))
                .filter(move |&(i, j)| touching(i, j) == shared)
        })
        .collect();

    let mut out = Vec::new();
    'outer: for (i, j) in pairs {
        {
            let (gi, gj) = (&groups[i], &groups[j]);
            if subset(&gi.segment_ids, &gj.segment_ids) || subset(&gj.segment_ids, &gi.segment_ids)
            {
                continue;
            }
            for fi in 0..features(gi.kind).len() {
                let ai = align(i, fi);
                for fj in 0..features(gj.kind).len() {
                    let aj = align(j, fj);
                    for vi in &ai {
                        for vj in &aj {
                            let Some(assignment) = combine(&gi.points, vi, &gj.points, vj) else {
                                continue;
                            };
                            if assignment.len() < 4 {
                                continue;
                            }
                            out.push(Hypothesis {
                                groups: [i, j],
                                model_features: [(gi.kind, fi), (gj.kind, fj)],
                                assignment,
                            });
                            if out.len() >= max_hypotheses {
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(SvdError::NoHypotheses);
    }
    Ok(out)
}
