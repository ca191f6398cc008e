use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::geometry::PixelPoint;
use crate::image::{line_angle_difference, LineSegment};
use crate::model::FeatureKind;

/// Tolerances of the perceptual grouping stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupingParams {
    /// Maximum angle between parallel segments, deg.
    pub parallel_tol_deg: f64,
    /// Maximum endpoint gap of a junction, px.
    pub junction_tol: f64,
    /// Minimum antenna length, px.
    pub antenna_min_len: f64,
    /// Minimum distance from an antenna endpoint to any other segment, px.
    pub isolation_dist: f64,
}

impl Default for GroupingParams {
    fn default() -> Self {
        Self {
            parallel_tol_deg: 5.0,
            junction_tol: 8.0,
            antenna_min_len: 25.0,
            isolation_dist: 4.0,
        }
    }
}

/// A higher-level image feature built from detected segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedFeature {
    pub kind: FeatureKind,
    /// Indices into [`Grouping::segments`].
    pub segment_ids: Vec<usize>,
    pub segments: Vec<LineSegment>,
    /// Points where consecutive segments meet.
    pub junctions: Vec<PixelPoint>,
    /// Keypoint ids in traversal order.
    ///
    /// * tetrad: the four corners, starting at the junction of the last and
    ///   first segment;
    /// * triad: free end, two junctions, free end;
    /// * parallel kinds: `p0, p1` of every segment in order;
    /// * proximity pair: free end of the first, junction, free end of the
    ///   second;
    /// * antenna: `p0, p1`.
    pub points: Vec<usize>,
}

/// Output of [`perceptual_grouping`]: the groups plus the keypoint table
/// they index into.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub segments: Vec<LineSegment>,
    /// Segment endpoints, with endpoints joined at junctions merged into
    /// one keypoint at the least-squares intersection of their lines.
    pub keypoints: Vec<PixelPoint>,
    /// Keypoint of `(p0, p1)` of every segment.
    pub endpoint_keypoints: Vec<[usize; 2]>,
    pub groups: Vec<GroupedFeature>,
}

impl Grouping {
    pub fn of_kind(&self, kind: FeatureKind) -> impl Iterator<Item = &GroupedFeature> {
        self.groups.iter().filter(move |g| g.kind == kind)
    }

    pub fn count(&self, kind: FeatureKind) -> usize {
        self.of_kind(kind).count()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn endpoint(s: &LineSegment, end: usize) -> PixelPoint {
    if end == 0 {
        s.p0
    } else {
        s.p1
    }
}

/// Closest endpoint pair of two segments: `(distance, end of a, end of b)`.
fn closest_ends(a: &LineSegment, b: &LineSegment) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for ea in 0..2 {
        for eb in 0..2 {
            let d = endpoint(a, ea).distance(&endpoint(b, eb));
            if d < best.0 {
                best = (d, ea, eb);
            }
        }
    }
    best
}

pub fn are_parallel(a: &LineSegment, b: &LineSegment, params: &GroupingParams) -> bool {
    line_angle_difference(a, b) < params.parallel_tol_deg
}

/// Junction between two non-parallel segments whose closest endpoints are
/// within `junction_tol`: `(end of a, end of b)`.
pub fn junction(
    a: &LineSegment,
    b: &LineSegment,
    params: &GroupingParams,
) -> Option<(usize, usize)> {
    if are_parallel(a, b, params) {
        return None;
    }
    let (d, ea, eb) = closest_ends(a, b);
    (d < params.junction_tol).then_some((ea, eb))
}

/// Long segment that joins no other segment and whose endpoints keep
/// `isolation_dist` from every other segment.
pub fn is_isolated_antenna(segments: &[LineSegment], i: usize, params: &GroupingParams) -> bool {
    let s = &segments[i];
    s.length() >= params.antenna_min_len
        && segments
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .all(|(_, o)| {
                junction(s, o, params).is_none()
                    && o.distance_to_point(&s.p0) > params.isolation_dist
                    && o.distance_to_point(&s.p1) > params.isolation_dist
            })
}

/// Least-squares intersection of the lines of the given endpoints, falling
/// back to their mean when the lines are nearly parallel or the solution
/// strays from the endpoints.
fn merge_point(segments: &[LineSegment], members: &[(usize, usize)], tol: f64) -> PixelPoint {
    let mean = members
        .iter()
        .map(|&(s, e)| endpoint(&segments[s], e).to_vector())
        .sum::<Vector2<f64>>()
        / members.len() as f64;
    if members.len() < 2 {
        return PixelPoint::from(mean);
    }
    let mut a = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for &(s, _) in members {
        let d = segments[s].direction();
        let n = Vector2::new(-d.y, d.x);
        let nn = n * n.transpose();
        a += nn;
        b += nn * segments[s].p0.to_vector();
    }
    match a.try_inverse() {
        Some(inv) if a.determinant() > 1e-6 => {
            let x = inv * b;
            if (x - mean).norm() <= tol {
                PixelPoint::from(x)
            } else {
                PixelPoint::from(mean)
            }
        }
        _ => PixelPoint::from(mean),
    }
}

/// Organizes segments into the six feature kinds, emitted in decreasing
/// complexity (tetrads, polygonal triads, parallel triads, parallel pairs,
/// proximity pairs, antennas). A segment may take part in many groups.
///
/// Polygonal tetrads are closed four-segment chains, polygonal triads open
/// three-segment chains; consecutive chain segments meet at a junction, and
/// each segment uses its two ends for its two neighbours.
pub fn perceptual_grouping(segments: &[LineSegment], params: &GroupingParams) -> Grouping {
    let n = segments.len();
    // nbrs[i]: (j, end of i, end of j)
    let mut nbrs: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
    let mut parent: Vec<usize> = (0..2 * n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if let Some((ei, ej)) = junction(&segments[i], &segments[j], params) {
                nbrs[i].push((j, ei, ej));
                nbrs[j].push((i, ej, ei));
                let (ri, rj) = (find(&mut parent, 2 * i + ei), find(&mut parent, 2 * j + ej));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut class_of = vec![usize::MAX; 2 * n];
    let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
    for k in 0..2 * n {
        let r = find(&mut parent, k);
        if class_of[r] == usize::MAX {
            class_of[r] = members.len();
            members.push(Vec::new());
        }
        class_of[k] = class_of[r];
        members[class_of[k]].push((k / 2, k % 2));
    }
    let keypoints: Vec<PixelPoint> = members
        .iter()
        .map(|m| merge_point(segments, m, params.junction_tol))
        .collect();
    let endpoint_keypoints: Vec<[usize; 2]> = (0..n)
        .map(|i| [class_of[2 * i], class_of[2 * i + 1]])
        .collect();
    let kp = |s: usize, e: usize| endpoint_keypoints[s][e];

    let mut groups = Vec::new();
    let mut push =
        |kind: FeatureKind, ids: Vec<usize>, junctions: Vec<usize>, points: Vec<usize>| {
            let mut distinct = points.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() != points.len() {
                return;
            }
            groups.push(GroupedFeature {
                kind,
                segments: ids.iter().map(|&i| segments[i]).collect(),
                segment_ids: ids,
                junctions: junctions.iter().map(|&k| keypoints[k]).collect(),
                points,
            });
        };

    // Closed 4-chains a-b-c-d, a the smallest index, b < d.
    for a in 0..n {
        for &(b, ea, eb) in &nbrs[a] {
            if b <= a {
                continue;
            }
            for &(c, eb2, ec) in &nbrs[b] {
                if eb2 != 1 - eb || c <= a || c == b {
                    continue;
                }
                for &(d, ec2, ed) in &nbrs[c] {
                    if ec2 != 1 - ec || d <= b || d == c {
                        continue;
                    }
                    let closes = nbrs[d]
                        .iter()
                        .any(|&(x, ed2, ea2)| x == a && ed2 == 1 - ed && ea2 == 1 - ea);
                    if closes {
                        let corners = vec![kp(a, 1 - ea), kp(a, ea), kp(b, 1 - eb), kp(c, 1 - ec)];
                        push(
                            FeatureKind::PolygonalTetrad,
                            vec![a, b, c, d],
                            corners.clone(),
                            corners,
                        );
                    }
                }
            }
        }
    }
    // Open 3-chains a-b-c around the middle segment b, a < c.
    let mut triads = Vec::new();
    for b in 0..n {
        for &(a, eba, ea) in &nbrs[b] {
            for &(c, ebc, ec) in &nbrs[b] {
                if ebc != 1 - eba || a >= c {
                    continue;
                }
                triads.push((a, b, c, ea, ec, eba, ebc));
            }
        }
    }
    triads.sort_unstable();
    for (a, b, c, ea, ec, eba, ebc) in triads {
        let pts = vec![kp(a, 1 - ea), kp(b, eba), kp(b, ebc), kp(c, 1 - ec)];
        push(
            FeatureKind::PolygonalTriad,
            vec![a, b, c],
            vec![pts[1], pts[2]],
            pts,
        );
    }

    let par = |i: usize, j: usize| are_parallel(&segments[i], &segments[j], params);
    let ends = |ids: &[usize]| {
        ids.iter()
            .flat_map(|&i| [kp(i, 0), kp(i, 1)])
            .collect::<Vec<_>>()
    };
    for i in 0..n {
        for j in i + 1..n {
            if !par(i, j) {
                continue;
            }
            for k in j + 1..n {
                if par(i, k) && par(j, k) {
                    push(
                        FeatureKind::ParallelTriad,
                        vec![i, j, k],
                        vec![],
                        ends(&[i, j, k]),
                    );
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if par(i, j) {
                push(FeatureKind::ParallelPair, vec![i, j], vec![], ends(&[i, j]));
            }
        }
    }
    for i in 0..n {
        for &(j, ei, ej) in &nbrs[i] {
            if j > i {
                let pts = vec![kp(i, 1 - ei), kp(i, ei), kp(j, 1 - ej)];
                push(FeatureKind::ProximityPair, vec![i, j], vec![pts[1]], pts);
            }
        }
    }
    for i in 0..n {
        if is_isolated_antenna(segments, i, params) {
            push(
                FeatureKind::Antenna,
                vec![i],
                vec![],
                vec![kp(i, 0), kp(i, 1)],
            );
        }
    }

    Grouping {
        segments: segments.to_vec(),
        keypoints,
        endpoint_keypoints,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(a: (f64, f64), b: (f64, f64)) -> LineSegment {
        LineSegment::new(PixelPoint::new(a.0, a.1), PixelPoint::new(b.0, b.1), 10)
    }

    fn rectangle() -> Vec<LineSegment> {
        // Corner gaps of 3-4 px, as left by a rasterized outline.
        vec![
            seg((102.0, 100.0), (198.0, 100.0)),
            seg((200.0, 103.0), (200.0, 157.0)),
            seg((197.0, 160.0), (103.0, 160.0)),
            seg((100.0, 156.0), (100.0, 102.0)),
        ]
    }

    #[test]
    fn rectangle_yields_one_tetrad_and_its_subgroups() {
        let g = perceptual_grouping(&rectangle(), &GroupingParams::default());
        assert_eq!(g.count(FeatureKind::PolygonalTetrad), 1);
        assert_eq!(g.count(FeatureKind::PolygonalTriad), 4);
        assert_eq!(g.count(FeatureKind::ProximityPair), 4);
        assert_eq!(g.count(FeatureKind::ParallelPair), 2);
        assert_eq!(g.count(FeatureKind::ParallelTriad), 0);
        assert_eq!(g.count(FeatureKind::Antenna), 0);
        assert_eq!(g.keypoints.len(), 4);
        let tetrad = g.of_kind(FeatureKind::PolygonalTetrad).next().unwrap();
        let mut corners: Vec<(i64, i64)> = tetrad
            .junctions
            .iter()
            .map(|p| (p.u.round() as i64, p.v.round() as i64))
            .collect();
        corners.sort_unstable();
        assert_eq!(
            corners,
            vec![(100, 100), (100, 160), (200, 100), (200, 160)]
        );
        let kinds: Vec<usize> = g.groups.iter().map(|g| g.kind.rank()).collect();
        assert!(kinds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn distant_oblique_segments_form_no_group() {
        let s = vec![
            seg((0.0, 0.0), (100.0, 0.0)),
            seg((100.0, 100.0), (200.0, 200.0)),
        ];
        let g = perceptual_grouping(&s, &GroupingParams::default());
        assert_eq!(g.count(FeatureKind::ParallelPair), 0);
        assert_eq!(g.count(FeatureKind::ProximityPair), 0);
    }

    #[test]
    fn three_parallel_segments() {
        let s = vec![
            seg((0.0, 0.0), (100.0, 0.0)),
            seg((0.0, 30.0), (100.0, 33.0)),
            seg((0.0, 60.0), (100.0, 62.0)),
        ];
        let g = perceptual_grouping(&s, &GroupingParams::default());
        assert_eq!(g.count(FeatureKind::ParallelTriad), 1);
        assert_eq!(g.count(FeatureKind::ParallelPair), 3);
        assert_eq!(g.count(FeatureKind::Antenna), 3);
    }

    #[test]
    fn antenna_must_be_isolated() {
        let mut s = rectangle();
        s.push(seg((150.0, 95.0), (150.0, 40.0)));
        let g = perceptual_grouping(&s, &GroupingParams::default());
        let antennas: Vec<_> = g.of_kind(FeatureKind::Antenna).collect();
        assert_eq!(antennas.len(), 1);
        assert_eq!(antennas[0].segment_ids, vec![4]);
        s.push(seg((150.0, 98.0), (150.0, 99.0)));
        let g = perceptual_grouping(&s, &GroupingParams::default());
        assert_eq!(g.count(FeatureKind::Antenna), 0);
    }

    fn arb_segments() -> impl Strategy<Value = Vec<LineSegment>> {
        prop::collection::vec(
            (0.0..200.0f64, 0.0..200.0f64, 0.0..200.0f64, 0.0..200.0f64),
            0..12,
        )
        .prop_map(|v| {
            v.into_iter()
                .filter(|(a, b, c, d)| (a - c).hypot(b - d) > 2.0)
                .map(|(a, b, c, d)| seg((a, b), (c, d)))
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn groups_satisfy_their_constraints(segments in arb_segments()) {
            let p = GroupingParams::default();
            let g = perceptual_grouping(&segments, &p);
            for grp in &g.groups {
                prop_assert_eq!(grp.segment_ids.len(), grp.kind.segment_count());
                let s = |k: usize| &segments[grp.segment_ids[k]];
                let k = grp.segment_ids.len();
                match grp.kind {
                    FeatureKind::ParallelPair | FeatureKind::ParallelTriad => {
                        for a in 0..k {
                            for b in a + 1..k {
                                prop_assert!(line_angle_difference(s(a), s(b)) < p.parallel_tol_deg);
                            }
                        }
                    }
                    FeatureKind::ProximityPair | FeatureKind::PolygonalTriad => {
                        for a in 0..k - 1 {
                            prop_assert!(junction(s(a), s(a + 1), &p).is_some());
                        }
                    }
                    FeatureKind::PolygonalTetrad => {
                        for a in 0..k {
                            prop_assert!(junction(s(a), s((a + 1) % k), &p).is_some());
                        }
                    }
                    FeatureKind::Antenna => {
                        prop_assert!(is_isolated_antenna(&segments, grp.segment_ids[0], &p));
                    }
                }
                let mut pts = grp.points.clone();
                pts.sort_unstable();
                pts.dedup();
                prop_assert_eq!(pts.len(), grp.points.len());
            }
        }
    }
}
