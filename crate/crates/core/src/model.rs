//! Target wireframe: vertices (mm, target frame), edges, triangular faces and
//! the precomputed high-level features used for hypothesis matching.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SceneError;

/// The six perceptual groups, in decreasing complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PolygonalTetrad,
    PolygonalTriad,
    ParallelTriad,
    ParallelPair,
    ProximityPair,
    Antenna,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::PolygonalTetrad,
        FeatureKind::PolygonalTriad,
        FeatureKind::ParallelTriad,
        FeatureKind::ParallelPair,
        FeatureKind::ProximityPair,
        FeatureKind::Antenna,
    ];

    pub fn segment_count(self) -> usize {
        match self {
            FeatureKind::PolygonalTetrad => 4,
            FeatureKind::PolygonalTriad | FeatureKind::ParallelTriad => 3,
            FeatureKind::ParallelPair | FeatureKind::ProximityPair => 2,
            FeatureKind::Antenna => 1,
        }
    }

    /// 0 for the most complex kind.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn is_polygonal(self) -> bool {
        matches!(
            self,
            FeatureKind::PolygonalTetrad | FeatureKind::PolygonalTriad
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireframeModel {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(with = "vertex_list")]
    pub vertices: Vec<Vector3<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<[usize; 3]>,
    #[serde(default)]
    pub annotations: BTreeMap<FeatureKind, Vec<Vec<usize>>>,
}

mod vertex_list {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vector3<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|p| [p.x, p.y, p.z])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector3<f64>>, D::Error> {
        let raw = Vec::<[f64; 3]>::deserialize(d)?;
        Ok(raw.into_iter().map(Vector3::from).collect())
    }
}

impl WireframeModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        let nv = self.vertices.len();
        let bad = |msg: String| Err(SceneError::InvalidModel(msg));
        if self
            .vertices
            .iter()
            .any(|v| !v.iter().all(|c| c.is_finite()))
        {
            return bad("non-finite vertex".into());
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e[0] >= nv || e[1] >= nv || e[0] == e[1] {
                return bad(format!("edge {i} has invalid vertex indices {e:?}"));
            }
        }
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&k| k >= nv) || f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return bad(format!("face {i} has invalid vertex indices {f:?}"));
            }
        }
        for e in 0..self.edges.len() {
            let n = self.edge_faces(e).len();
            if n > 2 {
                return bad(format!("edge {e} belongs to {n} faces"));
            }
        }
        let mut seen = BTreeSet::new();
        for (kind, groups) in &self.annotations {
            for g in groups {
                if g.len() != kind.segment_count() {
                    return bad(format!("{kind:?} annotation {g:?} has wrong edge count"));
                }
                if g.iter().any(|&e| e >= self.edges.len()) {
                    return bad(format!("{kind:?} annotation {g:?} references missing edge"));
                }
                let key: BTreeSet<usize> = g.iter().copied().collect();
                if !seen.insert(key) {
                    return bad(format!("duplicate annotation edge set {g:?}"));
                }
            }
        }
        Ok(())
    }

    /// Faces containing both endpoints of `edge`.
    pub fn edge_faces(&self, edge: usize) -> Vec<usize> {
        let [a, b] = self.edges[edge];
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.contains(&a) && f.contains(&b))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn antenna_edges(&self) -> Vec<usize> {
        self.annotations
            .get(&FeatureKind::Antenna)
            .map(|g| g.iter().map(|e| e[0]).collect())
            .unwrap_or_default()
    }

    /// Mean of the vertices referenced by faces (the body centroid).
    pub fn centroid(&self) -> Vector3<f64> {
        let used: BTreeSet<usize> = self.faces.iter().flatten().copied().collect();
        if used.is_empty() {
            let n = self.vertices.len().max(1) as f64;
            return self.vertices.iter().sum::<Vector3<f64>>() / n;
        }
        used.iter().map(|&i| self.vertices[i]).sum::<Vector3<f64>>() / used.len() as f64
    }

    /// Largest distance between any two vertices, mm.
    pub fn extent(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// Outward unit normal of face `f` (counter-clockwise winding seen from outside).
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn face_centroid(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    pub fn edge_direction(&self, e: usize) -> Vector3<f64> {
        let [a, b] = self.edges[e];
        (self.vertices[b] - self.vertices[a]).normalize()
    }

    /// Vertex sequence traversed by a chain of edges. A closed chain (last
    /// edge meets the first) yields one vertex per edge; an open chain yields
    /// one more. `None` if consecutive edges do not share a vertex.
    pub fn chain_vertices(&self, edges: &[usize]) -> Option<Vec<usize>> {
        if edges.is_empty() {
            return None;
        }
        if edges.len() == 1 {
            return Some(self.edges[edges[0]].to_vec());
        }
        let shared = |a: usize, b: usize| -> Option<usize> {
            let (ea, eb) = (self.edges[a], self.edges[b]);
            ea.iter().copied().find(|v| eb.contains(v))
        };
        let first_join = shared(edges[0], edges[1])?;
        let e0 = self.edges[edges[0]];
        let start = if e0[0] == first_join { e0[1] } else { e0[0] };
        let mut verts = vec![start, first_join];
        for w in edges.windows(2).skip(1) {
            let j = shared(w[0], w[1])?;
            if j == *verts.last().unwrap() {
                return None;
            }
            verts.push(j);
        }
        let last = self.edges[*edges.last().unwrap()];
        let tail = *verts.last().unwrap();
        let end = if last[0] == tail { last[1] } else { last[0] };
        if end == start && edges.len() > 2 {
            Some(verts)
        } else {
            verts.push(end);
            Some(verts)
        }
    }

    /// Recomputes all feature annotations from the geometry.
    ///
    /// Coplanar triangle pairs sharing a diagonal become quadrilateral faces:
    /// each quad yields one tetrad and four triads. Non-antenna edges are
    /// clustered by direction into parallel sets; proximity pairs are
    /// non-parallel edges sharing a vertex.
    pub fn annotate(&mut self, antenna_edges: &[usize]) {
        let mut ann: BTreeMap<FeatureKind, Vec<Vec<usize>>> = BTreeMap::new();
        let edge_index = |a: usize, b: usize| -> Option<usize> {
            self.edges
                .iter()
                .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        };

        // Quads: triangle pairs sharing a non-edge side with equal normals.
        let mut quads: Vec<[usize; 4]> = Vec::new();
        for i in 0..self.faces.len() {
            for j in i + 1..self.faces.len() {
                if self.face_normal(i).dot(&self.face_normal(j)) < 1.0 - 1e-9 {
                    continue;
                }
                let fi = self.faces[i];
                let fj = self.faces[j];
                let common: Vec<usize> = fi.iter().copied().filter(|v| fj.contains(v)).collect();
                if common.len() != 2 || edge_index(common[0], common[1]).is_some() {
                    continue;
                }
                let oi = *fi.iter().find(|v| !common.contains(v)).unwrap();
                let oj = *fj.iter().find(|v| !common.contains(v)).unwrap();
                quads.push([oi, common[0], oj, common[1]]);
            }
        }
        for q in &quads {
            let cycle: Option<Vec<usize>> =
                (0..4).map(|k| edge_index(q[k], q[(k + 1) % 4])).collect();
            let Some(cycle) = cycle else { continue };
            ann.entry(FeatureKind::PolygonalTetrad)
                .or_default()
                .push(cycle.clone());
            for skip in 0..4 {
                let triad: Vec<usize> = (1..4).map(|k| cycle[(skip + k) % 4]).collect();
                ann.entry(FeatureKind::PolygonalTriad)
                    .or_default()
                    .push(triad);
            }
        }

        let body: Vec<usize> = (0..self.edges.len())
            .filter(|e| !antenna_edges.contains(e))
            .collect();
        let parallel = |a: usize, b: usize| {
            self.edge_direction(a).dot(&self.edge_direction(b)).abs() > 1.0 - 1e-6
        };
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &e in &body {
            match classes.iter_mut().find(|c| parallel(c[0], e)) {
                Some(c) => c.push(e),
                None => classes.push(vec![e]),
            }
        }
        for c in &classes {
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    ann.entry(FeatureKind::ParallelPair)
                        .or_default()
                        .push(vec![c[i], c[j]]);
                    for k in j + 1..c.len() {
                        ann.entry(FeatureKind::ParallelTriad)
                            .or_default()
                            .push(vec![c[i], c[j], c[k]]);
                    }
                }
            }
        }
        for (i, &a) in body.iter().enumerate() {
            for &b in &body[i + 1..] {
                let (ea, eb) = (self.edges[a], self.edges[b]);
                if ea.iter().any(|v| eb.contains(v)) && !parallel(a, b) {
                    ann.entry(FeatureKind::ProximityPair)
                        .or_default()
                        .push(vec![a, b]);
                }
            }
        }
        for &e in antenna_edges {
            ann.entry(FeatureKind::Antenna).or_default().push(vec![e]);
        }
        self.annotations = ann;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SceneError> {
        let m: WireframeModel =
            serde_json::from_str(s).map_err(|e| SceneError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// SHA-256 of the compact JSON encoding, hex.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
