use nalgebra::Vector3;

use crate::model::WireframeModel;

/// Body envelope, mm.
pub const CUBESAT_2U_SIZE: [f64; 3] = [100.0, 100.0, 227.0];
pub const ANTENNA_LENGTH: f64 = 150.0;
/// Antenna feet on the +z face, target frame, mm. Placed off-centre so that
/// no body symmetry maps the antenna pair onto itself.
pub const ANTENNA_BASES: [[f64; 2]; 2] = [[30.0, 30.0], [-30.0, 10.0]];

/// 2U CubeSat wireframe centred on its body centroid, long axis along +z,
/// with two antennas rising from the +z face.
///
/// Vertex `i < 8` is the corner with signs `(x, y, z)` taken from bits 0, 1
/// and 2 of `i`; vertices 8..12 are antenna foot/tip pairs. Edges 12 and 13
/// are the antennas.
pub fn build_cubesat_2u() -> WireframeModel {
    let h = [
        CUBESAT_2U_SIZE[0] / 2.0,
        CUBESAT_2U_SIZE[1] / 2.0,
        CUBESAT_2U_SIZE[2] / 2.0,
    ];
    let mut vertices: Vec<Vector3<f64>> = (0..8)
        .map(|i| {
            let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
            Vector3::new(s(0) * h[0], s(1) * h[1], s(2) * h[2])
        })
        .collect();
    for [x, y] in ANTENNA_BASES {
        vertices.push(Vector3::new(x, y, h[2]));
        vertices.push(Vector3::new(x, y, h[2] + ANTENNA_LENGTH));
    }
    let mut edges = Vec::new();
    for i in 0..8usize {
        for bit in 0..3 {
            let j = i | 1 << bit;
            if j != i {
                edges.push([i, j]);
            }
        }
    }
    edges.push([8, 9]);
    edges.push([10, 11]);
    // Quads listed counter-clockwise seen from outside.
    let quads: [[usize; 4]; 6] = [
        [0, 2, 3, 1], // z-
        [4, 5, 7, 6], // z+
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    let mut model = WireframeModel {
        name: "cubesat-2u".into(),
        vertices,
        edges,
        faces,
        annotations: Default::default(),
    };
    model.annotate(&[12, 13]);
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureKind;

    #[test]
    fn topology_and_annotations() {
        let m = build_cubesat_2u();
        m.validate().unwrap();
        assert_eq!(m.vertices.len(), 12);
        assert_eq!(m.edges.len() - m.antenna_edges().len(), 12);
        assert_eq!(m.faces.len(), 12);
        assert_eq!(m.antenna_edges(), vec![12, 13]);
        for kind in FeatureKind::ALL {
            assert!(
                !m.annotations.get(&kind).map_or(true, |g| g.is_empty()),
                "{kind:?}"
            );
        }
        assert_eq!(m.annotations[&FeatureKind::PolygonalTetrad].len(), 6);
    }

    #[test]
    fn body_diagonal_and_extent() {
        let m = build_cubesat_2u();
        let diag = (m.vertices[7] - m.vertices[0]).norm();
        assert!(
            (diag - (100.0f64.powi(2) + 100.0f64.powi(2) + 227.0f64.powi(2)).sqrt()).abs() < 1e-9
        );
        assert!((diag - 267.45).abs() < 0.01);
        // Farthest pair: the far bottom corner and the antenna tip at (30, 30).
        let expected = (80.0f64.powi(2) + 80.0f64.powi(2) + 377.0f64.powi(2)).sqrt();
        assert!((m.extent() - expected).abs() < 1e-9);
        assert!(m.centroid().norm() < 1e-12);
    }

    #[test]
    fn face_normals_point_outward() {
        let m = build_cubesat_2u();
        let c = m.centroid();
        for f in 0..m.faces.len() {
            assert!(
                m.face_normal(f).dot(&(m.face_centroid(f) - c)) > 0.0,
                "face {f}"
            );
        }
    }
}
