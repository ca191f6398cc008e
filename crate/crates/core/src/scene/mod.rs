//! Ground-truth generator: the 2U CubeSat model, silhouette and edge
//! rendering, and the rotary-stage image sequence.

mod cubesat;
mod render;
mod trajectory;

pub use cubesat::{build_cubesat_2u, ANTENNA_BASES, ANTENNA_LENGTH, CUBESAT_2U_SIZE};
pub use render::{
    render_edges, render_edges_styled, render_silhouette, render_silhouette_with, visible_edges,
    AnchorMap, PixelHit, RenderStyle, SceneView,
};
pub use trajectory::{
    generate_sequence, render_frame, DatasetFrame, TrajectorySpec, ROTATION_RATE_DEG_PER_S,
};
