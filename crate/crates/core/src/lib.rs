//! Pose initialization of a non-cooperative target of known geometry from a
//! single monocular image.
//!
//! Two pipelines share one P3P + RANSAC + Levenberg-Marquardt back-end:
//!
//! * [`svd`]: line features (two Hough streams), perceptual grouping into six
//!   feature classes and model-feature hypothesis search.
//! * [`silhouette`]: an offline database of rendered silhouettes sampled on a
//!   view sphere, shape-context matching and resection from contour anchors.
//!
//! [`scene`] renders a 2U CubeSat and the rotary-stage trajectory used as
//! ground truth, and [`eval`] runs the pipelines over a dataset and reports
//! pose errors.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod model;
pub mod pnp;
pub mod scene;
pub mod silhouette;
pub mod svd;

pub use error::{
    EvalError, GeometryError, ImageError, PnpError, SceneError, SilhouetteError, SvdError,
};
pub use geometry::{
    rotation_error, translation_error, CameraModel, PixelPoint, PoseError, RigidTransform,
};
pub use image::{BinaryImage, Contour, GrayImage, LineSegment, RegionOfInterest};
pub use model::{FeatureKind, WireframeModel};
pub use pnp::{Correspondence2D3D, LmOptions, PnPResult, RansacParams};
