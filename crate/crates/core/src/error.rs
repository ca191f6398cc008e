use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {depth} mm)")]
    PointBehindCamera { depth: f64 },
    #[error("undistortion did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image is too small ({width}x{height}), need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("no gradient pixel survives thresholding")]
    EmptyImage,
    #[error("no silhouette component with area >= {min_area} px")]
    NoSilhouette { min_area: usize },
    #[error("shape has no foreground pixel")]
    EmptyShape,
    #[error("invalid region of interest {0}")]
    InvalidRoi(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image i/o: {0}")]
    Io(#[from] ::image::ImageError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PnpError {
    #[error("degenerate configuration: model points are collinear")]
    DegenerateConfiguration,
    #[error("no real P3P solution")]
    NoRealSolution,
    #[error("need at least {required} correspondences, got {actual}")]
    TooFewCorrespondences { required: usize, actual: usize },
    #[error("no hypothesis reached {min_inliers} inliers (best {best})")]
    NoConsensus { min_inliers: usize, best: usize },
    #[error("refinement diverged: points fell behind the camera and no step was accepted")]
    DivergedBehindCamera,
    #[error("invalid RANSAC parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error)]
pub enum SvdError {
    #[error("perceptual grouping produced no usable hypothesis")]
    NoHypotheses,
    #[error("line detection failed: {0}")]
    Image(#[from] ImageError),
    #[error("pose initialization failed: {0}")]
    InitializationFailed(Box<SvdError>),
    #[error("pose solver: {0}")]
    Pnp(#[from] PnpError),
}

#[derive(Debug, Error)]
pub enum SilhouetteError {
    #[error("contour is degenerate: all points coincide")]
    DegenerateContour,
    #[error("silhouette database is empty")]
    EmptyDatabase,
    #[error("rendering failed: {0}")]
    Render(#[from] SceneError),
    #[error("silhouette extraction: {0}")]
    Image(#[from] ImageError),
    #[error("pose solver: {0}")]
    Pnp(#[from] PnpError),
    #[error("pose initialization failed: {0}")]
    InitializationFailed(Box<SilhouetteError>),
    #[error("database file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("projected model leaves the sensor entirely")]
    OutOfFrame,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset not found or incomplete: {0}")]
    DatasetNotFound(PathBuf),
    #[error("silhouette evaluation needs a database")]
    MissingDatabase,
    #[error("database does not match the supplied {0}")]
    DatabaseMismatch(&'static str),
    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Silhouette(#[from] SilhouetteError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl EvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl Into<String>, detail: impl ToString) -> Self {
        EvalError::Malformed {
            what: what.into(),
            detail: detail.to_string(),
        }
    }
}
