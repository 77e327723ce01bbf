use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("warped quad is not convex")]
    NonConvexResult,
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("invalid pitch model: {0}")]
    InvalidModel(String),
    #[error("rendered view is empty")]
    EmptyRender,

    #[error("quad side lines are parallel")]
    ParallelSides,
    #[error("degenerate quad: {0}")]
    DegenerateQuad(String),
    #[error("no valid dictionary entries")]
    NoValidEntries,
    #[error("invalid PTZ grid: {0}")]
    InvalidGrid(String),

    #[error("edge map has no set pixels")]
    EmptyEdgeMap,
    #[error("template has no set pixels")]
    EmptyTemplate,
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("bad HOG geometry: {0}")]
    BadGeometry(String),

    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("k must be at least 1")]
    InvalidK,

    #[error("field not found: mask covers {fraction:.3} of the frame")]
    FieldNotFound { fraction: f64 },
    #[error("invalid preprocess config: {0}")]
    InvalidConfig(String),

    #[error("bisector does not cross the {0} clipping edge")]
    BisectorMiss(&'static str),
    #[error("invalid camera parameters: {0}")]
    InvalidParams(String),
    #[error("homography cannot be normalized (m22 = 0)")]
    NormalizationImpossible,
    #[error("frame {0} has no candidates")]
    EmptyCandidates(usize),
    #[error("stabilizer diverged: {0}")]
    SolverDiverged(String),
    #[error("sequence too short: need at least {needed} frames, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("test seed {0} overlaps a dictionary seed")]
    SeedOverlap(String),
    #[error("no queries to evaluate")]
    EmptyQueries,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("bad file format: {0}")]
    Format(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
