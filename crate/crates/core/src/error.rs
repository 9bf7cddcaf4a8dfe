use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown POI `{0}`")]
    UnknownPoi(String),
    #[error("unknown road `{0}`")]
    UnknownRoad(String),
    #[error("points coincide; azimuth is undefined")]
    CoincidentPoints,
    #[error("start and end of a route are the same POI `{0}`")]
    IdenticalEndpoints(String),
    #[error("trajectory has no steps")]
    EmptyTrajectory,
    #[error("invalid split ratio {0}:{1}")]
    InvalidRatio(u32, u32),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("need at least {needed} POIs, found {found}")]
    InsufficientPois { needed: usize, found: usize },
    #[error("candidate pool exhausted: wanted {wanted}, only {available} available")]
    PoolExhausted { wanted: usize, available: usize },
    #[error("no numeric content in answer `{0}`")]
    NoNumericContent(String),
    #[error("ground-truth displacement is zero")]
    DegenerateGroundTruth,
    #[error("path is empty")]
    EmptyPath,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ground-truth series is degenerate: {0}")]
    DegenerateTruth(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} ids, found {found}")]
    TooFewIds { needed: usize, found: usize },
    #[error("need at least {needed} records, found {found}")]
    TooFewRecords { needed: usize, found: usize },
    #[error("{0} evaluation ids also appear in training data")]
    TrainTestOverlap(usize),
    #[error("no alternative road at ({x}, {y}) admits the step")]
    NoAlternativeRoad { x: f64, y: f64 },
    #[error("no admissible replacement length (remaining distance {0:.3} km)")]
    ZeroRemainingDistance(f64),
    #[error("perturbed step leaves the grid")]
    LeavesGrid,
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
