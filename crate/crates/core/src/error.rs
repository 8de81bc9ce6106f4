use thiserror::Error;

/// Errors produced across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange { index: usize, vertex_count: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown hand profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate rotation encoding: {0}")]
    DegenerateRotation(String),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("initial hand penetration {depth:.4} m exceeds limit at push start")]
    InitialPenetration { depth: f64 },
    #[error("simulation step {0} m out of range (0, 0.005]")]
    BadStep(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no feasible candidate")]
    NoFeasibleCandidate,
    #[error("no path found")]
    NoPath,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
