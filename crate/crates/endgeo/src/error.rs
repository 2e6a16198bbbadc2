//! Error taxonomy shared by the geometry and holonomy modules.
//!
//! The split matters at the CLI boundary: variants representing malformed
//! input map to exit code 2, variants representing a mathematical condition
//! that genuinely fails on valid input map to exit code 1.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GeomError {
    #[error("zero vector cannot be normalized to a point on the sphere")]
    ZeroVector,
    #[error("matrix is singular (|det| = {det:.3e}) and has no action on the sphere")]
    SingularMatrix { det: f64 },
    #[error("points are not collinear: relative rank-3 residual {residual:.3e}")]
    NotCollinear { residual: f64 },
    #[error("degenerate cross-ratio configuration: denominator {which} vanishes")]
    DegenerateConfig { which: &'static str },
    #[error("dimension mismatch: expected ambient dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is not strictly inside the chart hemisphere (pairing {pairing:.3e})")]
    NotInHemisphere { pairing: f64 },
    #[error("body is not properly convex: {reason}")]
    NotProperlyConvex { reason: String },
    #[error("point must be interior to the body for this operation")]
    NotInterior,
    #[error("point is not on the boundary of the body")]
    NotOnBoundary,
    #[error("points coincide or are antipodal; no unique chord through them")]
    DegenerateChord,
    #[error("body is degenerate for this operation: {reason}")]
    DegenerateBody { reason: String },
    #[error("convex hull construction failed: {reason}")]
    HullFailure { reason: String },
    #[error("bodies do not lie in the given ambient chart")]
    NotInAmbient,
    #[error("join factors are not linearly independent (joint rank {rank}, expected {expected})")]
    NotIndependent { rank: usize, expected: usize },
    #[error("boundary is not strictly convex where required: {reason}")]
    NotStrictlyConvexInput { reason: String },
    #[error("eigenvalue computation did not converge")]
    EigenFailure,
    #[error("element is not proximal enough for this operation: {reason}")]
    NotProximal { reason: String },
    #[error("nearly equal top eigenvalue norms: gap {gap:.3e} below tolerance")]
    ZeroGap { gap: f64 },
    #[error("matrix does not have the required block structure at the vertex: residual {residual:.3e}")]
    NotBlockForm { residual: f64 },
    #[error("word ball exceeded the element cap of {cap}")]
    BallExplosion { cap: usize },
    #[error("element is not in the sampled ball")]
    NotInBall,
    #[error("sample contains no usable nonidentity elements")]
    EmptySample,
    #[error("no splitting consistent with the whole sample: {reason}")]
    NoConsistentSplit { reason: String },
    #[error("radial projection undefined at the tube vertex or its antipode")]
    AtVertex,
    #[error("no proximal elements in the sample ball; limit set is empty")]
    NoProximalElements,
    #[error("uniform middle eigenvalue condition fails on the sample; {violations} violations")]
    UmecFailed { violations: usize },
    #[error("hull degenerates: {reason}")]
    DegenerateHull { reason: String },
    #[error("orbit hull touches the antipode of the vertex (margin {margin:.3e})")]
    HullTouchesAntipode { margin: f64 },
    #[error("sample element does not fix the required vertex/hyperplane: residual {residual:.3e}")]
    NotFixed { residual: f64 },
    #[error("recentering failed: nearest orbit point at Hilbert distance {dist:.3} exceeds bound {bound:.3}")]
    RecenterFailure { dist: f64, bound: f64 },
    #[error("orbit accumulates at the tube vertex or its antipode (closest approach {dist:.3e})")]
    OrbitEscape { dist: f64 },
    #[error("sample element does not preserve the boundary hyperplane and domain: residual {residual:.3e}")]
    NotBoundaryPreserving { residual: f64 },
    #[error("input schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(String),
}

impl GeomError {
    /// Exit code classification for the CLI: 2 for malformed input,
    /// 1 for a mathematical failure on well-formed input.
    pub fn exit_code(&self) -> i32 {
        use GeomError::*;
        match self {
            Schema(_) | Io(_) | DimensionMismatch { .. } | ZeroVector
            | SingularMatrix { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, GeomError>;
