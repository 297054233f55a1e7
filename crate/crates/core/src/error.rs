use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classes used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed files, unsupported hypersurfaces, invalid parameters.
    Validation,
    /// A numerical procedure could not produce a trustworthy answer.
    Numerical,
    /// I/O and serialization failures.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("canonical bundle not positive: degree {degree} <= {ambient} + 1")]
    CanonicalNotPositive { degree: u32, ambient: usize },

    #[error("operation requires a hypersurface of complex dimension {expected}, got {got}")]
    UnsupportedDimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is within the singular threshold of the hypersurface (|grad F| = {0:e})")]
    SingularPoint(f64),

    #[error("root finding failed on a sampling line")]
    RootFinding,

    #[error("empty or elusive real locus: no real intersections after {lines} lines")]
    EmptyRealLocus { lines: usize },

    #[error("quadrature too coarse: Gram matrix not positive definite (pivot {pivot:e} at {index})")]
    QuadratureTooCoarse { index: usize, pivot: f64 },

    #[error("Gram matrix is not real (max imaginary part {0:e})")]
    NonRealGram(f64),

    #[error("base point of the linear system (density {0:e})")]
    BasePoint(f64),

    #[error("frame degenerate at point; switch chart (|z_c| = {chart_coord:e}, |dF/dz_l| = {partial:e})")]
    ChartDegenerate { chart_coord: f64, partial: f64 },

    #[error("finite-difference stencil left the chart")]
    StencilOutsideChart,

    #[error("projection onto the hypersurface did not converge (residual {0:e})")]
    ProjectionFailed(f64),

    #[error("monodromy obstruction: loop not liftable (root defect {defect})")]
    MonodromyObstruction { defect: Complex64 },

    #[error("homotopy crosses divisor neighborhood at step {step}, vertex {vertex} (proximity {proximity:e} < floor {floor:e})")]
    GuardViolation {
        step: usize,
        vertex: usize,
        proximity: f64,
        floor: f64,
    },

    #[error("branch tracking could not resolve the phase after {0} bisections")]
    BranchResolution(usize),

    #[error("real locus ordering failed: {0}")]
    Ordering(String),

    #[error("degenerate frame generation")]
    DegenerateFrame,

    #[error("empty sample pool")]
    EmptyPool,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            DimensionMismatch { .. }
            | InvalidPolynomial(_)
            | CanonicalNotPositive { .. }
            | UnsupportedDimension { .. }
            | InvalidParameter(_)
            | EmptyRealLocus { .. }
            | Parse { .. } => ErrorClass::Validation,
            Io(_) | Csv(_) | Json(_) => ErrorClass::Internal,
            _ => ErrorClass::Numerical,
        }
    }
}
