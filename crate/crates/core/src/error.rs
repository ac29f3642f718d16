use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve parameters: {0}")]
    InvalidCurve(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("meshing failed near ({x:.4}, {y:.4}): {reason}")]
    Meshing { x: f64, y: f64, reason: String },

    #[error("degenerate triangle {element} (area {area:e})")]
    DegenerateElement { element: usize, area: f64 },

    #[error("boundary edge {edge} has no curve parameters")]
    UnlinkedBoundaryEdge { edge: usize },

    #[error("negative boundary value {value:e} at vertex {vertex} with non-integer exponent {p}")]
    NegativeTrace { vertex: usize, value: f64, p: f64 },

    #[error("point ({x:.6e}, {y:.6e}) lies outside the mesh")]
    OutsideDomain { x: f64, y: f64 },

    #[error("point lies outside the chart validity radius {radius:e}")]
    OutsideChart { radius: f64 },

    #[error("linear solver failure: {0}")]
    LinearSolve(String),

    #[error("Newton did not converge in {iterations} iterations (last residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("converged to zero solution (sup norm {sup_norm:e} after {iterations} iterations)")]
    ZeroSolution { iterations: usize, sup_norm: f64 },

    #[error("solution lies within {distance:e} of a deflated solution")]
    Deflated { distance: f64 },

    #[error("branch collapsed to fewer peaks: expected {expected}, found {found}")]
    PeakCollapse { expected: usize, found: usize },

    #[error("continuation failed at p = {p}: {source}")]
    Continuation {
        p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no concentration detected")]
    NoConcentration,

    #[error("peak unresolved by mesh (ε = {epsilon:e}, local size {local_size:e}): increase grading or lower p")]
    UnresolvedPeak { epsilon: f64, local_size: f64 },

    #[error("integration radius {radius} overlaps another peak")]
    OverlappingPeaks { radius: f64 },

    #[error("singular point: evaluation at the Green source")]
    SingularPoint,

    #[error("quadrature did not converge near the source: {0}")]
    Quadrature(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
