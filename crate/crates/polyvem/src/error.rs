//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A polygonal face whose vertices are (numerically) collinear.
    #[error("degenerate face: {0}")]
    DegenerateFace(String),

    /// Centroid-fan decomposition hit a negative tetrahedron.
    #[error("requires user-supplied decomposition: {0}")]
    NotStarConvex(String),

    /// Inscribed-ball computation on a non-convex element.
    #[error("A3 check supported for convex elements only")]
    NonConvexElement,

    /// Element too degenerate for the local projector (singular Gram matrix).
    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    /// Surface stiffness singular beyond the constant nullspace.
    #[error("disconnected boundary triangulation")]
    DisconnectedBoundary,

    /// Mesh construction produced inconsistent neighbor cuts.
    #[error("non-matching faces between elements {0} and {1}")]
    NonMatchingFaces(usize, usize),

    /// Interface trace on a single face is not a simple chord.
    #[error("degenerate interface trace on element {0}: {1}")]
    DegenerateTrace(usize, String),

    /// Quasi-interpolation patch with rank-deficient quadrature.
    #[error("rank-deficient patch quadrature")]
    RankDeficientPatch,

    /// Iterative solver ran out of iterations; carries the best residual.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverStalled { iterations: usize, residual: f64 },

    /// A vertex that belongs to no element.
    #[error("dangling DoF at vertex {0}")]
    DanglingDof(usize),

    /// Invalid run configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed mesh file.
    #[error("mesh parse error: {0}")]
    MeshParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
