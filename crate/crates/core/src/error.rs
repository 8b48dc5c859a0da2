//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate triangle: area {area:.3e} below tolerance {tol:.3e}")]
    DegenerateTriangle { area: f64, tol: f64 },

    #[error("cell {cell} is degenerate: area {area:.3e} below tolerance {tol:.3e}")]
    DegenerateCell { cell: usize, area: f64, tol: f64 },

    #[error("mesh is invalid: {0}")]
    InvalidMesh(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("spaces are built on different meshes")]
    MeshMismatch,

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("eigensolver failed: {0}")]
    EigSolver(String),

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error(
        "problem too large for the dense eigensolver ({pressure_dofs} pressure dofs > {limit}); \
         request iterative mode"
    )]
    FeasibilityGuard { pressure_dofs: usize, limit: usize },
}
