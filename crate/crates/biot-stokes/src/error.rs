//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    BadDegree(usize),
    #[error("field violates an essential boundary condition: {0}")]
    BcViolation(String),
    #[error("point {0:?} is outside the field's box")]
    OutOfDomain([f64; 3]),
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("{0}")]
    Constraint(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("linear solve did not reach tolerance: residual {residual:e} > tol {tol:e}")]
    SolverFailure { residual: f64, tol: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("degenerate storage: the generator pencil requires c0 > 0")]
    DegenerateStorage,
    #[error("mesh exceeds the dense-algebra cap: {size} reduced unknowns > {cap}")]
    DenseCapExceeded { size: usize, cap: usize },
    #[error("dissipativity violated at sample {sample}: y^T J y = {value:e} exceeds {bound:e}")]
    ReportsViolation { sample: usize, value: f64, bound: f64 },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("initial data inconsistent: {0}")]
    InconsistentData(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
