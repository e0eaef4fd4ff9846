use thiserror::Error;

use crate::tree::Vertex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("children map is not a tree: {0}")]
    CycleDetected(String),
    #[error("vertex {0:?} is not reachable from the root")]
    Disconnected(String),
    #[error("unknown cone type {0:?}")]
    UnknownType(String),
    #[error("vertex {0} not found in the expanded tree")]
    VertexNotFound(Vertex),
    #[error("malformed description: {0}")]
    Malformed(String),

    #[error("coefficients at {at} sum to {sum}, expected 1")]
    NotStochastic { at: String, sum: String },
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("arc I({0}) has zero mass")]
    ZeroMassArc(Vertex),
    #[error("function undefined at {0}")]
    MissingValue(Vertex),
    #[error("function is not harmonic at {0}")]
    NotHarmonic(Vertex),
    #[error("generation {requested} is outside the available range (max {max})")]
    GenerationOutOfRange { requested: usize, max: usize },
    #[error("measure and operator live on different trees or disagree")]
    MeasureMismatch,

    #[error("operator is not transient: fixed point reached {value} for type {cone_type}")]
    NotTransient { cone_type: String, value: f64 },
    #[error("fixed-point iteration did not reach tolerance {tol} within {iterations} iterations")]
    NoConvergence { tol: f64, iterations: usize },
    #[error("linear system for the Dirichlet problem is singular")]
    SingularSystem,
    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("no decay chain of length {length} below {from} within depth {depth_limit}")]
    NoChainWithinDepth {
        from: Vertex,
        length: usize,
        depth_limit: usize,
    },
    #[error("construction needs generation {needed}, only {available} available")]
    DepthBudgetExceeded { needed: usize, available: usize },
}
