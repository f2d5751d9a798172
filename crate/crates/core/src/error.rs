use thiserror::Error;

use crate::{NodeId, Seconds};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{file}: malformed row at line {line}: {message}")]
    Malformed {
        file: &'static str,
        line: u64,
        message: String,
    },
    #[error("edge {tail}->{head} references unknown node {node}")]
    DanglingEndpoint { tail: NodeId, head: NodeId, node: NodeId },
    #[error("edge {tail}->{head} has non-positive travel time {travel_time}")]
    NonPositiveTravelTime {
        tail: NodeId,
        head: NodeId,
        travel_time: Seconds,
    },
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge {tail}->{head}")]
    DuplicateEdge { tail: NodeId, head: NodeId },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("invalid path query {from}->{to} with k={k}")]
    InvalidPathQuery { from: NodeId, to: NodeId, k: usize },
}

#[derive(Debug, Error)]
pub enum TripsError {
    #[error("trips: malformed row at line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("trips: line {line}: participant {id}: invalid {field}: {message}")]
    Invalid {
        line: u64,
        id: String,
        field: &'static str,
        message: String,
    },
    #[error("trips: line {line}: duplicate participant id {id}")]
    DuplicateId { line: u64, id: String },
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("participant {0} cannot reach its destination within its time window")]
    Infeasible(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model construction defect: {0}")]
    Internal(String),
    #[error("participant {0} is not feasible and cannot enter the model")]
    InfeasibleParticipant(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable {name} has non-integral value {value}")]
    Fractional { name: String, value: f64 },
    #[error("decoded objective {decoded} differs from reported objective {reported}")]
    ObjectiveMismatch { decoded: f64, reported: f64 },
    #[error("route reconstruction failed for {participant}: {message}")]
    BrokenRoute { participant: String, message: String },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("row {row} cannot be settled: {message}")]
    Unsupported { row: String, message: String },
    #[error("external solver could not be started: {0}")]
    Spawn(std::io::Error),
    #[error("external solver exited with {status}: {stderr}")]
    ExternalFailed { status: String, stderr: String },
    #[error("solution file: line {line}: {message}")]
    SolutionParse { line: usize, message: String },
    #[error("external solution does not satisfy the model: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds oracle limits: {0}")]
    ExceedsLimits(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
