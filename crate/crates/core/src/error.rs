use thiserror::Error;

use crate::graph::NodeKind;
use crate::service_model::{Functionality, ServiceKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("port compatibility needs a requirement and a guarantee")]
    PortDirection,
    #[error("unknown functionality type `{0}`")]
    UnknownFunctionality(String),
    #[error("unknown complexity level `{0}`")]
    UnknownComplexity(String),
    #[error("unknown service kind `{0}`")]
    UnknownKind(String),
    #[error("state dimension must be positive")]
    ZeroStateDimension,
    #[error("{name} must be a positive finite number, got {value}")]
    NonPositiveAttribute { name: &'static str, value: f64 },
    #[error("weight {name} must be a positive finite number, got {value}")]
    NonPositiveWeight { name: &'static str, value: f64 },
    #[error("cannot group a {0} with a model")]
    NotGroupable(ServiceKind),
    #[error("invalid service id `{0}`")]
    InvalidId(String),
    #[error("service `{id}` of kind {kind}: complexity is required for models and forbidden otherwise")]
    ComplexityMismatch { id: String, kind: ServiceKind },
    #[error("service `{id}` of kind {kind} cannot require a model")]
    RequiresModelOnKind { id: String, kind: ServiceKind },
    #[error("service `{0}` has no cost attributes")]
    MissingAttributes(String),
    #[error("service `{0}` requires a model; its cost attributes are derived from the model")]
    DerivedAttributes(String),
    #[error("service `{id}` declares functionality `{functionality}` more than once")]
    DuplicatePort { id: String, functionality: Functionality },
    #[error("service `{id}`: behavior `{behavior}` does not fit kind {kind}")]
    BehaviorKind { id: String, behavior: &'static str, kind: ServiceKind },
    #[error("duplicate service id `{0}`")]
    DuplicateId(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("model `{lower}` has a lower level but a larger state dimension than `{higher}`")]
    InconsistentComplexity { lower: String, higher: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("catalog has no {0} services")]
    EmptyLayer(NodeKind),
    #[error("service `{0}` requires a model but the catalog has none")]
    NoModelAvailable(String),
    #[error("service id `{0}` is reserved")]
    ReservedId(String),
    #[error("service `{0}` has no cost attributes")]
    MissingAttributes(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge {from} -> {to} has negative weight {weight}")]
    NegativeWeight { from: String, to: String, weight: f64 },
    #[error("expected a filter and a controller, got `{filter}` and `{controller}`")]
    KindMismatch { filter: String, controller: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge {from} -> {to} has a negative weight")]
    NegativeWeight { from: String, to: String },
    #[error("no path to `{sink}`; last reachable layer: {}", last_reachable_layer.map_or("none", |k| k.as_str()))]
    NoPath { sink: String, last_reachable_layer: Option<NodeKind> },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WiringError {
    #[error("service `{service}` has no provider for required functionality `{functionality}`")]
    Unsatisfied { service: String, functionality: Functionality },
    #[error("path node `{0}` is not backed by a catalog service")]
    UnknownService(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestrationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Wiring(#[from] WiringError),
}

/// Rejected events leave the orchestrator state untouched.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error(transparent)]
    Catalog(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("covariance is not symmetric positive semidefinite")]
    NotPsd,
    #[error("invalid plant parameter `{name}` = {value}")]
    InvalidPlant { name: &'static str, value: f64 },
    #[error("sample time must be positive, got {0}")]
    SampleTime(f64),
    #[error("MPC problem infeasible (level bound violated by {violation:.3e} m); soft-constrained fallback u = {fallback_u:.6e}")]
    Infeasible { violation: f64, fallback_u: f64 },
    #[error("MPC solver stopped after {iterations} iterations with KKT residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario refers to unknown service `{0}`")]
    UnknownService(String),
    #[error("service `{0}` is withheld and cannot be removed or updated before it is added")]
    Withheld(String),
    #[error("service `{0}` has no runtime behavior")]
    MissingBehavior(String),
    #[error("model `{id}` has state dimension {dim}; supported dimensions are 1, 2 and 3")]
    UnsupportedModel { id: String, dim: usize },
    #[error("initial orchestration failed: {0}")]
    Initial(#[from] OrchestrationError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
