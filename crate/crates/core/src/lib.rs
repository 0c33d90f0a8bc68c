//! Graph-based orchestration of service-oriented control loops.
//!
//! A catalog of services (sensors, filters, controllers, actuators and LTI
//! models) is compiled into a layered, weighted service graph. The cheapest
//! start-to-target path is the active control architecture; it is
//! recomputed whenever a service is added, removed or updated, or the cost
//! weights change. A three-tank plant simulator exercises the selected
//! architectures in closed loop.

pub mod catalog_io;
pub mod control;
pub mod cost;
pub mod error;
pub mod graph;
pub mod orchestrator;
pub mod plant;
pub mod presets;
pub mod report;
pub mod service_model;
pub mod shortest_path;
pub mod sim;
pub mod verify;

pub use cost::{grouped_attributes, service_cost, CostWeights};
pub use graph::{create_service_graph, export_dot, ServiceGraph};
pub use orchestrator::{orchestrate, Architecture, EventOutcome, OrchestrationEvent, Orchestrator};
pub use service_model::{Catalog, ServiceDescriptor, ServiceKind};
pub use shortest_path::{dijkstra, PathResult};
