//! Orchestration loop: rebuild the service graph, select the cheapest path
//! and derive the wiring plan on every catalog or objective change.

use std::sync::Arc;

use crate::cost::CostWeights;
use crate::error::{EventError, OrchestrationError, WiringError};
use crate::graph::{create_service_graph, START, TARGET};
use crate::service_model::{Catalog, Functionality, ServiceDescriptor};
use crate::shortest_path::{dijkstra, PathResult};

/// Provider id used for the reference signal, which comes from
/// configuration rather than from a service.
pub const REFERENCE_BINDING: &str = "@reference";

#[derive(Debug, Clone, PartialEq)]
pub enum OrchestrationEvent {
    ServiceAdded(ServiceDescriptor),
    ServiceRemoved(String),
    ServiceUpdated(ServiceDescriptor),
    WeightsChanged(CostWeights),
}

/// A guarantee of `provider` feeding a requirement of `consumer`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Connection {
    pub provider: String,
    pub guarantee: Functionality,
    pub consumer: String,
    pub requirement: Functionality,
}

impl Connection {
    pub fn from_configuration(&self) -> bool {
        self.provider == REFERENCE_BINDING
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub path: PathResult,
    /// Cost of each node on `path`, in path order.
    pub node_costs: Vec<f64>,
    pub wiring: Vec<Connection>,
    pub epoch: u64,
}

impl Architecture {
    /// Path nodes without the start and target markers.
    pub fn services(&self) -> impl Iterator<Item = &str> + '_ {
        self.path.nodes.iter().map(String::as_str).filter(|id| *id != START && *id != TARGET)
    }
}

/// Splits a path node id into its base service and optional model.
pub fn split_node_id(id: &str) -> (&str, Option<&str>) {
    match id.split_once('+') {
        Some((base, model)) => (base, Some(model)),
        None => (id, None),
    }
}

/// Builds the graph, runs Dijkstra and wires the resulting path. The
/// returned architecture has epoch 0; [`Orchestrator`] assigns epochs.
pub fn orchestrate(catalog: &Catalog, weights: &CostWeights) -> Result<Architecture, OrchestrationError> {
    let graph = create_service_graph(catalog, weights)?;
    let path = dijkstra(&graph, START, TARGET)?;
    let node_costs = path.nodes.iter().map(|id| graph.node(id).map_or(0.0, |n| n.node_cost)).collect();
    let wiring = wiring_plan(&path, catalog)?;
    Ok(Architecture { path, node_costs, wiring, epoch: 0 })
}

/// Connects every requirement of every service on the path to one
/// compatible guarantee.
///
/// Model requirements bind to the model grouped into the same node and
/// reference requirements bind to [`REFERENCE_BINDING`]. Any other
/// requirement binds to the nearest upstream path service guaranteeing it,
/// falling back to the nearest downstream one (this is how the controller's
/// input reaches a model-based filter).
pub fn wiring_plan(path: &PathResult, catalog: &Catalog) -> Result<Vec<Connection>, WiringError> {
    let mut members: Vec<(&ServiceDescriptor, Option<&ServiceDescriptor>)> = Vec::new();
    for id in &path.nodes {
        if id == START || id == TARGET {
            continue;
        }
        let (base, model) = split_node_id(id);
        let base = catalog.get(base).ok_or_else(|| WiringError::UnknownService(id.clone()))?;
        let model = match model {
            Some(m) => Some(catalog.get(m).ok_or_else(|| WiringError::UnknownService(id.clone()))?),
            None => None,
        };
        members.push((base, model));
    }

    let mut wiring = Vec::new();
    for (pos, (service, model)) in members.iter().enumerate() {
        for requirement in service.requirements() {
            let unsatisfied = || WiringError::Unsatisfied { service: service.id.clone(), functionality: requirement };
            let provider = match requirement {
                Functionality::Model => model
                    .filter(|m| m.guarantees_functionality(Functionality::Model))
                    .map(|m| m.id.clone())
                    .ok_or_else(unsatisfied)?,
                Functionality::Reference => REFERENCE_BINDING.to_string(),
                f => {
                    let provides = |i: &usize| members[*i].0.guarantees_functionality(f);
                    let upstream = (0..pos).rev().find(provides);
                    let downstream = (pos + 1..members.len()).find(provides);
                    let i = upstream.or(downstream).ok_or_else(unsatisfied)?;
                    members[i].0.id.clone()
                }
            };
            wiring.push(Connection { provider, guarantee: requirement, consumer: service.id.clone(), requirement });
        }
    }
    Ok(wiring)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome {
    /// The selected node sequence changed; a new epoch is active.
    Reconfigured(Arc<Architecture>),
    /// Same node sequence as before; no epoch change.
    Unchanged,
    /// Orchestration failed. The previous architecture, if any, stays
    /// active and is flagged stale.
    Failed(OrchestrationError),
}

/// Single-writer orchestration state. Readers take [`Arc`] snapshots of the
/// active architecture.
#[derive(Debug, Clone)]
pub struct Orchestrator {
    catalog: Catalog,
    weights: CostWeights,
    current: Option<Arc<Architecture>>,
    stale: bool,
    epoch: u64,
}

impl Orchestrator {
    /// Creates the state without orchestrating; call [`Self::reorchestrate`]
    /// to select the first architecture.
    pub fn new(catalog: Catalog, weights: CostWeights) -> Self {
        Orchestrator { catalog, weights, current: None, stale: false, epoch: 0 }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn weights(&self) -> CostWeights {
        self.weights
    }

    pub fn current(&self) -> Option<Arc<Architecture>> {
        self.current.clone()
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn reorchestrate(&mut self) -> EventOutcome {
        match orchestrate(&self.catalog, &self.weights) {
            Ok(mut arch) => {
                self.stale = false;
                match &self.current {
                    Some(active) if active.path.nodes == arch.path.nodes => {
                        // Costs or wiring may still have moved; keep the epoch.
                        arch.epoch = active.epoch;
                        self.current = Some(Arc::new(arch));
                        EventOutcome::Unchanged
                    }
                    _ => {
                        self.epoch += 1;
                        arch.epoch = self.epoch;
                        let arch = Arc::new(arch);
                        self.current = Some(arch.clone());
                        EventOutcome::Reconfigured(arch)
                    }
                }
            }
            Err(err) => {
                self.stale = self.current.is_some();
                EventOutcome::Failed(err)
            }
        }
    }

    /// Applies one event and re-runs orchestration. Invalid events are
    /// rejected without touching the state.
    pub fn handle_event(&mut self, event: OrchestrationEvent) -> Result<EventOutcome, EventError> {
        match event {
            OrchestrationEvent::ServiceAdded(service) => {
                let mut next = self.catalog.clone();
                next.insert(service)?;
                next.check_complexity_order()?;
                self.catalog = next;
            }
            OrchestrationEvent::ServiceRemoved(id) => {
                self.catalog.remove(&id)?;
            }
            OrchestrationEvent::ServiceUpdated(service) => {
                let mut next = self.catalog.clone();
                next.replace(service)?;
                next.check_complexity_order()?;
                self.catalog = next;
            }
            OrchestrationEvent::WeightsChanged(weights) => self.weights = weights,
        }
        Ok(self.reorchestrate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service_model::{CostAttributes, ServiceKind};

    fn attrs(x: f64, y: f64) -> CostAttributes {
        CostAttributes::new(x, y).unwrap()
    }

    fn simple_catalog() -> Catalog {
        Catalog::new(vec![
            ServiceDescriptor::atomic("s", ServiceKind::Sensor, attrs(1.0, 1.0)),
            ServiceDescriptor::atomic("f", ServiceKind::Filter, attrs(1.0, 1.0)),
            ServiceDescriptor::atomic("c", ServiceKind::Controller, attrs(1.0, 1.0)),
            ServiceDescriptor::atomic("a", ServiceKind::Actuator, attrs(1.0, 1.0)),
        ])
        .unwrap()
    }

    #[test]
    fn split_ids() {
        assert_eq!(split_node_id("Kalman+medium"), ("Kalman", Some("medium")));
        assert_eq!(split_node_id("PID"), ("PID", None));
    }

    #[test]
    fn missing_guarantee_is_reported() {
        let mut cat = simple_catalog();
        let mut broken = cat.get("c").unwrap().clone();
        broken.ports.retain(|p| p.functionality != Functionality::ControlInput);
        cat.replace(broken).unwrap();
        let w = CostWeights::new(1.0, 1.0).unwrap();
        match orchestrate(&cat, &w) {
            Err(OrchestrationError::Wiring(WiringError::Unsatisfied { service, functionality })) => {
                assert_eq!(service, "a");
                assert_eq!(functionality, Functionality::ControlInput);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failure_keeps_previous_architecture() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut orch = Orchestrator::new(simple_catalog(), w);
        assert!(matches!(orch.reorchestrate(), EventOutcome::Reconfigured(_)));
        let before = orch.current().unwrap();
        let out = orch.handle_event(OrchestrationEvent::ServiceRemoved("c".into())).unwrap();
        assert!(matches!(out, EventOutcome::Failed(_)));
        assert!(orch.is_stale());
        assert_eq!(orch.current().unwrap(), before);
        assert_eq!(orch.epoch(), 1);
    }

    #[test]
    fn invalid_events_are_rejected() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut orch = Orchestrator::new(simple_catalog(), w);
        orch.reorchestrate();
        let before = orch.catalog().clone();
        assert!(orch.handle_event(OrchestrationEvent::ServiceRemoved("zzz".into())).is_err());
        let dup = ServiceDescriptor::atomic("s", ServiceKind::Sensor, attrs(1.0, 1.0));
        assert!(orch.handle_event(OrchestrationEvent::ServiceAdded(dup)).is_err());
        let ghost = ServiceDescriptor::atomic("ghost", ServiceKind::Sensor, attrs(1.0, 1.0));
        assert!(orch.handle_event(OrchestrationEvent::ServiceUpdated(ghost)).is_err());
        assert_eq!(orch.catalog(), &before);
        assert_eq!(orch.epoch(), 1);
    }

    #[test]
    fn weight_change_with_same_path_updates_costs_only() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut orch = Orchestrator::new(simple_catalog(), w);
        orch.reorchestrate();
        let out = orch.handle_event(OrchestrationEvent::WeightsChanged(CostWeights::new(2.0, 2.0).unwrap())).unwrap();
        assert_eq!(out, EventOutcome::Unchanged);
        let arch = orch.current().unwrap();
        assert_eq!(arch.epoch, 1);
        assert_eq!(arch.path.total_cost, 16.0);
    }

    #[test]
    fn recovery_after_failure_clears_stale_flag() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut orch = Orchestrator::new(simple_catalog(), w);
        orch.reorchestrate();
        orch.handle_event(OrchestrationEvent::ServiceRemoved("c".into())).unwrap();
        assert!(orch.is_stale());
        let c2 = ServiceDescriptor::atomic("c2", ServiceKind::Controller, attrs(1.0, 1.0));
        let out = orch.handle_event(OrchestrationEvent::ServiceAdded(c2)).unwrap();
        assert!(matches!(out, EventOutcome::Reconfigured(ref a) if a.epoch == 2));
        assert!(!orch.is_stale());
    }
}
