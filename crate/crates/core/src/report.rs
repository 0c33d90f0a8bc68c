//! Plain-text reports for graphs, architectures and simulation runs.

use std::fmt::Write as _;

use crate::graph::{ServiceGraph, START, TARGET};
use crate::orchestrator::Architecture;
use crate::sim::{EventResult, SimOutput};

/// Node cost table for the whole graph. Nodes on the selected path are
/// marked with `*`; the total path cost closes the table.
pub fn graph_report(graph: &ServiceGraph, arch: &Architecture) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "path: {}", arch.path.nodes.join(" -> "));
    let width = graph.nodes().iter().map(|n| n.id.len()).max().unwrap_or(0).max(4);
    let _ = writeln!(out, "  {:<width$}  {:<10}  cost", "node", "layer");
    for node in graph.nodes() {
        if node.id == START || node.id == TARGET {
            continue;
        }
        let mark = if arch.path.nodes.contains(&node.id) { '*' } else { ' ' };
        let _ = writeln!(out, "{mark} {:<width$}  {:<10}  {}", node.id, node.kind.as_str(), node.node_cost);
    }
    let _ = writeln!(out, "nodes: {}, edges: {}", graph.nodes().len(), graph.edges().len());
    let _ = writeln!(out, "total: {}", arch.path.total_cost);
    out
}

/// Selected services, their costs and the wiring plan.
pub fn architecture_report(arch: &Architecture) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "epoch: {}", arch.epoch);
    let _ = writeln!(out, "path: {}", arch.path.nodes.join(" -> "));
    for (id, cost) in arch.path.nodes.iter().zip(&arch.node_costs) {
        if id != START && id != TARGET {
            let _ = writeln!(out, "  {id}: {cost}");
        }
    }
    let _ = writeln!(out, "total: {}", arch.path.total_cost);
    let _ = writeln!(out, "wiring:");
    for c in &arch.wiring {
        let _ = writeln!(out, "  {}.{} -> {}.{}", c.provider, c.guarantee, c.consumer, c.requirement);
    }
    out
}

/// Architecture history of a simulation run followed by the event log.
pub fn epoch_report(output: &SimOutput) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "epochs: {}", output.epochs.len());
    for e in &output.epochs {
        let arch = &e.architecture;
        let services: Vec<&str> = arch.services().collect();
        let _ = writeln!(
            out,
            "epoch {} from t={}: {} (cost {})",
            arch.epoch,
            e.start,
            services.join(" -> "),
            arch.path.total_cost
        );
    }
    let _ = writeln!(out, "events: {}", output.events.len());
    for e in &output.events {
        let result = match &e.result {
            EventResult::Reconfigured { epoch } => format!("reconfigured, epoch {epoch}"),
            EventResult::Unchanged => "unchanged".to_string(),
            EventResult::Failed(msg) => format!("orchestration failed: {msg}"),
            EventResult::Rejected(msg) => format!("rejected: {msg}"),
        };
        let stale = if e.stale { " [stale]" } else { "" };
        let _ = writeln!(out, "t={}: {} -> {result}{stale}", e.time, e.description);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::create_service_graph;
    use crate::orchestrator::orchestrate;
    use crate::presets::{default_weights, evaluation_catalog};

    #[test]
    fn graph_report_lists_path_costs() {
        let cat = evaluation_catalog();
        let w = default_weights();
        let graph = create_service_graph(&cat, &w).unwrap();
        let arch = orchestrate(&cat, &w).unwrap();
        let text = graph_report(&graph, &arch);
        assert!(text.contains("* Kalman+medium"));
        assert!(text.contains("* MPC+medium"));
        assert!(text.contains("  MPC+high"));
        assert!(text.ends_with("total: 2854\n"));
    }

    #[test]
    fn architecture_report_shows_wiring() {
        let cat = evaluation_catalog();
        let arch = orchestrate(&cat, &default_weights()).unwrap();
        let text = architecture_report(&arch);
        assert!(text.contains("MPC.u -> Kalman.u"));
        assert!(text.contains("@reference.ref -> MPC.ref"));
        assert!(text.contains("medium.model -> MPC.model"));
    }
}
