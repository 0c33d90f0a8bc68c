//! Dijkstra's algorithm over a [`ServiceGraph`] with a deterministic
//! tie-break.
//!
//! Among all minimum-cost paths the lexicographically smallest node-id
//! sequence is returned. Costs are compared exactly: two paths tie only if
//! their floating-point totals are bit-identical.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::PathError;
use crate::graph::ServiceGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub nodes: Vec<String>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then on node index.
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn dijkstra(graph: &ServiceGraph, source: &str, sink: &str) -> Result<PathResult, PathError> {
    let src = graph.node_index(source).ok_or_else(|| PathError::UnknownNode(source.to_string()))?;
    let dst = graph.node_index(sink).ok_or_else(|| PathError::UnknownNode(sink.to_string()))?;
    let n = graph.nodes().len();

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in graph.edges() {
        if e.weight.is_nan() || e.weight < 0.0 {
            return Err(PathError::NegativeWeight { from: e.from.clone(), to: e.to.clone() });
        }
        let u = graph.node_index(&e.from).ok_or_else(|| PathError::UnknownNode(e.from.clone()))?;
        let v = graph.node_index(&e.to).ok_or_else(|| PathError::UnknownNode(e.to.clone()))?;
        adj[u].push((v, e.weight));
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Entry { cost: 0.0, node: src });
    while let Some(Entry { cost, node }) = heap.pop() {
        if settled[node] {
            continue;
        }
        settled[node] = true;
        for &(next, w) in &adj[node] {
            let candidate = cost + w;
            if candidate < dist[next] {
                dist[next] = candidate;
                heap.push(Entry { cost: candidate, node: next });
            }
        }
    }

    if !dist[dst].is_finite() {
        let last_reachable_layer =
            graph.nodes().iter().zip(&dist).filter(|(_, d)| d.is_finite()).map(|(node, _)| node.kind).max();
        return Err(PathError::NoPath { sink: sink.to_string(), last_reachable_layer });
    }

    // Tight edges lie on some shortest path from the source. Restrict them to
    // nodes that still reach the sink, then walk greedily by smallest id.
    let tight = |u: usize, v: usize, w: f64| dist[u].is_finite() && dist[u] + w == dist[v];
    let mut reaches_sink = vec![false; n];
    reaches_sink[dst] = true;
    let mut stack = vec![dst];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, outs) in adj.iter().enumerate() {
        for &(v, w) in outs {
            if tight(u, v, w) {
                preds[v].push(u);
            }
        }
    }
    while let Some(v) = stack.pop() {
        for &u in &preds[v] {
            if !reaches_sink[u] {
                reaches_sink[u] = true;
                stack.push(u);
            }
        }
    }

    let ids: Vec<&str> = graph.nodes().iter().map(|node| node.id.as_str()).collect();
    let mut path = vec![src];
    let mut visited = vec![false; n];
    visited[src] = true;
    let mut current = src;
    while current != dst {
        let next = adj[current]
            .iter()
            .filter(|&&(v, w)| tight(current, v, w) && reaches_sink[v] && !visited[v])
            .map(|&(v, _)| v)
            .min_by(|&a, &b| ids[a].cmp(ids[b]))
            .ok_or_else(|| PathError::NoPath { sink: sink.to_string(), last_reachable_layer: None })?;
        visited[next] = true;
        path.push(next);
        current = next;
    }

    Ok(PathResult { nodes: path.into_iter().map(|i| ids[i].to_string()).collect(), total_cost: dist[dst] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphEdge, GraphNode, NodeKind};

    fn node(id: &str, kind: NodeKind) -> GraphNode {
        GraphNode {
            id: id.to_string(),
            kind,
            base_service: None,
            model_service: None,
            effective_complexity: None,
            node_cost: 0.0,
        }
    }

    fn edge(from: &str, to: &str, weight: f64) -> GraphEdge {
        GraphEdge { from: from.into(), to: to.into(), weight }
    }

    fn parallel_filters(order_swapped: bool) -> ServiceGraph {
        let mut nodes = vec![
            node("start", NodeKind::Start),
            node("s", NodeKind::Sensor),
            node("fB", NodeKind::Filter),
            node("fA", NodeKind::Filter),
            node("c", NodeKind::Controller),
            node("a", NodeKind::Actuator),
            node("target", NodeKind::Target),
        ];
        let mut edges = vec![
            edge("start", "s", 1.0),
            edge("s", "fB", 2.0),
            edge("s", "fA", 2.0),
            edge("fB", "c", 3.0),
            edge("fA", "c", 3.0),
            edge("c", "a", 4.0),
            edge("a", "target", 0.0),
        ];
        if order_swapped {
            nodes.reverse();
            edges.reverse();
        }
        ServiceGraph::from_parts(nodes, edges).unwrap()
    }

    #[test]
    fn equal_cost_tie_breaks_lexicographically() {
        for swapped in [false, true] {
            let p = dijkstra(&parallel_filters(swapped), "start", "target").unwrap();
            assert_eq!(p.nodes, ["start", "s", "fA", "c", "a", "target"]);
            assert_eq!(p.total_cost, 10.0);
        }
    }

    #[test]
    fn cheaper_branch_wins_over_smaller_id() {
        let nodes = vec![
            node("start", NodeKind::Start),
            node("a", NodeKind::Sensor),
            node("b", NodeKind::Sensor),
            node("target", NodeKind::Target),
        ];
        let edges =
            vec![edge("start", "a", 5.0), edge("start", "b", 1.0), edge("a", "target", 0.0), edge("b", "target", 0.0)];
        let g = ServiceGraph::from_parts(nodes, edges).unwrap();
        let p = dijkstra(&g, "start", "target").unwrap();
        assert_eq!(p.nodes, ["start", "b", "target"]);
        assert_eq!(p.total_cost, 1.0);
    }

    #[test]
    fn tie_break_skips_dead_ends() {
        // "a" is a tight successor of start but cannot reach the target.
        let nodes = vec![
            node("start", NodeKind::Start),
            node("a", NodeKind::Sensor),
            node("b", NodeKind::Sensor),
            node("target", NodeKind::Target),
        ];
        let edges = vec![edge("start", "a", 1.0), edge("start", "b", 1.0), edge("b", "target", 0.0)];
        let g = ServiceGraph::from_parts(nodes, edges).unwrap();
        assert_eq!(dijkstra(&g, "start", "target").unwrap().nodes, ["start", "b", "target"]);
    }

    #[test]
    fn unreachable_sink_reports_last_layer() {
        let nodes = vec![
            node("start", NodeKind::Start),
            node("s", NodeKind::Sensor),
            node("f", NodeKind::Filter),
            node("a", NodeKind::Actuator),
            node("target", NodeKind::Target),
        ];
        let edges = vec![edge("start", "s", 1.0), edge("s", "f", 1.0), edge("a", "target", 0.0)];
        let g = ServiceGraph::from_parts(nodes, edges).unwrap();
        match dijkstra(&g, "start", "target") {
            Err(PathError::NoPath { last_reachable_layer, .. }) => {
                assert_eq!(last_reachable_layer, Some(NodeKind::Filter))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_endpoints() {
        let g = parallel_filters(false);
        assert!(matches!(dijkstra(&g, "nope", "target"), Err(PathError::UnknownNode(_))));
        assert!(matches!(dijkstra(&g, "start", "nope"), Err(PathError::UnknownNode(_))));
    }

    #[test]
    fn source_equals_sink() {
        let g = parallel_filters(false);
        let p = dijkstra(&g, "c", "c").unwrap();
        assert_eq!(p.nodes, ["c"]);
        assert_eq!(p.total_cost, 0.0);
    }
}
