//! Weighted, layered service graph built from a catalog, plus DOT export.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use crate::cost::{grouped_attributes, service_cost, CostWeights};
use crate::error::GraphError;
use crate::service_model::{complexity_geq, Catalog, ComplexityLevel, ModelComplexity, ServiceDescriptor, ServiceKind};

pub const START: &str = "start";
pub const TARGET: &str = "target";

/// Graph layer a node belongs to. Edges only connect consecutive layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Start,
    Sensor,
    Filter,
    Controller,
    Actuator,
    Target,
}

impl NodeKind {
    pub fn layer(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Start => "start",
            NodeKind::Sensor => "sensor",
            NodeKind::Filter => "filter",
            NodeKind::Controller => "controller",
            NodeKind::Actuator => "actuator",
            NodeKind::Target => "target",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub base_service: Option<String>,
    pub model_service: Option<String>,
    /// `None` for model-free filters/controllers and non-model layers.
    pub effective_complexity: Option<ModelComplexity>,
    pub node_cost: f64,
}

impl GraphNode {
    fn terminal(id: &str, kind: NodeKind) -> Self {
        GraphNode {
            id: id.to_string(),
            kind,
            base_service: None,
            model_service: None,
            effective_complexity: None,
            node_cost: 0.0,
        }
    }

    pub fn complexity_level(&self) -> Option<ComplexityLevel> {
        self.effective_complexity.map(|c| c.level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    index: HashMap<String, usize>,
}

impl ServiceGraph {
    /// Assembles a graph from raw parts, checking id uniqueness, endpoint
    /// existence and nonnegative weights.
    pub fn from_parts(nodes: Vec<GraphNode>, edges: Vec<GraphEdge>) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.id.clone()));
            }
        }
        for edge in &edges {
            for end in [&edge.from, &edge.to] {
                if !index.contains_key(end) {
                    return Err(GraphError::UnknownNode(end.clone()));
                }
            }
            if edge.weight.is_nan() || edge.weight < 0.0 {
                return Err(GraphError::NegativeWeight {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                    weight: edge.weight,
                });
            }
        }
        Ok(ServiceGraph { nodes, edges, index })
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Kahn topological sort; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            let (u, v) = (self.index[&e.from], self.index[&e.to]);
            indegree[v] += 1;
            succ[u].push(v);
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop() {
            order.push(u);
            for &v in &succ[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.push(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Every edge joins a layer to the one immediately after it.
    pub fn is_layered(&self) -> bool {
        self.edges.iter().all(|e| {
            let from = self.nodes[self.index[&e.from]].kind.layer();
            let to = self.nodes[self.index[&e.to]].kind.layer();
            to == from + 1
        })
    }
}

/// Filter/controller compatibility: a model-free controller accepts any
/// filter; a model-based controller needs a model-based filter of at least
/// the same complexity.
pub fn filter_controller_compatible(f: &GraphNode, c: &GraphNode) -> Result<bool, GraphError> {
    if f.kind != NodeKind::Filter || c.kind != NodeKind::Controller {
        return Err(GraphError::KindMismatch { filter: f.id.clone(), controller: c.id.clone() });
    }
    Ok(match (f.effective_complexity, c.effective_complexity) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(fc), Some(cc)) => complexity_geq(fc, cc),
    })
}

pub fn grouped_node_id(base: &str, model: &str) -> String {
    format!("{base}+{model}")
}

/// Builds the service graph for a catalog under the given weights.
pub fn create_service_graph(catalog: &Catalog, weights: &CostWeights) -> Result<ServiceGraph, GraphError> {
    for service in catalog.services() {
        if service.id == START || service.id == TARGET {
            return Err(GraphError::ReservedId(service.id.clone()));
        }
    }
    let sensors: Vec<_> = catalog.of_kind(ServiceKind::Sensor).collect();
    let actuators: Vec<_> = catalog.of_kind(ServiceKind::Actuator).collect();
    let models: Vec<_> = catalog.of_kind(ServiceKind::Model).collect();
    if sensors.is_empty() {
        return Err(GraphError::EmptyLayer(NodeKind::Sensor));
    }
    if actuators.is_empty() {
        return Err(GraphError::EmptyLayer(NodeKind::Actuator));
    }

    let mut nodes = vec![GraphNode::terminal(START, NodeKind::Start)];
    let mut edges = Vec::new();

    let sensor_nodes: Vec<GraphNode> =
        sensors.iter().map(|s| atomic_node(s, NodeKind::Sensor, weights)).collect::<Result<_, _>>()?;
    for s in &sensor_nodes {
        edges.push((START.to_string(), s.id.clone()));
    }

    let filter_nodes = expand_layer(catalog, ServiceKind::Filter, NodeKind::Filter, &models, weights)?;
    for f in &filter_nodes {
        for s in &sensor_nodes {
            edges.push((s.id.clone(), f.id.clone()));
        }
    }

    let controller_nodes = expand_layer(catalog, ServiceKind::Controller, NodeKind::Controller, &models, weights)?;
    for c in &controller_nodes {
        for f in &filter_nodes {
            if filter_controller_compatible(f, c)? {
                edges.push((f.id.clone(), c.id.clone()));
            }
        }
    }

    let actuator_nodes: Vec<GraphNode> =
        actuators.iter().map(|a| atomic_node(a, NodeKind::Actuator, weights)).collect::<Result<_, _>>()?;
    for a in &actuator_nodes {
        for c in &controller_nodes {
            edges.push((c.id.clone(), a.id.clone()));
        }
    }
    for a in &actuator_nodes {
        edges.push((a.id.clone(), TARGET.to_string()));
    }

    nodes.extend(sensor_nodes);
    nodes.extend(filter_nodes);
    nodes.extend(controller_nodes);
    nodes.extend(actuator_nodes);
    nodes.push(GraphNode::terminal(TARGET, NodeKind::Target));

    // Every incoming edge carries the cost of choosing its destination.
    let cost_of: HashMap<&str, f64> = nodes.iter().map(|n| (n.id.as_str(), n.node_cost)).collect();
    let edges = edges
        .into_iter()
        .map(|(from, to)| {
            let weight = cost_of[to.as_str()];
            GraphEdge { from, to, weight }
        })
        .collect();
    ServiceGraph::from_parts(nodes, edges)
}

fn atomic_node(service: &ServiceDescriptor, kind: NodeKind, weights: &CostWeights) -> Result<GraphNode, GraphError> {
    let attrs = service.attrs.as_ref().ok_or_else(|| GraphError::MissingAttributes(service.id.clone()))?;
    Ok(GraphNode {
        id: service.id.clone(),
        kind,
        base_service: Some(service.id.clone()),
        model_service: None,
        effective_complexity: None,
        node_cost: service_cost(attrs, weights),
    })
}

fn expand_layer(
    catalog: &Catalog,
    service_kind: ServiceKind,
    node_kind: NodeKind,
    models: &[&ServiceDescriptor],
    weights: &CostWeights,
) -> Result<Vec<GraphNode>, GraphError> {
    let mut out = Vec::new();
    for service in catalog.of_kind(service_kind) {
        if !service.requires_model {
            out.push(atomic_node(service, node_kind, weights)?);
            continue;
        }
        if models.is_empty() {
            return Err(GraphError::NoModelAvailable(service.id.clone()));
        }
        for model in models {
            let model_attrs = model.attrs.as_ref().ok_or_else(|| GraphError::MissingAttributes(model.id.clone()))?;
            let attrs = grouped_attributes(service_kind, model_attrs)?;
            out.push(GraphNode {
                id: grouped_node_id(&service.id, &model.id),
                kind: node_kind,
                base_service: Some(service.id.clone()),
                model_service: Some(model.id.clone()),
                effective_complexity: model.complexity,
                node_cost: service_cost(&attrs, weights),
            });
        }
    }
    Ok(out)
}

/// Renders the graph as Graphviz DOT. Nodes and edges on `highlight` (a node
/// sequence) are drawn red and bold. Output is a pure function of the inputs.
pub fn export_dot(graph: &ServiceGraph, highlight: Option<&[String]>) -> Result<String, GraphError> {
    let mut on_path = HashSet::new();
    let mut path_edges = HashSet::new();
    if let Some(path) = highlight {
        for id in path {
            if graph.node(id).is_none() {
                return Err(GraphError::UnknownNode(id.clone()));
            }
            on_path.insert(id.as_str());
        }
        for pair in path.windows(2) {
            path_edges.insert((pair[0].as_str(), pair[1].as_str()));
        }
    }

    let mut out = String::new();
    out.push_str("digraph service_graph {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box];\n");
    for node in graph.nodes() {
        let _ = write!(out, "  \"{}\" [label=\"{} ({})\"", node.id, node.id, node.node_cost);
        if on_path.contains(node.id.as_str()) {
            out.push_str(", color=red, penwidth=2");
        }
        out.push_str("];\n");
    }
    for edge in graph.edges() {
        let _ = write!(out, "  \"{}\" -> \"{}\" [label=\"{}\"", edge.from, edge.to, edge.weight);
        if path_edges.contains(&(edge.from.as_str(), edge.to.as_str())) {
            out.push_str(", color=red, penwidth=2");
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service_model::CostAttributes;

    fn attrs(x: f64, y: f64) -> CostAttributes {
        CostAttributes::new(x, y).unwrap()
    }

    fn chain_catalog() -> Catalog {
        Catalog::new(vec![
            ServiceDescriptor::atomic("s", ServiceKind::Sensor, attrs(1.0, 1.0)),
            ServiceDescriptor::atomic("f", ServiceKind::Filter, attrs(2.0, 1.0)),
            ServiceDescriptor::atomic("c", ServiceKind::Controller, attrs(3.0, 1.0)),
            ServiceDescriptor::atomic("a", ServiceKind::Actuator, attrs(4.0, 1.0)),
        ])
        .unwrap()
    }

    fn node(kind: NodeKind, level: Option<ComplexityLevel>) -> GraphNode {
        GraphNode {
            id: format!("{kind}-{level:?}"),
            kind,
            base_service: None,
            model_service: None,
            effective_complexity: level.map(ModelComplexity::with_default_dimension),
            node_cost: 0.0,
        }
    }

    #[test]
    fn single_chain() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let g = create_service_graph(&chain_catalog(), &w).unwrap();
        assert_eq!(g.nodes().len(), 6);
        assert_eq!(g.edges().len(), 5);
        assert!(g.topological_order().is_some());
        assert!(g.is_layered());
        assert_eq!(g.edge("a", TARGET).unwrap().weight, 0.0);
        assert_eq!(g.edge("f", "c").unwrap().weight, 4.0);
    }

    #[test]
    fn compatibility_rules() {
        use ComplexityLevel::*;
        let f = |l| node(NodeKind::Filter, l);
        let c = |l| node(NodeKind::Controller, l);
        assert!(!filter_controller_compatible(&f(Some(Low)), &c(Some(Medium))).unwrap());
        assert!(filter_controller_compatible(&f(None), &c(None)).unwrap());
        assert!(filter_controller_compatible(&f(Some(High)), &c(Some(Low))).unwrap());
        assert!(filter_controller_compatible(&f(Some(Low)), &c(None)).unwrap());
        assert!(!filter_controller_compatible(&f(None), &c(Some(Low))).unwrap());
        assert!(filter_controller_compatible(&c(None), &f(None)).is_err());
    }

    #[test]
    fn missing_layers_are_named() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut cat = chain_catalog();
        cat.remove("s").unwrap();
        assert!(matches!(create_service_graph(&cat, &w), Err(GraphError::EmptyLayer(NodeKind::Sensor))));
        let mut cat = chain_catalog();
        cat.remove("a").unwrap();
        assert!(matches!(create_service_graph(&cat, &w), Err(GraphError::EmptyLayer(NodeKind::Actuator))));
    }

    #[test]
    fn model_based_service_needs_a_model() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut cat = chain_catalog();
        cat.insert(ServiceDescriptor::model_based("kf", ServiceKind::Filter)).unwrap();
        assert!(matches!(
            create_service_graph(&cat, &w),
            Err(GraphError::NoModelAvailable(id)) if id == "kf"
        ));
    }

    #[test]
    fn reserved_ids_rejected() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let mut cat = chain_catalog();
        cat.insert(ServiceDescriptor::atomic(START, ServiceKind::Sensor, attrs(1.0, 1.0))).unwrap();
        assert!(matches!(create_service_graph(&cat, &w), Err(GraphError::ReservedId(_))));
    }

    #[test]
    fn dot_for_chain() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let g = create_service_graph(&chain_catalog(), &w).unwrap();
        let dot = export_dot(&g, None).unwrap();
        let edges = dot.lines().filter(|l| l.contains("->")).count();
        let nodes = dot.lines().filter(|l| l.contains("[label=") && !l.contains("->")).count();
        assert_eq!((nodes, edges), (6, 5));
        assert!(dot.contains("\"f\" [label=\"f (3)\"];"));
        assert!(dot.ends_with("}\n"));
        assert!(!dot.contains("color=red"));
    }

    #[test]
    fn dot_highlight() {
        let w = CostWeights::new(1.0, 1.0).unwrap();
        let g = create_service_graph(&chain_catalog(), &w).unwrap();
        let path: Vec<String> = [START, "s", "f", "c", "a", TARGET].iter().map(|s| s.to_string()).collect();
        let dot = export_dot(&g, Some(&path)).unwrap();
        assert_eq!(dot.matches("color=red").count(), 11);
        assert_eq!(dot, export_dot(&g, Some(&path)).unwrap());

        let bad = vec!["nope".to_string()];
        assert!(matches!(export_dot(&g, Some(&bad)), Err(GraphError::UnknownNode(_))));
    }

    #[test]
    fn negative_weights_rejected() {
        let nodes = vec![GraphNode::terminal("a", NodeKind::Start), GraphNode::terminal("b", NodeKind::Target)];
        let edges = vec![GraphEdge { from: "a".into(), to: "b".into(), weight: -1.0 }];
        assert!(matches!(ServiceGraph::from_parts(nodes, edges), Err(GraphError::NegativeWeight { .. })));
    }
}
