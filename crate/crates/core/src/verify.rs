//! Randomized cross-check of graph search against brute-force enumeration.
//!
//! The oracle never builds a service graph: it enumerates every
//! sensor/filter/controller/actuator combination (with every model choice
//! for model-based services) straight from the catalog, applies the
//! compatibility rule and sums the costs. Catalogs use small integer
//! attributes and weights so both sides must agree exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::CostWeights;
use crate::error::{GraphError, PathError};
use crate::graph::{create_service_graph, ServiceGraph, START, TARGET};
use crate::service_model::{Catalog, ComplexityLevel, CostAttributes, ModelComplexity, ServiceDescriptor, ServiceKind};
use crate::shortest_path::{dijkstra, PathResult};

pub const MAX_PER_LAYER: usize = 5;
pub const MAX_MODELS: usize = 3;
pub const MAX_ATTRIBUTE: u32 = 20;

fn attrs(rng: &mut impl Rng) -> CostAttributes {
    let x = rng.gen_range(1..=MAX_ATTRIBUTE) as f64;
    let y = rng.gen_range(1..=MAX_ATTRIBUTE) as f64;
    CostAttributes::new(x, y).expect("positive integers")
}

/// Random catalog with 1..=5 services per layer, 0..=3 models and integer
/// attributes. Filters and controllers are model-based with probability
/// one half when models exist.
pub fn random_catalog(rng: &mut impl Rng) -> Catalog {
    let models = rng.gen_range(0..=MAX_MODELS);
    let mut services = Vec::new();
    for (prefix, kind) in [
        ("s", ServiceKind::Sensor),
        ("f", ServiceKind::Filter),
        ("c", ServiceKind::Controller),
        ("a", ServiceKind::Actuator),
    ] {
        for i in 0..rng.gen_range(1..=MAX_PER_LAYER) {
            let id = format!("{prefix}{i}");
            let model_based =
                matches!(kind, ServiceKind::Filter | ServiceKind::Controller) && models > 0 && rng.gen_bool(0.5);
            services.push(if model_based {
                ServiceDescriptor::model_based(&id, kind)
            } else {
                ServiceDescriptor::atomic(&id, kind, attrs(rng))
            });
        }
    }
    for i in 0..models {
        let level = [ComplexityLevel::Low, ComplexityLevel::Medium, ComplexityLevel::High][rng.gen_range(0..3)];
        services.push(ServiceDescriptor::model(
            &format!("m{i}"),
            attrs(rng),
            ModelComplexity::with_default_dimension(level),
        ));
    }
    Catalog::new(services).expect("generated catalog is valid")
}

/// Random integer weights in `1..=10`.
pub fn random_weights(rng: &mut impl Rng) -> CostWeights {
    CostWeights::new(rng.gen_range(1..=10) as f64, rng.gen_range(1..=10) as f64).expect("positive integers")
}

/// One filter or controller choice: `(cost, model level)`; the level is
/// `None` for model-free services.
fn variants(catalog: &Catalog, kind: ServiceKind, w: &CostWeights) -> Vec<(f64, Option<ComplexityLevel>)> {
    let (a, b) = (w.alpha_comp(), w.beta_inacc());
    let exponent = if kind == ServiceKind::Filter { 3 } else { 2 };
    let mut out = Vec::new();
    for s in catalog.of_kind(kind) {
        if s.requires_model {
            for m in catalog.of_kind(ServiceKind::Model) {
                let ma = m.attrs.expect("models carry attributes");
                let level = m.complexity.expect("models carry a complexity").level;
                let x = ma.x_comp().powi(exponent);
                out.push((a * x + b * ma.y_inacc(), Some(level)));
            }
        } else {
            let sa = s.attrs.expect("model-free services carry attributes");
            out.push((a * sa.x_comp() + b * sa.y_inacc(), None));
        }
    }
    out
}

fn plain_costs(catalog: &Catalog, kind: ServiceKind, w: &CostWeights) -> Vec<f64> {
    catalog
        .of_kind(kind)
        .map(|s| {
            let sa = s.attrs.expect("atomic services carry attributes");
            w.alpha_comp() * sa.x_comp() + w.beta_inacc() * sa.y_inacc()
        })
        .collect()
}

/// Cheapest total cost over all compatible combinations, or `None` when no
/// combination is compatible.
pub fn brute_force_cost(catalog: &Catalog, w: &CostWeights) -> Option<f64> {
    let sensors = plain_costs(catalog, ServiceKind::Sensor, w);
    let actuators = plain_costs(catalog, ServiceKind::Actuator, w);
    let filters = variants(catalog, ServiceKind::Filter, w);
    let controllers = variants(catalog, ServiceKind::Controller, w);
    let mut best: Option<f64> = None;
    for s in &sensors {
        for (fc, fl) in &filters {
            for (cc, cl) in &controllers {
                let compatible = match (fl, cl) {
                    (_, None) => true,
                    (None, Some(_)) => false,
                    (Some(f), Some(c)) => f >= c,
                };
                if !compatible {
                    continue;
                }
                for a in &actuators {
                    let total = s + fc + cc + a;
                    best = Some(best.map_or(total, |b| b.min(total)));
                }
            }
        }
    }
    best
}

pub type Solver<'a> = &'a dyn Fn(&ServiceGraph) -> Result<PathResult, PathError>;

/// The production solver: Dijkstra from start to target.
pub fn dijkstra_solver(graph: &ServiceGraph) -> Result<PathResult, PathError> {
    dijkstra(graph, START, TARGET)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub index: usize,
    pub catalog: Catalog,
    pub weights: CostWeights,
    pub expected: Option<f64>,
    pub actual: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub total: usize,
    pub matched: usize,
    /// Catalogs without any compatible combination.
    pub without_path: usize,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Solver result for one catalog as a total cost, checking that the
/// reported path really exists in the graph with that cost.
fn solve(catalog: &Catalog, w: &CostWeights, solver: Solver<'_>) -> Result<Option<f64>, String> {
    let graph = match create_service_graph(catalog, w) {
        Ok(g) => g,
        Err(GraphError::EmptyLayer(_)) => return Ok(None),
        Err(e) => return Err(e.to_string()),
    };
    match solver(&graph) {
        Ok(path) => {
            let mut sum = 0.0;
            for pair in path.nodes.windows(2) {
                let edge = graph
                    .edge(&pair[0], &pair[1])
                    .ok_or_else(|| format!("path uses missing edge {} -> {}", pair[0], pair[1]))?;
                sum += edge.weight;
            }
            if path.nodes.first().map(String::as_str) != Some(START)
                || path.nodes.last().map(String::as_str) != Some(TARGET)
            {
                return Err("path does not run from start to target".into());
            }
            if sum != path.total_cost {
                return Err(format!("reported cost {} but edges sum to {sum}", path.total_cost));
            }
            Ok(Some(path.total_cost))
        }
        Err(PathError::NoPath { .. }) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

/// Generates `count` catalogs from `seed` and compares `solver` with the
/// brute-force oracle on each.
pub fn run_verification(count: usize, seed: u64, solver: Solver<'_>) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport { total: count, ..VerifyReport::default() };
    for index in 0..count {
        let catalog = random_catalog(&mut rng);
        let weights = random_weights(&mut rng);
        let expected = brute_force_cost(&catalog, &weights);
        let actual = solve(&catalog, &weights, solver);
        if expected.is_none() {
            report.without_path += 1;
        }
        if actual.as_ref() == Ok(&expected) {
            report.matched += 1;
        } else {
            report.mismatches.push(Mismatch {
                index,
                catalog,
                weights,
                expected,
                actual: actual.map(|a| a.unwrap_or(f64::NAN)),
            });
        }
    }
    report
}
