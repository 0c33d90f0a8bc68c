//! The evaluation catalog and the three demo scenarios, built in code.
//!
//! The same content ships as text under `data/`; tests check that both agree.

use crate::catalog_io::{BehaviorDefaults, ScenarioAction, SimScenario, TimedEvent, DEFAULT_PRIOR_VARIANCE};
use crate::cost::CostWeights;
use crate::plant::PlantParams;
use crate::service_model::{
    Behavior, Catalog, ComplexityLevel, CostAttributes, ModelComplexity, ServiceDescriptor, ServiceKind,
};

pub const EVALUATION_CATALOG: &str = include_str!("../data/evaluation.catalog");
pub const SCENARIO1: &str = include_str!("../data/scenario1.scenario");
pub const SCENARIO2: &str = include_str!("../data/scenario2.scenario");
pub const SCENARIO3: &str = include_str!("../data/scenario3.scenario");

/// Ids of the model-predictive controllers added at runtime in scenario 2.
pub const MPC_SERVICES: &[&str] = &["MPC"];

fn attrs(x: f64, y: f64) -> CostAttributes {
    CostAttributes::new(x, y).expect("preset attributes are positive")
}

/// Sensor, Kalman filter, converter, three models, PID, MPC and actuator.
pub fn evaluation_catalog() -> Catalog {
    let d = BehaviorDefaults::default();
    let model = |id: &str, x: f64, y: f64, level| {
        ServiceDescriptor::model(id, attrs(x, y), ModelComplexity::with_default_dimension(level))
            .with_behavior(Behavior::Lti)
    };
    Catalog::new(vec![
        ServiceDescriptor::atomic("Sensor", ServiceKind::Sensor, attrs(2.0, 9.0))
            .with_behavior(Behavior::Sensor { noise_std: d.noise_std }),
        ServiceDescriptor::model_based("Kalman", ServiceKind::Filter)
            .with_behavior(Behavior::Kalman { q: d.kalman_q, r: d.kalman_r }),
        ServiceDescriptor::atomic("Converter", ServiceKind::Filter, attrs(1.0, 11.0))
            .with_behavior(Behavior::Converter),
        model("low", 2.0, 10.0, ComplexityLevel::Low),
        model("medium", 5.0, 5.0, ComplexityLevel::Medium),
        model("high", 10.0, 1.0, ComplexityLevel::High),
        ServiceDescriptor::atomic("PID", ServiceKind::Controller, attrs(1.0, 11.0)).with_behavior(Behavior::Pid {
            kp: d.kp,
            ki: d.ki,
            kd: d.kd,
        }),
        ServiceDescriptor::model_based("MPC", ServiceKind::Controller).with_behavior(Behavior::Mpc {
            horizon: d.horizon,
            q: d.mpc_q,
            r_u: d.mpc_r_u,
        }),
        ServiceDescriptor::atomic("Actuator", ServiceKind::Actuator, attrs(2.0, 8.0)).with_behavior(Behavior::Actuator),
    ])
    .expect("preset catalog is valid")
}

/// The evaluation catalog without the model-predictive controllers.
pub fn scenario1_catalog() -> Catalog {
    let mut catalog = evaluation_catalog();
    for id in MPC_SERVICES {
        catalog.remove(id).expect("preset contains the MPC");
    }
    catalog
}

pub fn default_weights() -> CostWeights {
    CostWeights::new(1.0, 100.0).expect("positive weights")
}

fn base_scenario() -> SimScenario {
    SimScenario {
        duration: 300.0,
        sample_time: 0.1,
        seed: 42,
        weights: Some(default_weights()),
        withheld: Vec::new(),
        initial_levels: None,
        prior_variance: DEFAULT_PRIOR_VARIANCE,
        reference: vec![(0.0, 0.3), (20.0, 0.32)],
        events: Vec::new(),
        plant: PlantParams::default(),
    }
}

/// Scenario 1: PID only, MPC unavailable for the whole run.
pub fn scenario1() -> SimScenario {
    SimScenario { withheld: MPC_SERVICES.iter().map(|s| s.to_string()).collect(), ..base_scenario() }
}

/// Scenario 2: the MPC becomes available halfway through the run.
pub fn scenario2() -> SimScenario {
    let base = base_scenario();
    let half = base.duration / 2.0;
    SimScenario {
        withheld: MPC_SERVICES.iter().map(|s| s.to_string()).collect(),
        events: MPC_SERVICES
            .iter()
            .enumerate()
            .map(|(i, id)| TimedEvent {
                time: half + i as f64 * base.sample_time,
                action: ScenarioAction::Add(id.to_string()),
            })
            .collect(),
        ..base
    }
}

/// Scenario 3: the objective shifts towards cheap computation halfway
/// through the run.
pub fn scenario3() -> SimScenario {
    let base = base_scenario();
    SimScenario {
        events: vec![TimedEvent {
            time: base.duration / 2.0,
            action: ScenarioAction::Weights(CostWeights::new(1000.0, 20.0).expect("positive")),
        }],
        ..base
    }
}
