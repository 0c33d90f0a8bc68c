//! Closed-loop scenario runner.
//!
//! Each step the sensor samples tank 3, the active filter produces a state
//! estimate, the active controller computes the pump command and the
//! actuator applies it to the plant. Scenario events are handed to the
//! orchestrator between steps; a new architecture takes effect on the next
//! step and inherits the plant state, the last estimate and the last
//! command.
//!
//! Randomness comes only from a ChaCha8 generator seeded by the scenario,
//! and all arithmetic is plain IEEE-754 double precision without fused
//! multiply-add, so a fixed seed gives identical traces on every platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::catalog_io::{ScenarioAction, SimScenario};
use crate::control::{
    build_models, converter_step, kf_step, mpc_solve, pid_step, ControlCommand, EstimatorState, KalmanNoise, LtiModel,
    MpcConfig, PidGains, PidState, TankLevel,
};
use crate::cost::CostWeights;
use crate::error::{ControlError, SimError};
use crate::orchestrator::{split_node_id, Architecture, EventOutcome, OrchestrationEvent, Orchestrator};
use crate::plant::{plant_step, PlantState};
use crate::service_model::{Behavior, Catalog, CostAttributes, ServiceKind};

pub const TRACE_HEADER: &str = "t,h1,h2,h3,y,xhat1,xhat2,xhat3,u,epoch,step_us";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Record per-step wall-clock compute time. Off by default because it
    /// makes traces non-reproducible.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// True plant levels at `t`, before the command is applied.
    pub levels: [f64; 3],
    pub y: f64,
    /// Estimate per tank; `None` for tanks the active filter does not track.
    pub x_hat: [Option<f64>; 3],
    pub u: f64,
    pub epoch: u64,
    pub step_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventResult {
    Reconfigured {
        epoch: u64,
    },
    Unchanged,
    /// Orchestration failed; the previous architecture stays active, stale.
    Failed(String),
    /// The event itself was invalid and was not applied.
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub description: String,
    pub result: EventResult,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// Simulation time from which the architecture is active.
    pub start: f64,
    pub architecture: Arc<Architecture>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimOutput {
    pub trace: Vec<TraceRecord>,
    pub epochs: Vec<EpochRecord>,
    pub events: Vec<EventRecord>,
}

impl SimOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.trace.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.trace {
            let [h1, h2, h3] = r.levels;
            let _ = write!(out, "{},{h1},{h2},{h3},{},", r.t, r.y);
            for x in r.x_hat {
                if let Some(x) = x {
                    let _ = write!(out, "{x}");
                }
                out.push(',');
            }
            let _ = write!(out, "{},{},", r.u, r.epoch);
            if let Some(us) = r.step_us {
                let _ = write!(out, "{us}");
            }
            out.push('\n');
        }
        out
    }
}

/// Filter runtime with its labelled estimate.
#[derive(Debug, Clone)]
enum FilterRuntime {
    Converter { last: Option<f64> },
    Kalman { model: usize, noise: KalmanNoise, est: EstimatorState },
}

#[derive(Debug, Clone)]
enum ControllerRuntime {
    Pid { gains: PidGains, state: PidState },
    Mpc { model: usize, cfg: MpcConfig },
}

#[derive(Debug, Clone)]
struct LoopRuntime {
    epoch: u64,
    filter_node: String,
    controller_node: String,
    noise_std: f64,
    filter: FilterRuntime,
    controller: ControllerRuntime,
}

struct Context<'a> {
    models: [LtiModel; 3],
    /// Model service id -> index into `models`.
    model_index: BTreeMap<String, usize>,
    scenario: &'a SimScenario,
}

impl Context<'_> {
    fn model(&self, idx: usize) -> &LtiModel {
        &self.models[idx]
    }

    fn estimate(&self, filter: &FilterRuntime) -> Option<Vec<(TankLevel, f64)>> {
        match filter {
            FilterRuntime::Converter { last } => last.map(|y| vec![(TankLevel::H3, y)]),
            FilterRuntime::Kalman { model, est, .. } => {
                Some(self.model(*model).labels.iter().copied().zip(est.x_hat.iter().copied()).collect())
            }
        }
    }
}

fn behavior<'c>(catalog: &'c Catalog, id: &str) -> Result<&'c Behavior, SimError> {
    catalog
        .get(id)
        .ok_or_else(|| SimError::UnknownService(id.to_string()))?
        .behavior
        .as_ref()
        .ok_or_else(|| SimError::MissingBehavior(id.to_string()))
}

/// Estimate for `model` seeded from `previous`: shared tanks keep their
/// value, the others start at the model's operating point.
fn project(previous: Option<&[(TankLevel, f64)]>, model: &LtiModel) -> DVector<f64> {
    DVector::from_iterator(
        model.state_dim(),
        model.labels.iter().enumerate().map(|(i, label)| {
            previous.and_then(|p| p.iter().find(|(l, _)| l == label)).map_or(model.x_eq[i], |(_, v)| *v)
        }),
    )
}

fn build_runtime(
    ctx: &Context<'_>,
    arch: &Architecture,
    catalog: &Catalog,
    previous: Option<&LoopRuntime>,
    u_prev: f64,
    t: f64,
) -> Result<LoopRuntime, SimError> {
    let services: Vec<&str> = arch.services().collect();
    let [sensor, filter_node, controller_node, _actuator] = services[..] else {
        unreachable!("architectures always have four layers")
    };
    let noise_std = match behavior(catalog, sensor)? {
        Behavior::Sensor { noise_std } => *noise_std,
        _ => return Err(SimError::MissingBehavior(sensor.to_string())),
    };
    let model_idx = |model: Option<&str>| -> Result<usize, SimError> {
        let id = model.ok_or_else(|| SimError::MissingBehavior(filter_node.to_string()))?;
        ctx.model_index.get(id).copied().ok_or_else(|| SimError::UnknownService(id.to_string()))
    };
    let previous_estimate = previous.and_then(|p| ctx.estimate(&p.filter));

    let filter = match previous {
        Some(p) if p.filter_node == filter_node => p.filter.clone(),
        _ => {
            let (base, model) = split_node_id(filter_node);
            match behavior(catalog, base)? {
                Behavior::Converter => FilterRuntime::Converter {
                    last: previous_estimate
                        .as_ref()
                        .and_then(|e| e.iter().find(|(l, _)| *l == TankLevel::H3))
                        .map(|(_, v)| *v),
                },
                Behavior::Kalman { q, r } => {
                    let idx = model_idx(model)?;
                    let m = ctx.model(idx);
                    let n = m.state_dim();
                    FilterRuntime::Kalman {
                        model: idx,
                        noise: KalmanNoise::isotropic(n, *q, *r),
                        est: EstimatorState::new(
                            project(previous_estimate.as_deref(), m),
                            DMatrix::identity(n, n) * ctx.scenario.prior_variance,
                        ),
                    }
                }
                _ => return Err(SimError::MissingBehavior(base.to_string())),
            }
        }
    };

    let controller = match previous {
        Some(p) if p.controller_node == controller_node => p.controller.clone(),
        _ => {
            let (base, model) = split_node_id(controller_node);
            match behavior(catalog, base)? {
                Behavior::Pid { kp, ki, kd } => {
                    let gains = PidGains { kp: *kp, ki: *ki, kd: *kd };
                    // Continue from the last command without a bump.
                    let error = previous_estimate
                        .as_ref()
                        .and_then(|e| e.iter().find(|(l, _)| *l == TankLevel::H3))
                        .map_or(0.0, |(_, v)| ctx.scenario.reference_at(t) - v);
                    ControllerRuntime::Pid { gains, state: PidState::bumpless(u_prev, error, &gains) }
                }
                Behavior::Mpc { horizon, q, r_u } => {
                    let plant = &ctx.scenario.plant;
                    ControllerRuntime::Mpc {
                        model: model_idx(model)?,
                        cfg: MpcConfig::new(*horizon, *q, *r_u, plant.u_max, plant.h_max),
                    }
                }
                _ => return Err(SimError::MissingBehavior(base.to_string())),
            }
        }
    };

    Ok(LoopRuntime {
        epoch: arch.epoch,
        filter_node: filter_node.to_string(),
        controller_node: controller_node.to_string(),
        noise_std,
        filter,
        controller,
    })
}

fn describe(action: &ScenarioAction) -> String {
    match action {
        ScenarioAction::Add(id) => format!("add {id}"),
        ScenarioAction::Remove(id) => format!("remove {id}"),
        ScenarioAction::Update { service, x_comp, y_inacc } => {
            let mut s = format!("update {service}");
            if let Some(x) = x_comp {
                let _ = write!(s, " x_comp={x}");
            }
            if let Some(y) = y_inacc {
                let _ = write!(s, " y_inacc={y}");
            }
            s
        }
        ScenarioAction::Weights(w) => format!("weights alpha={} beta={}", w.alpha_comp(), w.beta_inacc()),
    }
}

/// Checks that scenario events refer to services they can act on.
fn check_events(scenario: &SimScenario, catalog: &Catalog) -> Result<(), SimError> {
    let mut added = std::collections::BTreeSet::new();
    for id in &scenario.withheld {
        if !catalog.contains(id) {
            return Err(SimError::UnknownService(id.clone()));
        }
    }
    for e in &scenario.events {
        let id = match &e.action {
            ScenarioAction::Add(id) => {
                if !scenario.withheld.contains(id) {
                    return Err(SimError::UnknownService(id.clone()));
                }
                added.insert(id.as_str());
                continue;
            }
            ScenarioAction::Remove(id) => id,
            ScenarioAction::Update { service, .. } => service,
            ScenarioAction::Weights(_) => continue,
        };
        if !catalog.contains(id) {
            return Err(SimError::UnknownService(id.clone()));
        }
        if scenario.withheld.contains(id) && !added.contains(id.as_str()) {
            return Err(SimError::Withheld(id.clone()));
        }
    }
    Ok(())
}

fn to_event(
    action: &ScenarioAction,
    orchestrator: &Orchestrator,
    withheld: &Catalog,
) -> Result<OrchestrationEvent, String> {
    Ok(match action {
        ScenarioAction::Add(id) => OrchestrationEvent::ServiceAdded(
            withheld.get(id).cloned().ok_or_else(|| format!("`{id}` is not withheld"))?,
        ),
        ScenarioAction::Remove(id) => OrchestrationEvent::ServiceRemoved(id.clone()),
        ScenarioAction::Update { service, x_comp, y_inacc } => {
            let mut s = orchestrator
                .catalog()
                .get(service)
                .cloned()
                .ok_or_else(|| format!("`{service}` is not in the catalog"))?;
            let old = s.attrs.ok_or_else(|| format!("`{service}` derives its attributes from a model"))?;
            s.attrs = Some(
                CostAttributes::new(x_comp.unwrap_or(old.x_comp()), y_inacc.unwrap_or(old.y_inacc()))
                    .map_err(|e| e.to_string())?,
            );
            OrchestrationEvent::ServiceUpdated(s)
        }
        ScenarioAction::Weights(w) => OrchestrationEvent::WeightsChanged(*w),
    })
}

fn round_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

/// Runs `scenario` against `catalog` starting from `weights`.
pub fn run_scenario(
    scenario: &SimScenario,
    catalog: &Catalog,
    weights: CostWeights,
    options: SimOptions,
) -> Result<SimOutput, SimError> {
    check_events(scenario, catalog)?;
    let plant = scenario.plant;
    plant.validate()?;
    let ts = scenario.sample_time;
    let models = build_models(&plant, ts)?;
    let mut model_index = BTreeMap::new();
    for m in catalog.of_kind(ServiceKind::Model) {
        let dim = m.complexity.map_or(0, |c| c.state_dimension);
        if !(1..=3).contains(&dim) {
            return Err(SimError::UnsupportedModel { id: m.id.clone(), dim });
        }
        model_index.insert(m.id.clone(), dim - 1);
    }
    let ctx = Context { models, model_index, scenario };

    let mut initial = catalog.clone();
    let mut withheld = Catalog::default();
    for id in &scenario.withheld {
        withheld.insert(initial.remove(id)?)?;
    }
    let mut orchestrator = Orchestrator::new(initial, weights);
    let arch = match orchestrator.reorchestrate() {
        EventOutcome::Reconfigured(arch) => arch,
        EventOutcome::Failed(err) => return Err(SimError::Initial(err)),
        EventOutcome::Unchanged => unreachable!("first orchestration always reconfigures"),
    };

    let mut output = SimOutput::default();
    output.epochs.push(EpochRecord { start: 0.0, architecture: arch.clone() });

    let mut state = match scenario.initial_levels {
        Some([h1, h2, h3]) => PlantState::new(h1, h2, h3),
        None => plant.equilibrium(plant.operating_h3),
    };
    let mut u_prev = plant.equilibrium_inflow(plant.operating_h3);
    let mut rt = build_runtime(&ctx, &arch, orchestrator.catalog(), None, u_prev, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut pending = scenario.events.iter().peekable();

    let steps = (scenario.duration / ts + 1e-9).floor() as u64;
    output.trace.reserve(steps as usize);
    for k in 0..steps {
        let t = round_time(k as f64 * ts);
        while let Some(event) = pending.next_if(|e| e.time <= t + 1e-9 * ts) {
            let description = describe(&event.action);
            let result = match to_event(&event.action, &orchestrator, &withheld) {
                Err(msg) => EventResult::Rejected(msg),
                Ok(ev) => match orchestrator.handle_event(ev) {
                    Err(err) => EventResult::Rejected(err.to_string()),
                    Ok(EventOutcome::Reconfigured(arch)) => {
                        output.epochs.push(EpochRecord { start: t, architecture: arch.clone() });
                        EventResult::Reconfigured { epoch: arch.epoch }
                    }
                    Ok(EventOutcome::Unchanged) => EventResult::Unchanged,
                    Ok(EventOutcome::Failed(err)) => EventResult::Failed(err.to_string()),
                },
            };
            output.events.push(EventRecord { time: event.time, description, result, stale: orchestrator.is_stale() });
        }
        let arch = orchestrator.current().expect("an architecture is always active");
        if arch.epoch != rt.epoch {
            rt = build_runtime(&ctx, &arch, orchestrator.catalog(), Some(&rt), u_prev, t)?;
        }

        let started = options.record_timing.then(Instant::now);
        let reference = scenario.reference_at(t);
        let noise: f64 = StandardNormal.sample(&mut rng);
        let y = state.h3() + rt.noise_std * noise;

        match &mut rt.filter {
            FilterRuntime::Converter { last } => *last = Some(converter_step(y)),
            FilterRuntime::Kalman { model, noise, est } => {
                let m = &ctx.models[*model];
                *est = kf_step(est, m, &DVector::from_element(1, u_prev), &DVector::from_element(1, y), noise)?;
            }
        }
        let estimate = ctx.estimate(&rt.filter).expect("filter has just been updated");
        let h3_hat = estimate.iter().find(|(l, _)| *l == TankLevel::H3).map_or(y, |(_, v)| *v);

        let command = match &mut rt.controller {
            ControllerRuntime::Pid { gains, state: pid } => {
                let (next, u) = pid_step(pid, reference, h3_hat, gains, ts, plant.u_max);
                *pid = next;
                u
            }
            ControllerRuntime::Mpc { model, cfg } => {
                let m = &ctx.models[*model];
                let x = project(Some(&estimate), m);
                match mpc_solve(m, &x, reference, cfg) {
                    Ok(sol) => ControlCommand::clamped(sol.first_input(), plant.u_max),
                    Err(ControlError::Infeasible { fallback_u, .. }) => {
                        ControlCommand::clamped(fallback_u, plant.u_max)
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        // Actuator: the command is already within [0, u_max].
        let u = command.value();
        let step_us = started.map(|s| s.elapsed().as_micros() as u64);

        let mut x_hat = [None; 3];
        for (label, v) in &estimate {
            x_hat[label.index()] = Some(*v);
        }
        output.trace.push(TraceRecord { t, levels: state.levels, y, x_hat, u, epoch: rt.epoch, step_us });
        state = plant_step(&state, u, &plant, ts);
        u_prev = u;
    }
    Ok(output)
}
