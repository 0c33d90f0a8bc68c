use svcgraph::catalog_io::SimScenario;
use svcgraph::catalog_io::{parse_scenario, ScenarioAction, TimedEvent};
use svcgraph::error::SimError;
use svcgraph::plant::PlantParams;
use svcgraph::presets::{default_weights, evaluation_catalog, scenario1, scenario2, scenario3};
use svcgraph::sim::{run_scenario, EventResult, SimOptions, SimOutput, TRACE_HEADER};

fn run(scn: &SimScenario) -> SimOutput {
    run_scenario(scn, &evaluation_catalog(), default_weights(), SimOptions::default()).unwrap()
}

fn short(mut scn: SimScenario, duration: f64) -> SimScenario {
    scn.duration = duration;
    scn.events.retain(|e| e.time <= duration);
    scn
}

#[test]
fn no_events_gives_one_epoch() {
    let out = run(&short(scenario1(), 30.0));
    assert_eq!(out.epochs.len(), 1);
    assert_eq!(out.trace.len(), 300);
    assert!(out.trace.iter().all(|r| r.epoch == 1));
}

#[test]
fn zero_duration_gives_header_only() {
    let out = run(&short(scenario2(), 0.0));
    assert!(out.trace.is_empty());
    assert_eq!(out.to_csv(), format!("{TRACE_HEADER}\n"));
}

#[test]
fn scenario2_moves_from_pid_to_mpc() {
    let out = run(&scenario2());
    assert_eq!(out.epochs.len(), 2);
    assert_eq!(out.epochs[1].start, 150.0);
    let nodes = |i: usize| out.epochs[i].architecture.path.nodes.join(" ");
    assert!(nodes(0).contains("PID"));
    assert!(nodes(1).contains("MPC+medium"));
    assert!(out.trace.windows(2).all(|w| w[0].epoch <= w[1].epoch));
    assert_eq!(out.trace[1500].epoch, 2);
    assert_eq!(out.trace[1499].epoch, 1);
}

#[test]
fn scenario3_moves_to_converter_and_pid() {
    let out = run(&scenario3());
    assert_eq!(out.epochs.len(), 2);
    let last = &out.epochs[1].architecture.path.nodes;
    assert!(last.contains(&"Converter".to_string()) && last.contains(&"PID".to_string()));
    // The converter only tracks tank 3.
    let r = out.trace.last().unwrap();
    assert!(r.x_hat[0].is_none() && r.x_hat[1].is_none() && r.x_hat[2].is_some());
}

#[test]
fn physical_and_actuator_bounds_hold() {
    let p = PlantParams::default();
    for scn in [scenario1(), scenario2(), scenario3()] {
        let out = run(&scn);
        for r in &out.trace {
            assert!(r.levels.iter().all(|h| (0.0..=p.tank_height).contains(h)));
            assert!((0.0..=p.u_max).contains(&r.u));
        }
    }
}

#[test]
fn reruns_are_identical_and_seed_matters() {
    let scn = short(scenario2(), 160.0);
    assert_eq!(run(&scn).to_csv(), run(&scn).to_csv());
    let mut other = scn.clone();
    other.seed += 1;
    assert_ne!(run(&scn).to_csv(), run(&other).to_csv());
}

#[test]
fn timing_column_is_opt_in() {
    let scn = short(scenario1(), 1.0);
    let plain = run(&scn).to_csv();
    assert!(plain.lines().skip(1).all(|l| l.ends_with(',')));
    let timed =
        run_scenario(&scn, &evaluation_catalog(), default_weights(), SimOptions { record_timing: true }).unwrap();
    assert!(timed.trace.iter().all(|r| r.step_us.is_some()));
}

#[test]
fn failed_orchestration_keeps_running_stale() {
    let mut scn = short(scenario1(), 20.0);
    scn.events = vec![TimedEvent { time: 5.0, action: ScenarioAction::Remove("Sensor".into()) }];
    let out = run(&scn);
    assert_eq!(out.trace.len(), 200);
    assert_eq!(out.events.len(), 1);
    assert!(matches!(out.events[0].result, EventResult::Failed(_)));
    assert!(out.events[0].stale);
    assert_eq!(out.epochs.len(), 1);
}

#[test]
fn invalid_update_is_rejected_and_recorded() {
    let mut scn = short(scenario1(), 10.0);
    scn.events = vec![TimedEvent {
        time: 1.0,
        action: ScenarioAction::Update { service: "Kalman".into(), x_comp: Some(1.0), y_inacc: None },
    }];
    let out = run(&scn);
    assert!(matches!(out.events[0].result, EventResult::Rejected(_)));
}

#[test]
fn update_can_trigger_a_swap() {
    let mut scn = short(scenario1(), 10.0);
    scn.events = vec![TimedEvent {
        time: 2.0,
        action: ScenarioAction::Update { service: "Converter".into(), x_comp: Some(1.0), y_inacc: Some(1.0) },
    }];
    let out = run(&scn);
    assert_eq!(out.events[0].result, EventResult::Reconfigured { epoch: 2 });
    assert!(out.epochs[1].architecture.path.nodes.contains(&"Converter".to_string()));
}

#[test]
fn scenario_must_reference_known_services() {
    let mut scn = short(scenario1(), 10.0);
    scn.events = vec![TimedEvent { time: 1.0, action: ScenarioAction::Remove("Pump".into()) }];
    let err = run_scenario(&scn, &evaluation_catalog(), default_weights(), SimOptions::default()).unwrap_err();
    assert!(matches!(err, SimError::UnknownService(id) if id == "Pump"));

    scn.events = vec![TimedEvent { time: 1.0, action: ScenarioAction::Remove("MPC".into()) }];
    let err = run_scenario(&scn, &evaluation_catalog(), default_weights(), SimOptions::default()).unwrap_err();
    assert!(matches!(err, SimError::Withheld(_)));
}

#[test]
fn services_without_behavior_are_reported() {
    let mut catalog = evaluation_catalog();
    let mut sensor = catalog.get("Sensor").unwrap().clone();
    sensor.behavior = None;
    catalog.replace(sensor).unwrap();
    let err = run_scenario(&short(scenario1(), 1.0), &catalog, default_weights(), SimOptions::default()).unwrap_err();
    assert!(matches!(err, SimError::MissingBehavior(id) if id == "Sensor"));
}

#[test]
fn initial_levels_and_reference_steps() {
    let text = "[scenario]\nduration = 5\nsample_time = 0.1\nseed = 1\ninitial_levels = 0.2, 0.1, 0.05\n\n[reference]\n0 = 0.3\n";
    let scn = parse_scenario(text).unwrap();
    let out = run(&scn);
    assert_eq!(out.trace[0].levels, [0.2, 0.1, 0.05]);
    assert_eq!(out.trace.len(), 50);
}
