use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svcgraph::service_model::{CostAttributes, ServiceDescriptor, ServiceKind};
use svcgraph::verify::{brute_force_cost, random_catalog, random_weights};
use svcgraph::{Catalog, CostWeights, EventOutcome, OrchestrationEvent, Orchestrator};

fn setup(seed: u64) -> (Catalog, CostWeights, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng);
    let weights = random_weights(&mut rng);
    (catalog, weights, rng)
}

fn random_event(rng: &mut ChaCha8Rng, orch: &Orchestrator, k: usize) -> OrchestrationEvent {
    let ids: Vec<String> = orch.catalog().services().iter().map(|s| s.id.clone()).collect();
    let atomic: Vec<_> = orch.catalog().services().iter().filter(|s| s.attrs.is_some()).collect();
    let kinds = [ServiceKind::Sensor, ServiceKind::Filter, ServiceKind::Controller, ServiceKind::Actuator];
    let attrs =
        |rng: &mut ChaCha8Rng| CostAttributes::new(rng.gen_range(1..=20) as f64, rng.gen_range(1..=20) as f64).unwrap();
    match rng.gen_range(0..4) {
        0 => OrchestrationEvent::WeightsChanged(random_weights(rng)),
        1 if !ids.is_empty() => OrchestrationEvent::ServiceRemoved(ids[rng.gen_range(0..ids.len())].clone()),
        2 if !atomic.is_empty() => {
            let mut s = atomic[rng.gen_range(0..atomic.len())].clone();
            s.attrs = Some(attrs(rng));
            OrchestrationEvent::ServiceUpdated(s)
        }
        _ => {
            let kind = kinds[rng.gen_range(0..4)];
            OrchestrationEvent::ServiceAdded(ServiceDescriptor::atomic(&format!("n{k}"), kind, attrs(rng)))
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn selected_path_is_optimal_after_every_event(seed in any::<u64>()) {
        let (catalog, weights, mut rng) = setup(seed);
        let mut orch = Orchestrator::new(catalog, weights);
        orch.reorchestrate();
        let mut last_epoch = orch.epoch();
        for k in 0..8 {
            let event = random_event(&mut rng, &orch, k);
            let outcome = match orch.handle_event(event) {
                Ok(o) => o,
                Err(_) => continue,
            };
            prop_assert!(orch.epoch() >= last_epoch);
            last_epoch = orch.epoch();
            let expected = brute_force_cost(orch.catalog(), &orch.weights());
            match outcome {
                EventOutcome::Failed(_) => {
                    prop_assert_eq!(orch.is_stale(), orch.current().is_some());
                }
                _ => {
                    prop_assert!(!orch.is_stale());
                    prop_assert_eq!(Some(orch.current().unwrap().path.total_cost), expected);
                }
            }
        }
    }

    #[test]
    fn removing_an_unused_service_changes_nothing(seed in any::<u64>()) {
        let (catalog, weights, _) = setup(seed);
        let mut orch = Orchestrator::new(catalog, weights);
        prop_assume!(matches!(orch.reorchestrate(), EventOutcome::Reconfigured(_)));
        let arch = orch.current().unwrap();
        let used: Vec<&str> = arch.path.nodes.iter().flat_map(|n| n.split('+')).collect();
        let unused = orch
            .catalog()
            .services()
            .iter()
            .find(|s| s.kind != ServiceKind::Model && !used.contains(&s.id.as_str()))
            .map(|s| s.id.clone());
        prop_assume!(unused.is_some());
        let out = orch.handle_event(OrchestrationEvent::ServiceRemoved(unused.unwrap())).unwrap();
        prop_assert_eq!(out, EventOutcome::Unchanged);
        prop_assert_eq!(orch.current().unwrap().path.clone(), arch.path.clone());
    }

    #[test]
    fn rejected_events_leave_state_untouched(seed in any::<u64>()) {
        let (catalog, weights, _) = setup(seed);
        let mut orch = Orchestrator::new(catalog, weights);
        orch.reorchestrate();
        let before = (orch.current(), orch.epoch(), orch.catalog().clone(), orch.is_stale());
        let dup = orch.catalog().services()[0].clone();
        prop_assert!(orch.handle_event(OrchestrationEvent::ServiceAdded(dup)).is_err());
        prop_assert!(orch.handle_event(OrchestrationEvent::ServiceRemoved("missing".into())).is_err());
        let after = (orch.current(), orch.epoch(), orch.catalog().clone(), orch.is_stale());
        prop_assert_eq!(before, after);
    }
}
