use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use svcgraph::catalog_io::{
    parse_catalog, parse_scenario, serialize_catalog, serialize_scenario, ScenarioAction, TimedEvent,
};
use svcgraph::presets::{evaluation_catalog, scenario2, EVALUATION_CATALOG, SCENARIO1, SCENARIO2, SCENARIO3};
use svcgraph::service_model::ServiceKind;
use svcgraph::verify::random_catalog;
use svcgraph::CostWeights;

#[test]
fn shipped_files_round_trip_byte_for_byte() {
    let catalog = parse_catalog(EVALUATION_CATALOG).unwrap();
    assert_eq!(serialize_catalog(&catalog), EVALUATION_CATALOG);
    for text in [SCENARIO1, SCENARIO2, SCENARIO3] {
        assert_eq!(serialize_scenario(&parse_scenario(text).unwrap()), text);
    }
}

#[test]
fn evaluation_catalog_has_nine_services() {
    let c = parse_catalog(EVALUATION_CATALOG).unwrap();
    assert_eq!(c.len(), 9);
    let count = |k| c.of_kind(k).count();
    assert_eq!(count(ServiceKind::Sensor), 1);
    assert_eq!(count(ServiceKind::Filter), 2);
    assert_eq!(count(ServiceKind::Model), 3);
    assert_eq!(count(ServiceKind::Controller), 2);
    assert_eq!(count(ServiceKind::Actuator), 1);
}

#[test]
fn scenario3_has_one_weights_event() {
    let s = parse_scenario(SCENARIO3).unwrap();
    assert_eq!(
        s.events,
        vec![TimedEvent { time: 150.0, action: ScenarioAction::Weights(CostWeights::new(1000.0, 20.0).unwrap()) }]
    );
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = format!("# header\n\n{}", EVALUATION_CATALOG.replace("\n\n", "\n\n# next\n"));
    assert_eq!(parse_catalog(&text).unwrap(), evaluation_catalog());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_catalogs_round_trip(seed in any::<u64>()) {
        let catalog = random_catalog(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = serialize_catalog(&catalog);
        let parsed = parse_catalog(&text).unwrap();
        prop_assert_eq!(&parsed, &catalog);
        prop_assert_eq!(serialize_catalog(&parsed), text);
    }

    #[test]
    fn scenarios_round_trip(
        duration in 0.0f64..1e4,
        ts in 1e-3f64..1.0,
        seed in any::<u64>(),
        alpha in 1e-3f64..1e4,
        levels in proptest::collection::vec(1e-3f64..1.0, 1..5),
        event_times in proptest::collection::btree_set(0u32..1000, 0..6),
    ) {
        let mut s = scenario2();
        s.duration = duration;
        s.sample_time = ts;
        s.seed = seed;
        s.weights = Some(CostWeights::new(alpha, 1.0 / alpha).unwrap());
        s.reference = levels.iter().enumerate().map(|(i, l)| (i as f64 * 7.5, *l)).collect();
        s.events = event_times
            .iter()
            .map(|t| TimedEvent {
                time: duration * *t as f64 / 1000.0,
                action: ScenarioAction::Update { service: "PID".into(), x_comp: Some(alpha), y_inacc: None },
            })
            .collect();
        s.events.dedup_by(|a, b| a.time == b.time);
        let text = serialize_scenario(&s);
        prop_assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}
