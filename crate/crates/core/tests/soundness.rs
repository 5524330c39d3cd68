use ogc_core::agents::greedy_policy;
use ogc_core::generator::{sample_level, GeneratorConfig};
use ogc_core::harness::{rollout, solvability_check, HarnessConfig};
use ogc_core::rng::seeded;

// Every level the checker certifies as solvable should actually yield a
// delivery when the scripted pair plays it.
#[test]
fn certified_levels_are_delivered_on() {
    let policy = greedy_policy();
    let config = HarnessConfig::default();
    let mut rng = seeded(0);
    let mut checked = 0;
    let mut failures = Vec::new();
    while checked < 50 {
        let level = sample_level(&mut rng, &GeneratorConfig::default()).unwrap();
        let verdict = solvability_check(&level);
        if !verdict.solvable {
            continue;
        }
        assert!(verdict.certificate.is_some());
        checked += 1;
        let stats = rollout(level.clone(), &policy, &policy, &config, checked).unwrap();
        if stats.deliveries == 0 {
            failures.push(level.to_string());
        }
    }
    assert!(
        failures.is_empty(),
        "no delivery on:\n{}",
        failures.join("\n")
    );
}
