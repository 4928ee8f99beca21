//! Whole-run properties of the simulator.

use dosnet::engine::simulate_run_observed;
use dosnet::{simulate_run, validate_scenario, PolicySpec, ScenarioConfig, SlotOutcome, StationSpec, E};

fn scenario(rhos: &[f64], policy: PolicySpec, horizon: u64) -> ScenarioConfig {
    let stations = rhos
        .iter()
        .enumerate()
        .map(|(i, &r)| StationSpec::saturated(i as u32 + 1, r, policy))
        .collect();
    let mut cfg = ScenarioConfig::new(stations, horizon);
    cfg.warmup = horizon / 5;
    cfg.seed = 11;
    validate_scenario(cfg).unwrap()
}

#[test]
fn access_probabilities_follow_the_ratio_law() {
    let cfg = scenario(&[1.0, 1.0, 8.0, 8.0], PolicySpec::Ados, 3_000_000);
    let run = simulate_run(&cfg).unwrap();
    let tau = cfg.time_base.tau;
    let hold = cfg.time_base.hold;
    // mean channel time per own successful contention
    let t: Vec<f64> = run
        .stations
        .iter()
        .map(|s| tau + hold * s.transmissions as f64 / s.successes as f64)
        .collect();
    let p: Vec<f64> = run.stations.iter().map(|s| s.p_mean()).collect();
    assert!((t[0] - t[2]).abs() > 0.05 * hold, "classes must differ: {t:?}");
    let measured = p[0] / p[2];
    let want = (t[2] + (E - 1.0) * tau) / (t[0] + (E - 1.0) * tau);
    assert!((measured / want - 1.0).abs() < 0.05, "{measured} vs {want}");
}

#[test]
fn non_probing_policies_never_skip() {
    for policy in [PolicySpec::NonOpportunistic { p: None }, PolicySpec::CsmaCa { p: None }] {
        let cfg = scenario(&[0.5, 1.0, 2.0], policy, 200_000);
        let mut skips = 0;
        let run = simulate_run_observed(&cfg, |_, o| {
            if matches!(o, SlotOutcome::Skip { .. }) {
                skips += 1;
            }
        })
        .unwrap();
        assert_eq!(skips, 0);
        assert_eq!(run.skip_events, 0);
        assert!(run.transmit_events > 0);
    }
}

#[test]
fn slot_accounting_holds_for_every_policy() {
    for policy in [
        PolicySpec::Ados,
        PolicySpec::StaticOptimal,
        PolicySpec::Tdos { p: None },
        PolicySpec::Ndos { p: None },
        PolicySpec::CsmaCa { p: None },
    ] {
        let cfg = scenario(&[1.0, 3.0], policy, 100_000);
        let run = simulate_run(&cfg).unwrap();
        assert_eq!(
            run.empty_slots + run.collision_slots + run.success_slots(),
            run.elapsed_slots,
            "{policy:?}"
        );
    }
}
