//! Oracle outputs against values computed independently with scipy
//! (exponential-integral closed form of the Rayleigh tail, Brent root
//! finding) before the solvers were written.

use dosnet::oracle::{
    ndos_threshold, optimal_configuration, solve_access_probabilities, solve_threshold, success_probabilities,
    tdos_threshold, RateDistribution,
};
use dosnet::{TimeBase, E};
use proptest::prelude::*;

const RBAR_RHO1: f64 = 0.8806812020755564;
const RBAR_RHO4: f64 = 1.8224863717588455;
const RBAR_HALF_SUCCESS: f64 = 0.6506683669468846;
const MEAN_RATE_RHO1: f64 = 0.8603473822708857;
const TWO_STATION_P: [f64; 2] = [0.12397592038092697, 0.5800578434654334];

fn unit() -> TimeBase {
    TimeBase { tau: 1.0, hold: 10.0 }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn rayleigh_thresholds() {
    let tb = unit();
    let s = (-1.0f64).exp();
    assert!(rel(solve_threshold(&RateDistribution::shannon(1.0, 1.0), &tb, s).unwrap(), RBAR_RHO1) < 1e-10);
    assert!(rel(solve_threshold(&RateDistribution::shannon(4.0, 1.0), &tb, s).unwrap(), RBAR_RHO4) < 1e-10);
    let half = solve_threshold(&RateDistribution::shannon(1.0, 1.0), &tb, s / 2.0).unwrap();
    assert!(rel(half, RBAR_HALF_SUCCESS) < 1e-10);
}

#[test]
fn rayleigh_mean_rate() {
    assert!(rel(RateDistribution::shannon(1.0, 1.0).mean(), MEAN_RATE_RHO1) < 1e-10);
}

#[test]
fn two_station_access_probabilities() {
    let p = solve_access_probabilities(&[11.0, 1.0], 1.0);
    for (a, b) in p.iter().zip(TWO_STATION_P) {
        assert!(rel(*a, b) < 1e-10, "{a} vs {b}");
    }
    assert!(rel(p[0] / p[1], E / (10.0 + E)) < 1e-10);
}

#[test]
fn homogeneous_optimum_is_one_over_e_empty() {
    let tb = unit();
    for n in [1usize, 2, 5, 10, 20] {
        let dists = vec![RateDistribution::shannon(1.0, 1.0); n];
        let opt = optimal_configuration(&dists, &tb).unwrap();
        let p_star = 1.0 - (-1.0 / n as f64).exp();
        assert!(opt.p.iter().all(|&p| rel(p, p_star) < 1e-10));
        assert!(opt.thresholds.iter().all(|&x| rel(x, RBAR_RHO1) < 1e-10));
        let empty: f64 = opt.p.iter().map(|p| 1.0 - p).product();
        assert!((empty - (-1.0f64).exp()).abs() < 1e-10);
    }
}

#[test]
fn baselines_reduce_to_the_ados_target_at_one_over_e() {
    let tb = unit();
    let d = RateDistribution::shannon(1.0, 1.0);
    let p = [1.0 / E];
    let own = success_probabilities(&p)[0];
    assert!(rel(tdos_threshold(&[d.clone()], &p, &tb).unwrap(), RBAR_RHO1) < 1e-10);
    assert!(rel(ndos_threshold(&d, own, &tb).unwrap(), RBAR_RHO1) < 1e-10);
}

proptest! {
    #[test]
    fn threshold_residual_is_tiny(rho in 0.05f64..50.0, ratio in 1.0f64..100.0, ps in 0.01f64..1.0) {
        let tb = TimeBase { tau: 1.0, hold: ratio };
        let d = RateDistribution::shannon(rho, 1.0);
        let x = solve_threshold(&d, &tb, ps).unwrap();
        let resid = d.tail_expectation(x) - x * tb.tau / (tb.hold * ps);
        prop_assert!(resid.abs() < 1e-9 * x);
    }

    #[test]
    fn threshold_increases_with_hold_ratio(rho in 0.1f64..20.0, a in 1.0f64..50.0, b in 1.0f64..50.0) {
        prop_assume!((a - b).abs() > 1e-3);
        let d = RateDistribution::shannon(rho, 1.0);
        let s = (-1.0f64).exp();
        let xa = solve_threshold(&d, &TimeBase { tau: 1.0, hold: a }, s).unwrap();
        let xb = solve_threshold(&d, &TimeBase { tau: 1.0, hold: b }, s).unwrap();
        prop_assert_eq!(xa < xb, a < b);
    }

    #[test]
    fn access_probabilities_satisfy_both_laws(holds in prop::collection::vec(1.0f64..11.0, 1..30)) {
        let p = solve_access_probabilities(&holds, 1.0);
        let empty: f64 = p.iter().map(|q| 1.0 - q).product();
        prop_assert!((empty - (-1.0f64).exp()).abs() < 1e-10);
        for i in 0..p.len() {
            for j in 0..p.len() {
                let want = (holds[j] + E - 1.0) / (holds[i] + E - 1.0);
                prop_assert!(rel(p[i] / p[j], want) < 1e-10);
            }
        }
    }
}
