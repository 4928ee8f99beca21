//! Controller gain configuration for the two ADOS loops.
//!
//! Both loops are a first-order exponential smoother followed by a
//! proportional controller. The gain of each loop is the smaller of a
//! stability bound (half the marginal-stability gain, Ziegler–Nichols) and a
//! noise bound (signal-to-noise power ratio of at least `G` at the controller
//! output). The bounds are evaluated at the worst case over population size
//! and channel conditions, so the resulting gains do not depend on either.

use crate::config::TimeBase;
use crate::E;

/// Default smoothing weight for both loops.
pub const DEFAULT_ALPHA: f64 = 1e-4;
/// Default signal-to-noise gain target for both loops.
pub const DEFAULT_NOISE_GAIN: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Access-loop base gain, in 1/seconds. Multiplied by
    /// `T_i + (e-1)tau` to obtain the per-station gain.
    pub k_p: f64,
    pub alpha_p: f64,
    pub g_p: f64,
    /// Threshold-loop gain (dimensionless: rate units per rate unit of error).
    pub k_r: f64,
    pub alpha_r: f64,
    pub g_r: f64,
    pub k_p_stability: f64,
    pub k_p_noise: f64,
    pub k_r_stability: f64,
    pub k_r_noise: f64,
}

impl ControllerGains {
    /// Largest access-loop gain for which the worst-case linearized loop
    /// (one station, every opportunity used) is still stable.
    pub fn k_p_max(&self) -> f64 {
        2.0 * self.k_p_stability
    }

    /// Gains with both the controller constants and the filter weights
    /// multiplied by `factor`, as used by the stability experiments.
    /// Bound fields are left untouched.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k_p: self.k_p * factor,
            alpha_p: (self.alpha_p * factor).min(1.0),
            k_r: self.k_r * factor,
            alpha_r: (self.alpha_r * factor).min(1.0),
            ..*self
        }
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        derive_controller_gains(
            &TimeBase::default(),
            DEFAULT_ALPHA,
            DEFAULT_NOISE_GAIN,
            DEFAULT_ALPHA,
            DEFAULT_NOISE_GAIN,
        )
    }
}

/// Evaluates the four closed-form gain bounds and picks the binding one for
/// each loop.
///
/// Panics if a smoothing weight is outside `(0, 1]` or a noise gain is below
/// one; [`crate::validate_scenario`] rejects such inputs before they get here.
pub fn derive_controller_gains(
    tb: &TimeBase,
    alpha_p: f64,
    g_p: f64,
    alpha_r: f64,
    g_r: f64,
) -> ControllerGains {
    assert!(alpha_p > 0.0 && alpha_p <= 1.0, "alpha_p must lie in (0,1]");
    assert!(alpha_r > 0.0 && alpha_r <= 1.0, "alpha_r must lie in (0,1]");
    assert!(g_p >= 1.0 && g_r >= 1.0, "noise gains must be at least 1");
    let (tau, hold) = (tb.tau, tb.hold);

    let worst_hold = hold + E * tau;
    let k_p_max = (2.0 - alpha_p) / (alpha_p * worst_hold);
    let k_p_stability = k_p_max / 2.0;
    let k_p_noise = (1.0 - alpha_p / 2.0) / (g_p * alpha_p * worst_hold);

    let k_r_stability = (2.0 - alpha_r) / (2.0 * alpha_r * (1.0 + E * tau / hold));
    let k_r_noise = E * tau * (1.0 - alpha_r / 2.0) / (hold * alpha_r * g_r);

    ControllerGains {
        k_p: k_p_noise.min(k_p_stability),
        alpha_p,
        g_p,
        k_r: k_r_noise.min(k_r_stability),
        alpha_r,
        g_r,
        k_p_stability,
        k_p_noise,
        k_r_stability,
        k_r_noise,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("access probability {0} outside (0, 1]")]
pub struct ProbabilityOutOfRange(pub f64);

/// Contention window that yields access probability `p` under a uniform
/// backoff with `cw_min = cw_max`.
pub fn p_to_contention_window(p: f64) -> Result<f64, ProbabilityOutOfRange> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ProbabilityOutOfRange(p));
    }
    Ok(2.0 / p - 1.0)
}

/// Inverse of [`p_to_contention_window`].
pub fn contention_window_to_p(cw: f64) -> f64 {
    2.0 / (cw + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_tb() -> TimeBase {
        TimeBase { tau: 1.0, hold: 10.0 }
    }

    #[test]
    fn default_setting_noise_bound_binds() {
        let g = derive_controller_gains(&unit_tb(), 1e-4, 1e2, 1e-4, 1e2);
        assert!((g.k_p - 7.862_304_149_94).abs() < 1e-9);
        assert!((g.k_r - 27.181_459_143_676).abs() < 1e-9);
        assert!(g.k_p_noise < g.k_p_stability);
        assert!(g.k_r_noise < g.k_r_stability);
        assert_eq!(g.k_p, g.k_p_noise);
        assert_eq!(g.k_r, g.k_r_noise);
        // (2 - 1e-4) / (2e-4 (10 + e)) and (2 - 1e-4) / (2e-4 (1 + e/10))
        assert!((g.k_p_stability - 786.230_414_994).abs() < 1e-6);
        assert!((g.k_r_stability - 7_862.304_149_94).abs() < 1e-6);
    }

    #[test]
    fn gains_do_not_depend_on_time_unit() {
        let a = derive_controller_gains(&unit_tb(), 1e-4, 1e2, 1e-4, 1e2);
        let b = derive_controller_gains(&TimeBase { tau: 1e-6, hold: 1e-5 }, 1e-4, 1e2, 1e-4, 1e2);
        // k_p is per unit time, k_r is dimensionless.
        assert!((b.k_p * 1e-6 - a.k_p).abs() < 1e-9);
        assert!((b.k_r - a.k_r).abs() < 1e-9);
    }

    #[test]
    fn contention_window_examples() {
        assert_eq!(p_to_contention_window(1.0).unwrap(), 1.0);
        assert!((p_to_contention_window(0.1).unwrap() - 19.0).abs() < 1e-12);
        assert!((p_to_contention_window(2.0 / 33.0).unwrap() - 32.0).abs() < 1e-12);
        assert!(p_to_contention_window(0.0).is_err());
        assert!(p_to_contention_window(1.5).is_err());
        assert!(p_to_contention_window(f64::NAN).is_err());
    }

    #[test]
    fn scaling_multiplies_gain_and_weight() {
        let g = ControllerGains::default();
        let s = g.scaled(10.0);
        assert!((s.k_p / g.k_p - 10.0).abs() < 1e-12);
        assert!((s.alpha_r / g.alpha_r - 10.0).abs() < 1e-12);
        assert_eq!(s.k_p_noise, g.k_p_noise);
    }

    proptest! {
        #[test]
        fn stability_is_half_of_max(alpha in 1e-6f64..1.0, g in 1.0f64..1e4, ratio in 1.0f64..100.0) {
            let tb = TimeBase { tau: 1.0, hold: ratio };
            let gains = derive_controller_gains(&tb, alpha, g, alpha, g);
            let k_max = (2.0 - alpha) / (alpha * (ratio + E));
            prop_assert_eq!(gains.k_p_stability, k_max / 2.0);
            prop_assert_eq!(gains.k_p_max(), k_max);
        }

        #[test]
        fn noise_bound_decreases_with_target(alpha in 1e-6f64..1.0, g in 1.0f64..1e4) {
            let tb = unit_tb();
            let lo = derive_controller_gains(&tb, alpha, g, alpha, g);
            let hi = derive_controller_gains(&tb, alpha, g * 1.5, alpha, g * 1.5);
            prop_assert!(hi.k_p_noise < lo.k_p_noise);
            prop_assert!(hi.k_r_noise < lo.k_r_noise);
        }

        #[test]
        fn both_access_bounds_decrease_with_alpha(alpha in 1e-6f64..0.6, g in 1.0f64..1e4) {
            let tb = unit_tb();
            let lo = derive_controller_gains(&tb, alpha, g, alpha, g);
            let hi = derive_controller_gains(&tb, alpha * 1.5, g, alpha * 1.5, g);
            prop_assert!(hi.k_p_noise < lo.k_p_noise);
            prop_assert!(hi.k_p_stability < lo.k_p_stability);
        }

        #[test]
        fn contention_window_round_trip(p in 1e-6f64..=1.0) {
            let cw = p_to_contention_window(p).unwrap();
            prop_assert!((contention_window_to_p(cw) - p).abs() <= 1e-12 * p.max(1e-3));
        }
    }
}
