//! The two proportional control loops of the adaptive scheme.
//!
//! The access loop drives the number of empty mini slots between two busy
//! slots towards `1/(e-1)`, i.e. an empty-slot probability of `1/e`. The
//! threshold loop drives each station's threshold towards the fixed point
//! `E[(R - x)^+] = x e tau / hold`.

use crate::config::TimeBase;
use crate::E;

pub const P_MIN: f64 = 1e-6;
pub const P_MAX: f64 = 1.0;
/// Smoothing weight of the online hold-time estimate.
pub const HOLD_BETA: f64 = 0.01;

/// Target empty mini slots per interval.
pub fn target_empty_slots() -> f64 {
    1.0 / (E - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub smoothed: f64,
    pub alpha: f64,
}

pub fn filter_update(f: FilterState, e: f64) -> FilterState {
    FilterState {
        smoothed: f.alpha * e + (1.0 - f.alpha) * f.smoothed,
        alpha: f.alpha,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessController {
    pub filter: FilterState,
    /// Base gain, 1/s.
    pub k_p: f64,
    /// Seconds.
    pub hold_estimate: f64,
    pub tau: f64,
    /// Control signal, mini slots.
    pub t_i: f64,
    pub p_i: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl AccessController {
    /// Controller starting at access probability `p0`, with the hold
    /// estimate at a full transmission.
    pub fn new(k_p: f64, alpha: f64, tb: &TimeBase, p0: f64) -> Self {
        let hold_estimate = tb.hold + tb.tau;
        let mut c = Self {
            filter: FilterState { smoothed: 0.0, alpha },
            k_p,
            hold_estimate,
            tau: tb.tau,
            t_i: 0.0,
            p_i: P_MAX,
            p_min: P_MIN,
            p_max: P_MAX,
        };
        let p0 = p0.clamp(P_MIN, P_MAX);
        c.filter.smoothed = (1.0 / p0) / c.gain();
        c.recompute();
        c
    }

    /// Initial access probability given an expected population size.
    pub fn initial_p(n_hint: Option<usize>) -> f64 {
        match n_hint {
            Some(n) if n > 0 => (1.0 / n as f64).min(0.5),
            _ => 0.1,
        }
    }

    /// `K_{p,i}`: dimensionless gain from filtered error to mini slots.
    pub fn gain(&self) -> f64 {
        self.k_p * (self.hold_estimate + (E - 1.0) * self.tau)
    }

    fn recompute(&mut self) {
        self.t_i = self.gain() * self.filter.smoothed;
        self.p_i = if self.t_i > 0.0 {
            (1.0 / self.t_i).clamp(self.p_min, self.p_max)
        } else {
            self.p_max
        };
    }

    /// Closes an interval that contained `empty_slots` empty mini slots.
    pub fn observe_interval(&mut self, empty_slots: f64) {
        self.filter = filter_update(self.filter, target_empty_slots() - empty_slots);
        self.recompute();
    }

    /// Folds the channel time of the station's own last success into the
    /// hold estimate.
    pub fn observe_hold(&mut self, last_hold: f64) {
        self.hold_estimate = HOLD_BETA * last_hold + (1.0 - HOLD_BETA) * self.hold_estimate;
        self.recompute();
    }
}

pub fn access_update(mut c: AccessController, empty_slots_observed: f64) -> AccessController {
    c.observe_interval(empty_slots_observed);
    c
}

pub fn update_hold_estimate(mut c: AccessController, last_hold: f64) -> AccessController {
    c.observe_hold(last_hold);
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdController {
    pub filter: FilterState,
    pub k_r: f64,
    /// bits/s.
    pub threshold: f64,
    pub r_min: f64,
}

impl ThresholdController {
    pub fn new(k_r: f64, alpha: f64) -> Self {
        Self {
            filter: FilterState { smoothed: 0.0, alpha },
            k_r,
            threshold: 0.0,
            r_min: 0.0,
        }
    }

    /// Feeds the rate measured on the station's own successful contention.
    /// Decisions for that contention must use the threshold read before
    /// this call.
    pub fn observe_rate(&mut self, measured_rate: f64, tau: f64, hold: f64) {
        let out = (measured_rate - self.threshold).max(0.0);
        let err = out - self.threshold * tau * E / hold;
        self.filter = filter_update(self.filter, err);
        self.threshold = (self.k_r * self.filter.smoothed).max(self.r_min);
    }
}

pub fn threshold_update(mut c: ThresholdController, measured_rate: f64, tau: f64, hold: f64) -> ThresholdController {
    c.observe_rate(measured_rate, tau, hold);
    c
}

/// Loop gain `K_{p,i} H_{p,i}` of the linearized access loop of station
/// `i` around the operating point `(p, hold_times)`.
pub fn access_loop_gain(k_p: f64, i: usize, p: &[f64], hold_times: &[f64], tau: f64) -> f64 {
    let p_e: f64 = p.iter().map(|x| 1.0 - x).product();
    let k_i = k_p * (hold_times[i] + (E - 1.0) * tau);
    let h: f64 = p
        .iter()
        .zip(hold_times)
        .map(|(&pj, &tj)| (tj + (E - 1.0) * tau) * p_e * pj * pj / ((1.0 - pj) * (1.0 - p_e).powi(2)))
        .sum::<f64>()
        / (hold_times[i] + (E - 1.0) * tau);
    k_i * h
}

/// Pole of the linearized access loop.
pub fn access_loop_pole(alpha: f64, loop_gain: f64) -> f64 {
    1.0 - alpha * (1.0 + loop_gain)
}

/// Pole of the linearized threshold loop with slope `h2` of the
/// `(R - x)^+` branch, `0 <= h2 <= 1`.
pub fn threshold_loop_pole(alpha: f64, k_r: f64, tb: &TimeBase, h2: f64) -> f64 {
    1.0 - alpha * (1.0 + k_r * (E * tb.tau / tb.hold + h2))
}

/// Output-noise amplification `E[W_c^2] / E[W^2]` of a first-order loop;
/// infinite when the pole is outside the unit circle.
pub fn noise_amplification(alpha: f64, k: f64, pole: f64) -> f64 {
    if pole.abs() >= 1.0 {
        f64::INFINITY
    } else {
        (alpha * k).powi(2) / (1.0 - pole * pole)
    }
}
