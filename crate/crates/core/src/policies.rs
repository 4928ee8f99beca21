//! Station policies: when to contend and what to do after a probe.

use std::sync::Arc;

use rand::Rng;

use crate::channel::ChannelModelSpec;
use crate::config::{PolicySpec, RadioSpec, ScenarioConfig, TimeBase};
use crate::control::{AccessController, ThresholdController};
use crate::gains::ControllerGains;
use crate::mobility::{snr_from_position, MobilityKind, Point};
use crate::oracle::{
    best_common_p, expand_grid_result, group_classes, ndos_threshold, optimize_static,
    solve_threshold, success_probabilities, tdos_threshold, OracleError, RateDistribution,
    ThresholdTable,
};
use crate::E;

/// A policy with every analytic parameter resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Ados,
    StaticOptimal { p: f64, threshold: f64 },
    NonOpportunistic { p: f64 },
    CsmaCa { p: f64 },
    Tdos { p: f64, threshold: f64 },
    Ndos { p: f64, threshold: f64 },
    StaticAdos { snr_window: u64 },
    OptimalTracking,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Ados => "ados",
            PolicyKind::StaticOptimal { .. } => "static_optimal",
            PolicyKind::NonOpportunistic { .. } => "non_opportunistic",
            PolicyKind::CsmaCa { .. } => "csma_ca",
            PolicyKind::Tdos { .. } => "tdos",
            PolicyKind::Ndos { .. } => "ndos",
            PolicyKind::StaticAdos { .. } => "static_ados",
            PolicyKind::OptimalTracking => "optimal_tracking",
        }
    }

    /// Whether the station probes before transmitting.
    pub fn probes(&self) -> bool {
        !matches!(self, PolicyKind::CsmaCa { .. })
    }

    /// Whether the access probability comes from the adaptive loop.
    pub fn adaptive_access(&self) -> bool {
        matches!(self, PolicyKind::Ados | PolicyKind::StaticAdos { .. } | PolicyKind::OptimalTracking)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDecision {
    Transmit,
    Skip,
}

/// Mean SNR of a radio at slot 0, before any movement. Random-waypoint
/// stations need their mobility process for this; see [`crate::engine`].
pub fn fixed_initial_rho(radio: &RadioSpec) -> Option<f64> {
    match radio {
        RadioSpec::Fixed { rho } => Some(*rho),
        RadioSpec::Step { before, .. } => Some(*before),
        RadioSpec::Mobile(m) => match &m.kind {
            MobilityKind::Static { position } => Some(snr_from_position(m, *position)),
            MobilityKind::LinearTrack { from, .. } => Some(snr_from_position(m, *from)),
            MobilityKind::RandomWaypoint { .. } => None,
        },
    }
}

/// Range of mean SNR a radio can take over a run.
pub fn rho_range(radio: &RadioSpec) -> (f64, f64) {
    match radio {
        RadioSpec::Fixed { rho } => (*rho, *rho),
        RadioSpec::Step { before, after, .. } => (before.min(*after), before.max(*after)),
        RadioSpec::Mobile(m) => {
            let hi = m.reference_snr * (m.reference_distance / m.min_distance).powf(m.pathloss_exponent);
            let far = match &m.kind {
                MobilityKind::Static { position } => position.distance(&m.receiver),
                MobilityKind::LinearTrack { from, to, .. } => {
                    from.distance(&m.receiver).max(to.distance(&m.receiver))
                }
                MobilityKind::RandomWaypoint { area_side, .. } => [
                    Point::new(0.0, 0.0),
                    Point::new(*area_side, 0.0),
                    Point::new(0.0, *area_side),
                    Point::new(*area_side, *area_side),
                ]
                .iter()
                .map(|c| c.distance(&m.receiver))
                .fold(0.0, f64::max),
            };
            let lo = snr_from_position(m, Point::new(m.receiver.x + far, m.receiver.y));
            (lo.min(hi), hi)
        }
    }
}

/// Resolves every station's policy against the population at slot 0.
///
/// `initial_rho[i]` is station `i`'s mean SNR at the start of the run.
pub fn resolve_policies(cfg: &ScenarioConfig, initial_rho: &[f64]) -> Result<Vec<PolicyKind>, OracleError> {
    let tb = &cfg.time_base;
    let n = cfg.stations.len();
    let dists: Vec<RateDistribution> = initial_rho
        .iter()
        .map(|&rho| RateDistribution::for_channel(rho, cfg.bandwidth, &cfg.channel))
        .collect();
    let uniform = 1.0 / n as f64;

    let needs_grid = cfg.stations.iter().any(|s| s.policy == PolicySpec::StaticOptimal);
    let grid = if needs_grid {
        let (classes, class_of) = group_classes(&dists);
        let best = optimize_static(&classes, tb, 4)?;
        Some(expand_grid_result(&best, &class_of, &dists, tb))
    } else {
        None
    };

    // p the team-threshold computation assumes for each station
    let tdos_p: Vec<f64> = cfg
        .stations
        .iter()
        .map(|s| match s.policy {
            PolicySpec::Tdos { p } => p.unwrap_or(uniform),
            _ => uniform,
        })
        .collect();
    let tdos_common = if cfg.stations.iter().any(|s| matches!(s.policy, PolicySpec::Tdos { .. })) {
        Some(tdos_threshold(&dists, &tdos_p, tb)?)
    } else {
        None
    };
    let mut non_opp_p = None;
    let mut csma_p = None;

    cfg.stations
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(match s.policy {
                PolicySpec::Ados => PolicyKind::Ados,
                PolicySpec::OptimalTracking => PolicyKind::OptimalTracking,
                PolicySpec::StaticAdos { window } => PolicyKind::StaticAdos {
                    snr_window: window.unwrap_or(cfg.snr_window),
                },
                PolicySpec::StaticOptimal => {
                    let g = grid.as_ref().expect("grid computed");
                    PolicyKind::StaticOptimal {
                        p: g.p[i],
                        threshold: g.thresholds[i],
                    }
                }
                PolicySpec::NonOpportunistic { p } => PolicyKind::NonOpportunistic {
                    p: p.unwrap_or_else(|| *non_opp_p.get_or_insert_with(|| best_common_p(&dists, tb, true))),
                },
                PolicySpec::CsmaCa { p } => PolicyKind::CsmaCa {
                    p: p.unwrap_or_else(|| *csma_p.get_or_insert_with(|| best_common_p(&dists, tb, false))),
                },
                PolicySpec::Tdos { p } => PolicyKind::Tdos {
                    p: p.unwrap_or(uniform),
                    threshold: tdos_common.expect("tdos threshold computed"),
                },
                PolicySpec::Ndos { p } => {
                    let p = p.unwrap_or(uniform);
                    let own = p * (1.0 - uniform).powi(n as i32 - 1);
                    PolicyKind::Ndos {
                        p,
                        threshold: ndos_threshold(&dists[i], own, tb)?,
                    }
                }
            })
        })
        .collect()
}

/// Threshold table for the tracking benchmark, covering every station's
/// SNR range.
pub fn tracking_table(cfg: &ScenarioConfig) -> Result<Option<Arc<ThresholdTable>>, OracleError> {
    if !cfg.stations.iter().any(|s| s.policy == PolicySpec::OptimalTracking) {
        return Ok(None);
    }
    let (lo, hi) = cfg
        .stations
        .iter()
        .map(|s| rho_range(&s.radio))
        .fold((f64::INFINITY, 0.0f64), |(a, b), (l, h)| (a.min(l), b.max(h)));
    let table = ThresholdTable::build(lo / 1.01, hi * 1.01, 400, cfg.bandwidth, &cfg.channel, &cfg.time_base)?;
    Ok(Some(Arc::new(table)))
}

/// Environment shared by the policies of one run.
#[derive(Debug, Clone)]
pub struct PolicyEnv {
    pub time_base: TimeBase,
    pub bandwidth: f64,
    pub channel: ChannelModelSpec,
    pub table: Option<Arc<ThresholdTable>>,
}

impl PolicyEnv {
    pub fn dist(&self, rho: f64) -> RateDistribution {
        RateDistribution::for_channel(rho, self.bandwidth, &self.channel)
    }
}

/// Mutable per-station policy state.
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub kind: PolicyKind,
    pub access: Option<AccessController>,
    pub rate_loop: Option<ThresholdController>,
    fixed_p: f64,
    threshold: f64,
    snr_sum: f64,
    snr_count: u64,
}

impl PolicyState {
    /// `initial_rho` seeds the static-threshold schemes until their first
    /// SNR window completes.
    pub fn new(
        kind: PolicyKind,
        gains: &ControllerGains,
        env: &PolicyEnv,
        n_hint: Option<usize>,
        initial_rho: f64,
    ) -> Result<Self, OracleError> {
        let tb = &env.time_base;
        let access = kind
            .adaptive_access()
            .then(|| AccessController::new(gains.k_p, gains.alpha_p, tb, AccessController::initial_p(n_hint)));
        let rate_loop = matches!(kind, PolicyKind::Ados).then(|| ThresholdController::new(gains.k_r, gains.alpha_r));
        let (fixed_p, threshold) = match kind {
            PolicyKind::StaticOptimal { p, threshold }
            | PolicyKind::Tdos { p, threshold }
            | PolicyKind::Ndos { p, threshold } => (p, threshold),
            PolicyKind::NonOpportunistic { p } | PolicyKind::CsmaCa { p } => (p, 0.0),
            PolicyKind::StaticAdos { .. } => (0.0, solve_threshold(&env.dist(initial_rho), tb, 1.0 / E)?),
            PolicyKind::OptimalTracking => (
                0.0,
                env.table.as_ref().map(|t| t.threshold(initial_rho)).unwrap_or(0.0),
            ),
            PolicyKind::Ados => (0.0, 0.0),
        };
        Ok(Self {
            kind,
            access,
            rate_loop,
            fixed_p,
            threshold,
            snr_sum: 0.0,
            snr_count: 0,
        })
    }

    pub fn p(&self) -> f64 {
        self.access.map(|a| a.p_i).unwrap_or(self.fixed_p)
    }

    pub fn threshold(&self) -> f64 {
        self.rate_loop.map(|r| r.threshold).unwrap_or(self.threshold)
    }

    pub fn set_threshold(&mut self, x: f64) {
        self.threshold = x;
    }

    pub fn probes(&self) -> bool {
        self.kind.probes()
    }

    /// Closes a controller interval.
    pub fn observe_interval(&mut self, empty_slots: f64) {
        if let Some(a) = self.access.as_mut() {
            a.observe_interval(empty_slots);
        }
    }

    /// Accumulates an SNR measurement for the windowed schemes.
    pub fn record_snr(&mut self, snr: f64) {
        self.snr_sum += snr;
        self.snr_count += 1;
    }

    /// Mean of the SNR measurements since the last call, if any.
    pub fn take_snr_mean(&mut self) -> Option<f64> {
        let out = (self.snr_count > 0).then(|| self.snr_sum / self.snr_count as f64);
        self.snr_sum = 0.0;
        self.snr_count = 0;
        out
    }
}

pub fn policy_contend<R: Rng + ?Sized>(state: &PolicyState, rng: &mut R, backlog_nonempty: bool) -> bool {
    if !backlog_nonempty {
        return false;
    }
    let p = state.p();
    p >= 1.0 || rng.random::<f64>() < p
}

/// Decision after a probe. Adaptive controllers are updated after the
/// decision; `rho_now` is the station's current mean SNR, used only by
/// the tracking benchmark.
pub fn policy_on_probe(state: &mut PolicyState, measured_rate: f64, rho_now: f64, env: &PolicyEnv) -> ProbeDecision {
    if let (PolicyKind::OptimalTracking, Some(t)) = (&state.kind, &env.table) {
        state.threshold = t.threshold(rho_now);
    }
    let decision = if !state.probes() || (measured_rate > 0.0 && measured_rate >= state.threshold()) {
        ProbeDecision::Transmit
    } else {
        ProbeDecision::Skip
    };
    let tb = &env.time_base;
    if let Some(r) = state.rate_loop.as_mut() {
        r.observe_rate(measured_rate, tb.tau, tb.hold);
    }
    if let Some(a) = state.access.as_mut() {
        let used = match decision {
            ProbeDecision::Transmit => tb.tau + tb.hold,
            ProbeDecision::Skip => tb.tau,
        };
        a.observe_hold(used);
    }
    decision
}

/// Recomputes the static-ADOS threshold from the mean SNR of the window
/// that just ended.
pub fn static_ados_window_rollover(state: &mut PolicyState, mean_snr_measured: f64, env: &PolicyEnv) -> Result<(), OracleError> {
    state.threshold = solve_threshold(&env.dist(mean_snr_measured), &env.time_base, 1.0 / E)?;
    Ok(())
}

/// Recomputes the team and non-cooperative thresholds for the mean SNRs
/// `rho` (one per station; stations not present pass `None`).
pub fn refresh_baseline_thresholds(states: &mut [PolicyState], rho: &[Option<f64>], env: &PolicyEnv) -> Result<(), OracleError> {
    let present: Vec<usize> = (0..states.len()).filter(|&i| rho[i].is_some()).collect();
    if present.is_empty() {
        return Ok(());
    }
    let dists: Vec<RateDistribution> = present.iter().map(|&i| env.dist(rho[i].expect("present"))).collect();
    let p: Vec<f64> = present.iter().map(|&i| states[i].p()).collect();
    let ps = success_probabilities(&p);
    if present.iter().any(|&i| matches!(states[i].kind, PolicyKind::Tdos { .. })) {
        let x = tdos_threshold(&dists, &p, &env.time_base)?;
        for &i in &present {
            if matches!(states[i].kind, PolicyKind::Tdos { .. }) {
                states[i].threshold = x;
            }
        }
    }
    for (k, &i) in present.iter().enumerate() {
        if matches!(states[i].kind, PolicyKind::Ndos { .. }) && ps[k] > 0.0 {
            states[i].threshold = ndos_threshold(&dists[k], ps[k], &env.time_base)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StationSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> PolicyEnv {
        PolicyEnv {
            time_base: TimeBase { tau: 1.0, hold: 10.0 },
            bandwidth: 1.0,
            channel: ChannelModelSpec::default(),
            table: None,
        }
    }

    fn state(kind: PolicyKind) -> PolicyState {
        let e = env();
        let g = crate::gains::derive_controller_gains(&e.time_base, 1e-4, 1e2, 1e-4, 1e2);
        PolicyState::new(kind, &g, &e, Some(5), 1.0).unwrap()
    }

    fn homogeneous(n: u32, policy: PolicySpec) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new((1..=n).map(|i| StationSpec::saturated(i, 1.0, policy)).collect(), 1000);
        cfg.time_base = TimeBase { tau: 1.0, hold: 10.0 };
        cfg.bandwidth = 1.0;
        cfg
    }

    #[test]
    fn empty_backlog_never_contends() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [
            PolicyKind::Ados,
            PolicyKind::StaticOptimal { p: 1.0, threshold: 0.0 },
            PolicyKind::CsmaCa { p: 1.0 },
        ] {
            let s = state(kind);
            assert!((0..100).all(|_| !policy_contend(&s, &mut rng, false)));
        }
        let s = state(PolicyKind::StaticOptimal { p: 1.0, threshold: 0.0 });
        assert!((0..100).all(|_| policy_contend(&s, &mut rng, true)));
    }

    #[test]
    fn probe_decisions() {
        let e = env();
        let mut s = state(PolicyKind::NonOpportunistic { p: 0.2 });
        assert_eq!(policy_on_probe(&mut s, 1e-9, 1.0, &e), ProbeDecision::Transmit);
        assert_eq!(policy_on_probe(&mut s, 0.0, 1.0, &e), ProbeDecision::Skip);
        let mut s = state(PolicyKind::Ados);
        s.rate_loop.as_mut().unwrap().threshold = 0.88;
        assert_eq!(policy_on_probe(&mut s, 0.5, 1.0, &e), ProbeDecision::Skip);
        s.rate_loop.as_mut().unwrap().threshold = 0.88;
        assert_eq!(policy_on_probe(&mut s, 1.0, 1.0, &e), ProbeDecision::Transmit);
        let mut s = state(PolicyKind::CsmaCa { p: 0.2 });
        assert_eq!(policy_on_probe(&mut s, 0.0, 1.0, &e), ProbeDecision::Transmit);
    }

    #[test]
    fn rollover_matches_oracle() {
        let e = env();
        let mut s = state(PolicyKind::StaticAdos { snr_window: 100 });
        for _ in 0..10 {
            s.record_snr(4.0);
        }
        let m = s.take_snr_mean().unwrap();
        static_ados_window_rollover(&mut s, m, &e).unwrap();
        let x = solve_threshold(&RateDistribution::shannon(4.0, 1.0), &e.time_base, 1.0 / E).unwrap();
        assert!((s.threshold() - x).abs() < 1e-12);
        assert!(s.take_snr_mean().is_none());
        // window mean, not the last sample
        s.record_snr(1.0);
        s.record_snr(3.0);
        assert_eq!(s.take_snr_mean(), Some(2.0));
    }

    #[test]
    fn homogeneous_baseline_thresholds_coincide_at_one_over_e() {
        // with p_s = 1/e the team and non-cooperative rules reduce to the
        // single-station fixed point
        let n = 40;
        let p = 1.0 - (-1.0 / n as f64).exp();
        let cfg = homogeneous(n, PolicySpec::Tdos { p: Some(p) });
        let tdos = resolve_policies(&cfg, &vec![1.0; n as usize]).unwrap();
        let PolicyKind::Tdos { threshold: xt, .. } = tdos[0] else { panic!() };
        let ps: f64 = success_probabilities(&vec![p; n as usize]).iter().sum();
        let target = solve_threshold(&RateDistribution::shannon(1.0, 1.0), &cfg.time_base, ps).unwrap();
        assert!((xt - target).abs() < 1e-9);
        let x_star = solve_threshold(&RateDistribution::shannon(1.0, 1.0), &cfg.time_base, 1.0 / E).unwrap();
        assert!((xt - x_star).abs() < 0.01 * x_star);
    }

    #[test]
    fn tdos_threshold_is_shared_and_ndos_is_local() {
        let mut cfg = homogeneous(4, PolicySpec::Tdos { p: None });
        for (i, s) in cfg.stations.iter_mut().enumerate() {
            s.radio = RadioSpec::Fixed { rho: 1.0 + 2.0 * i as f64 };
        }
        let rhos = [1.0, 3.0, 5.0, 7.0];
        let kinds = resolve_policies(&cfg, &rhos).unwrap();
        let xs: Vec<f64> = kinds
            .iter()
            .map(|k| match k {
                PolicyKind::Tdos { threshold, .. } => *threshold,
                _ => panic!(),
            })
            .collect();
        assert!(xs.windows(2).all(|w| w[0] == w[1]));
        for s in &mut cfg.stations {
            s.policy = PolicySpec::Ndos { p: None };
        }
        let kinds = resolve_policies(&cfg, &rhos).unwrap();
        let own = 0.25 * 0.75f64.powi(3);
        for (k, &rho) in kinds.iter().zip(&rhos) {
            let PolicyKind::Ndos { threshold, .. } = k else { panic!() };
            let x = solve_threshold(&RateDistribution::shannon(rho, 1.0), &cfg.time_base, own).unwrap();
            assert!((threshold - x).abs() < 1e-12);
        }
    }

    #[test]
    fn csma_pays_more_for_collisions() {
        let cfg_no = homogeneous(5, PolicySpec::NonOpportunistic { p: None });
        let cfg_cs = homogeneous(5, PolicySpec::CsmaCa { p: None });
        let PolicyKind::NonOpportunistic { p: a } = resolve_policies(&cfg_no, &[1.0; 5]).unwrap()[0] else { panic!() };
        let PolicyKind::CsmaCa { p: b } = resolve_policies(&cfg_cs, &[1.0; 5]).unwrap()[0] else { panic!() };
        assert!(b < a, "csma {b} vs non-opportunistic {a}");
        assert!(!PolicyKind::CsmaCa { p: b }.probes());
    }

    #[test]
    fn waypoint_rho_range() {
        let m = crate::mobility::MobilitySpec::waypoint(1.0, 1e-5);
        let (lo, hi) = rho_range(&RadioSpec::Mobile(m));
        assert!((lo - 1.0).abs() < 1e-9);
        assert!((hi - 2e4).abs() < 1e-6);
    }
}
