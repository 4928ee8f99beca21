//! Deterministic mini-slot simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{apply_estimation, FadingState};
use crate::config::{PolicySpec, RadioSpec, ScenarioConfig, StationSpec, Traffic};
use crate::mobility::MobilityProcess;
use crate::oracle::{optimal_configuration, OracleError, RateDistribution};
use crate::policies::{
    fixed_initial_rho, policy_contend, policy_on_probe, refresh_baseline_thresholds, resolve_policies,
    static_ados_window_rollover, tracking_table, PolicyEnv, PolicyKind, PolicyState, ProbeDecision,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Contention = 0,
    Fading = 1,
    Estimation = 2,
    Mobility = 3,
    Traffic = 4,
}

/// Independent reproducible generator for one station and purpose.
pub fn rng_stream(seed: u64, station_id: u32, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&station_id.to_le_bytes());
    key[12] = 0xd0;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    rng
}

/// The mobility process of station `s` in a run seeded with `seed`, or
/// `None` for a station without mobility.
pub fn mobility_process(seed: u64, s: &StationSpec) -> Option<MobilityProcess> {
    match &s.radio {
        RadioSpec::Mobile(m) => {
            let seed = rng_stream(seed, s.id, Purpose::Mobility).random::<u64>();
            Some(MobilityProcess::new(m.clone(), seed))
        }
        _ => None,
    }
}

/// Fluid arrival process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficState {
    /// bits.
    pub backlog: f64,
    /// bits/s; infinite for a saturated station.
    pub arrival_rate: f64,
}

impl TrafficState {
    pub fn saturated() -> Self {
        Self {
            backlog: 0.0,
            arrival_rate: f64::INFINITY,
        }
    }

    pub fn is_saturated(&self) -> bool {
        self.arrival_rate.is_infinite()
    }

    /// Whether at least `quantum` bits are waiting.
    pub fn backlog_nonempty(&self, quantum: f64) -> bool {
        self.is_saturated() || (self.backlog > 0.0 && self.backlog >= quantum)
    }
}

pub fn traffic_advance(state: TrafficState, slots: u64, tau: f64) -> TrafficState {
    if state.is_saturated() {
        return state;
    }
    TrafficState {
        backlog: state.backlog + state.arrival_rate * slots as f64 * tau,
        ..state
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotOutcome {
    Empty,
    Collision { contenders: usize, slots: u64 },
    Skip { station: usize },
    Transmit { station: usize, bits: f64, outage: bool },
}

impl SlotOutcome {
    pub fn slots(&self, hold_slots: u64) -> u64 {
        match *self {
            SlotOutcome::Empty | SlotOutcome::Skip { .. } => 1,
            SlotOutcome::Collision { slots, .. } => slots,
            SlotOutcome::Transmit { .. } => 1 + hold_slots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub slot: u64,
    pub station: u32,
    pub p: f64,
    pub t_i: f64,
    pub e_p: f64,
    pub threshold: f64,
    pub e_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationStats {
    pub id: u32,
    pub policy: &'static str,
    /// Post-warmup delivered bits.
    pub delivered_bits: f64,
    /// Post-warmup slots during which the station was present.
    pub present_slots: u64,
    /// Time integrals over present slots.
    pub p_slot_sum: f64,
    pub threshold_slot_sum: f64,
    /// Contention opportunities (slot starts while present) and the number
    /// of times the station contended in them.
    pub contention_opportunities: u64,
    pub contentions: u64,
    pub successes: u64,
    pub transmissions: u64,
    pub skips: u64,
    pub outages: u64,
}

impl StationStats {
    pub fn p_mean(&self) -> f64 {
        if self.present_slots == 0 {
            0.0
        } else {
            self.p_slot_sum / self.present_slots as f64
        }
    }

    pub fn threshold_mean(&self) -> f64 {
        if self.present_slots == 0 {
            0.0
        } else {
            self.threshold_slot_sum / self.present_slots as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub tau: f64,
    pub hold_slots: u64,
    pub stations: Vec<StationStats>,
    /// Post-warmup slots, counted from the first event at or after warmup.
    pub elapsed_slots: u64,
    /// First slot of the measured period.
    pub measure_start: u64,
    pub empty_slots: u64,
    pub collision_events: u64,
    pub collision_slots: u64,
    pub skip_events: u64,
    pub transmit_events: u64,
    pub outage_events: u64,
    pub traces: Vec<TraceSample>,
    pub window: u64,
    /// Delivered bits per complete post-warmup window, one row per window.
    pub window_bits: Vec<Vec<f64>>,
}

impl RunResult {
    pub fn contention_slots(&self) -> u64 {
        self.empty_slots + self.collision_events + self.skip_events + self.transmit_events
    }

    /// Fraction of contention slots in which nobody contended.
    pub fn p_e_hat(&self) -> f64 {
        let c = self.contention_slots();
        if c == 0 {
            0.0
        } else {
            self.empty_slots as f64 / c as f64
        }
    }

    pub fn success_slots(&self) -> u64 {
        self.skip_events + self.transmit_events * (1 + self.hold_slots)
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.elapsed_slots as f64 * self.tau
    }
}

struct Station {
    id: u32,
    join_at: u64,
    radio: RadioSpec,
    mobility: Option<MobilityProcess>,
    fading: FadingState,
    rng_contention: ChaCha8Rng,
    rng_fading: ChaCha8Rng,
    rng_estimation: ChaCha8Rng,
    traffic: TrafficState,
    policy: PolicyState,
    records_snr: bool,
    csma: bool,
}

impl Station {
    fn rho(&mut self, t: u64) -> f64 {
        match &self.radio {
            RadioSpec::Fixed { rho } => *rho,
            RadioSpec::Step { before, after, at } => {
                if t >= *at {
                    *after
                } else {
                    *before
                }
            }
            RadioSpec::Mobile(_) => self.mobility.as_mut().expect("mobility process").snr_at(t),
        }
    }
}

/// Resolves fraction-of-saturation arrival rates against the analytic
/// all-saturated optimum of the population at slot 0.
fn arrival_rates(cfg: &ScenarioConfig, rho0: &[f64]) -> Result<Vec<f64>, OracleError> {
    let needs_oracle = cfg
        .stations
        .iter()
        .any(|s| matches!(s.traffic, Traffic::FractionOfSaturation(_)));
    let saturation = if needs_oracle {
        let dists: Vec<RateDistribution> = rho0
            .iter()
            .map(|&r| RateDistribution::for_channel(r, cfg.bandwidth, &cfg.channel))
            .collect();
        Some(optimal_configuration(&dists, &cfg.time_base)?.predicted_rates)
    } else {
        None
    };
    Ok(cfg
        .stations
        .iter()
        .enumerate()
        .map(|(i, s)| match s.traffic {
            Traffic::Saturated => f64::INFINITY,
            Traffic::Rate(r) => r,
            Traffic::FractionOfSaturation(f) => f * saturation.as_ref().expect("oracle rates")[i],
        })
        .collect())
}

pub fn simulate_run(cfg: &ScenarioConfig) -> Result<RunResult, OracleError> {
    simulate_run_observed(cfg, |_, _| {})
}

/// Runs the scenario, reporting every event `(start slot, outcome)` to
/// `observer`.
pub fn simulate_run_observed<F: FnMut(u64, &SlotOutcome)>(cfg: &ScenarioConfig, mut observer: F) -> Result<RunResult, OracleError> {
    let tb = cfg.time_base;
    let hold_slots = tb.hold_slots();
    let gains = cfg.effective_gains();
    let n = cfg.stations.len();
    let quantum = cfg.bandwidth * tb.hold;
    let mobile = cfg.has_mobility();

    let mut mobility: Vec<Option<MobilityProcess>> = cfg
        .stations
        .iter()
        .map(|s| mobility_process(cfg.seed, s))
        .collect();
    let rho0: Vec<f64> = cfg
        .stations
        .iter()
        .zip(mobility.iter_mut())
        .map(|(s, m)| match m {
            Some(proc_) => proc_.snr_at(0),
            None => fixed_initial_rho(&s.radio).expect("non-waypoint radio"),
        })
        .collect();

    let kinds = resolve_policies(cfg, &rho0)?;
    let env = PolicyEnv {
        time_base: tb,
        bandwidth: cfg.bandwidth,
        channel: cfg.channel.clone(),
        table: tracking_table(cfg)?,
    };
    let rates = arrival_rates(cfg, &rho0)?;

    let mut stations = Vec::with_capacity(n);
    for (i, (s, kind)) in cfg.stations.iter().zip(kinds).enumerate() {
        let mut rng_fading = rng_stream(cfg.seed, s.id, Purpose::Fading);
        let fading = FadingState::new(&cfg.channel.fading, &mut rng_fading);
        let records_snr = matches!(kind, PolicyKind::StaticAdos { .. })
            || (mobile && matches!(kind, PolicyKind::Tdos { .. } | PolicyKind::Ndos { .. }));
        let csma = !kind.probes();
        let policy = PolicyState::new(kind, &gains, &env, Some(n), rho0[i])?;
        stations.push(Station {
            id: s.id,
            join_at: s.join_at,
            radio: s.radio.clone(),
            mobility: mobility[i].take(),
            fading,
            rng_contention: rng_stream(cfg.seed, s.id, Purpose::Contention),
            rng_fading,
            rng_estimation: rng_stream(cfg.seed, s.id, Purpose::Estimation),
            traffic: if rates[i].is_infinite() {
                TrafficState::saturated()
            } else {
                TrafficState {
                    backlog: 0.0,
                    arrival_rate: rates[i],
                }
            },
            policy,
            records_snr,
            csma,
        });
    }
    let static_ados_window = stations
        .iter()
        .filter_map(|s| match s.policy.kind {
            PolicyKind::StaticAdos { snr_window } => Some(snr_window),
            _ => None,
        })
        .min();
    let baseline_refresh = mobile
        && cfg
            .stations
            .iter()
            .any(|s| matches!(s.policy, PolicySpec::Tdos { .. } | PolicySpec::Ndos { .. }));

    let mut stats: Vec<StationStats> = stations
        .iter()
        .map(|s| StationStats {
            id: s.id,
            policy: s.policy.kind.name(),
            delivered_bits: 0.0,
            present_slots: 0,
            p_slot_sum: 0.0,
            threshold_slot_sum: 0.0,
            contention_opportunities: 0,
            contentions: 0,
            successes: 0,
            transmissions: 0,
            skips: 0,
            outages: 0,
        })
        .collect();
    let mut result = RunResult {
        seed: cfg.seed,
        tau: tb.tau,
        hold_slots,
        stations: Vec::new(),
        elapsed_slots: 0,
        measure_start: 0,
        empty_slots: 0,
        collision_events: 0,
        collision_slots: 0,
        skip_events: 0,
        transmit_events: 0,
        outage_events: 0,
        traces: Vec::new(),
        window: cfg.window,
        window_bits: Vec::new(),
    };

    let mut t: u64 = 0;
    let mut empties_since_busy: u64 = 0;
    let mut next_sample: u64 = 0;
    let mut next_rollover_ados = static_ados_window.unwrap_or(u64::MAX);
    let mut next_rollover_base = if baseline_refresh { cfg.snr_window } else { u64::MAX };
    let mut measure_start: Option<u64> = None;
    let mut window_acc = vec![0.0; n];
    let mut window_end: u64 = u64::MAX;
    let mut contenders: Vec<usize> = Vec::with_capacity(n);

    while t < cfg.horizon {
        if cfg.sampling > 0 && t >= next_sample {
            for s in &stations {
                if t < s.join_at {
                    continue;
                }
                let (t_i, e_p) = s.policy.access.map(|a| (a.t_i, a.filter.smoothed)).unwrap_or((0.0, 0.0));
                let e_r = s.policy.rate_loop.map(|r| r.filter.smoothed).unwrap_or(0.0);
                result.traces.push(TraceSample {
                    slot: t,
                    station: s.id,
                    p: s.policy.p(),
                    t_i,
                    e_p,
                    threshold: s.policy.threshold(),
                    e_r,
                });
            }
            next_sample += cfg.sampling * ((t - next_sample) / cfg.sampling + 1);
        }
        if t >= next_rollover_ados {
            for s in stations.iter_mut() {
                if let PolicyKind::StaticAdos { .. } = s.policy.kind {
                    if let Some(m) = s.policy.take_snr_mean() {
                        static_ados_window_rollover(&mut s.policy, m, &env)?;
                    }
                }
            }
            let w = static_ados_window.expect("window");
            next_rollover_ados += w * ((t - next_rollover_ados) / w + 1);
        }
        if t >= next_rollover_base {
            let mut rhos: Vec<Option<f64>> = Vec::with_capacity(n);
            for s in stations.iter_mut() {
                let m = if t < s.join_at {
                    None
                } else if matches!(s.policy.kind, PolicyKind::Tdos { .. } | PolicyKind::Ndos { .. }) {
                    s.policy.take_snr_mean().or(Some(s.rho(t)))
                } else {
                    Some(s.rho(t))
                };
                rhos.push(m);
            }
            let mut states: Vec<PolicyState> = stations.iter().map(|s| s.policy.clone()).collect();
            refresh_baseline_thresholds(&mut states, &rhos, &env)?;
            for (s, st) in stations.iter_mut().zip(states) {
                s.policy = st;
            }
            next_rollover_base += cfg.snr_window * ((t - next_rollover_base) / cfg.snr_window + 1);
        }

        let measuring = t >= cfg.warmup;
        if measuring && measure_start.is_none() {
            measure_start = Some(t);
            window_end = t + cfg.window;
        }

        contenders.clear();
        for (i, s) in stations.iter_mut().enumerate() {
            if t < s.join_at {
                continue;
            }
            let eligible = s.traffic.backlog_nonempty(quantum);
            let c = policy_contend(&s.policy, &mut s.rng_contention, eligible);
            if measuring {
                stats[i].contention_opportunities += 1;
                if c {
                    stats[i].contentions += 1;
                }
            }
            if c {
                contenders.push(i);
            }
        }

        let outcome = match contenders.len() {
            0 => SlotOutcome::Empty,
            1 => {
                let i = contenders[0];
                let s = &mut stations[i];
                let rho = s.rho(t);
                let gain = s.fading.gain(t, &mut s.rng_fading);
                let snr = rho * gain;
                let sample = apply_estimation(snr, gain, cfg.bandwidth, &cfg.channel, &mut s.rng_estimation);
                if s.records_snr {
                    s.policy.record_snr(snr);
                }
                match policy_on_probe(&mut s.policy, sample.measured_rate, rho, &env) {
                    ProbeDecision::Skip => SlotOutcome::Skip { station: i },
                    ProbeDecision::Transmit => {
                        let outage = sample.measured_rate > sample.true_rate;
                        let mut bits = if outage { 0.0 } else { sample.measured_rate * tb.hold };
                        if !s.traffic.is_saturated() {
                            bits = bits.min(s.traffic.backlog);
                            s.traffic.backlog -= bits;
                        }
                        SlotOutcome::Transmit { station: i, bits, outage }
                    }
                }
            }
            k => {
                let long = contenders.iter().any(|&i| stations[i].csma);
                SlotOutcome::Collision {
                    contenders: k,
                    slots: if long { 1 + hold_slots } else { 1 },
                }
            }
        };
        let duration = outcome.slots(hold_slots);
        observer(t, &outcome);

        match outcome {
            SlotOutcome::Empty => empties_since_busy += 1,
            _ => {
                let empty = empties_since_busy as f64;
                for s in stations.iter_mut() {
                    if t >= s.join_at {
                        s.policy.observe_interval(empty);
                    }
                }
                empties_since_busy = 0;
            }
        }

        if measuring {
            result.elapsed_slots += duration;
            match outcome {
                SlotOutcome::Empty => result.empty_slots += 1,
                SlotOutcome::Collision { slots, .. } => {
                    result.collision_events += 1;
                    result.collision_slots += slots;
                }
                SlotOutcome::Skip { station } => {
                    result.skip_events += 1;
                    stats[station].successes += 1;
                    stats[station].skips += 1;
                }
                SlotOutcome::Transmit { station, bits, outage } => {
                    result.transmit_events += 1;
                    stats[station].successes += 1;
                    stats[station].transmissions += 1;
                    stats[station].delivered_bits += bits;
                    if outage {
                        result.outage_events += 1;
                        stats[station].outages += 1;
                    }
                    window_acc[station] += bits;
                }
            }
            for (i, s) in stations.iter().enumerate() {
                if t >= s.join_at {
                    let d = duration as f64;
                    stats[i].present_slots += duration;
                    stats[i].p_slot_sum += s.policy.p() * d;
                    stats[i].threshold_slot_sum += s.policy.threshold() * d;
                }
            }
        }

        for s in stations.iter_mut() {
            if t >= s.join_at {
                s.traffic = traffic_advance(s.traffic, duration, tb.tau);
            }
        }
        t += duration;

        while t >= window_end {
            // events never straddle more than one window at the window
            // lengths in use; bits of a straddling event count in the
            // window where it started
            result.window_bits.push(std::mem::replace(&mut window_acc, vec![0.0; n]));
            window_end += cfg.window;
            if window_end > cfg.horizon {
                window_end = u64::MAX;
            }
        }
    }

    result.measure_start = measure_start.unwrap_or(cfg.horizon);
    result.stations = stats;
    Ok(result)
}
