//! Desk-scale reproductions of the evaluation experiments.
//!
//! Every preset is a list of jobs (one per sweep value and policy). The
//! scenario builders are public so tests can run single points.

use dosnet::channel::{Estimation, Fading, RateMap, DEFAULT_DOPPLER, DEFAULT_OSCILLATORS, WIFI_RATES_BPS};
use dosnet::config::DEFAULT_WINDOW;
use dosnet::engine::mobility_process;
use dosnet::mobility::MobilityProcess;
use dosnet::oracle::{optimal_configuration, RateDistribution};
use dosnet::{
    validate_scenario, MobilityKind, MobilitySpec, Point, PolicySpec, RadioSpec, ScenarioConfig, StationSpec, Traffic,
};

use crate::runner::{Job, JobOutput};

pub const PRESET_NAMES: [&str; 12] = [
    "fig5_homogeneous",
    "fig6a_halfload",
    "fig6b_tenthload",
    "fig7_heterogeneous",
    "fig_jakes",
    "fig_discrete",
    "fig_imperfect",
    "fig8_stability",
    "fig9a_join",
    "fig9b_snrstep",
    "fig9c_moving",
    "fig10_mobility",
];

/// Policies compared under static radio conditions.
pub const STATIC_POLICIES: [PolicySpec; 6] = [
    PolicySpec::Ados,
    PolicySpec::StaticOptimal,
    PolicySpec::Tdos { p: None },
    PolicySpec::Ndos { p: None },
    PolicySpec::NonOpportunistic { p: None },
    PolicySpec::CsmaCa { p: None },
];

/// Policies compared under mobility.
pub const MOBILE_POLICIES: [PolicySpec; 7] = [
    PolicySpec::Ados,
    PolicySpec::OptimalTracking,
    PolicySpec::StaticAdos { window: None },
    PolicySpec::Tdos { p: None },
    PolicySpec::Ndos { p: None },
    PolicySpec::NonOpportunistic { p: None },
    PolicySpec::CsmaCa { p: None },
];

pub const STATION_COUNTS: [usize; 4] = [2, 5, 10, 20];
pub const DELTA_RHO: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
pub const MEAN_ERRORS: [f64; 4] = [0.0, 0.1, 0.2, 0.3];
pub const SPEEDS: [f64; 3] = [1e-6, 1e-5, 1e-4];

pub const DESK_HORIZON: u64 = 10_000_000;
pub const DESK_WARMUP: u64 = 1_000_000;
/// Long-term SNR period of the static-threshold schemes at desk scale, at
/// the reference speed `10^-5` per slot. It scales inversely with speed so
/// the distance covered per window stays the same.
pub const DESK_SNR_WINDOW: u64 = 1_000_000;

pub fn snr_window_for_speed(speed: f64) -> u64 {
    ((DESK_SNR_WINDOW as f64 * 1e-5 / speed).round() as u64).clamp(DEFAULT_WINDOW, 100 * DESK_HORIZON)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PresetError {
    #[error("unknown preset `{0}`; available: {list}", list = PRESET_NAMES.join(", "))]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetOptions {
    pub seed: u64,
    pub horizon: Option<u64>,
    pub replications: Option<usize>,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon: None,
            replications: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub jobs: Vec<Job>,
    /// Whether the jobs record controller traces.
    pub traces: bool,
}

fn base(stations: Vec<StationSpec>, horizon: u64, warmup: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(stations, horizon);
    cfg.warmup = warmup;
    cfg
}

/// Sets every station's policy.
pub fn with_policy(mut cfg: ScenarioConfig, policy: PolicySpec) -> ScenarioConfig {
    for s in &mut cfg.stations {
        s.policy = policy;
    }
    cfg
}

/// `n` saturated stations of mean SNR `rho`.
pub fn homogeneous(n: usize, rho: f64) -> ScenarioConfig {
    base(
        (1..=n as u32).map(|i| StationSpec::saturated(i, rho, PolicySpec::Ados)).collect(),
        DESK_HORIZON,
        DESK_WARMUP,
    )
}

/// Group (0-based) of station `i` of `n` in the four-group layout.
pub fn group_of(i: usize, n: usize) -> usize {
    if n < 4 {
        i
    } else {
        4 * i / n
    }
}

/// Four equal groups with `rho = 1 + g delta_rho`, `g = 0..3`.
pub fn heterogeneous(n: usize, delta_rho: f64) -> ScenarioConfig {
    base(
        (0..n)
            .map(|i| StationSpec::saturated(i as u32 + 1, 1.0 + group_of(i, n) as f64 * delta_rho, PolicySpec::Ados))
            .collect(),
        DESK_HORIZON,
        DESK_WARMUP,
    )
}

/// One saturated station and `n - 1` offering `fraction` of their
/// saturation throughput.
pub fn partial_load(n: usize, fraction: f64) -> ScenarioConfig {
    let mut cfg = homogeneous(n, 1.0);
    for s in cfg.stations.iter_mut().skip(1) {
        s.traffic = Traffic::FractionOfSaturation(fraction);
    }
    cfg
}

/// `n` random-waypoint stations in the unit square.
pub fn waypoint(n: usize, speed: f64) -> ScenarioConfig {
    let mut cfg = base(
        (1..=n as u32)
            .map(|i| StationSpec {
                id: i,
                radio: RadioSpec::Mobile(MobilitySpec::waypoint(1.0, speed)),
                traffic: Traffic::Saturated,
                policy: PolicySpec::Ados,
                join_at: 0,
            })
            .collect(),
        DESK_HORIZON,
        DESK_WARMUP,
    );
    cfg.window = DEFAULT_WINDOW;
    cfg.snr_window = snr_window_for_speed(speed);
    cfg
}

pub fn jakes(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.channel.fading = Fading::Jakes {
        doppler: DEFAULT_DOPPLER,
        oscillators: DEFAULT_OSCILLATORS,
    };
    cfg
}

pub fn discrete(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.channel.rate_map = RateMap::DiscreteSet(WIFI_RATES_BPS.to_vec());
    cfg
}

pub fn imperfect(mut cfg: ScenarioConfig, mean_error: f64) -> ScenarioConfig {
    cfg.channel.estimation = if mean_error == 0.0 {
        Estimation::Perfect
    } else {
        Estimation::Linear { mean_error }
    };
    cfg
}

/// Five saturated ADOS stations at `rho = 4`, traced every `10^5` slots.
pub fn stability(scale: f64) -> ScenarioConfig {
    let mut cfg = homogeneous(5, 4.0);
    cfg.gain_scale = scale;
    cfg.sampling = 100_000;
    cfg
}

/// Five stations, five more joining at slot `10^6`.
pub fn join(scale: f64) -> ScenarioConfig {
    let mut cfg = homogeneous(10, 1.0);
    for s in cfg.stations.iter_mut().skip(5) {
        s.join_at = 1_000_000;
    }
    cfg.horizon = 2_000_000;
    cfg.warmup = 0;
    cfg.gain_scale = scale;
    cfg.sampling = 10_000;
    cfg
}

pub const STEP_AT: u64 = 100_000;

/// Two stations; station 1 jumps from `rho = 1` to `4` at [`STEP_AT`].
pub fn snr_step(scale: f64) -> ScenarioConfig {
    let mut cfg = homogeneous(2, 1.0);
    cfg.stations[0].radio = RadioSpec::Step {
        before: 1.0,
        after: 4.0,
        at: STEP_AT,
    };
    cfg.horizon = 1_000_000;
    cfg.warmup = 0;
    cfg.gain_scale = scale;
    cfg.sampling = 1_000;
    cfg
}

/// Two stations; station 1 moves from distance `D` to `D/2` over `10^5`
/// slots starting at [`STEP_AT`].
pub fn moving(scale: f64) -> ScenarioConfig {
    let mut cfg = snr_step(scale);
    let d = 1.0;
    cfg.stations[0].radio = RadioSpec::Mobile(MobilitySpec {
        kind: MobilityKind::LinearTrack {
            from: Point::new(d, 0.0),
            to: Point::new(d / 2.0, 0.0),
            start: STEP_AT,
            duration: 100_000,
        },
        receiver: Point::new(0.0, 0.0),
        reference_distance: d,
        reference_snr: 1.0,
        pathloss_exponent: 2.0,
        min_distance: d / 100.0,
    });
    cfg
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn apply_options(mut cfg: ScenarioConfig, opts: &PresetOptions) -> ScenarioConfig {
    cfg.seed = opts.seed;
    if let Some(h) = opts.horizon {
        cfg.horizon = h;
        cfg.warmup = cfg.warmup.min(h / 10);
    }
    cfg
}

fn job(label: String, cfg: ScenarioConfig, reps: usize, opts: &PresetOptions) -> Job {
    let config = validate_scenario(apply_options(cfg, opts)).expect("preset scenarios are valid");
    Job {
        label,
        keep_results: config.sampling > 0,
        config,
        replications: opts.replications.unwrap_or(reps),
    }
}

fn policy_jobs<I>(name: &str, points: I, policies: &[PolicySpec], opts: &PresetOptions) -> Vec<Job>
where
    I: IntoIterator<Item = (String, ScenarioConfig)>,
{
    let mut jobs = Vec::new();
    for (point, cfg) in points {
        for &p in policies {
            jobs.push(job(format!("{name}/{point}/{}", p.name()), with_policy(cfg.clone(), p), 10, opts));
        }
    }
    jobs
}

fn gain_jobs(name: &str, build: fn(f64) -> ScenarioConfig, scales: &[f64], opts: &PresetOptions) -> Vec<Job> {
    scales
        .iter()
        .map(|&s| job(format!("{name}/scale={}/ados", fmt_value(s)), build(s), 1, opts))
        .collect()
}

pub fn build_preset(name: &str, opts: &PresetOptions) -> Result<Preset, PresetError> {
    let n_points = || STATION_COUNTS.iter().map(|&n| (format!("n_stations={n}"), n));
    let het = |f: fn(ScenarioConfig) -> ScenarioConfig| {
        DELTA_RHO
            .iter()
            .map(move |&d| (format!("delta_rho={}", fmt_value(d)), f(heterogeneous(20, d))))
    };
    let (jobs, traces) = match name {
        "fig5_homogeneous" => (
            policy_jobs(name, n_points().map(|(l, n)| (l, homogeneous(n, 1.0))), &STATIC_POLICIES, opts),
            false,
        ),
        "fig6a_halfload" | "fig6b_tenthload" => {
            let f = if name == "fig6a_halfload" { 0.5 } else { 0.1 };
            (
                policy_jobs(name, n_points().map(|(l, n)| (l, partial_load(n, f))), &STATIC_POLICIES[..], opts)
                    .into_iter()
                    .filter(|j| !j.label.ends_with("/static_optimal"))
                    .collect(),
                false,
            )
        }
        "fig7_heterogeneous" => (policy_jobs(name, het(|c| c), &STATIC_POLICIES, opts), false),
        "fig_jakes" => {
            let points = DELTA_RHO.iter().flat_map(|&d| {
                [
                    (format!("delta_rho={},fading=iid", fmt_value(d)), heterogeneous(20, d)),
                    (format!("delta_rho={},fading=jakes", fmt_value(d)), jakes(heterogeneous(20, d))),
                ]
            });
            (policy_jobs(name, points, &STATIC_POLICIES, opts), false)
        }
        "fig_discrete" => (policy_jobs(name, het(discrete), &STATIC_POLICIES, opts), false),
        "fig_imperfect" => {
            let points = MEAN_ERRORS
                .iter()
                .map(|&e| (format!("mean_error={}", fmt_value(e)), imperfect(heterogeneous(20, 2.0), e)));
            (policy_jobs(name, points, &STATIC_POLICIES, opts), false)
        }
        "fig8_stability" => (gain_jobs(name, stability, &[1.0, 10.0], opts), true),
        "fig9a_join" => (gain_jobs(name, join, &[1.0, 0.1], opts), true),
        "fig9b_snrstep" => (gain_jobs(name, snr_step, &[1.0, 0.1], opts), true),
        "fig9c_moving" => (gain_jobs(name, moving, &[1.0, 0.1], opts), true),
        "fig10_mobility" => {
            let points = SPEEDS
                .iter()
                .map(|&v| (format!("speed={}", fmt_value(v)), waypoint(10, v)));
            (policy_jobs(name, points, &MOBILE_POLICIES, opts), false)
        }
        other => return Err(PresetError::Unknown(other.to_string())),
    };
    Ok(Preset {
        name: name.to_string(),
        jobs,
        traces,
    })
}

/// Mean SNR of every station at slot `t` (`None` before it joins).
pub struct RhoTracker {
    radios: Vec<(u64, RadioSpec, Option<MobilityProcess>)>,
}

impl RhoTracker {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            radios: cfg
                .stations
                .iter()
                .map(|s| (s.join_at, s.radio.clone(), mobility_process(cfg.seed, s)))
                .collect(),
        }
    }

    pub fn at(&mut self, t: u64) -> Vec<Option<f64>> {
        self.radios
            .iter_mut()
            .map(|(join_at, radio, proc_)| {
                if t < *join_at {
                    return None;
                }
                Some(match radio {
                    RadioSpec::Fixed { rho } => *rho,
                    RadioSpec::Step { before, after, at } => {
                        if t >= *at {
                            *after
                        } else {
                            *before
                        }
                    }
                    RadioSpec::Mobile(_) => proc_.as_mut().expect("mobility process").snr_at(t),
                })
            })
            .collect()
    }
}

/// Analytic optimum `(p*, threshold*)` of every present station for the
/// mean SNRs `rho`.
pub fn oracle_point(cfg: &ScenarioConfig, rho: &[Option<f64>]) -> Vec<Option<(f64, f64)>> {
    let present: Vec<usize> = (0..rho.len()).filter(|&i| rho[i].is_some()).collect();
    let dists: Vec<RateDistribution> = present
        .iter()
        .map(|&i| RateDistribution::for_channel(rho[i].expect("present"), cfg.bandwidth, &cfg.channel))
        .collect();
    let mut out = vec![None; rho.len()];
    if let Ok(opt) = optimal_configuration(&dists, &cfg.time_base) {
        for (k, &i) in present.iter().enumerate() {
            out[i] = Some((opt.p[k], opt.thresholds[k]));
        }
    }
    out
}

pub const TRACE_HEADER: [&str; 10] = [
    "run_id",
    "slot",
    "station_id",
    "p_i",
    "t_i",
    "e_p",
    "threshold",
    "e_r",
    "oracle_p",
    "oracle_threshold",
];

/// Controller traces of the first replication of every job, with the
/// analytic optimum at each sample.
pub fn trace_csv(jobs: &[Job], outputs: &[JobOutput]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("in-memory write");
    for (job, out) in jobs.iter().zip(outputs) {
        let Some(run) = out.results.first() else { continue };
        let mut tracker = RhoTracker::new(&job.config);
        let index: std::collections::HashMap<u32, usize> =
            job.config.stations.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        let mut cache: Option<(Vec<Option<f64>>, Vec<Option<(f64, f64)>>)> = None;
        for s in &run.traces {
            let rho = tracker.at(s.slot);
            let fresh = !matches!(&cache, Some((r, _)) if *r == rho);
            if fresh {
                let o = oracle_point(&job.config, &rho);
                cache = Some((rho, o));
            }
            let opt = cache.as_ref().and_then(|(_, o)| o[index[&s.station]]);
            let (op, ox) = opt.map_or((String::new(), String::new()), |(p, x)| (format!("{p}"), format!("{x}")));
            w.write_record([
                job.label.clone(),
                s.slot.to_string(),
                s.station.to_string(),
                format!("{}", s.p),
                format!("{}", s.t_i),
                format!("{}", s.e_p),
                format!("{}", s.threshold),
                format!("{}", s.e_r),
                op,
                ox,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds() {
        for name in PRESET_NAMES {
            let p = build_preset(name, &PresetOptions::default()).unwrap();
            assert!(!p.jobs.is_empty(), "{name}");
            assert!(p.jobs.iter().all(|j| j.label.starts_with(name)));
        }
        assert!(build_preset("fig11", &PresetOptions::default()).is_err());
    }

    #[test]
    fn four_groups() {
        let cfg = heterogeneous(20, 2.0);
        let rhos: Vec<f64> = cfg
            .stations
            .iter()
            .map(|s| match s.radio {
                RadioSpec::Fixed { rho } => rho,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(&rhos[..5], &[1.0; 5]);
        assert_eq!(&rhos[15..], &[7.0; 5]);
    }

    #[test]
    fn horizon_override_caps_warmup() {
        let opts = PresetOptions { horizon: Some(50_000), ..Default::default() };
        let p = build_preset("fig5_homogeneous", &opts).unwrap();
        assert!(p.jobs.iter().all(|j| j.config.horizon == 50_000 && j.config.warmup == 5_000));
    }
}
