//! Scenario description and validation.

use std::collections::HashSet;
use std::fmt;

use crate::channel::ChannelModelSpec;
use crate::gains::{derive_controller_gains, ControllerGains, DEFAULT_ALPHA, DEFAULT_NOISE_GAIN};
use crate::mobility::MobilitySpec;

/// Default bandwidth in Hz.
pub const DEFAULT_BANDWIDTH: f64 = 1e7;
/// Default length of a metrics bucket (windowed fairness), in mini slots.
pub const DEFAULT_WINDOW: u64 = 10_000;
/// Default averaging period for the long-term SNR measurement of the
/// static-threshold schemes, in mini slots.
pub const DEFAULT_SNR_WINDOW: u64 = 100_000_000;

/// Mini-slot duration and data-transmission duration, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBase {
    pub tau: f64,
    pub hold: f64,
}

impl Default for TimeBase {
    fn default() -> Self {
        Self { tau: 1e-6, hold: 1e-5 }
    }
}

impl TimeBase {
    pub fn ratio(&self) -> f64 {
        self.hold / self.tau
    }

    /// Transmission duration in whole mini slots.
    pub fn hold_slots(&self) -> u64 {
        self.ratio().round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Traffic {
    Saturated,
    /// Constant fluid arrival rate in bits/s.
    Rate(f64),
    /// Fraction of the throughput the station would get if every station
    /// were saturated and configured optimally. Resolved at run start.
    FractionOfSaturation(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RadioSpec {
    /// Fixed normalized mean SNR.
    Fixed { rho: f64 },
    /// Mean SNR jumps from `before` to `after` at slot `at`.
    Step { before: f64, after: f64, at: u64 },
    Mobile(MobilitySpec),
}

impl RadioSpec {
    pub fn is_mobile(&self) -> bool {
        matches!(self, RadioSpec::Mobile(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Ados,
    StaticOptimal,
    NonOpportunistic { p: Option<f64> },
    CsmaCa { p: Option<f64> },
    Tdos { p: Option<f64> },
    Ndos { p: Option<f64> },
    StaticAdos { window: Option<u64> },
    /// Benchmark: adaptive access probability with the analytic threshold
    /// for the station's current mean SNR.
    OptimalTracking,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Ados => "ados",
            PolicySpec::StaticOptimal => "static_optimal",
            PolicySpec::NonOpportunistic { .. } => "non_opportunistic",
            PolicySpec::CsmaCa { .. } => "csma_ca",
            PolicySpec::Tdos { .. } => "tdos",
            PolicySpec::Ndos { .. } => "ndos",
            PolicySpec::StaticAdos { .. } => "static_ados",
            PolicySpec::OptimalTracking => "optimal_tracking",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ados" => PolicySpec::Ados,
            "static_optimal" => PolicySpec::StaticOptimal,
            "non_opportunistic" => PolicySpec::NonOpportunistic { p: None },
            "csma_ca" => PolicySpec::CsmaCa { p: None },
            "tdos" => PolicySpec::Tdos { p: None },
            "ndos" => PolicySpec::Ndos { p: None },
            "static_ados" => PolicySpec::StaticAdos { window: None },
            "optimal_tracking" => PolicySpec::OptimalTracking,
            _ => return None,
        })
    }

    /// Replaces the fixed access probability of the policies that have one.
    pub fn with_p(self, p: f64) -> Self {
        match self {
            PolicySpec::NonOpportunistic { .. } => PolicySpec::NonOpportunistic { p: Some(p) },
            PolicySpec::CsmaCa { .. } => PolicySpec::CsmaCa { p: Some(p) },
            PolicySpec::Tdos { .. } => PolicySpec::Tdos { p: Some(p) },
            PolicySpec::Ndos { .. } => PolicySpec::Ndos { p: Some(p) },
            other => other,
        }
    }

    fn fixed_p(&self) -> Option<f64> {
        match *self {
            PolicySpec::NonOpportunistic { p }
            | PolicySpec::CsmaCa { p }
            | PolicySpec::Tdos { p }
            | PolicySpec::Ndos { p } => p,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationSpec {
    pub id: u32,
    pub radio: RadioSpec,
    pub traffic: Traffic,
    pub policy: PolicySpec,
    /// First mini slot in which the station is present.
    pub join_at: u64,
}

impl StationSpec {
    pub fn saturated(id: u32, rho: f64, policy: PolicySpec) -> Self {
        Self {
            id,
            radio: RadioSpec::Fixed { rho },
            traffic: Traffic::Saturated,
            policy,
            join_at: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainsSetting {
    Derive {
        alpha_p: f64,
        g_p: f64,
        alpha_r: f64,
        g_r: f64,
    },
    Fixed(ControllerGains),
}

impl Default for GainsSetting {
    fn default() -> Self {
        GainsSetting::Derive {
            alpha_p: DEFAULT_ALPHA,
            g_p: DEFAULT_NOISE_GAIN,
            alpha_r: DEFAULT_ALPHA,
            g_r: DEFAULT_NOISE_GAIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub time_base: TimeBase,
    /// Hz.
    pub bandwidth: f64,
    pub stations: Vec<StationSpec>,
    pub channel: ChannelModelSpec,
    /// Simulated mini slots.
    pub horizon: u64,
    /// Mini slots excluded from metrics.
    pub warmup: u64,
    pub seed: u64,
    pub gains: GainsSetting,
    /// Multiplier applied to both gains and both smoothing weights.
    pub gain_scale: f64,
    /// Trace sampling period in mini slots; 0 disables traces.
    pub sampling: u64,
    /// Bucket length for windowed metrics, in mini slots.
    pub window: u64,
    /// Averaging period of the long-term SNR measurement used by the
    /// static-threshold schemes.
    pub snr_window: u64,
}

impl ScenarioConfig {
    /// Homogeneous-defaults scenario around a station list.
    pub fn new(stations: Vec<StationSpec>, horizon: u64) -> Self {
        Self {
            time_base: TimeBase::default(),
            bandwidth: DEFAULT_BANDWIDTH,
            stations,
            channel: ChannelModelSpec::default(),
            horizon,
            warmup: 0,
            seed: 1,
            gains: GainsSetting::default(),
            gain_scale: 1.0,
            sampling: 0,
            window: DEFAULT_WINDOW,
            snr_window: DEFAULT_SNR_WINDOW,
        }
    }

    /// Derived gains with the configured scale applied. Only meaningful on
    /// a validated config.
    pub fn effective_gains(&self) -> ControllerGains {
        let base = match self.gains {
            GainsSetting::Fixed(g) => g,
            GainsSetting::Derive { alpha_p, g_p, alpha_r, g_r } => {
                derive_controller_gains(&self.time_base, alpha_p, g_p, alpha_r, g_r)
            }
        };
        base.scaled(self.gain_scale)
    }

    pub fn has_mobility(&self) -> bool {
        self.stations.iter().any(|s| s.radio.is_mobile())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveTau,
    NonPositiveHold,
    HoldNotSlotMultiple(f64),
    NonPositiveBandwidth,
    NoStations,
    DuplicateId(u32),
    NonPositiveRho(u32),
    FractionOutOfRange(u32, f64),
    NegativeRate(u32),
    BadProbability(u32, f64),
    BadMobility(u32, String),
    HorizonNotAboveWarmup,
    BadChannel(String),
    BadGains(String),
    ZeroWindow,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveTau => write!(f, "tau must be positive"),
            Violation::NonPositiveHold => write!(f, "transmission duration must be positive"),
            Violation::HoldNotSlotMultiple(r) => {
                write!(f, "hold/tau = {r} is not a whole number of mini slots")
            }
            Violation::NonPositiveBandwidth => write!(f, "bandwidth must be positive"),
            Violation::NoStations => write!(f, "scenario has no stations"),
            Violation::DuplicateId(id) => write!(f, "duplicate station id {id}"),
            Violation::NonPositiveRho(id) => write!(f, "station {id}: rho must be positive"),
            Violation::FractionOutOfRange(id, v) => {
                write!(f, "station {id}: fraction outside (0,1): {v}")
            }
            Violation::NegativeRate(id) => write!(f, "station {id}: arrival rate must be >= 0"),
            Violation::BadProbability(id, p) => {
                write!(f, "station {id}: access probability outside (0,1]: {p}")
            }
            Violation::BadMobility(id, msg) => write!(f, "station {id}: {msg}"),
            Violation::HorizonNotAboveWarmup => write!(f, "horizon must exceed warmup"),
            Violation::BadChannel(msg) => write!(f, "channel: {msg}"),
            Violation::BadGains(msg) => write!(f, "gains: {msg}"),
            Violation::ZeroWindow => write!(f, "window lengths must be positive"),
        }
    }
}

impl Violation {
    /// Station the violation refers to, if any.
    pub fn station(&self) -> Option<u32> {
        match self {
            Violation::DuplicateId(id)
            | Violation::NonPositiveRho(id)
            | Violation::FractionOutOfRange(id, _)
            | Violation::NegativeRate(id)
            | Violation::BadProbability(id, _)
            | Violation::BadMobility(id, _) => Some(*id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid scenario: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

/// Checks every invariant of a scenario and fills the derived fields.
///
/// On success the gains are resolved to [`GainsSetting::Fixed`], so
/// validating the result again returns it unchanged.
pub fn validate_scenario(raw: ScenarioConfig) -> Result<ScenarioConfig, ValidationError> {
    let mut v = Vec::new();
    let tb = raw.time_base;
    if !(tb.tau > 0.0) {
        v.push(Violation::NonPositiveTau);
    }
    if !(tb.hold > 0.0) {
        v.push(Violation::NonPositiveHold);
    }
    if tb.tau > 0.0 && tb.hold > 0.0 {
        let r = tb.ratio();
        if !r.is_finite() || (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
            v.push(Violation::HoldNotSlotMultiple(r));
        }
    }
    if !(raw.bandwidth > 0.0) {
        v.push(Violation::NonPositiveBandwidth);
    }
    if raw.stations.is_empty() {
        v.push(Violation::NoStations);
    }
    let mut seen = HashSet::new();
    for s in &raw.stations {
        if !seen.insert(s.id) {
            v.push(Violation::DuplicateId(s.id));
        }
        match &s.radio {
            RadioSpec::Fixed { rho } => {
                if !(*rho > 0.0) {
                    v.push(Violation::NonPositiveRho(s.id));
                }
            }
            RadioSpec::Step { before, after, .. } => {
                if !(*before > 0.0 && *after > 0.0) {
                    v.push(Violation::NonPositiveRho(s.id));
                }
            }
            RadioSpec::Mobile(m) => {
                if let Err(msg) = m.check() {
                    v.push(Violation::BadMobility(s.id, msg));
                }
            }
        }
        match s.traffic {
            Traffic::Saturated => {}
            Traffic::Rate(r) => {
                if !(r >= 0.0) {
                    v.push(Violation::NegativeRate(s.id));
                }
            }
            Traffic::FractionOfSaturation(f) => {
                if !(f > 0.0 && f < 1.0) {
                    v.push(Violation::FractionOutOfRange(s.id, f));
                }
            }
        }
        if let Some(p) = s.policy.fixed_p() {
            if !(p > 0.0 && p <= 1.0) {
                v.push(Violation::BadProbability(s.id, p));
            }
        }
        if let PolicySpec::StaticAdos { window: Some(0) } = s.policy {
            v.push(Violation::ZeroWindow);
        }
    }
    if raw.horizon <= raw.warmup {
        v.push(Violation::HorizonNotAboveWarmup);
    }
    if let Err(msg) = raw.channel.check() {
        v.push(Violation::BadChannel(msg));
    }
    if !(raw.gain_scale > 0.0 && raw.gain_scale.is_finite()) {
        v.push(Violation::BadGains(format!("scale must be positive, got {}", raw.gain_scale)));
    }
    let gains = match raw.gains {
        GainsSetting::Derive { alpha_p, g_p, alpha_r, g_r } => {
            let mut ok = true;
            for (name, a) in [("alpha_p", alpha_p), ("alpha_r", alpha_r)] {
                if !(a > 0.0 && a <= 1.0) {
                    v.push(Violation::BadGains(format!("{name} outside (0,1]: {a}")));
                    ok = false;
                }
            }
            for (name, g) in [("g_p", g_p), ("g_r", g_r)] {
                if !(g >= 1.0) {
                    v.push(Violation::BadGains(format!("{name} must be >= 1: {g}")));
                    ok = false;
                }
            }
            if ok && tb.tau > 0.0 && tb.hold > 0.0 {
                GainsSetting::Fixed(derive_controller_gains(&tb, alpha_p, g_p, alpha_r, g_r))
            } else {
                raw.gains
            }
        }
        GainsSetting::Fixed(g) => {
            if !(g.k_p > 0.0 && g.k_r > 0.0) {
                v.push(Violation::BadGains("controller gains must be positive".into()));
            }
            if !(g.alpha_p > 0.0 && g.alpha_p <= 1.0 && g.alpha_r > 0.0 && g.alpha_r <= 1.0) {
                v.push(Violation::BadGains("smoothing weights outside (0,1]".into()));
            }
            raw.gains
        }
    };
    if raw.window == 0 || raw.snr_window == 0 {
        v.push(Violation::ZeroWindow);
    }
    if v.is_empty() {
        Ok(ScenarioConfig { gains, ..raw })
    } else {
        Err(ValidationError { violations: v })
    }
}
