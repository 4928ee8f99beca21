//! Distributed opportunistic scheduling (DOS) over a slotted, single-hop
//! contention channel.
//!
//! Stations contend with an access probability; a station that wins a mini
//! slot probes its channel and either transmits for a fixed duration or gives
//! the opportunity back. The crate contains:
//!
//! * [`control`]: the two proportional control loops of the adaptive scheme
//!   (ADOS) that drive the empty-slot probability to `1/e` and each threshold
//!   to its optimal-stopping fixed point;
//! * [`gains`]: closed-form controller gains from the loop stability and
//!   noise bounds;
//! * [`oracle`]: analytic solvers for the optimal static configuration and
//!   the baseline thresholds;
//! * [`engine`]: a deterministic mini-slot simulator;
//! * [`channel`], [`mobility`], [`policies`], [`metrics`]: the supporting
//!   models.

pub mod channel;
pub mod config;
pub mod control;
pub mod engine;
pub mod gains;
pub mod metrics;
pub mod mobility;
pub mod oracle;
pub mod policies;
mod quad;

pub use channel::{ChannelModelSpec, Estimation, Fading, RateMap, RateSample};
pub use config::{
    validate_scenario, GainsSetting, PolicySpec, RadioSpec, ScenarioConfig, StationSpec,
    TimeBase, Traffic, ValidationError, Violation,
};
pub use engine::{simulate_run, RunResult, SlotOutcome, TraceSample};
pub use gains::{derive_controller_gains, p_to_contention_window, ControllerGains};
pub use metrics::{jain_index, FairnessReport};
pub use mobility::{MobilityKind, MobilitySpec, Point};
pub use oracle::{RateDistribution, StaticConfiguration};
pub use policies::PolicyKind;

/// Euler's number, used throughout for the `1/e` operating point.
pub const E: f64 = std::f64::consts::E;
