//! One-axis parameter sweeps over a base scenario.

use std::fmt;
use std::str::FromStr;

use dosnet::{Estimation, MobilityKind, RadioSpec, ScenarioConfig, StationSpec, Traffic};

use crate::presets::group_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Number of stations; copies of the first station with fresh ids.
    NStations,
    /// Four groups with `rho = 1 + g delta_rho`.
    DeltaRho,
    /// Speed of every random-waypoint station.
    Speed,
    MeanError,
    /// Load of every station but the first, as a fraction of saturation.
    LoadFraction,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::NStations,
        Axis::DeltaRho,
        Axis::Speed,
        Axis::MeanError,
        Axis::LoadFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::NStations => "n_stations",
            Axis::DeltaRho => "delta_rho",
            Axis::Speed => "speed",
            Axis::MeanError => "mean_error",
            Axis::LoadFraction => "load_fraction",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = SweepError;
    fn from_str(s: &str) -> Result<Self, SweepError> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SweepError::UnknownAxis(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("unknown axis `{0}`; expected n_stations, delta_rho, speed, mean_error or load_fraction")]
    UnknownAxis(String),
    #[error("no sweep values")]
    NoValues,
    #[error("bad sweep value `{0}`")]
    BadValue(String),
    #[error("{axis}={value}: {reason}")]
    NotApplicable { axis: Axis, value: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::NoValues);
        }
        Ok(Self { axis, values })
    }
}

/// Parses a comma-separated value list.
pub fn parse_values(list: &str) -> Result<Vec<f64>, SweepError> {
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| SweepError::BadValue(v.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(SweepError::NoValues);
    }
    Ok(values)
}

/// `base` with the sweep axis set to `value`.
pub fn apply_axis(base: &ScenarioConfig, axis: Axis, value: f64) -> Result<ScenarioConfig, SweepError> {
    let not = |reason: &str| SweepError::NotApplicable {
        axis,
        value,
        reason: reason.to_string(),
    };
    let mut cfg = base.clone();
    match axis {
        Axis::NStations => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(not("needs a positive integer"));
            }
            let template: StationSpec = base.stations.first().cloned().ok_or_else(|| not("no stations"))?;
            cfg.stations = (1..=value as u32).map(|id| StationSpec { id, ..template.clone() }).collect();
        }
        Axis::DeltaRho => {
            let n = cfg.stations.len();
            for (i, s) in cfg.stations.iter_mut().enumerate() {
                s.radio = RadioSpec::Fixed {
                    rho: 1.0 + group_of(i, n) as f64 * value,
                };
            }
        }
        Axis::Speed => {
            let mut any = false;
            for s in &mut cfg.stations {
                if let RadioSpec::Mobile(m) = &mut s.radio {
                    if let MobilityKind::RandomWaypoint { speed, .. } = &mut m.kind {
                        *speed = value;
                        any = true;
                    }
                }
            }
            if !any {
                return Err(not("no random-waypoint station"));
            }
        }
        Axis::MeanError => {
            cfg.channel.estimation = if value == 0.0 {
                Estimation::Perfect
            } else {
                Estimation::Linear { mean_error: value }
            };
        }
        Axis::LoadFraction => {
            for s in cfg.stations.iter_mut().skip(1) {
                s.traffic = Traffic::FractionOfSaturation(value);
            }
        }
    }
    Ok(cfg)
}

/// Label of one sweep point.
pub fn point_label(axis: Axis, value: f64) -> String {
    format!("sweep/{axis}={value}")
}
