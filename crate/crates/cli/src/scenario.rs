//! Scenario files: `[section]` headers and `key = value` lines.
//!
//! ```text
//! [time]
//! tau_s = 1e-6
//! hold_over_tau = 10
//!
//! [run]
//! horizon_slots = 1e7
//! warmup_slots = 1e6
//! replications = 4
//!
//! [station.1]
//! rho = 1
//! policy = ados
//! count = 10
//! ```

use dosnet::channel::{Estimation, Fading, RateMap, DEFAULT_DOPPLER, DEFAULT_OSCILLATORS};
use dosnet::{
    validate_scenario, GainsSetting, MobilityKind, MobilitySpec, Point, PolicySpec, RadioSpec, ScenarioConfig, StationSpec, Traffic,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

/// A parsed, not yet validated, scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub replications: usize,
    /// Header line of the section that defined each station id.
    pub station_lines: Vec<(u32, usize)>,
}

/// Validation failure, one message per violation, prefixed with the
/// section line when the violation belongs to a station.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid scenario: {}", .messages.join("; "))]
pub struct InvalidScenario {
    pub messages: Vec<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<ScenarioConfig, InvalidScenario> {
        validate_scenario(self.config.clone()).map_err(|e| InvalidScenario {
            messages: e
                .violations
                .iter()
                .map(|v| {
                    let line = v
                        .station()
                        .and_then(|id| self.station_lines.iter().find(|(s, _)| *s == id))
                        .map(|&(_, l)| l);
                    match line {
                        Some(l) => format!("line {l}: {v}"),
                        None => v.to_string(),
                    }
                })
                .collect(),
        })
    }
}

pub const DEFAULT_REPLICATIONS: usize = 10;

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn split_sections(text: &str) -> Result<Vec<Section>, ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(line, "unterminated section header");
            };
            sections.push(Section {
                name: name.trim().to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return err(line, format!("expected `key = value`, got `{content}`"));
        };
        let Some(section) = sections.last_mut() else {
            return err(line, "key outside of any section");
        };
        section.entries.push(Entry {
            key: k.trim().to_string(),
            value: v.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

fn parse_f64(e: &Entry) -> Result<f64, ParseError> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(e.line, format!("{}: expected a number, got `{}`", e.key, e.value)),
    }
}

fn parse_u64(e: &Entry) -> Result<u64, ParseError> {
    if let Ok(v) = e.value.parse::<u64>() {
        return Ok(v);
    }
    match e.value.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => err(e.line, format!("{}: expected a non-negative integer, got `{}`", e.key, e.value)),
    }
}

fn parse_point(e: &Entry) -> Result<Point, ParseError> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if let [x, y] = parts[..] {
        if let (Ok(x), Ok(y)) = (x.parse::<f64>(), y.parse::<f64>()) {
            return Ok(Point::new(x, y));
        }
    }
    err(e.line, format!("{}: expected `x, y`, got `{}`", e.key, e.value))
}

fn parse_list(e: &Entry) -> Result<Vec<f64>, ParseError> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .or_else(|_| err(e.line, format!("{}: bad list entry `{}`", e.key, s.trim())))
        })
        .collect()
}

fn unknown_key<T>(section: &str, e: &Entry) -> Result<T, ParseError> {
    err(e.line, format!("unknown key `{}` in [{}]", e.key, section))
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let sections = split_sections(text)?;
    let mut cfg = ScenarioConfig::new(Vec::new(), 1_000_000);
    let mut replications = DEFAULT_REPLICATIONS;
    let mut station_lines = Vec::new();
    let mut hold_over_tau = 10.0;
    let (mut fading, mut doppler, mut oscillators) = ("iid".to_string(), DEFAULT_DOPPLER, DEFAULT_OSCILLATORS);
    let mut fading_line = 0;
    let mut rates_mbps: Option<Vec<f64>> = None;
    let mut rate_map = "shannon".to_string();
    let mut rate_map_line = 0;
    let mut gains = match GainsSetting::default() {
        GainsSetting::Derive { alpha_p, g_p, alpha_r, g_r } => [alpha_p, g_p, alpha_r, g_r],
        GainsSetting::Fixed(_) => unreachable!("default gains are derived"),
    };

    for sec in &sections {
        match sec.name.as_str() {
            "time" => {
                for e in &sec.entries {
                    match e.key.as_str() {
                        "tau_s" => cfg.time_base.tau = parse_f64(e)?,
                        "hold_over_tau" => hold_over_tau = parse_f64(e)?,
                        _ => return unknown_key(&sec.name, e),
                    }
                }
            }
            "radio" => {
                for e in &sec.entries {
                    match e.key.as_str() {
                        "bandwidth_hz" => cfg.bandwidth = parse_f64(e)?,
                        "fading" => {
                            fading = e.value.clone();
                            fading_line = e.line;
                        }
                        "doppler_per_slot" => doppler = parse_f64(e)?,
                        "oscillators" => oscillators = parse_u64(e)? as usize,
                        "rate_map" => {
                            rate_map = e.value.clone();
                            rate_map_line = e.line;
                        }
                        "rates_mbps" => rates_mbps = Some(parse_list(e)?),
                        "estimation_mean_error" => {
                            let v = parse_f64(e)?;
                            cfg.channel.estimation = if v == 0.0 {
                                Estimation::Perfect
                            } else {
                                Estimation::Linear { mean_error: v }
                            };
                        }
                        _ => return unknown_key(&sec.name, e),
                    }
                }
            }
            "run" => {
                for e in &sec.entries {
                    match e.key.as_str() {
                        "horizon_slots" => cfg.horizon = parse_u64(e)?,
                        "warmup_slots" => cfg.warmup = parse_u64(e)?,
                        "seed" => cfg.seed = parse_u64(e)?,
                        "replications" => {
                            replications = parse_u64(e)? as usize;
                            if replications == 0 {
                                return err(e.line, "replications must be at least 1");
                            }
                        }
                        "sample_every" => cfg.sampling = parse_u64(e)?,
                        "window_slots" => cfg.window = parse_u64(e)?,
                        "snr_window_slots" => cfg.snr_window = parse_u64(e)?,
                        _ => return unknown_key(&sec.name, e),
                    }
                }
            }
            "gains" => {
                for e in &sec.entries {
                    match e.key.as_str() {
                        "alpha_p" => gains[0] = parse_f64(e)?,
                        "g_p" => gains[1] = parse_f64(e)?,
                        "alpha_r" => gains[2] = parse_f64(e)?,
                        "g_r" => gains[3] = parse_f64(e)?,
                        "scale" => cfg.gain_scale = parse_f64(e)?,
                        _ => return unknown_key(&sec.name, e),
                    }
                }
            }
            name => {
                let Some(id) = name.strip_prefix("station.") else {
                    return err(sec.line, format!("unknown section [{name}]"));
                };
                let Ok(id) = id.trim().parse::<u32>() else {
                    return err(sec.line, format!("station id must be a non-negative integer, got `{id}`"));
                };
                let added = parse_station(id, sec)?;
                station_lines.extend(added.iter().map(|st| (st.id, sec.line)));
                cfg.stations.extend(added);
            }
        }
    }

    cfg.time_base.hold = cfg.time_base.tau * hold_over_tau;
    cfg.channel.fading = match fading.as_str() {
        "iid" => Fading::IidRayleigh,
        "jakes" => Fading::Jakes { doppler, oscillators },
        "constant" => Fading::Constant,
        other => return err(fading_line, format!("fading must be iid, jakes or constant, got `{other}`")),
    };
    cfg.channel.rate_map = match rate_map.as_str() {
        "shannon" => RateMap::Shannon,
        "discrete" => RateMap::DiscreteSet(
            rates_mbps
                .map(|v| v.iter().map(|r| r * 1e6).collect())
                .unwrap_or_else(|| dosnet::channel::WIFI_RATES_BPS.to_vec()),
        ),
        other => return err(rate_map_line, format!("rate_map must be shannon or discrete, got `{other}`")),
    };
    cfg.gains = GainsSetting::Derive {
        alpha_p: gains[0],
        g_p: gains[1],
        alpha_r: gains[2],
        g_r: gains[3],
    };
    Ok(Scenario {
        config: cfg,
        replications,
        station_lines,
    })
}

fn parse_traffic(e: &Entry) -> Result<Traffic, ParseError> {
    let v = e.value.as_str();
    if v == "saturated" {
        return Ok(Traffic::Saturated);
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .or_else(|_| err(e.line, format!("traffic: bad number `{s}`")))
    };
    if let Some(r) = v.strip_prefix("rate_bps=") {
        return Ok(Traffic::Rate(num(r)?));
    }
    if let Some(f) = v.strip_prefix("fraction=") {
        return Ok(Traffic::FractionOfSaturation(num(f)?));
    }
    err(e.line, format!("traffic must be saturated, rate_bps=<v> or fraction=<v>, got `{v}`"))
}

fn parse_station(id: u32, sec: &Section) -> Result<Vec<StationSpec>, ParseError> {
    let mut rho: Option<f64> = None;
    let mut step: Option<(f64, u64)> = None;
    let mut traffic = Traffic::Saturated;
    let mut policy = PolicySpec::Ados;
    let mut p: Option<f64> = None;
    let mut window: Option<u64> = None;
    let mut join_at = 0;
    let mut count = 1u64;
    let mut mobility: Option<(String, usize)> = None;
    let mut area_side = 1.0;
    let mut speed = 0.0;
    let mut pause = 0;
    let mut position = None;
    let mut from = None;
    let mut to = None;
    let mut track_start = 0;
    let mut track_slots = None;
    let mut receiver = None;
    let mut ref_distance = None;
    let mut ref_snr = None;
    let mut pathloss = 2.0;
    let mut min_distance = None;
    let mut policy_line = sec.line;

    for e in &sec.entries {
        match e.key.as_str() {
            "rho" => rho = Some(parse_f64(e)?),
            "rho_step" => {
                let Some((after, at)) = e.value.split_once('@') else {
                    return err(e.line, "rho_step must be `<rho>@<slot>`");
                };
                let after = Entry { value: after.trim().into(), ..e.clone() };
                let at = Entry { value: at.trim().into(), ..e.clone() };
                step = Some((parse_f64(&after)?, parse_u64(&at)?));
            }
            "traffic" => traffic = parse_traffic(e)?,
            "policy" => {
                policy = PolicySpec::from_name(&e.value)
                    .map_or_else(|| err(e.line, format!("unknown policy `{}`", e.value)), Ok)?;
                policy_line = e.line;
            }
            "p" => p = Some(parse_f64(e)?),
            "window" => window = Some(parse_u64(e)?),
            "join_at" => join_at = parse_u64(e)?,
            "count" => {
                count = parse_u64(e)?;
                if count == 0 {
                    return err(e.line, "count must be at least 1");
                }
            }
            "mobility" => mobility = Some((e.value.clone(), e.line)),
            "area_side" => area_side = parse_f64(e)?,
            "speed" => speed = parse_f64(e)?,
            "pause" => pause = parse_u64(e)?,
            "position" => position = Some(parse_point(e)?),
            "from" => from = Some(parse_point(e)?),
            "to" => to = Some(parse_point(e)?),
            "track_start" => track_start = parse_u64(e)?,
            "track_slots" => track_slots = Some(parse_u64(e)?),
            "receiver" => receiver = Some(parse_point(e)?),
            "ref_distance" => ref_distance = Some(parse_f64(e)?),
            "ref_snr" => ref_snr = Some(parse_f64(e)?),
            "pathloss" => pathloss = parse_f64(e)?,
            "min_distance" => min_distance = Some(parse_f64(e)?),
            _ => return unknown_key(&sec.name, e),
        }
    }

    if let Some(p) = p {
        match policy {
            PolicySpec::NonOpportunistic { .. } | PolicySpec::CsmaCa { .. } | PolicySpec::Tdos { .. } | PolicySpec::Ndos { .. } => {
                policy = policy.with_p(p)
            }
            _ => return err(policy_line, format!("policy {} has no fixed access probability", policy.name())),
        }
    }
    if let Some(w) = window {
        match policy {
            PolicySpec::StaticAdos { .. } => policy = PolicySpec::StaticAdos { window: Some(w) },
            _ => return err(policy_line, "`window` only applies to static_ados"),
        }
    }

    let radio = match mobility {
        None => {
            let Some(rho) = rho else {
                return err(sec.line, format!("station {id}: needs `rho` or `mobility`"));
            };
            match step {
                None => RadioSpec::Fixed { rho },
                Some((after, at)) => RadioSpec::Step { before: rho, after, at },
            }
        }
        Some((kind, line)) => {
            if step.is_some() {
                return err(line, "rho_step cannot be combined with mobility");
            }
            let mut spec = match kind.as_str() {
                "waypoint" => MobilitySpec::waypoint(area_side, speed),
                "static" | "track" => {
                    let receiver = receiver.unwrap_or(Point::new(0.0, 0.0));
                    let (kind, start_at) = if kind == "static" {
                        let Some(position) = position else {
                            return err(line, "static mobility needs `position`");
                        };
                        (MobilityKind::Static { position }, position)
                    } else {
                        let (Some(from), Some(to), Some(duration)) = (from, to, track_slots) else {
                            return err(line, "track mobility needs `from`, `to` and `track_slots`");
                        };
                        (
                            MobilityKind::LinearTrack {
                                from,
                                to,
                                start: track_start,
                                duration,
                            },
                            from,
                        )
                    };
                    let d = start_at.distance(&receiver);
                    MobilitySpec {
                        kind,
                        receiver,
                        reference_distance: d,
                        reference_snr: rho.unwrap_or(1.0),
                        pathloss_exponent: 2.0,
                        min_distance: d / 100.0,
                    }
                }
                other => return err(line, format!("mobility must be waypoint, track or static, got `{other}`")),
            };
            if let MobilityKind::RandomWaypoint { pause: p, .. } = &mut spec.kind {
                *p = pause;
            }
            if let Some(r) = receiver {
                spec.receiver = r;
            }
            if let Some(d) = ref_distance {
                spec.reference_distance = d;
            }
            if let Some(s) = ref_snr {
                spec.reference_snr = s;
            }
            if let Some(m) = min_distance {
                spec.min_distance = m;
            }
            spec.pathloss_exponent = pathloss;
            RadioSpec::Mobile(spec)
        }
    };

    Ok((0..count)
        .map(|k| StationSpec {
            id: id + k as u32,
            radio: radio.clone(),
            traffic,
            policy,
            join_at,
        })
        .collect())
}
