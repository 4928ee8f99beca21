//! Station movement and distance-based mean SNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(&self, to: &Point, f: f64) -> Point {
        Point::new(self.x + (to.x - self.x) * f, self.y + (to.y - self.y) * f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MobilityKind {
    Static {
        position: Point,
    },
    /// Constant-speed move from `from` to `to` over `duration` mini slots,
    /// then stays at `to`.
    LinearTrack {
        from: Point,
        to: Point,
        start: u64,
        duration: u64,
    },
    /// Random waypoint in `[0, area_side]^2`. `speed` is in area units per
    /// mini slot; `pause` in mini slots.
    RandomWaypoint {
        area_side: f64,
        speed: f64,
        pause: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySpec {
    pub kind: MobilityKind,
    pub receiver: Point,
    /// Distance at which the mean SNR equals `reference_snr`.
    pub reference_distance: f64,
    pub reference_snr: f64,
    pub pathloss_exponent: f64,
    /// The SNR stops growing inside this radius.
    pub min_distance: f64,
}

impl MobilitySpec {
    /// Random-waypoint setup: receiver at `(L, L)`, unit SNR at the origin,
    /// SNR capped within `L/100` of the receiver.
    pub fn waypoint(area_side: f64, speed: f64) -> Self {
        let receiver = Point::new(area_side, area_side);
        Self {
            kind: MobilityKind::RandomWaypoint { area_side, speed, pause: 0 },
            receiver,
            reference_distance: receiver.distance(&Point::new(0.0, 0.0)),
            reference_snr: 1.0,
            pathloss_exponent: 2.0,
            min_distance: area_side / 100.0,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.pathloss_exponent > 0.0) {
            return Err("path-loss exponent must be positive".into());
        }
        if !(self.reference_distance > 0.0 && self.reference_snr > 0.0 && self.min_distance > 0.0) {
            return Err("reference distance, reference SNR and minimum distance must be positive".into());
        }
        match &self.kind {
            MobilityKind::RandomWaypoint { area_side, speed, .. } => {
                if !(*area_side > 0.0) {
                    return Err("area side must be positive".into());
                }
                if !(*speed >= 0.0 && speed.is_finite()) {
                    return Err("speed must be >= 0".into());
                }
            }
            MobilityKind::LinearTrack { duration, .. } if *duration == 0 => {
                return Err("track duration must be positive".into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// Mean SNR at `position`.
pub fn snr_from_position(spec: &MobilitySpec, position: Point) -> f64 {
    let d = position.distance(&spec.receiver).max(spec.min_distance);
    spec.reference_snr * (spec.reference_distance / d).powf(spec.pathloss_exponent)
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    from: Point,
    to: Point,
    depart: u64,
    arrive: u64,
    /// End of the pause at `to`.
    leave: u64,
}

/// A position process. Deterministic given the seed; queries are cheapest
/// in nondecreasing time order, but any order is answered correctly.
#[derive(Debug, Clone)]
pub struct MobilityProcess {
    spec: MobilitySpec,
    seed: u64,
    rng: ChaCha8Rng,
    leg: Option<Leg>,
}

impl MobilityProcess {
    pub fn new(spec: MobilitySpec, seed: u64) -> Self {
        let mut p = Self {
            spec,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            leg: None,
        };
        p.restart();
        p
    }

    pub fn spec(&self) -> &MobilitySpec {
        &self.spec
    }

    fn restart(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.leg = match self.spec.kind {
            MobilityKind::RandomWaypoint { area_side, .. } => {
                let start = self.uniform_point(area_side);
                Some(self.next_leg(start, 0))
            }
            _ => None,
        };
    }

    fn uniform_point(&mut self, side: f64) -> Point {
        Point::new(self.rng.random::<f64>() * side, self.rng.random::<f64>() * side)
    }

    fn next_leg(&mut self, from: Point, depart: u64) -> Leg {
        let MobilityKind::RandomWaypoint { area_side, speed, pause } = self.spec.kind else {
            unreachable!("legs only exist for random waypoint")
        };
        let to = self.uniform_point(area_side);
        let travel = if speed > 0.0 {
            (from.distance(&to) / speed).ceil().min(u64::MAX as f64 / 4.0) as u64
        } else {
            u64::MAX / 4
        };
        let arrive = depart.saturating_add(travel.max(1));
        Leg {
            from,
            to,
            depart,
            arrive,
            leave: arrive.saturating_add(pause),
        }
    }

    pub fn position_at(&mut self, t: u64) -> Point {
        match self.spec.kind {
            MobilityKind::Static { position } => position,
            MobilityKind::LinearTrack { from, to, start, duration } => {
                if t <= start {
                    from
                } else if t >= start + duration {
                    to
                } else {
                    from.lerp(&to, (t - start) as f64 / duration as f64)
                }
            }
            MobilityKind::RandomWaypoint { .. } => {
                if t < self.leg.expect("waypoint leg").depart {
                    self.restart();
                }
                loop {
                    let leg = self.leg.expect("waypoint leg");
                    if t < leg.arrive {
                        let f = (t - leg.depart) as f64 / (leg.arrive - leg.depart) as f64;
                        return leg.from.lerp(&leg.to, f);
                    }
                    if t < leg.leave {
                        return leg.to;
                    }
                    self.leg = Some(self.next_leg(leg.to, leg.leave));
                }
            }
        }
    }

    pub fn snr_at(&mut self, t: u64) -> f64 {
        let pos = self.position_at(t);
        snr_from_position(&self.spec, pos)
    }
}
