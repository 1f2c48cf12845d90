use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{wrap_two_pi, PoseSE3};
use crate::error::{Error, Result};
use crate::geodesy::LocalPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingMode {
    AlongTrack,
    /// Radians clockwise from north.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSpec {
    pub waypoints: Vec<LocalPoint<f64>>,
    /// m/s
    pub speed: f64,
    /// Hz
    #[serde(default = "default_rate")]
    pub capture_rate: f64,
    pub heading: HeadingMode,
    /// Pitch of successive captures cycles through this list, radians.
    pub pitches: Vec<f64>,
    /// Uniform horizontal jitter added to each capture position, metres.
    #[serde(default)]
    pub jitter_m: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_rate() -> f64 {
    0.5
}

impl FlightSpec {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::invalid("a flight needs at least two waypoints"));
        }
        if !(self.speed > 0.0 && self.capture_rate > 0.0) {
            return Err(Error::invalid("speed and capture rate must be positive"));
        }
        if self.pitches.is_empty() {
            return Err(Error::invalid("pitch profile is empty"));
        }
        if !(self.jitter_m >= 0.0) || self.waypoints.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid(
                "flight values must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSample {
    /// Seconds since the first waypoint.
    pub time: f64,
    /// Distance flown along the path, metres.
    pub distance: f64,
    pub pose: PoseSE3<f64>,
}

/// Samples the path at the capture rate while flying at constant speed.
pub fn generate_flight(f: &FlightSpec) -> Result<Vec<FlightSample>> {
    f.validate()?;
    let segs: Vec<(LocalPoint<f64>, LocalPoint<f64>, f64)> = f
        .waypoints
        .windows(2)
        .map(|w| (w[0], w[1], w[0].distance(&w[1])))
        .filter(|s| s.2 > 0.0)
        .collect();
    if segs.is_empty() {
        return Err(Error::invalid("all waypoints coincide"));
    }
    let total: f64 = segs.iter().map(|s| s.2).sum();
    let dt = 1.0 / f.capture_rate;
    let count = (total / (f.speed * dt) + 1e-9).floor() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(f.seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let time = k as f64 * dt;
        let mut s = (f.speed * time).min(total);
        let distance = s;
        let mut seg = segs.len() - 1;
        for (i, g) in segs.iter().enumerate() {
            if s <= g.2 || i == segs.len() - 1 {
                seg = i;
                break;
            }
            s -= g.2;
        }
        let (a, b, len) = segs[seg];
        let r = (s / len).clamp(0.0, 1.0);
        let mut p = LocalPoint::new(
            a.x + (b.x - a.x) * r,
            a.y + (b.y - a.y) * r,
            a.z + (b.z - a.z) * r,
        );
        if f.jitter_m > 0.0 {
            p.x += rng.gen_range(-f.jitter_m..=f.jitter_m);
            p.y += rng.gen_range(-f.jitter_m..=f.jitter_m);
        }
        let heading = match f.heading {
            HeadingMode::AlongTrack => wrap_two_pi((b.x - a.x).atan2(b.y - a.y)),
            HeadingMode::Fixed(h) => wrap_two_pi(h),
        };
        out.push(FlightSample {
            time,
            distance,
            pose: PoseSE3::new(p, heading, f.pitches[k % f.pitches.len()], 0.0),
        });
    }
    Ok(out)
}
