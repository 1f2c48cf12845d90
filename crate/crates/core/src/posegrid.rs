//! Quantized camera poses for database construction, plus the sizing rules
//! that suggest grid spacing, heading count and elevation band for a camera.

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, PoseSE3};
use crate::error::{Error, Result};
use crate::geodesy::LocalPoint;
use crate::scalar::Real;

/// Axis-aligned rectangle `[x0, x1) × [y0, y1)` in the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Real> Area<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub area: Area<T>,
    pub spacing_xy: T,
    pub elevations: Vec<T>,
    /// Uniformly spaced headings per revolution.
    pub headings: u32,
    /// Radians below the horizon.
    pub pitches: Vec<T>,
}

impl<T: Real> GridSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_xy > T::zero() && self.spacing_xy.is_finite()) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if self.headings == 0 {
            return Err(Error::invalid("need at least one heading"));
        }
        if self.elevations.is_empty() || self.pitches.is_empty() {
            return Err(Error::invalid("elevations and pitches must be non-empty"));
        }
        if self
            .elevations
            .iter()
            .chain(self.pitches.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("elevations and pitches must be finite"));
        }
        self.axis_counts().map(|_| ())
    }

    /// Samples per axis of the half-open grid.
    pub fn axis_counts(&self) -> Result<(usize, usize)> {
        let a = &self.area;
        let nx = half_open_count(a.x1 - a.x0, self.spacing_xy)?;
        let ny = half_open_count(a.y1 - a.y0, self.spacing_xy)?;
        Ok((nx, ny))
    }

    pub fn pose_count(&self) -> Result<usize> {
        let (nx, ny) = self.axis_counts()?;
        Ok(nx * ny * self.elevations.len() * self.headings as usize * self.pitches.len())
    }

    /// Pose at a flat enumeration index; `x` varies fastest, then `y`,
    /// elevation, heading and pitch.
    pub fn pose_at(&self, index: usize) -> Result<PoseSE3<T>> {
        let (nx, ny) = self.axis_counts()?;
        let total = self.pose_count()?;
        if index >= total {
            return Err(Error::invalid(format!("pose index {index} out of {total}")));
        }
        let mut rest = index;
        let mut next = |n: usize| {
            let v = rest % n;
            rest /= n;
            v
        };
        let ix = next(nx);
        let iy = next(ny);
        let ie = next(self.elevations.len());
        let ih = next(self.headings as usize);
        let ip = next(self.pitches.len());
        let heading = T::TAU() * T::lit(ih as f64) / T::lit(self.headings as f64);
        Ok(PoseSE3::new(
            LocalPoint::new(
                self.area.x0 + T::lit(ix as f64) * self.spacing_xy,
                self.area.y0 + T::lit(iy as f64) * self.spacing_xy,
                self.elevations[ie],
            ),
            heading,
            self.pitches[ip],
            T::zero(),
        ))
    }
}

/// Number of samples `x0 + k·step` strictly below `x0 + length`.
fn half_open_count<T: Real>(length: T, step: T) -> Result<usize> {
    let ratio = length / step;
    let nearest = ratio.round();
    // Ratios within rounding noise of an integer count exactly that many.
    let n = if (ratio - nearest).abs() <= T::lit(1e-9) * nearest.max(T::one()) {
        nearest
    } else {
        ratio.ceil()
    };
    if !(ratio.is_finite()) || n < T::one() || ratio < T::one() - T::lit(1e-9) {
        return Err(Error::invalid("grid area is smaller than one spacing step"));
    }
    Ok(n.to_usize().unwrap_or(0))
}

pub fn enumerate_poses<T: Real>(g: &GridSpec<T>) -> Result<Vec<PoseSE3<T>>> {
    g.validate()?;
    (0..g.pose_count()?).map(|i| g.pose_at(i)).collect()
}

/// Ground rectangle `(width, height)` seen by the camera pointing straight
/// down at level ground from `elevation` metres.
pub fn nadir_footprint<T: Real>(cam: &CameraModel<T>, elevation: T) -> (T, T) {
    let two = T::lit(2.0);
    (
        two * elevation * (cam.hfov() / two).tan(),
        two * elevation * (cam.vfov() / two).tan(),
    )
}

/// A quarter of the shorter side of the nadir footprint.
pub fn suggest_spacing<T: Real>(cam: &CameraModel<T>, elevation: T) -> T {
    let (w, h) = nadir_footprint(cam, elevation);
    w.min(h) / T::lit(4.0)
}

/// Smallest heading count whose spacing keeps at least half of the
/// horizontal FOV overlapping between neighbouring headings.
pub fn suggest_heading_count<T: Real>(cam: &CameraModel<T>) -> u32 {
    let half = cam.hfov() / T::lit(2.0);
    let mut count = (T::TAU() / half).ceil().to_u32().unwrap_or(1).max(1);
    // Guard the ceiling against rounding on exact divisors.
    while count > 1 && T::TAU() / T::lit((count - 1) as f64) <= half {
        count -= 1;
    }
    while T::TAU() / T::lit(count as f64) > half {
        count += 1;
    }
    count
}

/// Fraction of the horizontal FOV shared by adjacent headings.
pub fn heading_overlap<T: Real>(cam: &CameraModel<T>, count: u32) -> T {
    let hfov = cam.hfov();
    (hfov - T::TAU() / T::lit(count as f64)) / hfov
}

/// Working altitude band of ±29 % around the nominal rendering elevation.
pub fn elevation_band<T: Real>(nominal: T) -> (T, T) {
    (nominal * T::lit(0.71), nominal * T::lit(1.29))
}
