//! Geographic ↔ local metric conversion.
//!
//! The local frame is east-north-up, anchored at a recorded geographic
//! origin. Over map extents of a few kilometres the earth radius is treated
//! as constant and distances follow the equirectangular approximation of the
//! great-circle distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scalar::Real;

/// IUGG mean earth radius in metres.
pub const MEAN_EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    /// Degrees, [-90, 90].
    pub lat: T,
    /// Degrees, [-180, 180).
    pub lon: T,
    /// Metres above the reference.
    pub alt: T,
}

impl<T: Real> GeoPoint<T> {
    pub fn new(lat: T, lon: T, alt: T) -> Result<Self> {
        let p = Self { lat, lon, alt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && self.alt.is_finite()
            && self.lat.abs() <= T::lit(90.0)
            && self.lon >= T::lit(-180.0)
            && self.lon < T::lit(180.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "geographic point out of range: lat {}, lon {}, alt {}",
                self.lat, self.lon, self.alt
            )))
        }
    }
}

/// East-north-up metres relative to a [`LocalFrame`] origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> LocalPoint<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vec(self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn from_vec(v: Vec3<T>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.to_vec() - other.to_vec()).norm()
    }

    pub fn horizontal_distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame<T> {
    pub origin: GeoPoint<T>,
    pub earth_radius: T,
}

impl<T: Real> LocalFrame<T> {
    pub fn new(origin: GeoPoint<T>) -> Result<Self> {
        Self::with_radius(origin, T::lit(MEAN_EARTH_RADIUS_M))
    }

    pub fn with_radius(origin: GeoPoint<T>, earth_radius: T) -> Result<Self> {
        origin.validate()?;
        if !(earth_radius > T::zero() && earth_radius.is_finite()) {
            return Err(Error::invalid("earth radius must be positive"));
        }
        // Longitude scale is undefined at the poles.
        if origin.lat.abs() >= T::lit(90.0) {
            return Err(Error::invalid("frame origin cannot sit on a pole"));
        }
        Ok(Self {
            origin,
            earth_radius,
        })
    }

    pub fn geo_to_local(&self, p: &GeoPoint<T>) -> LocalPoint<T> {
        let o = &self.origin;
        let dlat = p.lat - o.lat;
        let dlon = wrap_degrees(p.lon - o.lon);
        LocalPoint {
            x: self.earth_radius * o.lat.to_radians().cos() * dlon.to_radians(),
            y: self.earth_radius * dlat.to_radians(),
            z: p.alt - o.alt,
        }
    }

    pub fn local_to_geo(&self, q: &LocalPoint<T>) -> GeoPoint<T> {
        let o = &self.origin;
        let dlat = (q.y / self.earth_radius).to_degrees();
        let dlon = (q.x / (self.earth_radius * o.lat.to_radians().cos())).to_degrees();
        GeoPoint {
            lat: o.lat + dlat,
            lon: wrap_degrees(o.lon + dlon),
            alt: o.alt + q.z,
        }
    }
}

/// Maps an angle in degrees onto [-180, 180).
fn wrap_degrees<T: Real>(deg: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    if deg >= -half && deg < half {
        return deg;
    }
    let w = (deg + half) % full;
    if w < T::zero() {
        w + full - half
    } else {
        w - half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn frame(lat: f64, lon: f64) -> LocalFrame<f64> {
        LocalFrame::new(GeoPoint::new(lat, lon, 12.0).unwrap()).unwrap()
    }

    #[test]
    fn origin_maps_to_zero() {
        let f = frame(22.3, 114.2);
        let q = f.geo_to_local(&f.origin);
        assert_eq!(q, LocalPoint::new(0.0, 0.0, 0.0));
        assert_eq!(f.local_to_geo(&LocalPoint::new(0.0, 0.0, 0.0)), f.origin);
    }

    #[test]
    fn millidegree_of_latitude() {
        let f = frame(22.3, 114.2);
        let p = GeoPoint::new(22.301, 114.2, 12.0).unwrap();
        let q = f.geo_to_local(&p);
        // 6 371 008.8 · 0.001 · π / 180
        assert_abs_diff_eq!(q.y, 111.195_080_2, epsilon = 1e-6);
        assert_abs_diff_eq!(q.x, 0.0, epsilon = 1e-9);
        let back = f.local_to_geo(&LocalPoint::new(0.0, 111.195_080_233_5, 0.0));
        assert_abs_diff_eq!(back.lat, 22.301, epsilon = 1e-9);
    }

    #[test]
    fn longitude_scale_halves_at_sixty_degrees() {
        let at_equator = frame(0.0, 10.0).geo_to_local(&GeoPoint::new(0.0, 10.01, 12.0).unwrap());
        let at_sixty = frame(60.0, 10.0).geo_to_local(&GeoPoint::new(60.0, 10.01, 12.0).unwrap());
        assert_abs_diff_eq!(at_sixty.x, 0.5 * at_equator.x, epsilon = 1e-9);
    }

    #[test]
    fn antimeridian_wraps() {
        let f = frame(10.0, 179.999);
        let q = f.geo_to_local(&GeoPoint::new(10.0, -179.999, 12.0).unwrap());
        assert!(q.x > 0.0 && q.x < 300.0, "{q:?}");
        let back = f.local_to_geo(&q);
        assert_abs_diff_eq!(back.lon, -179.999, epsilon = 1e-9);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 0.0, f64::NAN).is_err());
        let o = GeoPoint::new(0.0, 0.0, 0.0).unwrap();
        assert!(LocalFrame::with_radius(o, -1.0).is_err());
    }

    #[test]
    fn single_precision_frame() {
        let f = LocalFrame::<f32>::new(GeoPoint::new(22.0, 114.0, 0.0).unwrap()).unwrap();
        let q = f.geo_to_local(&GeoPoint::new(22.001, 114.0, 5.0).unwrap());
        assert!((q.y - 111.195).abs() < 0.1);
        assert_eq!(q.z, 5.0);
    }

    proptest! {
        #[test]
        fn round_trip_within_ten_km(
            lat0 in -80.0f64..80.0,
            lon0 in -180.0f64..179.999,
            x in -10_000.0f64..10_000.0,
            y in -10_000.0f64..10_000.0,
            z in -500.0f64..500.0,
        ) {
            let f = frame(lat0, lon0);
            let q = LocalPoint::new(x, y, z);
            let g = f.local_to_geo(&q);
            let back = f.geo_to_local(&g);
            prop_assert!((back.x - x).abs() < 1e-6);
            prop_assert!((back.y - y).abs() < 1e-6);
            prop_assert!((back.z - z).abs() < 1e-9);
            let g2 = f.local_to_geo(&back);
            prop_assert!((g2.lat - g.lat).abs() < 1e-9);
            prop_assert!((g2.lon - g.lon).abs() < 1e-9);
        }

        #[test]
        fn sign_symmetry_and_monotonicity(
            lat0 in -60.0f64..60.0,
            d in 0.0f64..0.05,
            e in 0.0f64..0.05,
        ) {
            let f = frame(lat0, 0.0);
            let o = f.origin;
            let plus = f.geo_to_local(&GeoPoint { lat: o.lat + d, lon: d, alt: o.alt });
            let minus = f.geo_to_local(&GeoPoint { lat: o.lat - d, lon: -d, alt: o.alt });
            prop_assert!((plus.x + minus.x).abs() < 1e-9);
            prop_assert!((plus.y + minus.y).abs() < 1e-9);
            let (small, large) = if d < e { (d, e) } else { (e, d) };
            let ys = f.geo_to_local(&GeoPoint { lat: o.lat + small, lon: 0.0, alt: o.alt }).y;
            let yl = f.geo_to_local(&GeoPoint { lat: o.lat + large, lon: 0.0, alt: o.alt }).y;
            prop_assert!(yl.abs() >= ys.abs());
        }
    }
}
