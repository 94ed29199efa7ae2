//! Spherical-earth geometry: distances, bearings and a local planar projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    pub fn validated(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidInput(format!(
                "coordinate out of range: ({}, {})",
                self.lat, self.lon
            )))
        }
    }

    /// `[lon, lat]`, the GeoJSON position order.
    pub fn lon_lat(&self) -> [f64; 2] {
        [self.lon, self.lat]
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    // Sort the endpoints so the result is bitwise symmetric.
    let (a, b) = if (a.lat, a.lon) <= (b.lat, b.lon) {
        (a, b)
    } else {
        (b, a)
    };
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `origin` to `dest`, degrees clockwise
/// from north in `[0, 360)`.
pub fn bearing_deg(origin: GeoPoint, dest: GeoPoint) -> Result<f64> {
    if origin == dest {
        return Err(Error::UndefinedBearing);
    }
    Ok(bearing_unchecked(origin, dest))
}

fn bearing_unchecked(origin: GeoPoint, dest: GeoPoint) -> f64 {
    let phi1 = origin.lat.to_radians();
    let phi2 = dest.lat.to_radians();
    let dlambda = (dest.lon - origin.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    normalize_deg(y.atan2(x).to_degrees())
}

/// Point reached by travelling `distance_m` along the great circle leaving
/// `origin` at `bearing` degrees.
pub fn destination(origin: GeoPoint, bearing: f64, distance_m: f64) -> GeoPoint {
    let delta = distance_m / EARTH_RADIUS_M;
    let theta = bearing.to_radians();
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let y = theta.sin() * delta.sin() * phi1.cos();
    let x = delta.cos() - phi1.sin() * sin_phi2;
    let lambda2 = lambda1 + y.atan2(x);
    let lon = (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint::new(phi2.to_degrees(), lon)
}

/// Wraps an angle into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Signed smallest difference `to - from`, in `[-180, 180)`.
pub fn angle_diff_deg(from: f64, to: f64) -> f64 {
    (to - from + 180.0).rem_euclid(360.0) - 180.0
}

/// Azimuthal-equidistant projection about a fixed center. Planar `x` points
/// east and `y` north, both in meters.
#[derive(Clone, Copy, Debug)]
pub struct LocalProjection {
    center: GeoPoint,
}

impl LocalProjection {
    pub fn new(center: GeoPoint) -> Self {
        Self { center }
    }

    /// Projection centered on the arithmetic mean of `points`.
    pub fn around(points: &[GeoPoint]) -> Self {
        let n = points.len().max(1) as f64;
        let lat = points.iter().map(|p| p.lat).sum::<f64>() / n;
        let lon = points.iter().map(|p| p.lon).sum::<f64>() / n;
        Self::new(GeoPoint::new(lat, lon))
    }

    pub fn center(&self) -> GeoPoint {
        self.center
    }

    pub fn forward(&self, p: GeoPoint) -> [f64; 2] {
        if p == self.center {
            return [0.0, 0.0];
        }
        let rho = haversine_m(self.center, p);
        let theta = bearing_unchecked(self.center, p).to_radians();
        [rho * theta.sin(), rho * theta.cos()]
    }

    pub fn inverse(&self, xy: [f64; 2]) -> GeoPoint {
        let rho = xy[0].hypot(xy[1]);
        if rho == 0.0 {
            return self.center;
        }
        let bearing = xy[0].atan2(xy[1]).to_degrees();
        destination(self.center, bearing, rho)
    }
}
