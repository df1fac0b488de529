//! Coordinates, the local planar projection, and angle helpers.
//!
//! All geometry runs in a local metric plane (`Xy`, meters east/north of a
//! projection origin). Angles are degrees, 0° = due east, counterclockwise
//! positive, normalized to `[0, 360)`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by the equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Distance beyond which the local projection is considered inaccurate.
pub const PROJECTION_WARN_DISTANCE_M: f64 = 100_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("degenerate direction: coincident points ({0}, {1})")]
    DegenerateDirection(f64, f64),
}

/// A WGS84 longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(GeoError::InvalidCoordinate(format!(
                "non-finite lon/lat ({lon}, {lat})"
            )));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::InvalidCoordinate(format!(
                "longitude {lon} outside [-180, 180]"
            )));
        }
        if lat <= -90.0 || lat >= 90.0 {
            return Err(GeoError::InvalidCoordinate(format!(
                "latitude {lat} outside (-90, 90)"
            )));
        }
        Ok(LonLat { lon, lat })
    }
}

impl fmt::Display for LonLat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.7} {:.7}", self.lon, self.lat)
    }
}

/// A point in the local metric plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Xy {
    pub x: f64,
    pub y: f64,
}

impl Xy {
    pub const ORIGIN: Xy = Xy { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Xy { x, y }
    }

    /// Unit vector pointing at `deg` (0° = east, CCW).
    pub fn from_angle(deg: f64) -> Self {
        let r = deg.to_radians();
        Xy::new(r.cos(), r.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Xy) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Xy) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Xy) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates counterclockwise by `deg` about `center`.
    pub fn rotate_about(self, center: Xy, deg: f64) -> Xy {
        let (s, c) = deg.to_radians().sin_cos();
        let d = self - center;
        center + Xy::new(d.x * c - d.y * s, d.x * s + d.y * c)
    }

    pub fn lerp(self, other: Xy, t: f64) -> Xy {
        self + (other - self) * t
    }
}

impl Add for Xy {
    type Output = Xy;
    fn add(self, o: Xy) -> Xy {
        Xy::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Xy {
    type Output = Xy;
    fn sub(self, o: Xy) -> Xy {
        Xy::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Xy {
    type Output = Xy;
    fn mul(self, k: f64) -> Xy {
        Xy::new(self.x * k, self.y * k)
    }
}

/// Local equirectangular projection about a fixed origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    origin: LonLat,
    cos_lat0: f64,
}

impl Projection {
    pub fn new(origin: LonLat) -> Self {
        Projection {
            origin,
            cos_lat0: origin.lat.to_radians().cos(),
        }
    }

    /// Projection about the centroid of `points`, rounded to 7 decimals so the
    /// origin survives a text round trip unchanged. Falls back to (0, 0).
    pub fn centroid_of<'a>(points: impl IntoIterator<Item = &'a LonLat>) -> Self {
        let (mut sl, mut sb, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            sl += p.lon;
            sb += p.lat;
            n += 1;
        }
        if n == 0 {
            return Projection::new(LonLat { lon: 0.0, lat: 0.0 });
        }
        let round7 = |v: f64| (v * 1e7).round() / 1e7;
        Projection::new(LonLat {
            lon: round7(sl / n as f64),
            lat: round7(sb / n as f64),
        })
    }

    pub fn origin(&self) -> LonLat {
        self.origin
    }

    /// True if both origins agree to within the 7-decimal serialization precision.
    pub fn same_as(&self, other: &Projection) -> bool {
        (self.origin.lon - other.origin.lon).abs() < 5e-8
            && (self.origin.lat - other.origin.lat).abs() < 5e-8
    }

    pub fn project(&self, p: LonLat) -> Result<Xy, GeoError> {
        if !p.lon.is_finite() || !p.lat.is_finite() {
            return Err(GeoError::InvalidCoordinate(format!(
                "non-finite lon/lat ({}, {})",
                p.lon, p.lat
            )));
        }
        let xy = Xy::new(
            EARTH_RADIUS_M * self.cos_lat0 * (p.lon - self.origin.lon).to_radians(),
            EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians(),
        );
        if xy.norm() > PROJECTION_WARN_DISTANCE_M {
            log::warn!(
                "point {p} is {:.0} m from projection origin; local projection is inaccurate",
                xy.norm()
            );
        }
        Ok(xy)
    }

    pub fn unproject(&self, p: Xy) -> LonLat {
        LonLat {
            lon: self.origin.lon + (p.x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees(),
            lat: self.origin.lat + (p.y / EARTH_RADIUS_M).to_degrees(),
        }
    }
}

/// Normalizes degrees into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Absolute circular difference between two angles, in `[0, 180]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = normalize_deg(a - b);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Direction from `from` to `to` in degrees, 0° = east, CCW, `[0, 360)`.
pub fn bearing(from: Xy, to: Xy) -> Result<f64, GeoError> {
    let d = to - from;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(GeoError::DegenerateDirection(from.x, from.y));
    }
    Ok(normalize_deg(d.y.atan2(d.x).to_degrees()))
}

/// Histogram bin containing `deg`; bins are half-open intervals of width `360 / n_bins`.
pub fn angle_to_bin(deg: f64, n_bins: usize) -> usize {
    debug_assert!(n_bins >= 4);
    let width = 360.0 / n_bins as f64;
    let bin = (normalize_deg(deg) / width).floor() as usize;
    bin.min(n_bins - 1)
}

pub fn bin_center(bin: usize, n_bins: usize) -> f64 {
    (bin as f64 + 0.5) * (360.0 / n_bins as f64)
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Xy, a: Xy, b: Xy) -> f64 {
    p.dist(closest_on_segment(p, a, b))
}

pub fn closest_on_segment(p: Xy, a: Xy, b: Xy) -> Xy {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Parameter `t` in `[0, 1]` where the segment `inside`–`outside` leaves the
/// circle of radius `r` about `center`. `inside` must lie within the circle.
pub fn circle_exit_param(center: Xy, r: f64, inside: Xy, outside: Xy) -> f64 {
    let d = outside - inside;
    let f = inside - center;
    let a = d.dot(d);
    if a == 0.0 {
        return 0.0;
    }
    let b = 2.0 * f.dot(d);
    let c = f.dot(f) - r * r;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
}
