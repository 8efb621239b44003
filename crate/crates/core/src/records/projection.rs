//! WGS84 to scene-CRS projection for the two CRS declarations the pipeline
//! understands.
//!
//! * `TEST:IDENTITY` maps `(lat, lon)` to `(lon * k, lat * k)` with
//!   [`IDENTITY_METERS_PER_DEGREE`] as `k`.
//! * `LOCAL:TM lat0=.. lon0=.. k0=.. x0=.. y0=..` is a spherical transverse
//!   Mercator centered on `(lat0, lon0)` with scale `k0` and false
//!   easting/northing `x0`/`y0`. Omitted keys take the defaults of
//!   [`TransverseMercator::default`].

use super::RecordError;

/// Meters per degree used by the identity test CRS (one equatorial degree).
pub const IDENTITY_METERS_PER_DEGREE: f64 = 111_320.0;

pub const IDENTITY_CRS: &str = "TEST:IDENTITY";

const EARTH_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMercator {
    pub lat0: f64,
    pub lon0: f64,
    pub k0: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for TransverseMercator {
    fn default() -> Self {
        Self { lat0: 29.72, lon0: -95.36, k0: 0.9996, x0: 300_000.0, y0: 3_300_000.0 }
    }
}

impl TransverseMercator {
    pub fn crs_string(&self) -> String {
        format!("LOCAL:TM lat0={} lon0={} k0={} x0={} y0={}", self.lat0, self.lon0, self.k0, self.x0, self.y0)
    }

    fn forward(&self, lat: f64, lon: f64) -> (f64, f64) {
        let phi = lat.to_radians();
        let dlam = (lon - self.lon0).to_radians();
        let rk = EARTH_RADIUS_M * self.k0;
        let b = phi.cos() * dlam.sin();
        let x = 0.5 * rk * ((1.0 + b) / (1.0 - b)).ln();
        let y = rk * (phi.tan().atan2(dlam.cos()) - self.lat0.to_radians());
        (x + self.x0, y + self.y0)
    }

    fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let rk = EARTH_RADIUS_M * self.k0;
        let xs = (x - self.x0) / rk;
        let d = (y - self.y0) / rk + self.lat0.to_radians();
        let lat = (d.sin() / xs.cosh()).asin();
        let lon = self.lon0.to_radians() + xs.sinh().atan2(d.cos());
        (lat.to_degrees(), lon.to_degrees())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Identity,
    TransverseMercator(TransverseMercator),
}

impl Projection {
    pub fn parse(crs: &str) -> Result<Self, RecordError> {
        let crs = crs.trim();
        if crs == IDENTITY_CRS {
            return Ok(Projection::Identity);
        }
        let mut parts = crs.split_whitespace();
        if parts.next() != Some("LOCAL:TM") {
            return Err(RecordError::UnsupportedCrs(crs.to_string()));
        }
        let mut tm = TransverseMercator::default();
        for part in parts {
            let bad = || RecordError::UnsupportedCrs(crs.to_string());
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: f64 = value.parse().map_err(|_| bad())?;
            match key {
                "lat0" => tm.lat0 = value,
                "lon0" => tm.lon0 = value,
                "k0" => tm.k0 = value,
                "x0" => tm.x0 = value,
                "y0" => tm.y0 = value,
                _ => return Err(bad()),
            }
        }
        Ok(Projection::TransverseMercator(tm))
    }

    pub fn forward(&self, lat: f64, lon: f64) -> (f64, f64) {
        match self {
            Projection::Identity => (lon * IDENTITY_METERS_PER_DEGREE, lat * IDENTITY_METERS_PER_DEGREE),
            Projection::TransverseMercator(tm) => tm.forward(lat, lon),
        }
    }

    /// Projected meters back to `(lat, lon)` degrees.
    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Projection::Identity => (y / IDENTITY_METERS_PER_DEGREE, x / IDENTITY_METERS_PER_DEGREE),
            Projection::TransverseMercator(tm) => tm.inverse(x, y),
        }
    }
}

/// Projects WGS84 `(lat, lon)` degrees into the CRS named by `crs`.
pub fn project_wgs84(lat: f64, lon: f64, crs: &str) -> Result<(f64, f64), RecordError> {
    Ok(Projection::parse(crs)?.forward(lat, lon))
}
