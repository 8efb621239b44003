//! Affine pixel/ground transforms and the world-file sidecar format.

use super::GeoError;

/// Affine mapping from pixel `(col, row)` to projected `(x, y)` meters:
///
/// ```text
/// x = a * col + b * row + c
/// y = d * col + e * row + f
/// ```
///
/// Pixel coordinates refer to the upper-left corner of a pixel, so the
/// center of pixel `(i, j)` sits at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl GeoTransform {
    /// Builds a transform, rejecting singular coefficient matrices.
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self, GeoError> {
        let gt = Self { a, b, c, d, e, f };
        let det = gt.determinant();
        if det == 0.0 || !det.is_finite() || ![c, f].iter().all(|v| v.is_finite()) {
            return Err(GeoError::DegenerateTransform { determinant: det });
        }
        Ok(gt)
    }

    /// North-up transform with square pixels of `gsd` meters and the upper-left
    /// corner at `(origin_x, origin_y)`.
    pub fn north_up(gsd: f64, origin_x: f64, origin_y: f64) -> Result<Self, GeoError> {
        Self::new(gsd, 0.0, origin_x, 0.0, -gsd, origin_y)
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 0.0, e: 1.0, f: 0.0 }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn pixel_to_projected(&self, col: f64, row: f64) -> (f64, f64) {
        (self.a * col + self.b * row + self.c, self.d * col + self.e * row + self.f)
    }

    pub fn projected_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let det = self.determinant();
        let dx = x - self.c;
        let dy = y - self.f;
        ((self.e * dx - self.b * dy) / det, (self.a * dy - self.d * dx) / det)
    }

    /// Ground sample distance of an axis-aligned transform with square pixels.
    pub fn gsd(&self) -> Result<f64, GeoError> {
        if self.b != 0.0 || self.d != 0.0 {
            return Err(GeoError::UnsupportedRaster(format!("rotated transform (b={}, d={})", self.b, self.d)));
        }
        if (self.a.abs() - self.e.abs()).abs() > 1e-9 {
            return Err(GeoError::UnsupportedRaster(format!(
                "anisotropic pixels (|a|={}, |e|={})",
                self.a.abs(),
                self.e.abs()
            )));
        }
        Ok(self.a.abs())
    }

    /// Parses a world-file sidecar: six decimal lines in the order
    /// `a, d, b, e, c, f`.
    pub fn parse_world_file(text: &str) -> Result<Self, GeoError> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if lines.len() != 6 {
            return Err(GeoError::WorldFile {
                line: lines.len().min(6) + 1,
                reason: format!("expected 6 values, found {}", lines.len()),
            });
        }
        let mut v = [0.0f64; 6];
        for (i, (slot, raw)) in v.iter_mut().zip(&lines).enumerate() {
            *slot = raw
                .parse::<f64>()
                .map_err(|_| GeoError::WorldFile { line: i + 1, reason: format!("not a decimal number: {raw:?}") })?;
            if !slot.is_finite() {
                return Err(GeoError::WorldFile { line: i + 1, reason: format!("non-finite value: {raw:?}") });
            }
        }
        let [a, d, b, e, c, f] = v;
        Self::new(a, b, c, d, e, f)
    }

    /// Writes the world-file form. Values use the shortest representation
    /// that parses back to the identical double.
    pub fn to_world_file(&self) -> String {
        format!("{}\n{}\n{}\n{}\n{}\n{}\n", self.a, self.d, self.b, self.e, self.c, self.f)
    }
}

/// Ground sample distance of `gt`; see [`GeoTransform::gsd`].
pub fn gsd_of(gt: &GeoTransform) -> Result<f64, GeoError> {
    gt.gsd()
}
