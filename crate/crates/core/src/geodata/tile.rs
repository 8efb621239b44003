//! Fixed-ground-size tile extraction around address points.

use super::{GeoError, RasterScene};
use crate::Scalar;

/// Largest fraction of a tile that may fall outside its scene before the
/// crop is refused. Smaller overhangs are zero-padded.
pub const MAX_OVERHANG: f64 = 0.10;

/// Square RGB tile with samples scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTile<T> {
    /// Row-major interleaved RGB, `side_px * side_px * 3` values.
    pub pixels: Vec<T>,
    pub side_px: usize,
    pub side_m: f64,
    /// Projected center requested by the caller.
    pub center: (f64, f64),
    pub scene_id: String,
    pub address_id: String,
    /// Set when part of the window lay outside the scene and was zero-filled.
    pub padded: bool,
}

impl<T: Scalar> ImageTile<T> {
    /// Builds a tile from raw pixels, checking shape and range.
    pub fn from_pixels(pixels: Vec<T>, side_px: usize) -> Result<Self, GeoError> {
        if pixels.len() != side_px * side_px * 3 {
            return Err(GeoError::Raster(format!(
                "tile buffer holds {} values, expected {side_px}x{side_px}x3",
                pixels.len()
            )));
        }
        if pixels.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(GeoError::Raster("tile values outside [0, 1]".into()));
        }
        Ok(Self {
            pixels,
            side_px,
            side_m: side_px as f64,
            center: (0.0, 0.0),
            scene_id: String::new(),
            address_id: String::new(),
            padded: false,
        })
    }

    pub fn with_address(mut self, address_id: impl Into<String>) -> Self {
        self.address_id = address_id.into();
        self
    }
}

/// Integer pixel window of a prospective crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    pub col0: i64,
    pub row0: i64,
    pub side_px: usize,
    /// Number of window pixels outside the scene.
    pub outside: usize,
}

impl CropWindow {
    pub fn overhang(&self) -> f64 {
        self.outside as f64 / (self.side_px * self.side_px) as f64
    }
}

/// Tile side in pixels for a ground side of `side_m` at `gsd` meters per pixel.
pub fn tile_side_px(side_m: f64, gsd: f64) -> usize {
    (side_m / gsd).round() as usize
}

/// Computes the crop window without touching pixel data.
///
/// The center snaps to the pixel containing it; the window then spans
/// `side_px / 2` pixels before that pixel and the rest after it.
pub fn locate(scene: &RasterScene, center: (f64, f64), side_m: f64) -> Result<CropWindow, GeoError> {
    if !(side_m > 0.0) || !side_m.is_finite() {
        return Err(GeoError::Config(format!("tile side must be positive, got {side_m}")));
    }
    let gsd = scene.transform.gsd()?;
    let side_px = tile_side_px(side_m, gsd);
    if side_px == 0 {
        return Err(GeoError::Config(format!("tile side {side_m} m is below one pixel at {gsd} m/px")));
    }
    let (col, row) = scene.transform.projected_to_pixel(center.0, center.1);
    let (w, h) = (scene.width as f64, scene.height as f64);
    if !(col >= 0.0 && col < w && row >= 0.0 && row < h) {
        return Err(GeoError::OutOfScene { scene_id: scene.scene_id.clone(), x: center.0, y: center.1 });
    }
    let half = (side_px / 2) as i64;
    let col0 = col.floor() as i64 - half;
    let row0 = row.floor() as i64 - half;
    let inside_cols = overlap(col0, side_px, scene.width);
    let inside_rows = overlap(row0, side_px, scene.height);
    let outside = side_px * side_px - inside_cols * inside_rows;
    Ok(CropWindow { col0, row0, side_px, outside })
}

fn overlap(start: i64, len: usize, extent: usize) -> usize {
    let lo = start.max(0);
    let hi = (start + len as i64).min(extent as i64);
    (hi - lo).max(0) as usize
}

/// Crops a square tile of `side_m` meters centered on `center`.
///
/// Samples are copied without resampling and divided by 255.
pub fn crop_tile<T: Scalar>(scene: &RasterScene, center: (f64, f64), side_m: f64) -> Result<ImageTile<T>, GeoError> {
    let win = locate(scene, center, side_m)?;
    if win.outside > 0 && win.overhang() >= MAX_OVERHANG {
        return Err(GeoError::PartialCoverage { scene_id: scene.scene_id.clone(), overhang: win.overhang() });
    }
    let n = win.side_px;
    let scale = T::of(255.0);
    let mut pixels = vec![T::zero(); n * n * 3];
    for r in 0..n {
        let src_row = win.row0 + r as i64;
        if src_row < 0 || src_row >= scene.height as i64 {
            continue;
        }
        for c in 0..n {
            let src_col = win.col0 + c as i64;
            if src_col < 0 || src_col >= scene.width as i64 {
                continue;
            }
            let src = (src_row as usize * scene.width + src_col as usize) * 3;
            let dst = (r * n + c) * 3;
            for band in 0..3 {
                pixels[dst + band] = T::of(scene.pixels[src + band] as f64) / scale;
            }
        }
    }
    Ok(ImageTile {
        pixels,
        side_px: n,
        side_m,
        center,
        scene_id: scene.scene_id.clone(),
        address_id: String::new(),
        padded: win.outside > 0,
    })
}
