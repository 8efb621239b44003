//! Geo-referenced rasters: affine transforms, scene I/O and tile cropping.

mod raster;
mod tile;
mod transform;

use std::path::Path;

pub use raster::{decode_ppm, load_scene_dir, RasterScene};
pub use tile::{crop_tile, locate, tile_side_px, CropWindow, ImageTile, MAX_OVERHANG};
pub use transform::{gsd_of, GeoTransform};

#[derive(Debug, thiserror::Error)]
pub enum GeoError {
    #[error("world file line {line}: {reason}")]
    WorldFile { line: usize, reason: String },
    #[error("degenerate transform (determinant {determinant})")]
    DegenerateTransform { determinant: f64 },
    #[error("unsupported raster: {0}")]
    UnsupportedRaster(String),
    #[error("raster: {0}")]
    Raster(String),
    #[error("point ({x}, {y}) lies outside scene {scene_id}")]
    OutOfScene { scene_id: String, x: f64, y: f64 },
    #[error("tile window overhangs scene {scene_id} by {:.1}% of its area", overhang * 100.0)]
    PartialCoverage { scene_id: String, overhang: f64 },
    #[error("invalid crop request: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl GeoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        GeoError::Io { path: path.display().to_string(), source }
    }
}
