//! Geo-referenced RGB scenes and their on-disk form: a binary P6 PPM with a
//! world-file (`.wld`) and one-line CRS (`.crs`) sidecar sharing the stem.

use std::fs;
use std::path::{Path, PathBuf};

use super::{GeoError, GeoTransform};

/// An 8-bit RGB raster with its pixel-to-ground mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterScene {
    pub scene_id: String,
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB samples, `width * height * 3` bytes.
    pub pixels: Vec<u8>,
    pub transform: GeoTransform,
    pub crs: String,
}

impl RasterScene {
    pub fn new(
        scene_id: impl Into<String>,
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        transform: GeoTransform,
        crs: impl Into<String>,
    ) -> Result<Self, GeoError> {
        if width == 0 || height == 0 {
            return Err(GeoError::Raster(format!("empty raster {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(GeoError::Raster(format!(
                "pixel buffer holds {} bytes, expected {}",
                pixels.len(),
                width * height * 3
            )));
        }
        Ok(Self { scene_id: scene_id.into(), width, height, pixels, transform, crs: crs.into() })
    }

    #[inline]
    pub fn sample(&self, col: usize, row: usize, band: usize) -> u8 {
        self.pixels[(row * self.width + col) * 3 + band]
    }

    /// Projected bounds `(min_x, min_y, max_x, max_y)` of the scene footprint.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (w, h) = (self.width as f64, self.height as f64);
        let corners = [
            self.transform.pixel_to_projected(0.0, 0.0),
            self.transform.pixel_to_projected(w, 0.0),
            self.transform.pixel_to_projected(0.0, h),
            self.transform.pixel_to_projected(w, h),
        ];
        corners
            .iter()
            .fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |(x0, y0, x1, y1), &(x, y)| {
                (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
            })
    }

    /// Encodes the pixels as a binary P6 PPM with maxval 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Writes `<dir>/<scene_id>.{ppm,wld,crs}`.
    pub fn save(&self, dir: &Path) -> Result<(), GeoError> {
        fs::create_dir_all(dir).map_err(|e| GeoError::io(dir, e))?;
        let stem = dir.join(&self.scene_id);
        write(&stem.with_extension("ppm"), &self.to_ppm())?;
        write(&stem.with_extension("wld"), self.transform.to_world_file().as_bytes())?;
        write(&stem.with_extension("crs"), format!("{}\n", self.crs).as_bytes())?;
        Ok(())
    }

    /// Loads a scene from its `.ppm` path; the sidecars must sit alongside.
    pub fn load(ppm_path: &Path) -> Result<Self, GeoError> {
        let scene_id = ppm_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| GeoError::Raster(format!("bad scene path {}", ppm_path.display())))?
            .to_string();
        let bytes = fs::read(ppm_path).map_err(|e| GeoError::io(ppm_path, e))?;
        let (width, height, pixels) = decode_ppm(&bytes)?;
        let wld = ppm_path.with_extension("wld");
        let transform = GeoTransform::parse_world_file(&fs::read_to_string(&wld).map_err(|e| GeoError::io(&wld, e))?)?;
        let crs_path = ppm_path.with_extension("crs");
        let crs = fs::read_to_string(&crs_path)
            .map_err(|e| GeoError::io(&crs_path, e))?
            .lines()
            .next()
            .unwrap_or("")
            .trim()
            .to_string();
        Self::new(scene_id, width, height, pixels, transform, crs)
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), GeoError> {
    fs::write(path, bytes).map_err(|e| GeoError::io(path, e))
}

/// Loads every `*.ppm` scene in `dir`, sorted by scene id.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<RasterScene>, GeoError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| GeoError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "ppm"))
        .collect();
    paths.sort();
    paths.iter().map(|p| RasterScene::load(p)).collect()
}

/// Decodes a binary P6 PPM with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), GeoError> {
    let mut pos = 0usize;
    let mut fields = [0usize; 3];
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P6" {
        return Err(GeoError::Raster("not a binary P6 PPM".into()));
    }
    for slot in fields.iter_mut() {
        let tok = next_token(bytes, &mut pos)?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GeoError::Raster("malformed PPM header".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(GeoError::Raster(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let need = width * height * 3;
    let payload = bytes
        .get(pos..pos + need)
        .ok_or_else(|| GeoError::Raster(format!("truncated PPM payload, expected {need} bytes")))?;
    Ok((width, height, payload.to_vec()))
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], GeoError> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(GeoError::Raster("truncated PPM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RasterScene {
        let pixels = (0..2 * 3 * 3).map(|v| (v * 13 % 256) as u8).collect();
        RasterScene::new("s0", 2, 3, pixels, GeoTransform::identity(), "TEST:IDENTITY").unwrap()
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(RasterScene::new("x", 2, 2, vec![0; 11], GeoTransform::identity(), "c").is_err());
        assert!(RasterScene::new("x", 0, 2, vec![], GeoTransform::identity(), "c").is_err());
    }

    #[test]
    fn ppm_round_trip_with_comment() {
        let scene = tiny();
        let (w, h, px) = decode_ppm(&scene.to_ppm()).unwrap();
        assert_eq!((w, h), (2, 3));
        assert_eq!(px, scene.pixels);

        let mut commented = b"P6\n# made by hand\n2 3\n255\n".to_vec();
        commented.extend_from_slice(&scene.pixels);
        assert_eq!(decode_ppm(&commented).unwrap().2, scene.pixels);
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = tiny().to_ppm();
        bytes.pop();
        assert!(decode_ppm(&bytes).is_err());
        assert!(decode_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
    }

    #[test]
    fn save_and_load_scene_dir() {
        let dir = tempfile::tempdir().unwrap();
        let scene = tiny();
        scene.save(dir.path()).unwrap();
        let loaded = load_scene_dir(dir.path()).unwrap();
        assert_eq!(loaded, vec![scene]);
    }
}
