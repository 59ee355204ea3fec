//! Raster, annotation, manifest and report persistence.
//!
//! The formats are described in `docs/formats.md`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};
use serde::{Deserialize, Serialize};

use crate::config::{EvalConfig, PmgConfig, UpdateConfig};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{BinaryMask, Connectivity, GrayImage, PointLabel};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn img_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Decoded raster with the bit depth of its source.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedImage {
    pub image: GrayImage,
    pub bit_depth: u8,
}

impl LoadedImage {
    pub fn full_scale(&self) -> f64 {
        if self.bit_depth == 16 {
            65535.0
        } else {
            255.0
        }
    }

    /// True when every value is 0 or full scale.
    pub fn is_binary(&self) -> bool {
        let full = self.full_scale();
        self.image.data().iter().all(|&v| v == 0.0 || v == full)
    }

    /// Foreground where the value exceeds `threshold * full_scale`.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        let cut = threshold * self.full_scale();
        BinaryMask::from_fn(self.image.width(), self.image.height(), |x, y| {
            self.image.get(x, y) > cut
        })
    }
}

/// Integer luminance `(299 R + 587 G + 114 B + 500) / 1000`.
pub fn luminance(r: u32, g: u32, b: u32) -> u32 {
    (299 * r + 587 * g + 114 * b + 500) / 1000
}

/// Loads an 8- or 16-bit raster as intensities in their native scale.
///
/// Gray+alpha drops alpha; RGB(A) is reduced with [`luminance`].
pub fn load_image(path: impl AsRef<Path>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let decoded = ImageReader::open(path)
        .map_err(io_err(path))?
        .with_guessed_format()
        .map_err(io_err(path))?
        .decode()
        .map_err(img_err(path))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (data, bit_depth): (Vec<f64>, u8) = match decoded {
        DynamicImage::ImageLuma8(b) => (b.into_raw().into_iter().map(f64::from).collect(), 8),
        DynamicImage::ImageLuma16(b) => (b.into_raw().into_iter().map(f64::from).collect(), 16),
        DynamicImage::ImageLumaA8(b) => (b.pixels().map(|p| f64::from(p.0[0])).collect(), 8),
        DynamicImage::ImageLumaA16(b) => (b.pixels().map(|p| f64::from(p.0[0])).collect(), 16),
        DynamicImage::ImageRgb8(b) => (
            b.pixels()
                .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()) as f64)
                .collect(),
            8,
        ),
        DynamicImage::ImageRgba8(b) => (
            b.pixels()
                .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()) as f64)
                .collect(),
            8,
        ),
        DynamicImage::ImageRgb16(b) => (
            b.pixels()
                .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()) as f64)
                .collect(),
            16,
        ),
        DynamicImage::ImageRgba16(b) => (
            b.pixels()
                .map(|p| luminance(p.0[0].into(), p.0[1].into(), p.0[2].into()) as f64)
                .collect(),
            16,
        ),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("{:?}", other.color()),
            })
        }
    };
    Ok(LoadedImage {
        image: GrayImage::new(w, h, data)?,
        bit_depth,
    })
}

/// Writes a single-channel PNG, rounding and clamping to the bit depth.
pub fn save_image(image: &GrayImage, bit_depth: u8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width() as u32, image.height() as u32);
    match bit_depth {
        8 => {
            let raw = image.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w, h, raw)
                .expect("buffer size matches")
                .save(path)
                .map_err(img_err(path))
        }
        16 => {
            let raw = image.data().iter().map(|v| v.round().clamp(0.0, 65535.0) as u16).collect();
            ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w, h, raw)
                .expect("buffer size matches")
                .save(path)
                .map_err(img_err(path))
        }
        other => Err(Error::InvalidConfig(format!("bit depth must be 8 or 16, got {other}"))),
    }
}

/// Writes an 8-bit PNG with 0 for background and 255 for foreground.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = mask.bits().iter().map(|&b| b * 255).collect();
    ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer size matches")
        .save(path)
        .map_err(img_err(path))
}

/// Loads a mask, treating values above `threshold * full_scale` as foreground.
///
/// Soft (non-binary) rasters are accepted and noted in the log.
pub fn load_mask(path: impl AsRef<Path>, threshold: f64) -> Result<BinaryMask> {
    let path = path.as_ref();
    let loaded = load_image(path)?;
    if !loaded.is_binary() {
        log::info!(
            "{}: non-binary mask binarized at {threshold} of full scale",
            path.display()
        );
    }
    Ok(loaded.binarize(threshold))
}

/// Raw point annotations grouped by image identifier, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PointTable {
    groups: Vec<(String, Vec<(i64, i64)>)>,
    index: HashMap<String, usize>,
}

impl PointTable {
    pub fn push(&mut self, image: &str, x: i64, y: i64) {
        let idx = *self.index.entry(image.to_string()).or_insert_with(|| {
            self.groups.push((image.to_string(), Vec::new()));
            self.groups.len() - 1
        });
        self.groups[idx].1.push((x, y));
    }

    pub fn get(&self, image: &str) -> Option<&[(i64, i64)]> {
        self.index.get(image).map(|&i| self.groups[i].1.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(i64, i64)])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Parses `image_id, x, y` records. Blank lines and `#` comments are skipped.
pub fn parse_points(text: &str, path: &Path) -> Result<PointTable> {
    let mut table = PointTable::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields[0].is_empty() {
            return Err(parse_err(format!(
                "expected `image_id, x, y`, got {line:?}"
            )));
        }
        let coord = |s: &str| {
            s.parse::<i64>()
                .map_err(|_| parse_err(format!("invalid coordinate {s:?}")))
        };
        table.push(fields[0], coord(fields[1])?, coord(fields[2])?);
    }
    Ok(table)
}

pub fn load_points(path: impl AsRef<Path>) -> Result<PointTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_points(&text, path)
}

pub fn write_points(table: &PointTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# image_id, x, y\n");
    for (id, pts) in table.iter() {
        for (x, y) in pts {
            out.push_str(&format!("{id}, {x}, {y}\n"));
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Checks raw coordinates against an image of size `width` x `height`.
pub fn validate_points(
    image: &str,
    raw: &[(i64, i64)],
    width: usize,
    height: usize,
) -> Result<Vec<PointLabel>> {
    raw.iter()
        .map(|&(x, y)| {
            if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
                Err(Error::AnnotationOutOfBounds {
                    image: image.to_string(),
                    x,
                    y,
                    width,
                    height,
                })
            } else {
                Ok(PointLabel::new(x as usize, y as usize))
            }
        })
        .collect()
}

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    #[serde(default)]
    pub points: Vec<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mask: Option<PathBuf>,
}

/// Dataset description. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    /// Optional points file merged into the entries by image id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_file: Option<PathBuf>,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION,
            points_file: None,
            entries: Vec::new(),
            base_dir: PathBuf::new(),
        }
    }
}

impl DatasetManifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unsupported manifest version {}", manifest.version),
        });
    }
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(pf) = manifest.points_file.clone() {
        let table = load_points(manifest.resolve(&pf))?;
        for e in &mut manifest.entries {
            if let Some(pts) = table.get(&e.id) {
                e.points.extend(pts.iter().map(|&(x, y)| [x, y]));
            }
        }
    }
    Ok(manifest)
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub const REPORT_SCHEMA: &str = "pointmask.eval_report.v1";

/// Parameters recorded next to every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub l_ep: usize,
    pub l_dp: usize,
    pub alpha: f64,
    pub r: f64,
    pub connectivity: Connectivity,
    pub d_match: f64,
    pub binarize_threshold: f64,
}

impl ReportConfig {
    pub fn new(pmg: &PmgConfig, update: &UpdateConfig, eval: &EvalConfig) -> Self {
        Self {
            l_ep: pmg.l_ep,
            l_dp: pmg.l_dp,
            alpha: pmg.alpha,
            r: update.r,
            connectivity: update.connectivity,
            d_match: eval.d_match,
            binarize_threshold: eval.binarize_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub config: ReportConfig,
    /// Bit depths of the evaluated ground-truth rasters.
    pub source_bit_depths: Vec<u8>,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn write_report(
    report: &EvalReport,
    config: &ReportConfig,
    source_bit_depths: &[u8],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let doc = ReportDocument {
        schema: REPORT_SCHEMA.to_string(),
        config: *config,
        source_bit_depths: source_bit_depths.to_vec(),
        report: report.clone(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
