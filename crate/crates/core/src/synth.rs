//! Synthetic infrared scenes and corrupted predictions with exact ground truth.
//!
//! All randomness comes from `ChaCha8Rng` seeded through `seed_from_u64`, and
//! intensities are rounded to the integer grid of the chosen bit depth, so a
//! spec and seed always produce the same bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryMask, Connectivity, GrayImage, PointLabel};
use crate::pmu::{connected_components, Component};

/// Connectivity used to split ground truth into targets.
pub const GT_CONNECTIVITY: Connectivity = Connectivity::Eight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetShape {
    Rectangle,
    GaussianBlob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub shape: TargetShape,
    /// `(x, y)`; may sit on a half-pixel so even-sized rectangles align to the grid.
    pub center: [f64; 2],
    /// Per-axis half extent. A rectangle covers `|x - cx| <= hx`; a blob's
    /// ground truth contour crosses the same extent.
    pub half_extent: [f64; 2],
    /// Absolute intensity at the target centre (before noise).
    pub peak: f64,
    /// Fraction of the peak amplitude above background that defines a blob's support.
    #[serde(default = "default_blob_threshold")]
    pub blob_threshold: f64,
}

fn default_blob_threshold() -> f64 {
    0.5
}

fn default_bit_depth() -> u8 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background_level: f64,
    #[serde(default)]
    pub noise_std: f64,
    /// Intensity change per pixel along `(x, y)`.
    #[serde(default)]
    pub gradient: Option<[f64; 2]>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bit_depth")]
    pub bit_depth: u8,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad("scene dimensions must be positive".into());
        }
        if !(self.noise_std >= 0.0) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.bit_depth != 8 && self.bit_depth != 16 {
            return bad(format!("bit_depth must be 8 or 16, got {}", self.bit_depth));
        }
        if self.background_level < 0.0 {
            return bad("background_level must be >= 0".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            let [cx, cy] = t.center;
            if !(cx >= 0.0 && cy >= 0.0 && cx <= (self.width - 1) as f64 && cy <= (self.height - 1) as f64) {
                return bad(format!("target {i} centre {:?} is outside the image", t.center));
            }
            if !(t.peak > self.background_level) {
                return bad(format!("target {i} peak must exceed the background level"));
            }
            if t.half_extent.iter().any(|h| !(*h >= 0.0)) {
                return bad(format!("target {i} half_extent must be >= 0"));
            }
            if !(t.blob_threshold > 0.0 && t.blob_threshold < 1.0) {
                return bad(format!("target {i} blob_threshold must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn full_scale(&self) -> f64 {
        if self.bit_depth == 16 {
            65535.0
        } else {
            255.0
        }
    }
}

impl TargetSpec {
    /// Relative amplitude in `[0, 1]` at `(x, y)` and whether the pixel is ground truth.
    fn response(&self, x: f64, y: f64) -> (f64, bool) {
        let dx = (x - self.center[0]).abs();
        let dy = (y - self.center[1]).abs();
        let [hx, hy] = self.half_extent;
        match self.shape {
            TargetShape::Rectangle => {
                let inside = dx <= hx && dy <= hy;
                (inside as u8 as f64, inside)
            }
            TargetShape::GaussianBlob => {
                // sigma chosen so that the blob_threshold contour passes through half_extent
                let k = (2.0 * (1.0 / self.blob_threshold).ln()).sqrt();
                let term = |d: f64, h: f64| {
                    if h > 0.0 {
                        let s = h / k;
                        (d / s).powi(2)
                    } else if d < 0.5 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                };
                let a = (-0.5 * (term(dx, hx) + term(dy, hy))).exp();
                // tolerance keeps the contour pixel on exact half-extent offsets
                (a, a >= self.blob_threshold - 1e-12)
            }
        }
    }
}

/// Generated image with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub image: GrayImage,
    pub gt: BinaryMask,
    /// One label per ground-truth component, in component order.
    pub labels: Vec<PointLabel>,
    pub components: Vec<Component>,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [gx, gy] = spec.gradient.unwrap_or([0.0, 0.0]);
    let full = spec.full_scale();

    let mut data = Vec::with_capacity(w * h);
    let mut gt = BinaryMask::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let mut signal: f64 = 0.0;
            let mut inside = false;
            for t in &spec.targets {
                let (a, member) = t.response(fx, fy);
                signal = signal.max(a * (t.peak - spec.background_level));
                inside |= member;
            }
            let noise = if spec.noise_std > 0.0 {
                rng.sample::<f64, _>(StandardNormal) * spec.noise_std
            } else {
                0.0
            };
            let v = spec.background_level + gx * fx + gy * fy + signal + noise;
            data.push(v.round().clamp(0.0, full));
            if inside {
                gt.set(x, y, true);
            }
        }
    }
    let image = GrayImage::new(w, h, data)?;
    let components = connected_components(&gt, GT_CONNECTIVITY);
    if components.len() < spec.targets.len() {
        log::warn!(
            "{} targets produced only {} ground-truth components (overlapping targets merged)",
            spec.targets.len(),
            components.len()
        );
    }
    let labels = components.iter().map(centroid_label).collect();
    Ok(Scene {
        image,
        gt,
        labels,
        components,
    })
}

/// Rounded centroid, moved to the nearest member pixel when rounding leaves the component.
pub fn centroid_label(comp: &Component) -> PointLabel {
    let x = comp.centroid.0.round() as usize;
    let y = comp.centroid.1.round() as usize;
    if comp.contains(x, y) {
        PointLabel::new(x, y)
    } else {
        nearest_member(comp, x as i64, y as i64)
    }
}

fn nearest_member(comp: &Component, x: i64, y: i64) -> PointLabel {
    let &(bx, by) = comp
        .pixels
        .iter()
        .min_by_key(|&&(px, py)| {
            let (dx, dy) = (px as i64 - x, py as i64 - y);
            (dx * dx + dy * dy, py, px)
        })
        .expect("components are nonempty");
    PointLabel::new(bx, by)
}

/// Point labels for every ground-truth component of `mask`.
pub fn centroid_labels(mask: &BinaryMask) -> Vec<PointLabel> {
    connected_components(mask, GT_CONNECTIVITY)
        .iter()
        .map(centroid_label)
        .collect()
}

/// Displaces each label by rounded Gaussian noise with per-axis standard
/// deviation `fraction * diameter`, where the diameter is the longer side of
/// the component's bounding box. Labels that leave their component snap back
/// to its nearest pixel.
pub fn jitter_labels(
    labels: &[PointLabel],
    components: &[Component],
    fraction: f64,
    width: usize,
    height: usize,
    seed: u64,
) -> Vec<PointLabel> {
    assert_eq!(labels.len(), components.len(), "one label per component");
    if fraction == 0.0 {
        return labels.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .zip(components)
        .map(|(&p, comp)| {
            let b = comp.bbox();
            let std = fraction * b.width().max(b.height()) as f64;
            let dx = (rng.sample::<f64, _>(StandardNormal) * std).round() as i64;
            let dy = (rng.sample::<f64, _>(StandardNormal) * std).round() as i64;
            let x = (p.x as i64 + dx).clamp(0, width as i64 - 1);
            let y = (p.y as i64 + dy).clamp(0, height as i64 - 1);
            if comp.contains(x as usize, y as usize) {
                PointLabel::new(x as usize, y as usize)
            } else {
                nearest_member(comp, x, y)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    #[serde(default)]
    pub drop_probability: f64,
    #[serde(default)]
    pub false_component_count: usize,
    /// Minimum L1 distance between an injected component's centre and every label.
    #[serde(default)]
    pub false_component_distance: f64,
    /// Chebyshev radius by which surviving components grow.
    #[serde(default)]
    pub dilation: usize,
    /// Injected components are squares of side `2 * half_extent + 1`.
    #[serde(default = "default_false_half_extent")]
    pub false_component_half_extent: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_false_half_extent() -> usize {
    1
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            drop_probability: 0.0,
            false_component_count: 0,
            false_component_distance: 0.0,
            dilation: 0,
            false_component_half_extent: 1,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::InvalidConfig("drop_probability must lie in [0, 1]".into()));
        }
        if !(self.false_component_distance >= 0.0) {
            return Err(Error::InvalidConfig("false_component_distance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CorruptedPrediction {
    pub mask: BinaryMask,
    /// Indices of dropped ground-truth components.
    pub dropped: Vec<usize>,
    pub injected: Vec<Component>,
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

pub fn corrupt_prediction(
    gt: &BinaryMask,
    labels: &[PointLabel],
    spec: &CorruptionSpec,
) -> Result<CorruptedPrediction> {
    spec.validate()?;
    let (w, h) = gt.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut survivors = BinaryMask::zeros(w, h);
    let mut dropped = Vec::new();
    for (i, comp) in connected_components(gt, GT_CONNECTIVITY).iter().enumerate() {
        if rng.random::<f64>() < spec.drop_probability {
            dropped.push(i);
        } else {
            comp.paint(&mut survivors, true);
        }
    }
    let mut mask = dilate(&survivors, spec.dilation);

    let k = spec.false_component_half_extent;
    let mut injected = Vec::with_capacity(spec.false_component_count);
    for index in 0..spec.false_component_count {
        if w < 2 * k + 1 || h < 2 * k + 1 {
            return Err(Error::Placement { index, attempts: 0 });
        }
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cx = rng.random_range(k..w - k);
            let cy = rng.random_range(k..h - k);
            let far = labels.iter().all(|p| {
                (cx as f64 - p.x as f64).abs() + (cy as f64 - p.y as f64).abs()
                    >= spec.false_component_distance
            });
            if far && region_clear(&mask, cx, cy, k + 1) {
                placed = Some((cx, cy));
                break;
            }
        }
        let Some((cx, cy)) = placed else {
            return Err(Error::Placement {
                index,
                attempts: PLACEMENT_ATTEMPTS,
            });
        };
        let mut pixels = Vec::new();
        for y in cy - k..=cy + k {
            for x in cx - k..=cx + k {
                mask.set(x, y, true);
                pixels.push((x, y));
            }
        }
        injected.push(Component {
            pixels,
            centroid: (cx as f64, cy as f64),
        });
    }
    Ok(CorruptedPrediction {
        mask,
        dropped,
        injected,
    })
}

fn region_clear(mask: &BinaryMask, cx: usize, cy: usize, radius: usize) -> bool {
    let (w, h) = mask.dims();
    let (x0, x1) = (cx.saturating_sub(radius), (cx + radius).min(w - 1));
    let (y0, y1) = (cy.saturating_sub(radius), (cy + radius).min(h - 1));
    (y0..=y1).all(|y| (x0..=x1).all(|x| !mask.get(x, y)))
}

/// Square-structuring-element dilation.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let mut out = BinaryMask::zeros(w, h);
    for (x, y) in mask.ones() {
        for yy in y.saturating_sub(radius)..=(y + radius).min(h - 1) {
            for xx in x.saturating_sub(radius)..=(x + radius).min(w - 1) {
                out.set(xx, yy, true);
            }
        }
    }
    out
}

/// Parameters for drawing a batch of random scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusParams {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// Inclusive range of background levels.
    pub background: [f64; 2],
    /// Inclusive range of peak-minus-background contrast.
    pub contrast: [f64; 2],
    /// Noise standard deviation as a fraction of each target's contrast.
    pub noise_fraction: f64,
    /// Inclusive range of targets per scene.
    pub targets_per_scene: [usize; 2],
    /// Inclusive range of target side lengths in pixels.
    pub side: [usize; 2],
    /// Probability that a target is a Gaussian blob rather than a rectangle.
    pub blob_probability: f64,
    /// Minimum distance between target centres and the image border.
    pub margin: usize,
    /// Minimum Chebyshev distance between target centres.
    pub min_separation: usize,
    pub bit_depth: u8,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            count: 20,
            width: 128,
            height: 128,
            background: [20.0, 80.0],
            contrast: [50.0, 150.0],
            noise_fraction: 0.0,
            targets_per_scene: [1, 1],
            side: [3, 9],
            blob_probability: 0.0,
            margin: 32,
            min_separation: 40,
            bit_depth: 8,
        }
    }
}

/// Draws `params.count` scene specs; scene `i` gets seed `seed + i`.
pub fn random_scenes(params: &CorpusParams, seed: u64) -> Result<Vec<SceneSpec>> {
    if params.side[0] == 0 || params.side[0] > params.side[1] {
        return Err(Error::InvalidConfig("side range must be nonempty and start at 1 or more".into()));
    }
    if params.targets_per_scene[0] > params.targets_per_scene[1] {
        return Err(Error::InvalidConfig("targets_per_scene range is empty".into()));
    }
    if params.width <= 2 * params.margin || params.height <= 2 * params.margin {
        return Err(Error::InvalidConfig("margin leaves no room for targets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenes = Vec::with_capacity(params.count);
    for i in 0..params.count {
        let background = uniform(&mut rng, params.background);
        let n = rng.random_range(params.targets_per_scene[0]..=params.targets_per_scene[1]);
        let mut targets: Vec<TargetSpec> = Vec::with_capacity(n);
        let mut contrast_sum = 0.0;
        for _ in 0..n {
            let sx = rng.random_range(params.side[0]..=params.side[1]);
            let sy = rng.random_range(params.side[0]..=params.side[1]);
            let shape = if rng.random::<f64>() < params.blob_probability {
                TargetShape::GaussianBlob
            } else {
                TargetShape::Rectangle
            };
            let contrast = uniform(&mut rng, params.contrast);
            let mut center = None;
            for _ in 0..1000 {
                let x0 = rng.random_range(params.margin..params.width - params.margin) as f64;
                let y0 = rng.random_range(params.margin..params.height - params.margin) as f64;
                let c = [x0 + (sx - 1) as f64 / 2.0, y0 + (sy - 1) as f64 / 2.0];
                let clear = targets.iter().all(|t| {
                    (t.center[0] - c[0]).abs().max((t.center[1] - c[1]).abs())
                        >= params.min_separation as f64
                });
                if clear {
                    center = Some(c);
                    break;
                }
            }
            let Some(center) = center else { break };
            contrast_sum += contrast;
            targets.push(TargetSpec {
                shape,
                center,
                half_extent: [(sx - 1) as f64 / 2.0, (sy - 1) as f64 / 2.0],
                peak: background + contrast,
                blob_threshold: default_blob_threshold(),
            });
        }
        let mean_contrast = if targets.is_empty() {
            0.0
        } else {
            contrast_sum / targets.len() as f64
        };
        scenes.push(SceneSpec {
            width: params.width,
            height: params.height,
            background_level: background,
            noise_std: params.noise_fraction * mean_contrast,
            gradient: None,
            targets,
            seed: seed.wrapping_add(i as u64),
            bit_depth: params.bit_depth,
        });
    }
    Ok(scenes)
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}
