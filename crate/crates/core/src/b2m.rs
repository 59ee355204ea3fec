//! Box-to-mask: classifies the pixels of a point's box as target or background.
//!
//! A single threshold `sigma = alpha * I(anchor) + (1 - alpha) * mean(box)` splits
//! each region's intensity range; values below it map linearly onto `[0, 0.5]`
//! and values above it onto `(0.5, 1]`. The box is normalized once globally and
//! once per half along each axis (split at the anchor), and the three maps are
//! averaged. Pixels whose fused probability reaches 0.5 are target.

use serde::{Deserialize, Serialize};

use crate::config::PmgConfig;
use crate::error::{Error, Result};
use crate::model::{BinaryMask, BoundingBox, GrayImage, PointLabel, ProbMap};
use crate::p2b;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

impl RegionStats {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        Some(Self {
            min,
            max,
            mean: sum / values.len() as f64,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaThreshold(pub f64);

impl SigmaThreshold {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Vertical,
    Horizontal,
}

fn box_values(image: &GrayImage, bbox: &BoundingBox) -> Vec<f64> {
    bbox.pixels().map(|(x, y)| image.get(x, y)).collect()
}

fn check_box(image: &GrayImage, bbox: &BoundingBox) -> Result<()> {
    let (w, h) = image.dims();
    if bbox.left < 0
        || bbox.top < 0
        || bbox.right >= w as i64
        || bbox.bottom >= h as i64
        || bbox.area() == 0
    {
        return Err(Error::BoxOutsideImage {
            bbox: *bbox,
            width: w,
            height: h,
        });
    }
    Ok(())
}

pub fn pixel_threshold(
    image: &GrayImage,
    bbox: &BoundingBox,
    anchor: PointLabel,
    alpha: f64,
) -> Result<SigmaThreshold> {
    check_box(image, bbox)?;
    image.check_point(anchor)?;
    let stats = RegionStats::of(&box_values(image, bbox)).expect("box is nonempty");
    Ok(SigmaThreshold(
        alpha * image.at(anchor) + (1.0 - alpha) * stats.mean,
    ))
}

/// Piecewise-linear target probability of each value.
///
/// Flat regions (`min == max`) map to 0.5. When `sigma` is at or below `min`
/// the lower branch collapses to 0; when it is at or above `max` the upper
/// branch has no members.
pub fn normalize_probability(values: &[f64], stats: &RegionStats, sigma: SigmaThreshold) -> Vec<f64> {
    let s = sigma.0;
    let (min, max) = (stats.min, stats.max);
    if min == max {
        return vec![0.5; values.len()];
    }
    values
        .iter()
        .map(|&v| {
            let p = if v <= s {
                if s > min {
                    (v - min) / (s - min) * 0.5
                } else {
                    0.0
                }
            } else if max > s {
                1.0 - (max - v) / (max - s) * 0.5
            } else {
                1.0
            };
            p.clamp(0.0, 1.0)
        })
        .collect()
}

pub fn global_probability(
    image: &GrayImage,
    bbox: &BoundingBox,
    sigma: SigmaThreshold,
) -> Result<ProbMap> {
    check_box(image, bbox)?;
    let values = box_values(image, bbox);
    let stats = RegionStats::of(&values).expect("box is nonempty");
    ProbMap::new(*bbox, normalize_probability(&values, &stats, sigma))
}

pub fn directional_probability(
    image: &GrayImage,
    bbox: &BoundingBox,
    anchor: PointLabel,
    sigma: SigmaThreshold,
    axis: Axis,
) -> Result<ProbMap> {
    check_box(image, bbox)?;
    if !bbox.contains(anchor) {
        return Err(Error::PointOutOfBounds {
            point: anchor,
            width: image.width(),
            height: image.height(),
        });
    }
    // The anchor row/column belongs to the upper/left half.
    let (first, second) = match axis {
        Axis::Vertical => (
            BoundingBox { bottom: anchor.y as i64, ..*bbox },
            BoundingBox { top: anchor.y as i64 + 1, ..*bbox },
        ),
        Axis::Horizontal => (
            BoundingBox { right: anchor.x as i64, ..*bbox },
            BoundingBox { left: anchor.x as i64 + 1, ..*bbox },
        ),
    };

    let mut out = vec![0.0; bbox.area()];
    let bw = bbox.width();
    for part in [first, second] {
        if part.area() == 0 {
            continue;
        }
        let values = box_values(image, &part);
        let stats = RegionStats::of(&values).expect("nonempty part");
        let probs = normalize_probability(&values, &stats, sigma);
        for ((x, y), p) in part.pixels().zip(probs) {
            let idx = (y - bbox.top as usize) * bw + (x - bbox.left as usize);
            out[idx] = p;
        }
    }
    ProbMap::new(*bbox, out)
}

/// Binary mask restricted to a box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFragment {
    pub bbox: BoundingBox,
    /// Row-major over the box.
    pub bits: Vec<u8>,
}

impl MaskFragment {
    pub fn paint(&self, mask: &mut BinaryMask) {
        for ((x, y), &b) in self.bbox.pixels().zip(&self.bits) {
            if b != 0 {
                mask.set(x, y, true);
            }
        }
    }
}

/// Rounding slack on the 0.5 cut so that exact ties stay ties after rescaling.
pub const FUSED_TOLERANCE: f64 = 1e-12;

/// Average of the three maps.
pub fn fuse(pg: &ProbMap, pv: &ProbMap, ph: &ProbMap) -> Result<ProbMap> {
    for other in [pv, ph] {
        if other.bbox() != pg.bbox() {
            return Err(Error::BoxMismatch(pg.bbox(), other.bbox()));
        }
    }
    let values = pg
        .values()
        .iter()
        .zip(pv.values())
        .zip(ph.values())
        .map(|((g, v), h)| ((g + v + h) / 3.0).clamp(0.0, 1.0))
        .collect();
    ProbMap::new(pg.bbox(), values)
}

pub fn fuse_and_binarize(pg: &ProbMap, pv: &ProbMap, ph: &ProbMap) -> Result<MaskFragment> {
    let pf = fuse(pg, pv, ph)?;
    Ok(MaskFragment {
        bbox: pf.bbox(),
        bits: pf.values().iter().map(|&p| (p >= 0.5 - FUSED_TOLERANCE) as u8).collect(),
    })
}

/// Intermediate results for one point label.
#[derive(Debug, Clone)]
pub struct PointTrace {
    pub point: PointLabel,
    pub estimate: p2b::BoxEstimate,
    pub sigma: SigmaThreshold,
    pub fused: ProbMap,
    pub fragment: MaskFragment,
}

fn trace_oriented(image: &GrayImage, point: PointLabel, cfg: &PmgConfig) -> Result<PointTrace> {
    let estimate = p2b::estimate_box(image, point, cfg)?;
    let bbox = estimate.bbox;
    let sigma = pixel_threshold(image, &bbox, point, cfg.alpha)?;
    let pg = global_probability(image, &bbox, sigma)?;
    let pv = directional_probability(image, &bbox, point, sigma, Axis::Vertical)?;
    let ph = directional_probability(image, &bbox, point, sigma, Axis::Horizontal)?;
    let fused = fuse(&pg, &pv, &ph)?;
    let fragment = fuse_and_binarize(&pg, &pv, &ph)?;
    Ok(PointTrace {
        point,
        estimate,
        sigma,
        fused,
        fragment,
    })
}

/// Runs the full point-to-mask chain for one point and keeps every stage.
pub fn trace_point(image: &GrayImage, point: PointLabel, cfg: &PmgConfig) -> Result<PointTrace> {
    cfg.validate()?;
    let image = p2b::oriented(image, cfg);
    trace_oriented(&image, point, cfg)
}

/// Initial pseudo mask for all point labels of an image.
pub fn point_to_mask(image: &GrayImage, points: &[PointLabel], cfg: &PmgConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    for &p in points {
        image.check_point(p)?;
    }
    let image = p2b::oriented(image, cfg);
    let mut mask = BinaryMask::zeros(image.width(), image.height());
    for &p in points {
        let trace = trace_oriented(&image, p, cfg)?;
        trace.fragment.paint(&mut mask);
        mask.set(p.x, p.y, true);
    }
    Ok(mask)
}
