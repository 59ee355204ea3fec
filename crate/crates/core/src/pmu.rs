//! Pseudo-mask updating.
//!
//! Network predictions are cleaned by erasing connected components whose
//! centroid is farther than `r` (L1) from every point label, then merged with
//! the initial pseudo mask by pixelwise union.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::UpdateConfig;
use crate::error::{Error, Result};
use crate::model::{BinaryMask, BoundingBox, Connectivity, PointLabel};

/// A maximal connected set of foreground pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Member pixels in discovery order.
    pub pixels: Vec<(usize, usize)>,
    /// Mean `(x, y)` of the members.
    pub centroid: (f64, f64),
}

impl Component {
    fn from_pixels(pixels: Vec<(usize, usize)>) -> Self {
        let n = pixels.len() as f64;
        let (sx, sy) = pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        Self {
            centroid: (sx / n, sy / n),
            pixels,
        }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut b = BoundingBox::new(i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &(x, y) in &self.pixels {
            let (x, y) = (x as i64, y as i64);
            b.left = b.left.min(x);
            b.right = b.right.max(x);
            b.top = b.top.min(y);
            b.bottom = b.bottom.max(y);
        }
        b
    }

    pub fn l1_to(&self, p: PointLabel) -> f64 {
        (self.centroid.0 - p.x as f64).abs() + (self.centroid.1 - p.y as f64).abs()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pixels.contains(&(x, y))
    }

    pub fn paint(&self, mask: &mut BinaryMask, value: bool) {
        for &(x, y) in &self.pixels {
            mask.set(x, y, value);
        }
    }
}

/// Components ordered by their first pixel in scanline order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Component> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || mask.bits()[start] == 0 {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !seen[j] && mask.bits()[j] != 0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.push(Component::from_pixels(pixels));
    }
    out
}

/// Result of false-alarm filtering.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub mask: BinaryMask,
    pub erased: Vec<Component>,
    pub kept: Vec<Component>,
}

/// True when some point lies within L1 distance `r` of the component centroid.
pub fn is_supported(component: &Component, points: &[PointLabel], r: f64) -> bool {
    points.iter().any(|&p| component.l1_to(p) <= r)
}

pub fn filter_false_alarms(
    prediction: &BinaryMask,
    points: &[PointLabel],
    cfg: &UpdateConfig,
) -> FilterOutcome {
    let (mut erased, mut kept) = (Vec::new(), Vec::new());
    let mut mask = prediction.clone();
    for comp in connected_components(prediction, cfg.connectivity) {
        if is_supported(&comp, points, cfg.r) {
            kept.push(comp);
        } else {
            comp.paint(&mut mask, false);
            erased.push(comp);
        }
    }
    FilterOutcome { mask, erased, kept }
}

pub fn false_alarm_filter(
    prediction: &BinaryMask,
    points: &[PointLabel],
    cfg: &UpdateConfig,
) -> BinaryMask {
    filter_false_alarms(prediction, points, cfg).mask
}

pub fn missed_detection_retrieve(initial: &BinaryMask, filtered: &BinaryMask) -> Result<BinaryMask> {
    initial.or(filtered)
}

/// Inputs for one image.
#[derive(Debug, Clone)]
pub struct UpdateSample {
    pub initial: BinaryMask,
    pub prediction: BinaryMask,
    pub points: Vec<PointLabel>,
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub hybrid: BinaryMask,
    pub erased_components: usize,
    /// Pixels contributed by the filtered prediction that the initial mask lacked.
    pub retrieved_pixels: usize,
}

pub fn update_sample(sample: &UpdateSample, cfg: &UpdateConfig) -> Result<UpdateOutcome> {
    sample.initial.check_same_dims(&sample.prediction)?;
    let filtered = filter_false_alarms(&sample.prediction, &sample.points, cfg);
    let hybrid = missed_detection_retrieve(&sample.initial, &filtered.mask)?;
    let retrieved_pixels = filtered.mask.and_not(&sample.initial)?.count_ones();
    Ok(UpdateOutcome {
        hybrid,
        erased_components: filtered.erased.len(),
        retrieved_pixels,
    })
}

pub fn update_masks(samples: &[UpdateSample], cfg: &UpdateConfig) -> Result<Vec<BinaryMask>> {
    cfg.validate()?;
    let run = |(index, s): (usize, &UpdateSample)| {
        update_sample(s, cfg)
            .map(|o| o.hybrid)
            .map_err(|e| Error::Sample {
                index,
                source: Box::new(e),
            })
    };
    #[cfg(feature = "parallel")]
    {
        samples.par_iter().enumerate().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        samples.iter().enumerate().map(run).collect()
    }
}

/// Per-image counters reported by the update stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub erased_components: usize,
    pub retrieved_pixels: usize,
}

impl From<&UpdateOutcome> for UpdateStats {
    fn from(o: &UpdateOutcome) -> Self {
        Self {
            erased_components: o.erased_components,
            retrieved_pixels: o.retrieved_pixels,
        }
    }
}
