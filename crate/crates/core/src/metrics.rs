//! Pixel-level IoU and false-alarm rate, instance-level probability of
//! detection, and a per-size-category IoU breakdown.
//!
//! Dataset figures are micro-averaged: intersections, unions, false pixels,
//! hits and targets are summed over images before dividing.

use std::collections::BTreeMap;
use std::fmt;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::error::{Error, Result};

use crate::model::{BinaryMask, Connectivity};
use crate::pmu::{connected_components, Component};

/// Components for Pd matching and size attribution use 8-connectivity.
pub const EVAL_CONNECTIVITY: Connectivity = Connectivity::Eight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeCategory {
    Point,
    Spot,
    Extended,
}

impl SizeCategory {
    pub const ALL: [SizeCategory; 3] = [SizeCategory::Point, SizeCategory::Spot, SizeCategory::Extended];
}

impl fmt::Display for SizeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SizeCategory::Point => "Point",
            SizeCategory::Spot => "Spot",
            SizeCategory::Extended => "Extended",
        };
        f.pad(name)
    }
}

/// Point: at most 9 pixels; Spot: 10 to 81; Extended: more than 81.
pub fn size_category(area: usize) -> SizeCategory {
    match area {
        0..=9 => SizeCategory::Point,
        10..=81 => SizeCategory::Spot,
        _ => SizeCategory::Extended,
    }
}

pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let c = PixelCounts::of(pred, gt)?;
    Ok(c.iou())
}

pub fn false_alarm_rate(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let c = PixelCounts::of(pred, gt)?;
    Ok(c.false_pixels as f64 / c.total as f64)
}

/// Pixel tallies for one or more images.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub intersection: u64,
    pub union: u64,
    pub false_pixels: u64,
    pub total: u64,
}

impl PixelCounts {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        pred.check_same_dims(gt)?;
        let mut c = PixelCounts {
            total: pred.bits().len() as u64,
            ..Default::default()
        };
        for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
            c.intersection += (p & g) as u64;
            c.union += (p | g) as u64;
            c.false_pixels += (p & (1 - g)) as u64;
        }
        Ok(c)
    }

    /// 1.0 when both masks are empty.
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            intersection: self.intersection + o.intersection,
            union: self.union + o.union,
            false_pixels: self.false_pixels + o.false_pixels,
            total: self.total + o.total,
        }
    }
}

/// Greedy one-to-one matching in increasing centroid L1 distance.
///
/// Returns, for each ground-truth component, the index of its matched
/// prediction. Ties break on ground-truth index, then prediction index.
pub fn match_components(gt: &[Component], pred: &[Component], d_match: f64) -> Vec<Option<usize>> {
    let mut edges = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let d = (g.centroid.0 - p.centroid.0).abs() + (g.centroid.1 - p.centroid.1).abs();
            if d <= d_match {
                edges.push((d, gi, pi));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_match = vec![None; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    for (_, gi, pi) in edges {
        if gt_match[gi].is_none() && !pred_used[pi] {
            gt_match[gi] = Some(pi);
            pred_used[pi] = true;
        }
    }
    gt_match
}

/// Returns `(hits, targets)`.
pub fn probability_of_detection(
    pred: &BinaryMask,
    gt: &BinaryMask,
    cfg: &EvalConfig,
) -> Result<(usize, usize)> {
    pred.check_same_dims(gt)?;
    let g = connected_components(gt, EVAL_CONNECTIVITY);
    let p = connected_components(pred, EVAL_CONNECTIVITY);
    let hits = match_components(&g, &p, cfg.d_match).iter().flatten().count();
    Ok((hits, g.len()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    /// `None` when the category has no targets.
    pub iou: Option<f64>,
    pub count: usize,
    pub intersection: u64,
    pub union: u64,
}

impl CategoryScore {
    fn add(&mut self, intersection: u64, union: u64) {
        self.count += 1;
        self.intersection += intersection;
        self.union += union;
    }

    fn finish(&mut self) {
        self.iou = (self.count > 0).then(|| {
            if self.union == 0 {
                1.0
            } else {
                self.intersection as f64 / self.union as f64
            }
        });
    }
}

/// Per-image tallies, summed to produce an [`EvalReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairStats {
    pub pixels: PixelCounts,
    pub hits: usize,
    pub targets: usize,
    pub categories: BTreeMap<SizeCategory, CategoryScore>,
}

impl PairStats {
    fn merge(mut self, other: PairStats) -> PairStats {
        self.pixels = self.pixels.add(other.pixels);
        self.hits += other.hits;
        self.targets += other.targets;
        for (k, v) in other.categories {
            let e = self.categories.entry(k).or_default();
            e.count += v.count;
            e.intersection += v.intersection;
            e.union += v.union;
        }
        self
    }
}

/// Scores one image.
///
/// Each ground-truth component is scored against the predicted components
/// that overlap it; its category comes from its own area.
pub fn evaluate_pair(pred: &BinaryMask, gt: &BinaryMask, cfg: &EvalConfig) -> Result<PairStats> {
    let pixels = PixelCounts::of(pred, gt)?;
    let (w, _) = gt.dims();
    let g = connected_components(gt, EVAL_CONNECTIVITY);
    let p = connected_components(pred, EVAL_CONNECTIVITY);
    let hits = match_components(&g, &p, cfg.d_match).iter().flatten().count();

    let mut pred_label = vec![usize::MAX; pred.bits().len()];
    for (i, c) in p.iter().enumerate() {
        for &(x, y) in &c.pixels {
            pred_label[y * w + x] = i;
        }
    }

    let mut categories = BTreeMap::new();
    for comp in &g {
        let mut touching: Vec<usize> = comp
            .pixels
            .iter()
            .map(|&(x, y)| pred_label[y * w + x])
            .filter(|&l| l != usize::MAX)
            .collect();
        touching.sort_unstable();
        touching.dedup();
        let intersection = comp.pixels.iter().filter(|&&(x, y)| pred.get(x, y)).count() as u64;
        let attributed: u64 = touching.iter().map(|&i| p[i].area() as u64).sum();
        let union = comp.area() as u64 + attributed - intersection;
        categories
            .entry(size_category(comp.area()))
            .or_insert_with(CategoryScore::default)
            .add(intersection, union);
    }

    Ok(PairStats {
        pixels,
        hits,
        targets: g.len(),
        categories,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou: f64,
    pub pd: f64,
    /// False pixels over all pixels (a plain fraction, not scaled).
    pub fa: f64,
    pub per_category: BTreeMap<SizeCategory, CategoryScore>,
    pub n_images: usize,
    pub n_targets: usize,
    pub hits: usize,
    pub pixels: PixelCounts,
}

impl EvalReport {
    pub fn from_stats(stats: PairStats, n_images: usize) -> Self {
        let mut per_category = stats.categories;
        for cat in SizeCategory::ALL {
            per_category.entry(cat).or_default().finish();
        }
        let pd = if stats.targets == 0 {
            1.0
        } else {
            stats.hits as f64 / stats.targets as f64
        };
        EvalReport {
            iou: stats.pixels.iou(),
            pd,
            fa: stats.pixels.false_pixels as f64 / stats.pixels.total.max(1) as f64,
            per_category,
            n_images,
            n_targets: stats.targets,
            hits: stats.hits,
            pixels: stats.pixels,
        }
    }

    /// IoU and Pd in percent, Fa in parts per million.
    pub fn headline(&self) -> String {
        format!(
            "IoU {:.2}  Pd {:.2}  Fa {:.2}",
            self.iou * 100.0,
            self.pd * 100.0,
            self.fa * 1e6
        )
    }
}

pub fn evaluate_dataset(pairs: &[(BinaryMask, BinaryMask)], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("evaluation needs at least one (pred, gt) pair"));
    }
    let score = |(i, (pred, gt)): (usize, &(BinaryMask, BinaryMask))| {
        evaluate_pair(pred, gt, cfg).map_err(|e| Error::Sample {
            index: i,
            source: Box::new(e),
        })
    };
    #[cfg(feature = "parallel")]
    let stats: Vec<PairStats> = pairs.par_iter().enumerate().map(score).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let stats: Vec<PairStats> = pairs.iter().enumerate().map(score).collect::<Result<_>>()?;

    let total = stats.into_iter().fold(PairStats::default(), PairStats::merge);
    Ok(EvalReport::from_stats(total, pairs.len()))
}
