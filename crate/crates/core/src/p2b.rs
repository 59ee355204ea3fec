//! Point-to-box: estimates a target's bounding box from a single point label.
//!
//! For each of the four directions a window of `l_ep` pixels along the scan
//! direction and `±l_dp` pixels across it is reduced to a maximum and an
//! average vector. Adjacent differences of the maximum vector above their
//! mean mark the target/transition zone; the average value just past the
//! outermost such difference becomes the background level, and the boundary
//! is the last position (scanning outward from the point) that stays above
//! it.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::config::PmgConfig;
use crate::error::Result;
use crate::model::{BoundingBox, GrayImage, PointLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Up,
        Direction::Down,
    ];

    /// Unit step `(dx, dy)` moving away from the anchor.
    pub fn step(self) -> (i64, i64) {
        match self {
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
        }
    }
}

/// Perpendicular reductions of the search window, indexed outward from the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalProfile {
    pub direction: Direction,
    pub max_vector: Vec<f64>,
    pub avg_vector: Vec<f64>,
    /// `|max[i + 1] - max[i]|`.
    pub diffs: Vec<f64>,
}

impl DirectionalProfile {
    pub fn len(&self) -> usize {
        self.max_vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max_vector.is_empty()
    }

    /// Builds a profile from precomputed reductions.
    pub fn from_vectors(direction: Direction, max_vector: Vec<f64>, avg_vector: Vec<f64>) -> Self {
        assert_eq!(max_vector.len(), avg_vector.len());
        let diffs = max_vector.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        Self {
            direction,
            max_vector,
            avg_vector,
            diffs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    /// Distance in pixels from the anchor to the boundary (inclusive).
    pub offset: usize,
    pub background_threshold: f64,
    /// No transition or no crossing was found; the whole profile was kept.
    pub fallback_used: bool,
}

pub fn directional_profile(
    image: &GrayImage,
    anchor: PointLabel,
    direction: Direction,
    cfg: &PmgConfig,
) -> Result<DirectionalProfile> {
    image.check_point(anchor)?;
    let (w, h) = image.dims();
    let (x, y) = (anchor.x, anchor.y);

    // Number of steps available before the border.
    let reach = match direction {
        Direction::Left => x,
        Direction::Right => w - 1 - x,
        Direction::Up => y,
        Direction::Down => h - 1 - y,
    }
    .min(cfg.l_ep);

    let (across_lo, across_hi) = match direction {
        Direction::Left | Direction::Right => {
            (y.saturating_sub(cfg.l_dp), (y + cfg.l_dp).min(h - 1))
        }
        Direction::Up | Direction::Down => (x.saturating_sub(cfg.l_dp), (x + cfg.l_dp).min(w - 1)),
    };
    let count = (across_hi - across_lo + 1) as f64;

    let (dx, dy) = direction.step();
    let mut max_vector = Vec::with_capacity(reach + 1);
    let mut avg_vector = Vec::with_capacity(reach + 1);
    for i in 0..=reach as i64 {
        let px = (x as i64 + dx * i) as usize;
        let py = (y as i64 + dy * i) as usize;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for a in across_lo..=across_hi {
            let v = match direction {
                Direction::Left | Direction::Right => image.get(px, a),
                Direction::Up | Direction::Down => image.get(a, py),
            };
            max = max.max(v);
            sum += v;
        }
        max_vector.push(max);
        avg_vector.push(sum / count);
    }
    Ok(DirectionalProfile::from_vectors(direction, max_vector, avg_vector))
}

/// Relative tolerance, against the profile's dynamic range, for treating two
/// values as equal.
pub const TIE_RTOL: f64 = 1e-9;

pub fn estimate_boundary(profile: &DirectionalProfile) -> BoundaryEstimate {
    let n = profile.len();
    assert!(n > 0, "profile must be nonempty");
    let avg = &profile.avg_vector;
    let whole = |bg: f64| BoundaryEstimate {
        offset: n - 1,
        background_threshold: bg,
        fallback_used: true,
    };
    if n == 1 {
        return whole(avg[0]);
    }

    // Values closer than `tol` compare as equal, so ties survive rescaling.
    let hi = profile.max_vector.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = avg.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = TIE_RTOL * (hi - lo);

    let diff_threshold = profile.diffs.iter().sum::<f64>() / profile.diffs.len() as f64;
    let Some(outermost) = profile.diffs.iter().rposition(|&d| d > diff_threshold + tol) else {
        return whole(avg[n - 1]);
    };
    let background = avg[outermost + 1];

    // First position strictly below the background level; on a perfectly flat
    // background nothing drops below it, so the first position reaching it is used.
    let crossing = avg
        .iter()
        .position(|&v| v < background - tol)
        .or_else(|| avg.iter().position(|&v| v <= background + tol));
    match crossing {
        Some(j) => BoundaryEstimate {
            offset: j.saturating_sub(1),
            background_threshold: background,
            fallback_used: false,
        },
        None => whole(background),
    }
}

/// Box and per-direction boundary estimates for one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxEstimate {
    pub bbox: BoundingBox,
    /// In [`Direction::ALL`] order.
    pub boundaries: [BoundaryEstimate; 4],
}

pub fn point_to_box(image: &GrayImage, point: PointLabel, cfg: &PmgConfig) -> Result<BoundingBox> {
    Ok(point_to_box_detailed(image, point, cfg)?.bbox)
}

pub fn point_to_box_detailed(
    image: &GrayImage,
    point: PointLabel,
    cfg: &PmgConfig,
) -> Result<BoxEstimate> {
    let image = oriented(image, cfg);
    estimate_box(&image, point, cfg)
}

/// Applies the `invert` flag.
pub(crate) fn oriented<'a>(image: &'a GrayImage, cfg: &PmgConfig) -> Cow<'a, GrayImage> {
    if cfg.invert {
        Cow::Owned(image.inverted())
    } else {
        Cow::Borrowed(image)
    }
}

pub(crate) fn estimate_box(
    image: &GrayImage,
    point: PointLabel,
    cfg: &PmgConfig,
) -> Result<BoxEstimate> {
    image.check_point(point)?;
    let mut boundaries = [BoundaryEstimate {
        offset: 0,
        background_threshold: 0.0,
        fallback_used: false,
    }; 4];
    for (slot, dir) in boundaries.iter_mut().zip(Direction::ALL) {
        *slot = estimate_boundary(&directional_profile(image, point, dir, cfg)?);
    }
    let (x, y) = (point.x as i64, point.y as i64);
    let bbox = BoundingBox::new(
        x - boundaries[0].offset as i64,
        x + boundaries[1].offset as i64,
        y - boundaries[2].offset as i64,
        y + boundaries[3].offset as i64,
    );
    Ok(BoxEstimate { bbox, boundaries })
}
