//! Shared raster and geometry types.
//!
//! Coordinates are `(x = column, y = row)` with the origin at the top-left
//! pixel. Rasters are stored row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel intensity raster in the source's native scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} intensities for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidImage(format!(
                "intensities must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant image, handy for fixtures.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, p: PointLabel) -> f64 {
        self.get(p.x, p.y)
    }

    pub fn contains(&self, p: PointLabel) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn check_point(&self, p: PointLabel) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::PointOutOfBounds {
                point: p,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Applies `a * I + b` to every pixel.
    pub fn map_affine(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|v| a * v + b).collect(),
        )
    }

    /// Reflects intensities about the image maximum so dark targets become bright.
    pub fn inverted(&self) -> Self {
        let max = self.data.iter().copied().fold(0.0, f64::max);
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| max - v).collect(),
        }
    }

    /// Largest intensity, 0 for an all-black image.
    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// One annotated target location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointLabel {
    pub x: usize,
    pub y: usize,
}

impl PointLabel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned box with inclusive pixel bounds.
///
/// Bounds are signed so that an unclamped box may extend past the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub left: i64,
    pub right: i64,
    pub top: i64,
    pub bottom: i64,
}

impl BoundingBox {
    pub const fn new(left: i64, right: i64, top: i64, bottom: i64) -> Self {
        Self {
            left,
            right,
            top,
            bottom,
        }
    }

    pub fn width(&self) -> usize {
        (self.right - self.left + 1).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.bottom - self.top + 1).max(0) as usize
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, p: PointLabel) -> bool {
        let (x, y) = (p.x as i64, p.y as i64);
        x >= self.left && x <= self.right && y >= self.top && y <= self.bottom
    }

    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        Self::new(
            self.left + dx,
            self.right + dx,
            self.top + dy,
            self.bottom + dy,
        )
    }

    /// Row-major iterator over the pixel coordinates of an in-bounds box.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (l, r) = (self.left as usize, self.right as usize);
        (self.top as usize..=self.bottom as usize).flat_map(move |y| (l..=r).map(move |x| (x, y)))
    }
}

/// Intersects `bbox` with the bounds of a `width` x `height` image.
pub fn clamp_box(bbox: BoundingBox, width: usize, height: usize) -> Result<BoundingBox> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let (w, h) = (width as i64, height as i64);
    let clamped = BoundingBox {
        left: bbox.left.max(0),
        right: bbox.right.min(w - 1),
        top: bbox.top.max(0),
        bottom: bbox.bottom.min(h - 1),
    };
    if clamped.left > clamped.right || clamped.top > clamped.bottom {
        return Err(Error::BoxOutsideImage {
            bbox,
            width,
            height,
        });
    }
    Ok(clamped)
}

/// Pixel adjacency used for connected-component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Full-image 0/1 raster.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("ones", &self.count_ones())
            .finish()
    }
}

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} mask bits for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidImage("mask bits must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.bits[y * width + x] = 1;
                }
            }
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Coordinates of set pixels in scanline order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn check_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::dims(self.dims(), other.dims()))
        }
    }

    fn zip_with(&self, other: &BinaryMask, op: impl Fn(u8, u8) -> u8) -> Result<BinaryMask> {
        self.check_same_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & b)
    }

    /// Pixels set here but not in `other`.
    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b)
    }
}

/// Real-valued target probability over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    bbox: BoundingBox,
    values: Vec<f64>,
}

impl ProbMap {
    pub fn new(bbox: BoundingBox, values: Vec<f64>) -> Result<Self> {
        if values.len() != bbox.area() {
            return Err(Error::InvalidImage(format!(
                "probability map has {} values for a box of area {}",
                values.len(),
                bbox.area()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { bbox, values })
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at absolute image coordinates inside the box.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        let col = x - self.bbox.left as usize;
        let row = y - self.bbox.top as usize;
        self.values[row * self.bbox.width() + col]
    }
}
