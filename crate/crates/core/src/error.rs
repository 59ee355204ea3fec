use std::path::PathBuf;

use thiserror::Error;

use crate::model::{BoundingBox, PointLabel};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point ({}, {}) lies outside the {width}x{height} image", point.x, point.y)]
    PointOutOfBounds {
        point: PointLabel,
        width: usize,
        height: usize,
    },

    #[error("box {bbox:?} lies entirely outside the {width}x{height} image")]
    BoxOutsideImage {
        bbox: BoundingBox,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("probability maps cover different boxes: {0:?} vs {1:?}")]
    BoxMismatch(BoundingBox, BoundingBox),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("could not place false component {index} after {attempts} attempts")]
    Placement { index: usize, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[cfg(feature = "io")]
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: unsupported raster format ({detail})")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("image '{image}': point ({x}, {y}) outside {width}x{height}")]
    AnnotationOutOfBounds {
        image: String,
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn dims(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        }
    }

    /// True for errors caused by user configuration rather than input data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}
