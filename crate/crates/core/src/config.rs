//! Tunable parameters for mask generation, mask updating and evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Connectivity;

/// Point-to-mask generation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmgConfig {
    /// Half-extent of the search window along the scan direction.
    pub l_ep: usize,
    /// Half-extent of the search window perpendicular to the scan direction.
    pub l_dp: usize,
    /// Weight of the annotated pixel in the box threshold.
    pub alpha: f64,
    /// Treat targets as darker than their surroundings.
    pub invert: bool,
}

impl Default for PmgConfig {
    fn default() -> Self {
        Self {
            l_ep: 25,
            l_dp: 4,
            alpha: 0.15,
            invert: false,
        }
    }
}

impl PmgConfig {
    /// Setting used for datasets dominated by tiny targets (NUDT-SIRST).
    pub fn dense_small_targets() -> Self {
        Self {
            l_ep: 10,
            ..Self::default()
        }
    }

    /// Side length of the largest box the search can produce.
    pub fn cropping_size(&self) -> usize {
        2 * self.l_ep + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_ep < 1 {
            return Err(Error::InvalidConfig("l_ep must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Pseudo-mask updating parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateConfig {
    /// L1 radius around point labels inside which predicted components survive.
    pub r: f64,
    pub connectivity: Connectivity,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            r: 30.0,
            connectivity: Connectivity::Eight,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "r must be positive and finite, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Evaluation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Maximum centroid L1 distance for a predicted component to count as a detection.
    pub d_match: f64,
    /// Fraction of full scale at which soft prediction rasters are binarized.
    pub binarize_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            d_match: 3.0,
            binarize_threshold: 0.5,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_match >= 0.0) || !self.d_match.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "d_match must be non-negative, got {}",
                self.d_match
            )));
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "binarize_threshold must lie in (0, 1), got {}",
                self.binarize_threshold
            )));
        }
        Ok(())
    }
}
