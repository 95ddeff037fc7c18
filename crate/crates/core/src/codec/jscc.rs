//! Analog joint source-channel coding: merge, power-normalize, and map
//! straight onto channel symbols; the receiver applies LMMSE shrinkage.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::merge::{fit_merge_map, merge_expand, merge_reduce, MergeArtifact, MergeMap};
use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, TensorRole};

/// Affine normalization fixed at calibration time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerNorm {
    pub mean: f64,
    pub scale: f64,
}

impl PowerNorm {
    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::config("power_norm.mean", "must be finite"));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::config(
                "power_norm.scale",
                format!("must be positive, got {}", self.scale),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsccCodecConfig {
    merge_map: Arc<MergeMap>,
    power_norm: PowerNorm,
}

impl JsccCodecConfig {
    pub fn new(merge_map: MergeMap, power_norm: PowerNorm) -> Result<Self> {
        merge_map.validate()?;
        power_norm.validate()?;
        Ok(Self {
            merge_map: Arc::new(merge_map),
            power_norm,
        })
    }

    /// Fits the merge map on `calibration` and sets the normalization so the
    /// same tensors map to zero mean and unit average power.
    pub fn calibrate(calibration: &[FeatureTensor], merged_dim: usize) -> Result<Self> {
        Self::calibrate_split(calibration, calibration, merged_dim)
    }

    /// Fits the merge map on `fit` and the normalization on `norm`.
    ///
    /// Merged values on the fitting set are tighter than on new data, since
    /// the grouping adapted to them; normalizing on separate draws keeps the
    /// transmit power of unseen tensors close to one.
    pub fn calibrate_split(fit: &[FeatureTensor], norm: &[FeatureTensor], merged_dim: usize) -> Result<Self> {
        if norm.is_empty() {
            return Err(Error::config("calibration", "normalization set is empty"));
        }
        let map = fit_merge_map(fit, merged_dim)?;
        Self::with_norm_from(map, norm)
    }

    /// Uses an existing map and sets the normalization from `norm`.
    pub fn with_norm_from(map: MergeMap, norm: &[FeatureTensor]) -> Result<Self> {
        let merged_dim = map.merged_dim;
        let mut reduced = Vec::with_capacity(norm.len() * merged_dim);
        for t in norm {
            reduced.extend_from_slice(merge_reduce(t, &map)?.values());
        }
        let count = reduced.len() as f64;
        let mean = reduced.iter().sum::<f64>() / count;
        let var = reduced.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        // A constant set has no spread to normalize.
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self::new(map, PowerNorm { mean, scale })
    }

    pub fn from_artifact(artifact: MergeArtifact) -> Result<Self> {
        Self::new(artifact.merge_map, artifact.power_norm)
    }

    pub fn to_artifact(&self) -> MergeArtifact {
        MergeArtifact::new((*self.merge_map).clone(), self.power_norm)
    }

    pub fn merge_map(&self) -> &MergeMap {
        &self.merge_map
    }

    pub fn power_norm(&self) -> PowerNorm {
        self.power_norm
    }

    /// Channel symbols per encoded tensor.
    pub fn symbols(&self) -> usize {
        self.merge_map.merged_dim
    }
}

pub fn jscc_encode(t: &FeatureTensor, cfg: &JsccCodecConfig) -> Result<FeatureTensor> {
    let reduced = merge_reduce(t, &cfg.merge_map)?;
    let PowerNorm { mean, scale } = cfg.power_norm;
    let symbols = reduced.values().iter().map(|v| (v - mean) / scale).collect();
    FeatureTensor::new(vec![cfg.symbols()], symbols, TensorRole::Seed)
}

/// LMMSE estimate `snr/(1+snr)·y`, denormalized and expanded back to the
/// original dimension. The result is one-dimensional; callers reshape.
pub fn jscc_decode(y: &FeatureTensor, cfg: &JsccCodecConfig, snr_linear: f64) -> Result<FeatureTensor> {
    if !(snr_linear > 0.0) {
        return Err(Error::Domain(format!(
            "snr must be positive, got {snr_linear}"
        )));
    }
    if y.len() != cfg.symbols() {
        return Err(Error::DimMismatch {
            expected: cfg.symbols(),
            found: y.len(),
        });
    }
    let gain = if snr_linear.is_infinite() {
        1.0
    } else {
        snr_linear / (1.0 + snr_linear)
    };
    let PowerNorm { mean, scale } = cfg.power_norm;
    let values = y.values().iter().map(|s| gain * s * scale + mean).collect();
    let reduced = FeatureTensor::new(vec![cfg.symbols()], values, y.role())?;
    merge_expand(&reduced, &cfg.merge_map)
}
