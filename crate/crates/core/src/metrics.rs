//! Distortion between a reference tensor and its reconstruction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::FeatureTensor;

/// PSNR reported for bit-identical tensors.
pub const PSNR_CAP_DB: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub per_dim_max_err: f64,
}

impl DistortionReport {
    pub fn measure(reference: &FeatureTensor, received: &FeatureTensor, peak: f64) -> Result<Self> {
        let mse = mse(reference, received)?;
        let psnr_db = psnr_from_mse(mse, peak)?;
        let per_dim_max_err = reference
            .values()
            .iter()
            .zip(received.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            mse,
            psnr_db,
            per_dim_max_err,
        })
    }

    pub fn lossless() -> Self {
        Self {
            mse: 0.0,
            psnr_db: PSNR_CAP_DB,
            per_dim_max_err: 0.0,
        }
    }
}

pub fn mse(a: &FeatureTensor, b: &FeatureTensor) -> Result<f64> {
    a.ensure_same_shape(b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

pub fn psnr(a: &FeatureTensor, b: &FeatureTensor, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    psnr_from_mse(m, peak)
}

/// `10·log10(peak²/mse)`, or [`PSNR_CAP_DB`] when `mse == 0`.
pub fn psnr_from_mse(mse: f64, peak: f64) -> Result<f64> {
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Domain(format!("psnr peak must be positive, got {peak}")));
    }
    if mse < 0.0 || mse.is_nan() {
        return Err(Error::Domain(format!("mse must be non-negative, got {mse}")));
    }
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::TensorRole;
    use proptest::prelude::*;

    fn t(v: &[f64]) -> FeatureTensor {
        FeatureTensor::from_vec(v.to_vec(), TensorRole::Seed).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = t(&[0.3, -1.2, 4.0]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&t(&[0.0, 0.0]), &t(&[1.0, 1.0])).unwrap(), 1.0);
        let m = mse(&t(&[1.0, 2.0, 3.0]), &t(&[1.0, 2.0, 4.0])).unwrap();
        assert!((m - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mse_shape_mismatch() {
        assert!(matches!(
            mse(&t(&[1.0]), &t(&[1.0, 2.0])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn psnr_examples() {
        let a = t(&[0.5, 0.25]);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
        assert!((psnr_from_mse(0.01, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(1.0, 1.0).unwrap(), 0.0);
        assert!(psnr(&a, &a, 0.0).is_err());
        assert!(psnr(&a, &a, -1.0).is_err());
    }

    #[test]
    fn report_cap_iff_identical() {
        let a = t(&[1.0, 2.0]);
        let r = DistortionReport::measure(&a, &a, 1.0).unwrap();
        assert_eq!(r, DistortionReport::lossless());
        let r = DistortionReport::measure(&a, &t(&[1.0, 2.5]), 1.0).unwrap();
        assert!(r.mse > 0.0 && r.psnr_db < PSNR_CAP_DB);
        assert_eq!(r.per_dim_max_err, 0.5);
    }

    proptest! {
        #[test]
        fn mse_is_symmetric(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..64)) {
            let a = t(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let b = t(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        }

        #[test]
        fn psnr_strictly_decreasing(m in 1e-9f64..1e6, k in 1.0001f64..10.0) {
            prop_assert!(psnr_from_mse(m * k, 1.0).unwrap() < psnr_from_mse(m, 1.0).unwrap());
        }
    }
}
