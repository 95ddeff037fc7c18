//! Half-precision serialization of feature tensors.

use half::f16;
use serde::{Deserialize, Serialize};

use crate::channel::BitPayload;
use crate::error::{Error, Result};
use crate::tensor::{shape_len, FeatureTensor, TensorRole};

/// Largest finite half-precision value.
pub const FP16_MAX: f64 = 65504.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitalCodecConfig {
    #[serde(default = "default_bits")]
    pub bits_per_value: u32,
    /// Saturation bound applied before encoding and after decoding.
    #[serde(default = "default_clamp")]
    pub clamp_max: f64,
}

fn default_bits() -> u32 {
    16
}

fn default_clamp() -> f64 {
    FP16_MAX
}

impl Default for DigitalCodecConfig {
    fn default() -> Self {
        Self {
            bits_per_value: 16,
            clamp_max: FP16_MAX,
        }
    }
}

impl DigitalCodecConfig {
    pub fn with_clamp(clamp_max: f64) -> Result<Self> {
        let cfg = Self {
            clamp_max,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits_per_value != 16 {
            return Err(Error::config(
                "bits_per_value",
                format!("only 16-bit values are supported, got {}", self.bits_per_value),
            ));
        }
        if !(self.clamp_max > 0.0 && self.clamp_max <= FP16_MAX) {
            return Err(Error::config(
                "clamp_max",
                format!("must lie in (0, {FP16_MAX}], got {}", self.clamp_max),
            ));
        }
        Ok(())
    }

    pub fn payload_bits(&self, values: usize) -> u64 {
        values as u64 * self.bits_per_value as u64
    }
}

pub(crate) fn encode_value(v: f64, clamp_max: f64) -> u16 {
    let h = f16::from_f64(v.clamp(-clamp_max, clamp_max));
    let h = if h.is_infinite() {
        if h.is_sign_negative() {
            f16::MIN
        } else {
            f16::MAX
        }
    } else {
        h
    };
    h.to_bits()
}

pub(crate) fn decode_value(bits: u16, clamp_max: f64) -> f64 {
    let v = f16::from_bits(bits).to_f64();
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-clamp_max, clamp_max)
    }
}

/// Rounds every value to the nearest half-precision number, saturating at
/// `±clamp_max`, and packs the words into a payload of `16·len` bits.
pub fn quantize_fp16(t: &FeatureTensor, cfg: &DigitalCodecConfig) -> Result<BitPayload> {
    cfg.validate()?;
    let words: Vec<u16> = t
        .values()
        .iter()
        .map(|&v| encode_value(v, cfg.clamp_max))
        .collect();
    Ok(BitPayload::from_u16_words(&words))
}

/// Unpacks half-precision words. NaN decodes to 0; infinities and
/// magnitudes beyond `clamp_max` saturate.
pub fn dequantize_fp16(
    p: &BitPayload,
    shape: &[usize],
    cfg: &DigitalCodecConfig,
    role: TensorRole,
) -> Result<FeatureTensor> {
    cfg.validate()?;
    let n = shape_len(shape);
    let expected = n * 16;
    if p.len_bits() != expected {
        return Err(Error::PayloadSize {
            expected,
            found: p.len_bits(),
        });
    }
    let values = p
        .to_u16_words()
        .into_iter()
        .map(|w| decode_value(w, cfg.clamp_max))
        .collect();
    Ok(FeatureTensor::from_parts(shape.to_vec(), values, role))
}

/// Noiseless quantize/dequantize.
pub fn fp16_roundtrip(t: &FeatureTensor, cfg: &DigitalCodecConfig) -> Result<FeatureTensor> {
    let p = quantize_fp16(t, cfg)?;
    dequantize_fp16(&p, t.shape(), cfg, t.role())
}
