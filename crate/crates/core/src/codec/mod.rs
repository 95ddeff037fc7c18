//! Feature transport codecs and the glue that sends a tensor through a link.

pub mod fp16;
pub mod jscc;
pub mod merge;
pub mod prune;
pub mod sketch;

use std::sync::Arc;

pub use fp16::{dequantize_fp16, fp16_roundtrip, quantize_fp16, DigitalCodecConfig, FP16_MAX};
pub use jscc::{jscc_decode, jscc_encode, JsccCodecConfig, PowerNorm};
pub use merge::{fit_merge_map, merge_expand, merge_reduce, MergeArtifact, MergeMap};
pub use prune::{prune_topk, SparsePayload};
pub use sketch::{sketch_decode, sketch_encode, SketchConfig, SketchPayload};

use crate::channel::{
    analog_airtime_bits, transmit_analog, transmit_bits_with, BitChannelMode, BitPayload, ChannelSpec,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::FeatureTensor;

/// How a tensor becomes channel payload.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportCodec {
    /// Lossless reference path; only airtime is accounted.
    Ideal { bits_per_value: u32 },
    /// Half-precision words over the bit channel.
    DigitalFp16(DigitalCodecConfig),
    /// Full-resolution output image in half precision.
    RawImage(DigitalCodecConfig),
    /// Merged, normalized analog symbols with LMMSE reception.
    AnalogJscc {
        config: Arc<JsccCodecConfig>,
        bits_per_symbol: u32,
    },
    Sketch {
        config: SketchConfig,
        digital: DigitalCodecConfig,
    },
    Pruned {
        keep: usize,
        digital: DigitalCodecConfig,
    },
}

impl TransportCodec {
    pub fn name(&self) -> &'static str {
        match self {
            TransportCodec::Ideal { .. } => "ideal",
            TransportCodec::DigitalFp16(_) => "fp16",
            TransportCodec::RawImage(_) => "raw_image",
            TransportCodec::AnalogJscc { .. } => "jscc",
            TransportCodec::Sketch { .. } => "sketch",
            TransportCodec::Pruned { .. } => "pruned",
        }
    }

    /// Airtime in bit equivalents for a tensor of `shape`. Depends only on
    /// the codec configuration, never on tensor values.
    pub fn payload_bits(&self, shape: &[usize]) -> Result<u64> {
        let n: usize = shape.iter().product();
        Ok(match self {
            TransportCodec::Ideal { bits_per_value } => n as u64 * *bits_per_value as u64,
            TransportCodec::DigitalFp16(d) | TransportCodec::RawImage(d) => d.payload_bits(n),
            TransportCodec::AnalogJscc {
                config,
                bits_per_symbol,
            } => {
                if config.merge_map().original_dim != n {
                    return Err(Error::DimMismatch {
                        expected: config.merge_map().original_dim,
                        found: n,
                    });
                }
                analog_airtime_bits(config.symbols(), *bits_per_symbol)
            }
            TransportCodec::Sketch { config, .. } => config.payload_bits(shape)?,
            TransportCodec::Pruned { keep, .. } => {
                if *keep == 0 || *keep > n {
                    return Err(Error::OutOfRange(format!("keep {keep} of {n}")));
                }
                prune::pruned_payload_bits(n, *keep)
            }
        })
    }

    pub fn validate_for(&self, shape: &[usize]) -> Result<()> {
        self.payload_bits(shape).map(|_| ())
    }
}

/// Outcome of one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct Transported {
    pub received: FeatureTensor,
    pub payload_bits: u64,
}

/// Encodes `t`, passes it through `ch` and decodes at the receiver.
pub fn transport(
    codec: &TransportCodec,
    t: &FeatureTensor,
    ch: &ChannelSpec,
    stream: RngStream,
    mode: BitChannelMode,
) -> Result<Transported> {
    let payload_bits = codec.payload_bits(t.shape())?;
    let received = match codec {
        TransportCodec::Ideal { .. } => t.clone(),
        TransportCodec::DigitalFp16(d) | TransportCodec::RawImage(d) => {
            let bits = quantize_fp16(t, d)?;
            let rx = transmit_bits_with(&bits, ch, stream, mode)?;
            dequantize_fp16(&rx, t.shape(), d, t.role())?
        }
        TransportCodec::AnalogJscc { config, .. } => {
            let symbols = jscc_encode(t, config)?;
            let rx = transmit_analog(&symbols, ch, stream)?;
            jscc_decode(&rx, config, ch.snr_linear())?
                .with_role(t.role())
                .reshaped(t.shape().to_vec())?
        }
        TransportCodec::Sketch { config, digital } => {
            let sketch = sketch_encode(t, config)?;
            let coarse_bits = quantize_fp16(&sketch.coarse, digital)?;
            let rx = transmit_bits_with(&coarse_bits, ch, stream, mode)?;
            let coarse = dequantize_fp16(&rx, sketch.coarse.shape(), digital, sketch.coarse.role())?;
            let edges = match &sketch.edges {
                Some(e) => Some(transmit_bits_with(e, ch, stream.substream("edges"), mode)?),
                None => None,
            };
            let received = SketchPayload {
                coarse,
                edges,
                payload_bits: sketch.payload_bits,
            };
            sketch_decode(&received, config, t.shape())?.with_role(t.role())
        }
        TransportCodec::Pruned { keep, digital } => {
            let sparse = prune_topk(t, *keep)?;
            let n = t.len();
            let width = prune::index_bits(n);
            let mut bits = BitPayload::with_capacity(payload_bits as usize);
            for (&i, &v) in sparse.indices.iter().zip(&sparse.values) {
                bits.push_bits(i as u64, width);
                bits.push_bits(fp16::encode_value(v, digital.clamp_max) as u64, 16);
            }
            let rx = transmit_bits_with(&bits, ch, stream, mode)?;
            let mut dense = vec![0.0; n];
            let stride = width as usize + 16;
            for e in 0..*keep {
                let idx = rx.read_bits(e * stride, width) as usize;
                let word = rx.read_bits(e * stride + width as usize, 16) as u16;
                // Corrupted indices past the end are dropped.
                if idx < n {
                    dense[idx] = fp16::decode_value(word, digital.clamp_max);
                }
            }
            FeatureTensor::new(t.shape().to_vec(), dense, t.role())?
        }
    };
    Ok(Transported {
        received,
        payload_bits,
    })
}
