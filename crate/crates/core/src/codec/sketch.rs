//! Interpretable sketch codec: block-average pooling plus an optional 1-bit
//! edge map, reconstructed by bilinear upsampling.
//!
//! Tensors are `[.., H, W]`; leading dimensions are treated as independent
//! channels.

use serde::{Deserialize, Serialize};

use crate::channel::BitPayload;
use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, TensorRole};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchConfig {
    pub downsample_factor: usize,
    #[serde(default)]
    pub edge_bits: bool,
    #[serde(default = "default_threshold")]
    pub edge_threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

impl SketchConfig {
    pub fn new(downsample_factor: usize, edge_bits: bool, edge_threshold: f64) -> Result<Self> {
        let cfg = Self {
            downsample_factor,
            edge_bits,
            edge_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.downsample_factor == 0 {
            return Err(Error::config("sketch.downsample_factor", "must be >= 1"));
        }
        if !(self.edge_threshold > 0.0) {
            return Err(Error::config("sketch.edge_threshold", "must be > 0"));
        }
        Ok(())
    }

    /// Coarse shape for a full-resolution `shape`.
    pub fn reduced_shape(&self, shape: &[usize]) -> Result<Vec<usize>> {
        let (h, w) = spatial(shape)?;
        let f = self.downsample_factor;
        if h % f != 0 || w % f != 0 {
            return Err(Error::shape(
                shape,
                format!("spatial dims not divisible by factor {f}"),
            ));
        }
        let mut out = shape.to_vec();
        let n = out.len();
        out[n - 2] = h / f;
        out[n - 1] = w / f;
        Ok(out)
    }

    pub fn payload_bits(&self, shape: &[usize]) -> Result<u64> {
        let reduced: usize = self.reduced_shape(shape)?.iter().product();
        let per = if self.edge_bits { 17 } else { 16 };
        Ok(reduced as u64 * per)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchPayload {
    pub coarse: FeatureTensor,
    /// One bit per coarse cell, set where the local gradient is strong.
    pub edges: Option<BitPayload>,
    pub payload_bits: u64,
}

fn spatial(shape: &[usize]) -> Result<(usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::shape(shape, "sketch needs at least two spatial dims"));
    }
    Ok((shape[shape.len() - 2], shape[shape.len() - 1]))
}

pub fn sketch_encode(t: &FeatureTensor, cfg: &SketchConfig) -> Result<SketchPayload> {
    cfg.validate()?;
    let reduced_shape = cfg.reduced_shape(t.shape())?;
    let (h, w) = spatial(t.shape())?;
    let f = cfg.downsample_factor;
    let (rh, rw) = (h / f, w / f);
    let channels = t.len() / (h * w);
    let src = t.values();
    let mut coarse = Vec::with_capacity(channels * rh * rw);
    for c in 0..channels {
        let plane = &src[c * h * w..(c + 1) * h * w];
        for by in 0..rh {
            for bx in 0..rw {
                let mut sum = 0.0;
                for y in by * f..(by + 1) * f {
                    sum += plane[y * w + bx * f..y * w + (bx + 1) * f].iter().sum::<f64>();
                }
                coarse.push(sum / (f * f) as f64);
            }
        }
    }
    let edges = cfg
        .edge_bits
        .then(|| edge_map(&coarse, channels, rh, rw, cfg.edge_threshold));
    Ok(SketchPayload {
        coarse: FeatureTensor::new(reduced_shape, coarse, TensorRole::Sketch)?,
        edges,
        payload_bits: cfg.payload_bits(t.shape())?,
    })
}

/// Marks coarse cells whose forward-difference gradient magnitude exceeds
/// the threshold.
fn edge_map(coarse: &[f64], channels: usize, h: usize, w: usize, threshold: f64) -> BitPayload {
    let mut bits = BitPayload::zeros(channels * h * w);
    for c in 0..channels {
        let p = &coarse[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let v = p[y * w + x];
                let dx = if x + 1 < w { p[y * w + x + 1] - v } else { 0.0 };
                let dy = if y + 1 < h { p[(y + 1) * w + x] - v } else { 0.0 };
                if (dx * dx + dy * dy).sqrt() > threshold {
                    bits.set(c * h * w + y * w + x, true);
                }
            }
        }
    }
    bits
}

pub fn sketch_decode(
    sketch: &SketchPayload,
    cfg: &SketchConfig,
    target_shape: &[usize],
) -> Result<FeatureTensor> {
    cfg.validate()?;
    let expected = cfg.reduced_shape(target_shape)?;
    if sketch.coarse.shape() != expected.as_slice() {
        return Err(Error::ShapeMismatch {
            expected,
            found: sketch.coarse.shape().to_vec(),
        });
    }
    if let Some(e) = &sketch.edges {
        if e.len_bits() != sketch.coarse.len() {
            return Err(Error::PayloadSize {
                expected: sketch.coarse.len(),
                found: e.len_bits(),
            });
        }
    }
    let (h, w) = spatial(target_shape)?;
    let f = cfg.downsample_factor;
    let (rh, rw) = (h / f, w / f);
    let channels = sketch.coarse.len() / (rh * rw);
    let src = sketch.coarse.values();
    let mut out = Vec::with_capacity(channels * h * w);
    // Half-pixel aligned source coordinate and clamped neighbours.
    let taps = |dst: usize, len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) / f as f64 - 0.5).max(0.0);
        let i0 = (s.floor() as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, s - i0 as f64)
    };
    for c in 0..channels {
        let p = &src[c * rh * rw..(c + 1) * rh * rw];
        for y in 0..h {
            let (y0, y1, wy) = taps(y, rh);
            for x in 0..w {
                let cell = c * rh * rw + (y / f) * rw + x / f;
                if sketch.edges.as_ref().is_some_and(|e| e.get(cell)) {
                    out.push(p[(y / f) * rw + x / f]);
                    continue;
                }
                let (x0, x1, wx) = taps(x, rw);
                let top = lerp(p[y0 * rw + x0], p[y0 * rw + x1], wx);
                let bottom = lerp(p[y1 * rw + x0], p[y1 * rw + x1], wx);
                out.push(lerp(top, bottom, wy));
            }
        }
    }
    FeatureTensor::new(target_shape.to_vec(), out, sketch.coarse.role())
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}
