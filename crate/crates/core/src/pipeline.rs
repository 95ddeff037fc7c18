//! Split generative pipeline: ordered stages with compute costs, and the
//! tensors that cross the ES/UE boundary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian_tensor, RngStream};
use crate::tensor::{validate_shape, FeatureTensor, TensorRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub compute_seconds: f64,
    #[serde(default = "one")]
    pub repeat: u32,
    pub output_role: TensorRole,
}

fn one() -> u32 {
    1
}

impl StageSpec {
    pub fn new(name: impl Into<String>, compute_seconds: f64, repeat: u32, output_role: TensorRole) -> Self {
        Self {
            name: name.into(),
            compute_seconds,
            repeat,
            output_role,
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.compute_seconds * self.repeat as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineModel {
    pub stages: Vec<StageSpec>,
    /// Stages `[0, split_index)` run before the boundary, the rest after.
    pub split_index: usize,
    /// Stages `[0, encode_split)` run on the UE ahead of the uplink when a
    /// mechanism encodes on both sides; must not exceed `split_index`.
    #[serde(default)]
    pub encode_split: usize,
    pub boundary_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    /// Size of the generation request sent ahead of E2U runs.
    #[serde(default)]
    pub prompt_bits: u64,
}

impl PipelineModel {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("pipeline.stages", "at least one stage is required"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !(s.compute_seconds >= 0.0) || !s.compute_seconds.is_finite() {
                return Err(Error::config(
                    format!("pipeline.stages[{i}].compute_seconds"),
                    format!("must be finite and >= 0, got {}", s.compute_seconds),
                ));
            }
            if s.repeat == 0 {
                return Err(Error::config(format!("pipeline.stages[{i}].repeat"), "must be >= 1"));
            }
        }
        let n = self.stages.len();
        if self.split_index > n {
            return Err(Error::config(
                "pipeline.split_index",
                format!("must lie in [0, {n}], got {}", self.split_index),
            ));
        }
        if self.encode_split > self.split_index {
            return Err(Error::config(
                "pipeline.encode_split",
                format!("must not exceed split_index {}", self.split_index),
            ));
        }
        validate_shape(&self.boundary_shape).map_err(|e| Error::config("pipeline.boundary_shape", e.to_string()))?;
        validate_shape(&self.output_shape).map_err(|e| Error::config("pipeline.output_shape", e.to_string()))?;
        if 0 < self.split_index && self.split_index < n {
            let role = self.stages[self.split_index - 1].output_role;
            if !matches!(role, TensorRole::Seed | TensorRole::Sketch) {
                return Err(Error::config(
                    "pipeline.split_index",
                    format!("boundary stage emits {role:?}, expected a seed or sketch"),
                ));
            }
        }
        Ok(())
    }

    pub fn total_compute(&self) -> f64 {
        compute_latency(&self.stages)
    }

    /// Role of the tensor crossing the split.
    pub fn boundary_role(&self) -> TensorRole {
        match self.split_index {
            0 => TensorRole::Prompt,
            i => self.stages[i - 1].output_role,
        }
    }

    pub fn server_part(&self) -> &[StageSpec] {
        &self.stages[..self.split_index]
    }

    pub fn device_part(&self) -> &[StageSpec] {
        &self.stages[self.split_index..]
    }

    pub fn with_split(mut self, split_index: usize) -> Result<Self> {
        self.split_index = split_index;
        self.encode_split = self.encode_split.min(split_index);
        self.validate()?;
        Ok(self)
    }
}

/// The three-stage text-to-image model of the case study: 7.58 s of
/// compute in total, split after the denoiser.
pub fn case_study_pipeline() -> PipelineModel {
    PipelineModel {
        stages: vec![
            StageSpec::new("text_encoder", 0.38, 1, TensorRole::Prompt),
            StageSpec::new("denoiser", 0.55, 12, TensorRole::Seed),
            StageSpec::new("vae_decoder", 0.60, 1, TensorRole::Image),
        ],
        split_index: 2,
        encode_split: 1,
        boundary_shape: vec![4, 128, 128],
        output_shape: vec![1024, 1024, 3],
        prompt_bits: 0,
    }
}

/// Stages before and after `index`.
pub fn split_at(p: &PipelineModel, index: usize) -> Result<(Vec<StageSpec>, Vec<StageSpec>)> {
    if index > p.stages.len() {
        return Err(Error::OutOfRange(format!(
            "split index {index} beyond {} stages",
            p.stages.len()
        )));
    }
    Ok((p.stages[..index].to_vec(), p.stages[index..].to_vec()))
}

pub fn compute_latency(part: &[StageSpec]) -> f64 {
    part.iter().map(StageSpec::total_seconds).sum()
}

/// Stand-in for the activations at the split: i.i.d. standard normal.
pub fn synth_boundary_tensor(p: &PipelineModel, stream: RngStream) -> Result<FeatureTensor> {
    Ok(gaussian_tensor(&p.boundary_shape, stream)?.with_role(p.boundary_role()))
}

/// Stand-in for a generated image: i.i.d. uniform pixels in `[0, 1)`.
pub fn synth_output_tensor(p: &PipelineModel, stream: RngStream) -> Result<FeatureTensor> {
    validate_shape(&p.output_shape)?;
    let n: usize = p.output_shape.iter().product();
    let mut rng = stream.rng();
    let values = (0..n).map(|_| rng.random::<f64>()).collect();
    FeatureTensor::new(p.output_shape.clone(), values, TensorRole::Image)
}
