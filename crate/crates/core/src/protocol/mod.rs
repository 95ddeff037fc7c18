//! Generation mechanisms: who computes what, which features cross which
//! link, and when everything finishes.

mod multi;
mod single;
pub mod timeline;

use serde::{Deserialize, Serialize};

pub use multi::{
    run_multiuser, run_multiuser_round, run_multiuser_with, MultiUserAggregate, MultiUserConfig, MultiUserMode,
    MultiUserOutcome, ShareEvent, ShareEventKind, ShareHistory, UeOverride,
};
pub use single::{
    fuse_mean, gate_fuse, run_e2u, run_mechanism, run_peu, run_peu_detailed, run_peu_with_inputs, run_seu, run_u2e,
    PeuOutcome,
};
pub use timeline::{Actor, EventKind, Timeline, TimelineEvent};

use crate::channel::{BitChannelMode, ChannelSpec};
use crate::codec::TransportCodec;
use crate::error::{Error, Result};
use crate::metrics::DistortionReport;
use crate::pipeline::PipelineModel;
use crate::tensor::FeatureTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    /// ES computes and sends features down.
    E2U,
    /// UE encodes and sends features up.
    U2E,
    /// UE encode, uplink, ES compute, downlink, UE decode.
    SEU,
    /// Both sides encode, swap features and fuse them with a gate.
    PEU,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::E2U => "E2U",
            Mechanism::U2E => "U2E",
            Mechanism::SEU => "SEU",
            Mechanism::PEU => "PEU",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Whole model on the ES; the raw image crosses the link.
    Centralized,
    /// Split model with half-precision features.
    #[serde(rename = "MEG")]
    Meg,
    /// Split model with analog JSCC features.
    #[serde(rename = "E2E_MEG")]
    E2eMeg,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Centralized => "Centralized",
            Scheme::Meg => "MEG",
            Scheme::E2eMeg => "E2E_MEG",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    pub mechanism: Mechanism,
    pub scheme: Scheme,
    pub ul: ChannelSpec,
    pub dl: ChannelSpec,
    pub ul_codec: TransportCodec,
    pub dl_codec: TransportCodec,
    pub pipeline: PipelineModel,
    pub bit_mode: BitChannelMode,
    /// Time one gate fusion takes in PEU.
    pub gate_seconds: f64,
    /// Uniform gate weight used where no explicit gate is passed.
    pub gate_alpha: f64,
    pub psnr_peak: f64,
}

/// Where the pipeline is cut for a given mechanism and scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub encode: usize,
    pub split: usize,
    /// Shape of the tensor carried over the feature links.
    pub carried: Vec<usize>,
}

impl MechanismConfig {
    pub(crate) fn layout(&self) -> Result<Layout> {
        let p = &self.pipeline;
        let n = p.stages.len();
        if self.scheme == Scheme::Centralized {
            let (encode, split) = match self.mechanism {
                Mechanism::E2U | Mechanism::SEU => (0, n),
                Mechanism::U2E => (0, 0),
                Mechanism::PEU => {
                    return Err(Error::config(
                        "mechanism",
                        "PEU needs model parts on both sides; Centralized has none on the UE",
                    ))
                }
            };
            return Ok(Layout {
                encode,
                split,
                carried: p.output_shape.clone(),
            });
        }
        if p.split_index == 0 || p.split_index == n {
            return Err(Error::config(
                "pipeline.split_index",
                format!("split models need stages on both sides, got {} of {n}", p.split_index),
            ));
        }
        Ok(Layout {
            encode: p.encode_split,
            split: p.split_index,
            carried: p.boundary_shape.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.ul.validate().map_err(|e| Error::config("channel.ul", e.to_string()))?;
        self.dl.validate().map_err(|e| Error::config("channel.dl", e.to_string()))?;
        if !(self.psnr_peak > 0.0) {
            return Err(Error::config("metrics.psnr_peak", "must be positive"));
        }
        if !(self.gate_seconds >= 0.0) || !self.gate_seconds.is_finite() {
            return Err(Error::config("gate.fusion_seconds", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.gate_alpha) {
            return Err(Error::config("gate.alpha", "must lie in [0, 1]"));
        }
        let layout = self.layout()?;
        let check = |codec: &TransportCodec, path: &str| {
            codec
                .validate_for(&layout.carried)
                .map_err(|e| Error::config(path, format!("{} codec: {e}", codec.name())))
        };
        match self.mechanism {
            Mechanism::E2U => check(&self.dl_codec, "codec.dl"),
            Mechanism::U2E => check(&self.ul_codec, "codec.ul"),
            Mechanism::SEU | Mechanism::PEU => {
                check(&self.ul_codec, "codec.ul")?;
                check(&self.dl_codec, "codec.dl")
            }
        }
    }
}

/// Elementwise convex weights; `alpha` multiplies the ES-originated
/// feature wherever the gate is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGate {
    alpha: FeatureTensor,
}

impl FeatureGate {
    pub fn new(alpha: FeatureTensor) -> Result<Self> {
        if let Some(a) = alpha.values().iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidValue(format!("gate weight {a} outside [0, 1]")));
        }
        Ok(Self { alpha })
    }

    pub fn uniform(shape: Vec<usize>, alpha: f64) -> Result<Self> {
        Self::new(FeatureTensor::filled(shape, alpha, crate::tensor::TensorRole::Seed)?)
    }

    pub fn alpha(&self) -> &FeatureTensor {
        &self.alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Transmission time on the critical path.
    pub t_tx_s: f64,
    /// Compute and fusion time on the critical path.
    pub t_compute_s: f64,
    pub t_e2e_s: f64,
    pub payload_bits_ul: u64,
    pub payload_bits_dl: u64,
    pub payload_bits_d2d: u64,
    /// Measured at the UE for PEU, at the receiving side otherwise.
    pub distortion: DistortionReport,
    /// ES-side distortion in PEU.
    pub es_distortion: Option<DistortionReport>,
    pub timeline: Timeline,
}

impl RunMetrics {
    pub(crate) fn from_timeline(
        timeline: Timeline,
        payload_bits_ul: u64,
        payload_bits_dl: u64,
        distortion: DistortionReport,
    ) -> Self {
        let (t_tx_s, t_compute_s) = timeline.critical_durations();
        Self {
            t_tx_s,
            t_compute_s,
            t_e2e_s: timeline.completion(),
            payload_bits_ul,
            payload_bits_dl,
            payload_bits_d2d: 0,
            distortion,
            es_distortion: None,
            timeline,
        }
    }

    /// Timeline audit plus the latency identities every run must satisfy.
    pub fn audit(&self) -> Result<()> {
        self.timeline.audit()?;
        if self.t_e2e_s != self.timeline.completion() {
            return Err(Error::InvalidValue(format!(
                "t_e2e {} differs from final timestamp {}",
                self.t_e2e_s,
                self.timeline.completion()
            )));
        }
        let slack = 1e-9 * self.t_e2e_s.max(1.0);
        if self.t_tx_s + self.t_compute_s > self.t_e2e_s + slack {
            return Err(Error::InvalidValue(format!(
                "critical path {} + {} exceeds t_e2e {}",
                self.t_tx_s, self.t_compute_s, self.t_e2e_s
            )));
        }
        Ok(())
    }
}
