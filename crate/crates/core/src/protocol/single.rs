//! Single-user mechanisms and the fusion operators they share with the
//! multi-user modes.

use std::borrow::Cow;

use super::timeline::{Actor, EventKind, Timeline};
use super::{FeatureGate, Layout, Mechanism, MechanismConfig, RunMetrics, Scheme};
use crate::channel::{tx_latency, ChannelSpec, LinkKind};
use crate::codec::{transport, TransportCodec};
use crate::error::{Error, Result};
use crate::metrics::DistortionReport;
use crate::pipeline::{compute_latency, synth_boundary_tensor, synth_output_tensor};
use crate::rng::RngStream;
use crate::tensor::FeatureTensor;

/// `alpha·local + (1−alpha)·remote`, elementwise. Returns `remote` exactly
/// wherever the two inputs agree.
pub fn gate_fuse(local: &FeatureTensor, remote: &FeatureTensor, gate: &FeatureGate) -> Result<FeatureTensor> {
    local.ensure_same_shape(remote)?;
    local.ensure_same_shape(gate.alpha())?;
    let values = local
        .values()
        .iter()
        .zip(remote.values())
        .zip(gate.alpha().values())
        .map(|((&l, &r), &a)| {
            if a == 1.0 {
                l
            } else if a == 0.0 {
                r
            } else {
                r + a * (l - r)
            }
        })
        .collect();
    FeatureTensor::new(local.shape().to_vec(), values, local.role())
}

/// Elementwise mean. Each element is summed in sorted order as offsets
/// from its minimum, so input order never matters and identical inputs
/// come back unchanged.
pub fn fuse_mean(features: &[FeatureTensor]) -> Result<FeatureTensor> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidValue("fuse_mean needs at least one feature".into()))?;
    for f in &features[1..] {
        first.ensure_same_shape(f)?;
    }
    let k = features.len() as f64;
    let mut column = Vec::with_capacity(features.len());
    let values = (0..first.len())
        .map(|i| {
            column.clear();
            column.extend(features.iter().map(|f| f.values()[i]));
            column.sort_by(f64::total_cmp);
            let min = column[0];
            min + column.iter().map(|v| v - min).sum::<f64>() / k
        })
        .collect();
    FeatureTensor::new(first.shape().to_vec(), values, first.role())
}

/// One UE's run up to the moment its feature reaches the generator.
pub(crate) struct Trace {
    pub timeline: Timeline,
    pub reference: FeatureTensor,
    pub received: FeatureTensor,
    /// Event after which `received` sits at `generator`.
    pub ready: usize,
    pub generator: Actor,
    pub gen_seconds: f64,
    pub payload_ul: u64,
    pub payload_dl: u64,
}

pub(crate) struct Hop {
    pub received: FeatureTensor,
    pub bits: u64,
    pub seconds: f64,
}

pub(crate) fn hop(
    cfg: &MechanismConfig,
    codec: &TransportCodec,
    t: &FeatureTensor,
    ch: &ChannelSpec,
    stream: RngStream,
) -> Result<Hop> {
    let out = transport(codec, t, ch, stream, cfg.bit_mode)?;
    Ok(Hop {
        received: out.received,
        bits: out.payload_bits,
        seconds: tx_latency(out.payload_bits, ch),
    })
}

fn reference_tensor(cfg: &MechanismConfig, stream: RngStream) -> Result<FeatureTensor> {
    if cfg.scheme == Scheme::Centralized {
        synth_output_tensor(&cfg.pipeline, stream.substream("image"))
    } else {
        synth_boundary_tensor(&cfg.pipeline, stream.substream("boundary"))
    }
}

fn checked_input(layout: &Layout, input: Option<FeatureTensor>) -> Result<Option<FeatureTensor>> {
    match input {
        Some(t) if t.shape() != layout.carried.as_slice() => Err(Error::ShapeMismatch {
            expected: layout.carried.clone(),
            found: t.shape().to_vec(),
        }),
        other => Ok(other),
    }
}

fn with_mechanism(cfg: &MechanismConfig, mechanism: Mechanism) -> Cow<'_, MechanismConfig> {
    if cfg.mechanism == mechanism {
        Cow::Borrowed(cfg)
    } else {
        let mut owned = cfg.clone();
        owned.mechanism = mechanism;
        Cow::Owned(owned)
    }
}

pub(crate) fn build_trace(
    cfg: &MechanismConfig,
    stream: RngStream,
    ue: usize,
    input: Option<FeatureTensor>,
) -> Result<Trace> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let stages = &cfg.pipeline.stages;
    let input = checked_input(&layout, input)?;
    let reference = match input {
        Some(t) => t,
        None => reference_tensor(cfg, stream)?,
    };
    let ul_link = Actor::Link { kind: LinkKind::Ul, ue };
    let dl_link = Actor::Link { kind: LinkKind::Dl, ue };
    let mut tl = Timeline::new();
    let tail = compute_latency(&stages[layout.split..]);
    match cfg.mechanism {
        Mechanism::E2U => {
            let prompt = cfg.pipeline.prompt_bits;
            let ul = tl.push("ul_request", ul_link, EventKind::Transmit, 0.0, tx_latency(prompt, &cfg.ul), &[]);
            let es = tl.push(
                "es_compute",
                Actor::Es,
                EventKind::Compute,
                0.0,
                compute_latency(&stages[..layout.split]),
                &[ul],
            );
            let h = hop(cfg, &cfg.dl_codec, &reference, &cfg.dl, stream.substream("dl"))?;
            let dl = tl.push("dl_feature", dl_link, EventKind::Transmit, 0.0, h.seconds, &[es]);
            Ok(Trace {
                timeline: tl,
                reference,
                received: h.received,
                ready: dl,
                generator: Actor::Ue(ue),
                gen_seconds: tail,
                payload_ul: prompt,
                payload_dl: h.bits,
            })
        }
        Mechanism::U2E => {
            let enc = tl.push(
                "ue_encode",
                Actor::Ue(ue),
                EventKind::Compute,
                0.0,
                compute_latency(&stages[..layout.split]),
                &[],
            );
            let h = hop(cfg, &cfg.ul_codec, &reference, &cfg.ul, stream.substream("ul"))?;
            let ul = tl.push("ul_feature", ul_link, EventKind::Transmit, 0.0, h.seconds, &[enc]);
            Ok(Trace {
                timeline: tl,
                reference,
                received: h.received,
                ready: ul,
                generator: Actor::Es,
                gen_seconds: tail,
                payload_ul: h.bits,
                payload_dl: 0,
            })
        }
        Mechanism::SEU => {
            let enc = tl.push(
                "ue_encode",
                Actor::Ue(ue),
                EventKind::Compute,
                0.0,
                compute_latency(&stages[..layout.encode]),
                &[],
            );
            let up = hop(cfg, &cfg.ul_codec, &reference, &cfg.ul, stream.substream("ul"))?;
            let ul = tl.push("ul_feature", ul_link, EventKind::Transmit, 0.0, up.seconds, &[enc]);
            let es = tl.push(
                "es_compute",
                Actor::Es,
                EventKind::Compute,
                0.0,
                compute_latency(&stages[layout.encode..layout.split]),
                &[ul],
            );
            // The ES forwards what it received, so both hops' errors add up.
            let down = hop(cfg, &cfg.dl_codec, &up.received, &cfg.dl, stream.substream("dl"))?;
            let dl = tl.push("dl_feature", dl_link, EventKind::Transmit, 0.0, down.seconds, &[es]);
            Ok(Trace {
                timeline: tl,
                reference,
                received: down.received,
                ready: dl,
                generator: Actor::Ue(ue),
                gen_seconds: tail,
                payload_ul: up.bits,
                payload_dl: down.bits,
            })
        }
        Mechanism::PEU => Err(Error::config(
            "mechanism",
            "PEU exchanges features in both directions and has no single feature path",
        )),
    }
}

pub(crate) fn generate_label(generator: Actor) -> &'static str {
    match generator {
        Actor::Es => "es_generate",
        _ => "ue_generate",
    }
}

pub(crate) fn finish(mut trace: Trace, peak: f64) -> Result<RunMetrics> {
    trace.timeline.push(
        generate_label(trace.generator),
        trace.generator,
        EventKind::Compute,
        0.0,
        trace.gen_seconds,
        &[trace.ready],
    );
    let distortion = DistortionReport::measure(&trace.reference, &trace.received, peak)?;
    Ok(RunMetrics::from_timeline(
        trace.timeline,
        trace.payload_ul,
        trace.payload_dl,
        distortion,
    ))
}

/// ES generates, sends the boundary feature down, UE finishes.
/// Under Centralized the ES runs everything and sends the image.
pub fn run_e2u(cfg: &MechanismConfig, stream: RngStream) -> Result<RunMetrics> {
    let cfg = with_mechanism(cfg, Mechanism::E2U);
    finish(build_trace(&cfg, stream, 0, None)?, cfg.psnr_peak)
}

/// UE encodes, sends the feature up, ES finishes. Under Centralized the UE
/// uploads raw image-sized input.
pub fn run_u2e(cfg: &MechanismConfig, stream: RngStream) -> Result<RunMetrics> {
    let cfg = with_mechanism(cfg, Mechanism::U2E);
    finish(build_trace(&cfg, stream, 0, None)?, cfg.psnr_peak)
}

/// UE encode, uplink, ES compute, downlink, UE decode, one after another.
pub fn run_seu(cfg: &MechanismConfig, stream: RngStream) -> Result<RunMetrics> {
    let cfg = with_mechanism(cfg, Mechanism::SEU);
    finish(build_trace(&cfg, stream, 0, None)?, cfg.psnr_peak)
}

/// Both fused tensors and the metrics of one PEU run.
#[derive(Debug, Clone, PartialEq)]
pub struct PeuOutcome {
    pub metrics: RunMetrics,
    pub reference: FeatureTensor,
    pub es_fused: FeatureTensor,
    pub ue_fused: FeatureTensor,
}

pub fn run_peu(cfg: &MechanismConfig, stream: RngStream, gate: &FeatureGate) -> Result<RunMetrics> {
    Ok(run_peu_detailed(cfg, stream, gate)?.metrics)
}

pub fn run_peu_detailed(cfg: &MechanismConfig, stream: RngStream, gate: &FeatureGate) -> Result<PeuOutcome> {
    let es = synth_boundary_tensor(&cfg.pipeline, stream.substream("es_feature"))?;
    let ue = synth_boundary_tensor(&cfg.pipeline, stream.substream("ue_feature"))?;
    run_peu_with_inputs(cfg, stream, gate, es, ue)
}

/// Each side encodes its own feature, the two swap features over UL and
/// DL at the same time, and each fuses and generates on its own.
///
/// Both gate copies weight the ES-originated feature by alpha, so given the
/// same inputs the two sides evaluate the same expression.
pub fn run_peu_with_inputs(
    cfg: &MechanismConfig,
    stream: RngStream,
    gate: &FeatureGate,
    es_feature: FeatureTensor,
    ue_feature: FeatureTensor,
) -> Result<PeuOutcome> {
    let cfg = with_mechanism(cfg, Mechanism::PEU);
    cfg.validate()?;
    let layout = cfg.layout()?;
    let es_feature = checked_input(&layout, Some(es_feature))?.expect("present");
    let ue_feature = checked_input(&layout, Some(ue_feature))?.expect("present");
    if gate.alpha().shape() != layout.carried.as_slice() {
        return Err(Error::ShapeMismatch {
            expected: layout.carried.clone(),
            found: gate.alpha().shape().to_vec(),
        });
    }
    let stages = &cfg.pipeline.stages;
    let encode = compute_latency(&stages[..layout.split]);
    let generate = compute_latency(&stages[layout.split..]);

    let up = hop(&cfg, &cfg.ul_codec, &ue_feature, &cfg.ul, stream.substream("ul"))?;
    let down = hop(&cfg, &cfg.dl_codec, &es_feature, &cfg.dl, stream.substream("dl"))?;

    let mut tl = Timeline::new();
    let es_enc = tl.push("es_encode", Actor::Es, EventKind::Compute, 0.0, encode, &[]);
    let ue_enc = tl.push("ue_encode", Actor::Ue(0), EventKind::Compute, 0.0, encode, &[]);
    let ul = tl.push(
        "ul_feature",
        Actor::Link { kind: LinkKind::Ul, ue: 0 },
        EventKind::Transmit,
        0.0,
        up.seconds,
        &[ue_enc],
    );
    let dl = tl.push(
        "dl_feature",
        Actor::Link { kind: LinkKind::Dl, ue: 0 },
        EventKind::Transmit,
        0.0,
        down.seconds,
        &[es_enc],
    );
    let es_fuse = tl.push("es_fuse", Actor::Es, EventKind::Fuse, 0.0, cfg.gate_seconds, &[es_enc, ul]);
    tl.push("es_generate", Actor::Es, EventKind::Compute, 0.0, generate, &[es_fuse]);
    let ue_fuse = tl.push("ue_fuse", Actor::Ue(0), EventKind::Fuse, 0.0, cfg.gate_seconds, &[ue_enc, dl]);
    tl.push("ue_generate", Actor::Ue(0), EventKind::Compute, 0.0, generate, &[ue_fuse]);

    let reference = gate_fuse(&es_feature, &ue_feature, gate)?;
    let es_fused = gate_fuse(&es_feature, &up.received, gate)?;
    let ue_fused = gate_fuse(&down.received, &ue_feature, gate)?;
    let mut metrics = RunMetrics::from_timeline(
        tl,
        up.bits,
        down.bits,
        DistortionReport::measure(&reference, &ue_fused, cfg.psnr_peak)?,
    );
    metrics.es_distortion = Some(DistortionReport::measure(&reference, &es_fused, cfg.psnr_peak)?);
    Ok(PeuOutcome {
        metrics,
        reference,
        es_fused,
        ue_fused,
    })
}

/// Runs whichever mechanism `cfg` names; PEU uses a uniform gate of
/// `cfg.gate_alpha`.
pub fn run_mechanism(cfg: &MechanismConfig, stream: RngStream) -> Result<RunMetrics> {
    match cfg.mechanism {
        Mechanism::E2U => run_e2u(cfg, stream),
        Mechanism::U2E => run_u2e(cfg, stream),
        Mechanism::SEU => run_seu(cfg, stream),
        Mechanism::PEU => {
            let layout = cfg.layout()?;
            let gate = FeatureGate::uniform(layout.carried, cfg.gate_alpha)?;
            run_peu(cfg, stream, &gate)
        }
    }
}
