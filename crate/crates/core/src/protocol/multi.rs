//! Several UEs generating together: on their own, by sharing features with
//! neighbours over D2D, or by pooling them at the ES.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::single::{build_trace, finish, fuse_mean, generate_label, hop, run_peu_with_inputs, Trace};
use super::timeline::{Actor, EventKind, Timeline};
use super::{FeatureGate, Mechanism, MechanismConfig, RunMetrics};
use crate::channel::{tx_latency, ChannelSpec, LinkKind};
use crate::codec::DigitalCodecConfig;
use crate::error::{Error, Result};
use crate::metrics::{psnr_from_mse, DistortionReport};
use crate::pipeline::synth_boundary_tensor;
use crate::rng::RngStream;
use crate::tensor::FeatureTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiUserMode {
    Individual,
    DecentralizedShared,
    CoordinatedFused,
}

/// Per-UE link rates that differ from the mechanism's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeOverride {
    pub ue: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2d_rate_bps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserConfig {
    pub mode: MultiUserMode,
    pub num_ues: usize,
    pub d2d: ChannelSpec,
    /// Adjacency lists; must be symmetric.
    pub neighbors: Vec<Vec<usize>>,
    /// UEs whose D2D radio is down for this round.
    pub offline: Vec<usize>,
    pub fusion_seconds: f64,
    /// Coordinated mode: send the ES's generated output back to each UE.
    pub deliver_output: bool,
    pub overrides: Vec<UeOverride>,
}

impl MultiUserConfig {
    /// Every UE neighbours every other.
    pub fn fully_connected(mode: MultiUserMode, num_ues: usize, d2d: ChannelSpec) -> Self {
        let neighbors = (0..num_ues)
            .map(|u| (0..num_ues).filter(|&v| v != u).collect())
            .collect();
        Self {
            mode,
            num_ues,
            d2d,
            neighbors,
            offline: Vec::new(),
            fusion_seconds: 0.0,
            deliver_output: false,
            overrides: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ues == 0 {
            return Err(Error::config("multi_user.num_ues", "must be >= 1"));
        }
        self.d2d
            .validate()
            .map_err(|e| Error::config("multi_user.d2d", e.to_string()))?;
        if self.neighbors.len() != self.num_ues {
            return Err(Error::config(
                "multi_user.neighbors",
                format!("expected {} adjacency lists, got {}", self.num_ues, self.neighbors.len()),
            ));
        }
        for (u, list) in self.neighbors.iter().enumerate() {
            for (i, &v) in list.iter().enumerate() {
                let path = format!("multi_user.neighbors[{u}][{i}]");
                if v >= self.num_ues || v == u {
                    return Err(Error::config(path, format!("invalid neighbour {v}")));
                }
                if list[..i].contains(&v) {
                    return Err(Error::config(path, format!("duplicate neighbour {v}")));
                }
                if !self.neighbors[v].contains(&u) {
                    return Err(Error::config(path, format!("{u} lists {v} but {v} does not list {u}")));
                }
            }
        }
        if let Some(&u) = self.offline.iter().find(|&&u| u >= self.num_ues) {
            return Err(Error::config("multi_user.offline", format!("no UE {u}")));
        }
        if !(self.fusion_seconds >= 0.0) || !self.fusion_seconds.is_finite() {
            return Err(Error::config("multi_user.fusion_seconds", "must be finite and >= 0"));
        }
        for (i, o) in self.overrides.iter().enumerate() {
            if o.ue >= self.num_ues {
                return Err(Error::config(format!("multi_user.overrides[{i}].ue"), format!("no UE {}", o.ue)));
            }
            for (name, r) in [("ul", o.ul_rate_bps), ("dl", o.dl_rate_bps), ("d2d", o.d2d_rate_bps)] {
                if let Some(r) = r {
                    if !(r > 0.0) || !r.is_finite() {
                        return Err(Error::config(
                            format!("multi_user.overrides[{i}].{name}_rate_bps"),
                            "must be positive and finite",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn ue_override(&self, ue: usize) -> Option<&UeOverride> {
        self.overrides.iter().rev().find(|o| o.ue == ue)
    }

    fn ue_mechanism(&self, mech: &MechanismConfig, ue: usize) -> MechanismConfig {
        let mut cfg = mech.clone();
        if let Some(o) = self.ue_override(ue) {
            if let Some(r) = o.ul_rate_bps {
                cfg.ul.rate_bps = r;
            }
            if let Some(r) = o.dl_rate_bps {
                cfg.dl.rate_bps = r;
            }
        }
        cfg
    }

    fn ue_d2d(&self, ue: usize) -> ChannelSpec {
        match self.ue_override(ue).and_then(|o| o.d2d_rate_bps) {
            Some(r) => self.d2d.with_rate(r),
            None => self.d2d,
        }
    }

    fn is_online(&self, ue: usize) -> bool {
        !self.offline.contains(&ue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareEventKind {
    /// The peer's feature from an earlier round was used.
    Stale,
    /// Nothing from the peer was available; fused without it.
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareEvent {
    pub ue: usize,
    pub peer: usize,
    pub kind: ShareEventKind,
}

/// Last feature each UE shared, carried between rounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShareHistory {
    last: BTreeMap<usize, FeatureTensor>,
}

impl ShareHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, ue: usize) -> Option<&FeatureTensor> {
        self.last.get(&ue)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiUserAggregate {
    /// Latest completion over all UEs.
    pub t_e2e_s: f64,
    /// Critical-path split of the slowest UE.
    pub t_tx_s: f64,
    pub t_compute_s: f64,
    pub payload_bits_ul: u64,
    pub payload_bits_dl: u64,
    pub payload_bits_d2d: u64,
    /// Mean over UEs.
    pub mse: f64,
    pub psnr_db: f64,
    pub slowest_ue: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserOutcome {
    pub per_ue: Vec<RunMetrics>,
    pub aggregate: MultiUserAggregate,
    pub events: Vec<ShareEvent>,
    /// What each UE ended up generating from.
    pub fused: Vec<FeatureTensor>,
}

/// One round with synthetic features and no history. UE `u` draws from
/// `stream.substream("ue:{u}")`, so with one UE in Individual mode the
/// result equals a single-user run on that substream.
pub fn run_multiuser(cfg: &MultiUserConfig, mech: &MechanismConfig, stream: RngStream) -> Result<MultiUserOutcome> {
    run_multiuser_round(cfg, mech, stream, None, &mut ShareHistory::new())
}

/// One round where UE `u` starts from `features[u]`.
pub fn run_multiuser_with(
    cfg: &MultiUserConfig,
    mech: &MechanismConfig,
    stream: RngStream,
    features: Vec<FeatureTensor>,
) -> Result<MultiUserOutcome> {
    run_multiuser_round(cfg, mech, stream, Some(features), &mut ShareHistory::new())
}

/// One round. Features shared over D2D are recorded in `history`; a peer
/// that cannot share this round is replaced by its entry there.
pub fn run_multiuser_round(
    cfg: &MultiUserConfig,
    mech: &MechanismConfig,
    stream: RngStream,
    features: Option<Vec<FeatureTensor>>,
    history: &mut ShareHistory,
) -> Result<MultiUserOutcome> {
    cfg.validate()?;
    mech.validate()?;
    if let Some(f) = &features {
        if f.len() != cfg.num_ues {
            return Err(Error::DimMismatch {
                expected: cfg.num_ues,
                found: f.len(),
            });
        }
    }
    let input = |u: usize| features.as_ref().map(|f| f[u].clone());
    let ue_stream = |u: usize| stream.substream(&format!("ue:{u}"));

    if cfg.mode == MultiUserMode::Individual {
        let mut per_ue = Vec::with_capacity(cfg.num_ues);
        let mut fused = Vec::with_capacity(cfg.num_ues);
        for u in 0..cfg.num_ues {
            let ue_cfg = cfg.ue_mechanism(mech, u);
            let (metrics, feature) = if mech.mechanism == Mechanism::PEU {
                let s = ue_stream(u);
                let (es, ue) = match input(u) {
                    Some(t) => (t.clone(), t),
                    None => (
                        synth_boundary_tensor(&ue_cfg.pipeline, s.substream("es_feature"))?,
                        synth_boundary_tensor(&ue_cfg.pipeline, s.substream("ue_feature"))?,
                    ),
                };
                let gate = FeatureGate::uniform(ue_cfg.pipeline.boundary_shape.clone(), ue_cfg.gate_alpha)?;
                let out = run_peu_with_inputs(&ue_cfg, s, &gate, es, ue)?;
                (out.metrics, out.ue_fused)
            } else {
                let trace = build_trace(&ue_cfg, ue_stream(u), u, input(u))?;
                let received = trace.received.clone();
                (finish(trace, ue_cfg.psnr_peak)?, received)
            };
            per_ue.push(metrics);
            fused.push(feature);
        }
        return outcome(per_ue, Vec::new(), fused, mech.psnr_peak);
    }

    if mech.mechanism == Mechanism::PEU {
        return Err(Error::config(
            "mechanism",
            "PEU has no single feature per UE to share; use individual mode",
        ));
    }
    mech.ul_codec
        .validate_for(&mech.layout()?.carried)
        .map_err(|e| Error::config("codec.ul", format!("sharing codec: {e}")))?;
    let configs: Vec<MechanismConfig> = (0..cfg.num_ues).map(|u| cfg.ue_mechanism(mech, u)).collect();
    let traces = (0..cfg.num_ues)
        .map(|u| build_trace(&configs[u], ue_stream(u), u, input(u)))
        .collect::<Result<Vec<_>>>()?;

    match cfg.mode {
        MultiUserMode::DecentralizedShared => decentralized(cfg, &configs, &traces, stream, history),
        MultiUserMode::CoordinatedFused => coordinated(cfg, &configs, &traces, stream),
        MultiUserMode::Individual => unreachable!(),
    }
}

fn decentralized(
    cfg: &MultiUserConfig,
    configs: &[MechanismConfig],
    traces: &[Trace],
    stream: RngStream,
    history: &mut ShareHistory,
) -> Result<MultiUserOutcome> {
    for (u, t) in traces.iter().enumerate() {
        if t.generator != Actor::Ue(u) {
            return Err(Error::config(
                "mechanism",
                format!("{} generates at the ES; decentralized sharing needs UE-side generation", configs[u].mechanism.name()),
            ));
        }
    }
    let mut per_ue = Vec::with_capacity(cfg.num_ues);
    let mut fused = Vec::with_capacity(cfg.num_ues);
    let mut events = Vec::new();
    let mut d2d_bits = vec![0u64; cfg.num_ues];
    for v in 0..cfg.num_ues {
        let own = &traces[v];
        let mut tl = own.timeline.clone();
        let mut deps = vec![own.ready];
        let mut rx = vec![own.received.clone()];
        let mut refs = vec![own.reference.clone()];
        let mut peers = cfg.neighbors[v].clone();
        peers.sort_unstable();
        for u in peers {
            if cfg.is_online(u) && cfg.is_online(v) {
                let d2d = cfg.ue_d2d(u);
                let h = hop(
                    &configs[u],
                    &configs[u].ul_codec,
                    &traces[u].received,
                    &d2d,
                    stream.substream(&format!("ue:{u}/d2d:{v}")),
                )?;
                let offset = tl.splice(&traces[u].timeline, traces[u].ready);
                let e = tl.push(
                    format!("d2d_from_ue{u}"),
                    Actor::Link { kind: LinkKind::D2d, ue: u },
                    EventKind::Transmit,
                    0.0,
                    h.seconds,
                    &[offset + traces[u].ready],
                );
                deps.push(e);
                rx.push(h.received);
                refs.push(traces[u].reference.clone());
                d2d_bits[u] = h.bits;
            } else if let Some(old) = history.get(u) {
                events.push(ShareEvent {
                    ue: v,
                    peer: u,
                    kind: ShareEventKind::Stale,
                });
                rx.push(old.clone());
                refs.push(traces[u].reference.clone());
            } else {
                events.push(ShareEvent {
                    ue: v,
                    peer: u,
                    kind: ShareEventKind::Missing,
                });
            }
        }
        let fuse = tl.push("ue_fuse", Actor::Ue(v), EventKind::Fuse, 0.0, cfg.fusion_seconds, &deps);
        tl.push(
            generate_label(own.generator),
            own.generator,
            EventKind::Compute,
            0.0,
            own.gen_seconds,
            &[fuse],
        );
        let got = fuse_mean(&rx)?;
        let want = fuse_mean(&refs)?;
        let distortion = DistortionReport::measure(&want, &got, configs[v].psnr_peak)?;
        per_ue.push(RunMetrics::from_timeline(tl, own.payload_ul, own.payload_dl, distortion));
        fused.push(got);
    }
    for (u, m) in per_ue.iter_mut().enumerate() {
        m.payload_bits_d2d = d2d_bits[u];
    }
    for (u, t) in traces.iter().enumerate() {
        if cfg.is_online(u) {
            history.last.insert(u, t.received.clone());
        }
    }
    outcome(per_ue, events, fused, configs[0].psnr_peak)
}

fn coordinated(
    cfg: &MultiUserConfig,
    configs: &[MechanismConfig],
    traces: &[Trace],
    stream: RngStream,
) -> Result<MultiUserOutcome> {
    // Features already at the ES stay there; the rest are uploaded.
    let mut at_es = Vec::with_capacity(cfg.num_ues);
    let mut upload_secs = vec![0.0; cfg.num_ues];
    let mut upload_bits = vec![0u64; cfg.num_ues];
    for (u, t) in traces.iter().enumerate() {
        if t.generator == Actor::Es {
            at_es.push(t.received.clone());
        } else {
            let h = hop(
                &configs[u],
                &configs[u].ul_codec,
                &t.received,
                &configs[u].ul,
                stream.substream(&format!("ue:{u}/share")),
            )?;
            upload_secs[u] = h.seconds;
            upload_bits[u] = h.bits;
            at_es.push(h.received);
        }
    }
    let got = fuse_mean(&at_es)?;
    let refs: Vec<FeatureTensor> = traces.iter().map(|t| t.reference.clone()).collect();
    let want = fuse_mean(&refs)?;
    let distortion = DistortionReport::measure(&want, &got, configs[0].psnr_peak)?;
    let gen_seconds = traces[0].gen_seconds;
    let output_bits = DigitalCodecConfig::default().payload_bits(configs[0].pipeline.output_shape.iter().product());

    let mut per_ue = Vec::with_capacity(cfg.num_ues);
    for v in 0..cfg.num_ues {
        let mut tl = Timeline::new();
        let mut arrivals = Vec::with_capacity(cfg.num_ues);
        // The UE's own chain goes first so its indices match the trace.
        for w in std::iter::once(v).chain((0..cfg.num_ues).filter(|&w| w != v)) {
            let t = &traces[w];
            let offset = tl.splice(&t.timeline, t.ready);
            let ready = offset + t.ready;
            arrivals.push(if t.generator == Actor::Es {
                ready
            } else {
                tl.push(
                    format!("ul_share_ue{w}"),
                    Actor::Link { kind: LinkKind::Ul, ue: w },
                    EventKind::Transmit,
                    0.0,
                    upload_secs[w],
                    &[ready],
                )
            });
        }
        let fuse = tl.push("es_fuse", Actor::Es, EventKind::Fuse, 0.0, cfg.fusion_seconds, &arrivals);
        let gen = tl.push("es_generate", Actor::Es, EventKind::Compute, 0.0, gen_seconds, &[fuse]);
        let mut dl_bits = traces[v].payload_dl;
        if cfg.deliver_output {
            tl.push(
                "dl_output",
                Actor::Link { kind: LinkKind::Dl, ue: v },
                EventKind::Transmit,
                0.0,
                tx_latency(output_bits, &configs[v].dl),
                &[gen],
            );
            dl_bits += output_bits;
        }
        per_ue.push(RunMetrics::from_timeline(
            tl,
            traces[v].payload_ul + upload_bits[v],
            dl_bits,
            distortion,
        ));
    }
    let fused = vec![got; cfg.num_ues];
    outcome(per_ue, Vec::new(), fused, configs[0].psnr_peak)
}

fn outcome(
    per_ue: Vec<RunMetrics>,
    events: Vec<ShareEvent>,
    fused: Vec<FeatureTensor>,
    peak: f64,
) -> Result<MultiUserOutcome> {
    let mut slowest = 0;
    for (u, m) in per_ue.iter().enumerate() {
        if m.t_e2e_s > per_ue[slowest].t_e2e_s {
            slowest = u;
        }
    }
    let mse = per_ue.iter().map(|m| m.distortion.mse).sum::<f64>() / per_ue.len() as f64;
    let aggregate = MultiUserAggregate {
        t_e2e_s: per_ue[slowest].t_e2e_s,
        t_tx_s: per_ue[slowest].t_tx_s,
        t_compute_s: per_ue[slowest].t_compute_s,
        payload_bits_ul: per_ue.iter().map(|m| m.payload_bits_ul).sum(),
        payload_bits_dl: per_ue.iter().map(|m| m.payload_bits_dl).sum(),
        payload_bits_d2d: per_ue.iter().map(|m| m.payload_bits_d2d).sum(),
        mse,
        psnr_db: psnr_from_mse(mse, peak)?,
        slowest_ue: slowest,
    };
    Ok(MultiUserOutcome {
        per_ue,
        aggregate,
        events,
        fused,
    })
}
