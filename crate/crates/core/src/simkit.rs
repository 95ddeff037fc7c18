//! Scenarios: which mechanism and schemes to run, over which SNRs and how
//! many times, and the records and comparisons that come out.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{BitChannelMode, ChannelSpec, LinkKind, DEFAULT_ANALOG_BITS_PER_SYMBOL, DEFAULT_RATE_BPS};
use crate::codec::{DigitalCodecConfig, JsccCodecConfig, MergeArtifact, TransportCodec, FP16_MAX};
use crate::error::{Error, Result};
use crate::pipeline::{synth_boundary_tensor, PipelineModel};
use crate::protocol::{
    run_mechanism, run_multiuser, Mechanism, MechanismConfig, MultiUserConfig, MultiUserMode, Scheme,
    UeOverride,
};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSettings {
    #[serde(default = "default_rate")]
    pub rate_bps: f64,
    /// Per-direction rates; each falls back to `rate_bps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2d_rate_bps: Option<f64>,
    #[serde(default)]
    pub bit_mode: BitChannelMode,
}

fn default_rate() -> f64 {
    DEFAULT_RATE_BPS
}

impl Default for ChannelSettings {
    fn default() -> Self {
        Self {
            rate_bps: DEFAULT_RATE_BPS,
            ul_rate_bps: None,
            dl_rate_bps: None,
            d2d_rate_bps: None,
            bit_mode: BitChannelMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSettings {
    /// Tensors the merge map is fitted on.
    #[serde(default = "default_fit")]
    pub fit_samples: usize,
    /// Separate tensors the power normalization is measured on.
    #[serde(default = "default_norm")]
    pub norm_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_fit() -> usize {
    2
}

fn default_norm() -> usize {
    4
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            fit_samples: default_fit(),
            norm_samples: default_norm(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSettings {
    /// Saturation bound of the half-precision feature codec.
    #[serde(default = "default_clamp")]
    pub clamp_max: f64,
    /// Saturation bound of the raw-image codec.
    #[serde(default = "default_image_clamp")]
    pub image_clamp_max: f64,
    /// JSCC symbols per feature; required by E2E_MEG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_dim: Option<usize>,
    #[serde(default = "default_bits_per_symbol")]
    pub bits_per_symbol: u32,
    #[serde(default)]
    pub calibration: CalibrationSettings,
}

fn default_clamp() -> f64 {
    FP16_MAX
}

fn default_image_clamp() -> f64 {
    1.0
}

fn default_bits_per_symbol() -> u32 {
    DEFAULT_ANALOG_BITS_PER_SYMBOL
}

impl Default for CodecSettings {
    fn default() -> Self {
        Self {
            clamp_max: FP16_MAX,
            image_clamp_max: default_image_clamp(),
            merged_dim: None,
            bits_per_symbol: DEFAULT_ANALOG_BITS_PER_SYMBOL,
            calibration: CalibrationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub fusion_seconds: f64,
}

fn default_alpha() -> f64 {
    0.5
}

impl Default for GateSettings {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            fusion_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiUserSettings {
    pub mode: MultiUserMode,
    pub num_ues: usize,
    /// Adjacency lists; every UE neighbours every other when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub offline: Vec<usize>,
    #[serde(default)]
    pub fusion_seconds: f64,
    #[serde(default)]
    pub deliver_output: bool,
    #[serde(default)]
    pub overrides: Vec<UeOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mechanism: Mechanism,
    pub schemes: Vec<Scheme>,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_peak")]
    pub psnr_peak: f64,
    pub pipeline: PipelineModel,
    #[serde(default)]
    pub channel: ChannelSettings,
    #[serde(default)]
    pub codec: CodecSettings,
    #[serde(default)]
    pub gate: GateSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi_user: Option<MultiUserSettings>,
}

fn default_reps() -> u32 {
    1
}

fn default_peak() -> f64 {
    1.0
}

impl Scenario {
    /// Checks everything that does not need a calibrated codec.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("scenario.name", "must not be empty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("scenario.schemes", "empty scheme list"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::config(format!("scenario.schemes[{i}]"), format!("duplicate {}", s.name())));
            }
        }
        if self.snr_db.is_empty() {
            return Err(Error::config("scenario.snr_db", "empty SNR list"));
        }
        for (i, v) in self.snr_db.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::config(format!("scenario.snr_db[{i}]"), "must be finite"));
            }
            if self.snr_db[..i].contains(v) {
                return Err(Error::config(format!("scenario.snr_db[{i}]"), format!("duplicate {v}")));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::config("scenario.repetitions", "must be >= 1"));
        }
        self.pipeline.validate().map_err(|e| prefix(e, "scenario."))?;
        for (name, rate) in [
            ("rate_bps", Some(self.channel.rate_bps)),
            ("ul_rate_bps", self.channel.ul_rate_bps),
            ("dl_rate_bps", self.channel.dl_rate_bps),
            ("d2d_rate_bps", self.channel.d2d_rate_bps),
        ] {
            if let Some(r) = rate {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::config(format!("scenario.channel.{name}"), "must be positive and finite"));
                }
            }
        }
        for (name, clamp) in [("clamp_max", self.codec.clamp_max), ("image_clamp_max", self.codec.image_clamp_max)] {
            DigitalCodecConfig::with_clamp(clamp).map_err(|e| Error::config(format!("scenario.codec.{name}"), e.to_string()))?;
        }
        if self.schemes.contains(&Scheme::E2eMeg) {
            let n: usize = self.pipeline.boundary_shape.iter().product();
            match self.codec.merged_dim {
                None => return Err(Error::config("scenario.codec.merged_dim", "required by E2E_MEG")),
                Some(m) if m == 0 || m > n => {
                    return Err(Error::config(
                        "scenario.codec.merged_dim",
                        format!("must lie in [1, {n}], got {m}"),
                    ))
                }
                _ => {}
            }
            let c = &self.codec.calibration;
            if c.fit_samples == 0 || c.norm_samples == 0 {
                return Err(Error::config("scenario.codec.calibration", "sample counts must be >= 1"));
            }
        }
        if let Some(mu) = &self.multi_user {
            self.multi_user_config(mu, 0.0).validate().map_err(|e| prefix(e, "scenario."))?;
        }
        // Codec and layout checks that do not depend on the JSCC fit.
        for &scheme in &self.schemes {
            if scheme != Scheme::E2eMeg {
                self.mechanism_config(scheme, self.snr_db[0], None)?
                    .validate()
                    .map_err(|e| prefix(e, "scenario."))?;
            }
        }
        Ok(())
    }

    fn link(&self, rate: Option<f64>, snr_db: f64, kind: LinkKind) -> ChannelSpec {
        ChannelSpec {
            snr_db,
            rate_bps: rate.unwrap_or(self.channel.rate_bps),
            kind,
        }
    }

    fn multi_user_config(&self, mu: &MultiUserSettings, snr_db: f64) -> MultiUserConfig {
        let d2d = self.link(self.channel.d2d_rate_bps.or(self.channel.ul_rate_bps), snr_db, LinkKind::D2d);
        let mut cfg = MultiUserConfig::fully_connected(mu.mode, mu.num_ues, d2d);
        if let Some(n) = &mu.neighbors {
            cfg.neighbors = n.clone();
        }
        cfg.offline = mu.offline.clone();
        cfg.fusion_seconds = mu.fusion_seconds;
        cfg.deliver_output = mu.deliver_output;
        cfg.overrides = mu.overrides.clone();
        cfg
    }

    /// The calibrated JSCC codec shared by every E2E_MEG run, fitted once
    /// per process for a given set of calibration settings.
    pub fn jscc(&self) -> Result<Arc<JsccCodecConfig>> {
        let merged_dim = self
            .codec
            .merged_dim
            .ok_or_else(|| Error::config("scenario.codec.merged_dim", "required by E2E_MEG"))?;
        calibrated_jscc(&self.pipeline, merged_dim, &self.codec.calibration)
    }

    /// Mechanism settings for one scheme at one SNR. `jscc` is required
    /// for E2E_MEG only.
    pub fn mechanism_config(
        &self,
        scheme: Scheme,
        snr_db: f64,
        jscc: Option<&Arc<JsccCodecConfig>>,
    ) -> Result<MechanismConfig> {
        let codec = match scheme {
            Scheme::Centralized => TransportCodec::RawImage(DigitalCodecConfig::with_clamp(self.codec.image_clamp_max)?),
            Scheme::Meg => TransportCodec::DigitalFp16(DigitalCodecConfig::with_clamp(self.codec.clamp_max)?),
            Scheme::E2eMeg => TransportCodec::AnalogJscc {
                config: jscc
                    .cloned()
                    .ok_or_else(|| Error::config("scenario.codec", "E2E_MEG needs a calibrated JSCC codec"))?,
                bits_per_symbol: self.codec.bits_per_symbol,
            },
        };
        Ok(MechanismConfig {
            mechanism: self.mechanism,
            scheme,
            ul: self.link(self.channel.ul_rate_bps, snr_db, LinkKind::Ul),
            dl: self.link(self.channel.dl_rate_bps, snr_db, LinkKind::Dl),
            ul_codec: codec.clone(),
            dl_codec: codec,
            pipeline: self.pipeline.clone(),
            bit_mode: self.channel.bit_mode,
            gate_seconds: self.gate.fusion_seconds,
            gate_alpha: self.gate.alpha,
            psnr_peak: self.psnr_peak,
        })
    }
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::Config { path, message } if !path.starts_with(p) => Error::Config {
            path: format!("{p}{path}"),
            message,
        },
        other => other,
    }
}

type CalibrationKey = (Vec<usize>, usize, CalibrationSettings);

fn jscc_cache() -> &'static Mutex<HashMap<CalibrationKey, Arc<JsccCodecConfig>>> {
    static CACHE: OnceLock<Mutex<HashMap<CalibrationKey, Arc<JsccCodecConfig>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Calibration of the bundled case study, fitted ahead of time with
/// [`CASE_STUDY_CALIBRATION`].
pub const CASE_STUDY_JSCC_JSON: &str = include_str!("../configs/case_study_jscc.json");

pub fn case_study_calibration_key() -> (Vec<usize>, usize, CalibrationSettings) {
    (vec![4, 128, 128], 36_250, CASE_STUDY_CALIBRATION)
}

pub const CASE_STUDY_CALIBRATION: CalibrationSettings = CalibrationSettings {
    fit_samples: 2,
    norm_samples: 4,
    seed: 0,
};

/// Fits the merge map on `fit_samples` synthetic boundary tensors and the
/// normalization on `norm_samples` further ones, drawn from
/// `RngStream::root(seed)` under the labels `fit:{i}` and `norm:{i}`.
pub fn fit_jscc(pipeline: &PipelineModel, merged_dim: usize, cal: &CalibrationSettings) -> Result<JsccCodecConfig> {
    let root = RngStream::root(cal.seed);
    let draw = |label: String| synth_boundary_tensor(pipeline, root.substream(&label));
    let fit = (0..cal.fit_samples)
        .map(|i| draw(format!("fit:{i}")))
        .collect::<Result<Vec<_>>>()?;
    let norm = (0..cal.norm_samples)
        .map(|i| draw(format!("norm:{i}")))
        .collect::<Result<Vec<_>>>()?;
    JsccCodecConfig::calibrate_split(&fit, &norm, merged_dim)
}

fn calibrated_jscc(pipeline: &PipelineModel, merged_dim: usize, cal: &CalibrationSettings) -> Result<Arc<JsccCodecConfig>> {
    let key = (pipeline.boundary_shape.clone(), merged_dim, cal.clone());
    if let Some(hit) = jscc_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let cfg = if key == case_study_calibration_key() {
        JsccCodecConfig::from_artifact(MergeArtifact::from_json(CASE_STUDY_JSCC_JSON)?)?
    } else {
        fit_jscc(pipeline, merged_dim, cal)?
    };
    let cfg = Arc::new(cfg);
    jscc_cache()
        .lock()
        .expect("cache poisoned")
        .insert(key, cfg.clone());
    Ok(cfg)
}

/// One simulated generation, flattened for output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub scheme: Scheme,
    pub mechanism: Mechanism,
    pub snr_db: f64,
    pub rep: u32,
    pub payload_bits_ul: u64,
    pub payload_bits_dl: u64,
    pub t_tx_s: f64,
    pub t_compute_s: f64,
    pub t_e2e_s: f64,
    pub mse: f64,
    pub psnr_db: f64,
    /// Master seed. With `snr_db` and `rep` it names the stream, see
    /// [`point_label`].
    pub seed: u64,
}

/// Label of the substream used for one SNR point and repetition. Schemes
/// share it, so at each point they see the same synthetic features.
pub fn point_label(snr_db: f64, rep: u32) -> String {
    format!("snr:{snr_db}/rep:{rep}")
}

fn run_point(
    s: &Scenario,
    jscc: Option<&Arc<JsccCodecConfig>>,
    scheme: Scheme,
    snr_db: f64,
    rep: u32,
) -> Result<RunRecord> {
    let stream = RngStream::root(s.seed).substream(&point_label(snr_db, rep));
    let mech = s.mechanism_config(scheme, snr_db, jscc)?;
    let mut record = RunRecord {
        scenario: s.name.clone(),
        scheme,
        mechanism: s.mechanism,
        snr_db,
        rep,
        payload_bits_ul: 0,
        payload_bits_dl: 0,
        t_tx_s: 0.0,
        t_compute_s: 0.0,
        t_e2e_s: 0.0,
        mse: 0.0,
        psnr_db: 0.0,
        seed: s.seed,
    };
    match &s.multi_user {
        None => {
            let m = run_mechanism(&mech, stream)?;
            m.audit()?;
            record.payload_bits_ul = m.payload_bits_ul;
            record.payload_bits_dl = m.payload_bits_dl;
            record.t_tx_s = m.t_tx_s;
            record.t_compute_s = m.t_compute_s;
            record.t_e2e_s = m.t_e2e_s;
            record.mse = m.distortion.mse;
            record.psnr_db = m.distortion.psnr_db;
        }
        Some(mu) => {
            let cfg = s.multi_user_config(mu, snr_db);
            let out = run_multiuser(&cfg, &mech, stream)?;
            for m in &out.per_ue {
                m.audit()?;
            }
            let a = &out.aggregate;
            record.payload_bits_ul = a.payload_bits_ul;
            record.payload_bits_dl = a.payload_bits_dl;
            record.t_tx_s = a.t_tx_s;
            record.t_compute_s = a.t_compute_s;
            record.t_e2e_s = a.t_e2e_s;
            record.mse = a.mse;
            record.psnr_db = a.psnr_db;
        }
    }
    if !(record.mse.is_finite() && record.t_e2e_s.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "non-finite result for {} at {snr_db} dB",
            scheme.name()
        )));
    }
    Ok(record)
}

/// Runs every (SNR, repetition, scheme) point on the calling thread.
pub fn run_scenario(s: &Scenario) -> Result<Vec<RunRecord>> {
    run_scenario_with(s, 1)
}

/// As [`run_scenario`], spreading points over `threads` workers. Output is
/// identical for every thread count.
pub fn run_scenario_with(s: &Scenario, threads: usize) -> Result<Vec<RunRecord>> {
    s.validate()?;
    let jscc = if s.schemes.contains(&Scheme::E2eMeg) {
        Some(s.jscc()?)
    } else {
        None
    };
    let mut snrs = s.snr_db.clone();
    snrs.sort_by(f64::total_cmp);
    let points: Vec<(f64, u32, Scheme)> = snrs
        .iter()
        .flat_map(|&v| (0..s.repetitions).flat_map(move |r| s.schemes.iter().map(move |&sc| (v, r, sc))))
        .collect();
    let run = |&(v, r, sc): &(f64, u32, Scheme)| run_point(s, jscc.as_ref(), sc, v, r);
    if threads <= 1 {
        points.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidValue(format!("thread pool: {e}")))?;
        // Collecting an indexed parallel iterator keeps input order.
        pool.install(|| points.par_iter().map(run).collect())
    }
}

/// Inclusive grid `from, from+step, ..` up to `to`. A step wider than the
/// range yields `from` alone.
pub fn snr_grid(from_db: f64, to_db: f64, step_db: f64) -> Result<Vec<f64>> {
    if !(step_db > 0.0) || !step_db.is_finite() {
        return Err(Error::config("step", format!("must be positive, got {step_db}")));
    }
    if !(from_db.is_finite() && to_db.is_finite()) || from_db > to_db {
        return Err(Error::config("from", format!("need from <= to, got {from_db} > {to_db}")));
    }
    let count = ((to_db - from_db) / step_db + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = from_db + i as f64 * step_db;
            // Snap away accumulated binary error such as 0.30000000000000004.
            (v * 1e9).round() / 1e9
        })
        .collect())
}

pub fn sweep_snr(s: &Scenario, from_db: f64, to_db: f64, step_db: f64) -> Result<Vec<RunRecord>> {
    sweep_snr_with(s, from_db, to_db, step_db, 1)
}

pub fn sweep_snr_with(s: &Scenario, from_db: f64, to_db: f64, step_db: f64, threads: usize) -> Result<Vec<RunRecord>> {
    let mut s = s.clone();
    s.snr_db = snr_grid(from_db, to_db, step_db)?;
    run_scenario_with(&s, threads)
}

/// Means over repetitions for one scheme at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub reps: u32,
    pub payload_bits_ul: u64,
    pub payload_bits_dl: u64,
    pub t_tx_s: f64,
    pub t_compute_s: f64,
    pub t_e2e_s: f64,
    pub mse: f64,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub crossover_snr_db: Option<f64>,
}

/// Groups records by (scheme, SNR) and averages them. Records are sorted
/// first, so the sums and hence the means do not depend on input order.
pub fn aggregate(records: &[RunRecord]) -> Vec<ComparisonRow> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.rep.cmp(&b.rep))
    });
    let mut groups: BTreeMap<(Scheme, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in sorted {
        groups.entry((r.scheme, order_key(r.snr_db))).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let n = g.len() as f64;
            let mean = |f: fn(&RunRecord) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            ComparisonRow {
                scheme: g[0].scheme,
                snr_db: g[0].snr_db,
                reps: g.len() as u32,
                payload_bits_ul: g[0].payload_bits_ul,
                payload_bits_dl: g[0].payload_bits_dl,
                t_tx_s: mean(|r| r.t_tx_s),
                t_compute_s: mean(|r| r.t_compute_s),
                t_e2e_s: mean(|r| r.t_e2e_s),
                mse: mean(|r| r.mse),
                psnr_db: mean(|r| r.psnr_db),
            }
        })
        .collect()
}

/// Lowest SNR from which MEG's mean MSE stays below E2E_MEG's at every
/// higher point of the grid. `None` when either scheme is absent or MEG is
/// not ahead at the top of the grid.
pub fn crossover_snr_db(rows: &[ComparisonRow]) -> Option<f64> {
    let curve = |scheme| -> BTreeMap<u64, (f64, f64)> {
        rows.iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (order_key(r.snr_db), (r.snr_db, r.mse)))
            .collect()
    };
    let meg = curve(Scheme::Meg);
    let e2e = curve(Scheme::E2eMeg);
    let mut crossover = None;
    for (key, &(snr, meg_mse)) in meg.iter().rev() {
        match e2e.get(key) {
            Some(&(_, e2e_mse)) if meg_mse < e2e_mse => crossover = Some(snr),
            Some(_) => break,
            None => continue,
        }
    }
    crossover
}

/// Bit pattern of `v` that sorts like the value itself.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if v.is_sign_negative() {
        !bits
    } else {
        bits | (1 << 63)
    }
}

pub fn compare_schemes(s: &Scenario) -> Result<Comparison> {
    compare_schemes_with(s, 1)
}

pub fn compare_schemes_with(s: &Scenario, threads: usize) -> Result<Comparison> {
    Ok(comparison(&run_scenario_with(s, threads)?))
}

pub fn comparison(records: &[RunRecord]) -> Comparison {
    let rows = aggregate(records);
    let crossover_snr_db = crossover_snr_db(&rows);
    Comparison { rows, crossover_snr_db }
}

pub const CSV_HEADER: &str =
    "scenario,scheme,mechanism,snr_db,rep,payload_bits_ul,payload_bits_dl,t_tx_s,t_compute_s,t_e2e_s,mse,psnr_db,seed";

/// `%g`-style rendering with six significant digits.
pub fn format_g(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // The exponent after rounding to six digits decides the notation.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&self.scenario),
            self.scheme.name(),
            self.mechanism.name(),
            format_g(self.snr_db),
            self.rep,
            self.payload_bits_ul,
            self.payload_bits_dl,
            format_g(self.t_tx_s),
            format_g(self.t_compute_s),
            format_g(self.t_e2e_s),
            format_g(self.mse),
            format_g(self.psnr_db),
            self.seed
        )
    }
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub const COMPARISON_CSV_HEADER: &str =
    "scheme,snr_db,reps,payload_bits_ul,payload_bits_dl,t_tx_s,t_compute_s,t_e2e_s,mse,psnr_db";

pub fn comparison_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme.name(),
            format_g(r.snr_db),
            r.reps,
            r.payload_bits_ul,
            r.payload_bits_dl,
            format_g(r.t_tx_s),
            format_g(r.t_compute_s),
            format_g(r.t_e2e_s),
            format_g(r.mse),
            format_g(r.psnr_db)
        ));
    }
    out
}

/// Fixed-width text table of a comparison.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let header = ["scheme", "snr_db", "reps", "t_tx_s", "t_compute_s", "t_e2e_s", "mse", "psnr_db"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.scheme.name().to_string(),
                format_g(r.snr_db),
                r.reps.to_string(),
                format!("{:.2}", r.t_tx_s),
                format!("{:.2}", r.t_compute_s),
                format!("{:.2}", r.t_e2e_s),
                format_g(r.mse),
                format!("{:.2}", r.psnr_db),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
