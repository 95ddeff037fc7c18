use megsim::channel::{BitChannelMode, ChannelSpec, LinkKind};
use megsim::codec::{DigitalCodecConfig, TransportCodec};
use megsim::pipeline::{case_study_pipeline, PipelineModel, StageSpec};
use megsim::protocol::*;
use megsim::rng::RngStream;
use megsim::tensor::{FeatureTensor, TensorRole};
use proptest::prelude::*;

fn small_pipeline() -> PipelineModel {
    PipelineModel {
        stages: vec![
            StageSpec::new("enc", 0.25, 1, TensorRole::Prompt),
            StageSpec::new("mid", 0.5, 2, TensorRole::Seed),
            StageSpec::new("dec", 0.125, 1, TensorRole::Image),
        ],
        split_index: 2,
        encode_split: 1,
        boundary_shape: vec![2, 8, 8],
        output_shape: vec![8, 8, 3],
        prompt_bits: 0,
    }
}

fn cfg(mechanism: Mechanism, scheme: Scheme, snr_db: f64, pipeline: PipelineModel) -> MechanismConfig {
    let codec = match scheme {
        Scheme::Centralized => TransportCodec::RawImage(DigitalCodecConfig::with_clamp(1.0).unwrap()),
        _ => TransportCodec::DigitalFp16(DigitalCodecConfig::default()),
    };
    MechanismConfig {
        mechanism,
        scheme,
        ul: ChannelSpec::new(snr_db, 1e6, LinkKind::Ul).unwrap(),
        dl: ChannelSpec::new(snr_db, 1e6, LinkKind::Dl).unwrap(),
        ul_codec: codec.clone(),
        dl_codec: codec,
        pipeline,
        bit_mode: BitChannelMode::Analytic,
        gate_seconds: 0.0,
        gate_alpha: 0.5,
        psnr_peak: 1.0,
    }
}

fn stream() -> RngStream {
    RngStream::root(11).substream("test")
}

fn event<'a>(m: &'a RunMetrics, label: &str) -> &'a TimelineEvent {
    m.timeline.events().iter().find(|e| e.label == label).unwrap()
}

#[test]
fn case_study_e2u_latencies() {
    let c = cfg(Mechanism::E2U, Scheme::Centralized, 30.0, case_study_pipeline());
    let m = run_e2u(&c, stream()).unwrap();
    m.audit().unwrap();
    // 1024·1024·3 half-precision values at 1 Mbps.
    assert_eq!(m.payload_bits_dl, 1024 * 1024 * 3 * 16);
    assert!((m.t_tx_s - 50.33).abs() < 0.01, "{}", m.t_tx_s);
    assert!((m.t_e2e_s - 57.91).abs() < 0.02, "{}", m.t_e2e_s);

    let c = cfg(Mechanism::E2U, Scheme::Meg, 30.0, case_study_pipeline());
    let m = run_e2u(&c, stream()).unwrap();
    m.audit().unwrap();
    assert_eq!(m.payload_bits_dl, 4 * 128 * 128 * 16);
    assert!((m.t_tx_s - 1.05).abs() < 0.01, "{}", m.t_tx_s);
    assert!((m.t_e2e_s - 8.63).abs() < 0.02, "{}", m.t_e2e_s);
    assert!((m.t_compute_s - 7.58).abs() < 1e-9);
}

#[test]
fn u2e_mirrors_e2u() {
    let p = small_pipeline();
    let e = run_e2u(&cfg(Mechanism::E2U, Scheme::Meg, 40.0, p.clone()), stream()).unwrap();
    let u = run_u2e(&cfg(Mechanism::U2E, Scheme::Meg, 40.0, p), stream()).unwrap();
    assert_eq!(e.t_e2e_s, u.t_e2e_s);
    assert_eq!(e.payload_bits_dl, u.payload_bits_ul);
    assert_eq!(e.payload_bits_ul, u.payload_bits_dl);
}

#[test]
fn u2e_halved_rate_doubles_uplink() {
    let p = small_pipeline();
    let mut c = cfg(Mechanism::U2E, Scheme::Meg, 20.0, p);
    let a = run_u2e(&c, stream()).unwrap();
    c.ul.rate_bps /= 2.0;
    let b = run_u2e(&c, stream()).unwrap();
    assert_eq!(event(&b, "ul_feature").duration(), 2.0 * event(&a, "ul_feature").duration());
}

#[test]
fn u2e_meg_at_20db_stays_near_fp16_floor() {
    let p = case_study_pipeline();
    let mut c = cfg(Mechanism::U2E, Scheme::Meg, 20.0, p);
    c.ul_codec = TransportCodec::DigitalFp16(DigitalCodecConfig::with_clamp(6.0).unwrap());
    let m = run_u2e(&c, stream()).unwrap();
    // BER at 20 dB is below 1e-40, so nothing beyond rounding and clamping.
    assert!(m.distortion.mse < 1e-5, "{}", m.distortion.mse);
}

#[test]
fn seu_latency_is_sum_of_five_terms() {
    for scheme in [Scheme::Meg, Scheme::Centralized] {
        let m = run_seu(&cfg(Mechanism::SEU, scheme, 5.0, small_pipeline()), stream()).unwrap();
        m.audit().unwrap();
        let labels = ["ue_encode", "ul_feature", "es_compute", "dl_feature", "ue_generate"];
        assert_eq!(m.timeline.events().len(), 5);
        let sum = labels.iter().fold(0.0, |acc, l| acc + event(&m, l).duration());
        assert_eq!(m.t_e2e_s, sum);
    }
}

#[test]
fn seu_zero_bit_payload_is_pure_compute() {
    let mut c = cfg(Mechanism::SEU, Scheme::Meg, 5.0, small_pipeline());
    c.ul_codec = TransportCodec::Ideal { bits_per_value: 0 };
    c.dl_codec = TransportCodec::Ideal { bits_per_value: 0 };
    let m = run_seu(&c, stream()).unwrap();
    assert_eq!(m.t_e2e_s, small_pipeline().total_compute());
    assert_eq!(m.distortion.mse, 0.0);
}

#[test]
fn seu_noiseless_distortion_composes_floors() {
    // fp16 rounding is idempotent, so a second clean hop adds nothing.
    let p = small_pipeline();
    let seu = run_seu(&cfg(Mechanism::SEU, Scheme::Meg, 400.0, p.clone()), stream()).unwrap();
    let u2e = run_u2e(&cfg(Mechanism::U2E, Scheme::Meg, 400.0, p), stream()).unwrap();
    assert_eq!(seu.distortion.mse, u2e.distortion.mse);
    assert!(seu.distortion.mse > 0.0);
}

#[test]
fn peu_identical_inputs_give_identical_fusions() {
    let p = small_pipeline();
    let c = cfg(Mechanism::PEU, Scheme::Meg, 10.0, p.clone());
    let x = megsim::pipeline::synth_boundary_tensor(&p, stream()).unwrap();
    let gate = FeatureGate::uniform(p.boundary_shape.clone(), 0.3).unwrap();
    let out = run_peu_with_inputs(&c, stream(), &gate, x.clone(), x.clone()).unwrap();
    out.metrics.audit().unwrap();
    assert_eq!(out.reference, x);
}

#[test]
fn peu_shared_view_is_bit_identical() {
    // A lossless link leaves both sides holding the same feature pair.
    let p = small_pipeline();
    let mut c = cfg(Mechanism::PEU, Scheme::Meg, -5.0, p.clone());
    c.ul_codec = TransportCodec::Ideal { bits_per_value: 16 };
    c.dl_codec = TransportCodec::Ideal { bits_per_value: 16 };
    for alpha in [0.0, 0.3, 0.5, 1.0] {
        let gate = FeatureGate::uniform(p.boundary_shape.clone(), alpha).unwrap();
        let out = run_peu_detailed(&c, stream(), &gate).unwrap();
        assert_eq!(out.es_fused, out.ue_fused);
        assert_eq!(out.es_fused, out.reference);
        assert_eq!(out.metrics.distortion.mse, 0.0);
    }
}

#[test]
fn peu_symmetric_sides_finish_together() {
    let c = cfg(Mechanism::PEU, Scheme::Meg, 10.0, small_pipeline());
    let gate = FeatureGate::uniform(vec![2, 8, 8], 0.5).unwrap();
    let m = run_peu(&c, stream(), &gate).unwrap();
    assert_eq!(event(&m, "es_generate").end_s, event(&m, "ue_generate").end_s);
}

#[test]
fn peu_slow_uplink_dominates() {
    let p = small_pipeline();
    let mut c = cfg(Mechanism::PEU, Scheme::Meg, 10.0, p.clone());
    c.ul.rate_bps = c.dl.rate_bps / 10.0;
    c.gate_seconds = 0.05;
    let gate = FeatureGate::uniform(p.boundary_shape.clone(), 0.5).unwrap();
    let m = run_peu(&c, stream(), &gate).unwrap();
    m.audit().unwrap();
    let encode = 0.25 + 0.5 * 2.0;
    let ul = (2 * 8 * 8 * 16) as f64 / c.ul.rate_bps;
    let expected = encode + ul + 0.05 + 0.125;
    assert!((m.t_e2e_s - expected).abs() < 1e-12, "{} vs {expected}", m.t_e2e_s);
    assert_eq!(m.t_e2e_s, event(&m, "es_generate").end_s);
}

#[test]
fn peu_rejects_gate_shape_mismatch() {
    let c = cfg(Mechanism::PEU, Scheme::Meg, 10.0, small_pipeline());
    let gate = FeatureGate::uniform(vec![3, 8, 8], 0.5).unwrap();
    assert!(run_peu(&c, stream(), &gate).is_err());
}

#[test]
fn peu_centralized_is_config_error() {
    let c = cfg(Mechanism::PEU, Scheme::Centralized, 10.0, small_pipeline());
    assert!(matches!(run_mechanism(&c, stream()), Err(megsim::Error::Config { .. })));
}

#[test]
fn codec_shape_mismatch_is_config_error() {
    let mut c = cfg(Mechanism::E2U, Scheme::Meg, 10.0, small_pipeline());
    c.dl_codec = TransportCodec::Pruned {
        keep: 1000,
        digital: DigitalCodecConfig::default(),
    };
    assert!(matches!(run_e2u(&c, stream()), Err(megsim::Error::Config { .. })));
}

#[test]
fn gate_fuse_examples() {
    let l = FeatureTensor::new(vec![3], vec![1.0, -2.0, 0.5], TensorRole::Seed).unwrap();
    let r = FeatureTensor::new(vec![3], vec![0.0, 4.0, 0.25], TensorRole::Seed).unwrap();
    let one = FeatureGate::uniform(vec![3], 1.0).unwrap();
    let zero = FeatureGate::uniform(vec![3], 0.0).unwrap();
    assert_eq!(gate_fuse(&l, &r, &one).unwrap(), l);
    assert_eq!(gate_fuse(&l, &r, &zero).unwrap(), r);
    let half = FeatureGate::uniform(vec![3], 0.5).unwrap();
    assert_eq!(gate_fuse(&l, &r, &half).unwrap().values(), &[0.5, 1.0, 0.375]);
    let bad = FeatureTensor::new(vec![2], vec![0.0, 0.0], TensorRole::Seed).unwrap();
    assert!(gate_fuse(&l, &bad, &half).is_err());
    assert!(FeatureGate::uniform(vec![3], 1.5).is_err());
}

#[test]
fn fuse_mean_examples() {
    let z = FeatureTensor::filled(vec![2, 2], 0.0, TensorRole::Seed).unwrap();
    let two = FeatureTensor::filled(vec![2, 2], 2.0, TensorRole::Seed).unwrap();
    let one = FeatureTensor::filled(vec![2, 2], 1.0, TensorRole::Seed).unwrap();
    assert_eq!(fuse_mean(&[z.clone(), two]).unwrap(), one);
    assert_eq!(fuse_mean(&[z.clone()]).unwrap(), z);
    assert!(fuse_mean(&[]).is_err());
    let other = FeatureTensor::filled(vec![4], 0.0, TensorRole::Seed).unwrap();
    assert!(fuse_mean(&[z, other]).is_err());
}

fn tensor_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, n)
}

proptest! {
    #[test]
    fn gate_fuse_identity(v in tensor_strategy(6), a in prop::collection::vec(0.0f64..=1.0, 6)) {
        let x = FeatureTensor::new(vec![6], v, TensorRole::Seed).unwrap();
        let gate = FeatureGate::new(FeatureTensor::new(vec![6], a, TensorRole::Seed).unwrap()).unwrap();
        prop_assert_eq!(gate_fuse(&x, &x, &gate).unwrap(), x);
    }

    #[test]
    fn gate_fuse_is_convex(l in tensor_strategy(6), r in tensor_strategy(6), a in prop::collection::vec(0.0f64..=1.0, 6)) {
        let lt = FeatureTensor::new(vec![6], l.clone(), TensorRole::Seed).unwrap();
        let rt = FeatureTensor::new(vec![6], r.clone(), TensorRole::Seed).unwrap();
        let gate = FeatureGate::new(FeatureTensor::new(vec![6], a, TensorRole::Seed).unwrap()).unwrap();
        let f = gate_fuse(&lt, &rt, &gate).unwrap();
        for ((v, x), y) in f.values().iter().zip(&l).zip(&r) {
            prop_assert!(*v >= x.min(*y) - 1e-9 && *v <= x.max(*y) + 1e-9);
        }
    }

    #[test]
    fn fuse_mean_permutation_invariant(rows in prop::collection::vec(tensor_strategy(5), 1..6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let ts: Vec<_> = rows.into_iter().map(|v| FeatureTensor::new(vec![5], v, TensorRole::Seed).unwrap()).collect();
        let mut shuffled = ts.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(fuse_mean(&ts).unwrap(), fuse_mean(&shuffled).unwrap());
        let same = vec![ts[0].clone(); ts.len()];
        prop_assert_eq!(fuse_mean(&same).unwrap(), ts[0].clone());
    }

    #[test]
    fn every_mechanism_passes_audit(mech in 0usize..4, snr in -10.0f64..20.0, rate in 1e4f64..1e7, seed in any::<u64>()) {
        let mechanism = [Mechanism::E2U, Mechanism::U2E, Mechanism::SEU, Mechanism::PEU][mech];
        let mut c = cfg(mechanism, Scheme::Meg, snr, small_pipeline());
        c.dl.rate_bps = rate;
        let m = run_mechanism(&c, RngStream::root(seed)).unwrap();
        m.audit().unwrap();
        prop_assert_eq!(m.t_e2e_s, m.timeline.completion());
        prop_assert!(m.t_e2e_s >= m.t_tx_s && m.t_e2e_s >= m.t_compute_s);
    }
}
