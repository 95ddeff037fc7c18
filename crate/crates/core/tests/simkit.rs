use megsim::config::{case_study, parse_config, CASE_STUDY_TOML};
use megsim::pipeline::{case_study_pipeline, PipelineModel, StageSpec};
use megsim::protocol::{Mechanism, MultiUserMode, Scheme};
use megsim::simkit::*;
use megsim::tensor::TensorRole;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn small(schemes: Vec<Scheme>) -> Scenario {
    let mut s = case_study().scenario;
    s.name = "small".into();
    s.schemes = schemes;
    s.pipeline = PipelineModel {
        stages: vec![
            StageSpec::new("enc", 0.1, 1, TensorRole::Prompt),
            StageSpec::new("mid", 0.2, 4, TensorRole::Seed),
            StageSpec::new("dec", 0.3, 1, TensorRole::Image),
        ],
        split_index: 2,
        encode_split: 1,
        boundary_shape: vec![2, 16, 16],
        output_shape: vec![16, 16, 3],
        prompt_bits: 0,
    };
    s.codec.merged_dim = Some(300);
    s
}

#[test]
fn case_study_latencies_at_10_db() {
    let cmp = compare_schemes(&case_study().scenario).unwrap();
    let row = |s| cmp.rows.iter().find(|r| r.scheme == s).unwrap();
    let expect = [
        (Scheme::Centralized, 50.33, 57.91),
        (Scheme::Meg, 1.05, 8.63),
        (Scheme::E2eMeg, 0.58, 8.16),
    ];
    for (scheme, tx, e2e) in expect {
        let r = row(scheme);
        assert_eq!(r.snr_db, 10.0);
        assert!((r.t_tx_s - tx).abs() < 0.01, "{scheme:?} t_tx {}", r.t_tx_s);
        assert!((r.t_e2e_s - e2e).abs() < 0.02, "{scheme:?} t_e2e {}", r.t_e2e_s);
        assert!((r.t_compute_s - 7.58).abs() < 1e-9);
    }
    // Exact payload arithmetic behind the rounded figures.
    assert_eq!(row(Scheme::Centralized).payload_bits_dl, 50_331_648);
    assert_eq!(row(Scheme::Meg).payload_bits_dl, 1_048_576);
    assert_eq!(row(Scheme::E2eMeg).payload_bits_dl, 580_000);
}

#[test]
fn distortion_ordering_at_high_snr() {
    // One MEG run sees only a handful of flips at 10 dB, so compare means.
    let mut s = case_study().scenario;
    s.snr_db = vec![10.0, 20.0];
    s.repetitions = 6;
    let cmp = compare_schemes_with(&s, 4).unwrap();
    for snr in [10.0, 20.0] {
        let mse = |scheme| cmp.rows.iter().find(|r| r.scheme == scheme && r.snr_db == snr).unwrap().mse;
        assert!(mse(Scheme::Centralized) <= mse(Scheme::Meg), "{snr}");
        assert!(mse(Scheme::Meg) <= mse(Scheme::E2eMeg), "{snr}");
    }
}

#[test]
fn bundled_calibration_matches_a_fresh_fit() {
    let (shape, merged_dim, cal) = case_study_calibration_key();
    assert_eq!(shape, case_study_pipeline().boundary_shape);
    let s = case_study().scenario;
    assert_eq!(s.codec.merged_dim, Some(merged_dim));
    assert_eq!(s.codec.calibration, cal);
    let fresh = fit_jscc(&case_study_pipeline(), merged_dim, &cal).unwrap();
    assert_eq!(*s.jscc().unwrap(), fresh);
}

#[test]
fn record_cardinality_and_order() {
    let mut s = small(vec![Scheme::Meg]);
    s.snr_db = vec![5.0, -3.0, 0.0];
    s.repetitions = 2;
    let r = run_scenario(&s).unwrap();
    assert_eq!(r.len(), 6);
    let keys: Vec<(f64, u32)> = r.iter().map(|r| (r.snr_db, r.rep)).collect();
    assert_eq!(keys, vec![(-3.0, 0), (-3.0, 1), (0.0, 0), (0.0, 1), (5.0, 0), (5.0, 1)]);
    assert!(r.iter().all(|x| x.seed == s.seed));
    assert_eq!(megsim::simkit::point_label(r[3].snr_db, r[3].rep), "snr:0/rep:1");
}

#[test]
fn schemes_share_features_at_each_point() {
    let mut s = small(vec![Scheme::Meg, Scheme::E2eMeg]);
    s.snr_db = vec![2.0];
    let r = run_scenario(&s).unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].seed, r[1].seed);
    assert_eq!((r[0].scheme, r[1].scheme), (Scheme::Meg, Scheme::E2eMeg));
}

#[test]
fn serial_and_parallel_agree() {
    let mut s = small(vec![Scheme::Centralized, Scheme::Meg, Scheme::E2eMeg]);
    s.snr_db = vec![-5.0, 0.0, 5.0, 10.0];
    s.repetitions = 3;
    let serial = run_scenario(&s).unwrap();
    for threads in [2, 4, 7] {
        let par = run_scenario_with(&s, threads).unwrap();
        assert_eq!(serial, par);
        assert_eq!(records_to_csv(&serial), records_to_csv(&par));
    }
    assert_eq!(records_to_csv(&serial), records_to_csv(&run_scenario(&s).unwrap()));
}

#[test]
fn sweep_grids() {
    assert_eq!(snr_grid(-10.0, 10.0, 5.0).unwrap(), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    assert_eq!(snr_grid(3.0, 3.0, 1.0).unwrap(), vec![3.0]);
    assert_eq!(snr_grid(0.0, 2.0, 5.0).unwrap(), vec![0.0]);
    assert_eq!(snr_grid(0.0, 0.3, 0.1).unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
    assert_eq!(snr_grid(-10.0, 10.0, 1.0).unwrap().len(), 21);
    assert!(snr_grid(0.0, 1.0, 0.0).is_err());
    assert!(snr_grid(0.0, 1.0, -1.0).is_err());
    assert!(snr_grid(2.0, 1.0, 1.0).is_err());
    let s = small(vec![Scheme::Meg]);
    let r = sweep_snr(&s, -2.0, 2.0, 2.0).unwrap();
    assert_eq!(r.iter().map(|r| r.snr_db).collect::<Vec<_>>(), vec![-2.0, 0.0, 2.0]);
}

#[test]
fn aggregation_ignores_record_order() {
    let mut s = small(vec![Scheme::Meg, Scheme::E2eMeg]);
    s.snr_db = vec![-4.0, 0.0, 4.0];
    s.repetitions = 5;
    let records = run_scenario(&s).unwrap();
    let base = comparison(&records);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(comparison(&shuffled), base);
    }
    assert_eq!(base.rows.len(), 6);
    assert!(base.rows.iter().all(|r| r.reps == 5));
}

#[test]
fn mean_variance_shrinks_with_repetitions() {
    // MEG at 0 dB: flips make per-run mse noisy. Block means of n runs
    // should have variance near var/n.
    let mut s = small(vec![Scheme::Meg]);
    s.snr_db = vec![0.0];
    s.repetitions = 400;
    let mse: Vec<f64> = run_scenario(&s).unwrap().iter().map(|r| r.mse).collect();
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let base = var(&mse);
    assert!(base > 0.0);
    for n in [4usize, 10] {
        let means: Vec<f64> = mse.chunks(n).map(|c| c.iter().sum::<f64>() / n as f64).collect();
        let ratio = base / var(&means);
        assert!(ratio > n as f64 / 2.5 && ratio < n as f64 * 2.5, "n={n} ratio {ratio}");
    }
}

#[test]
fn crossover_detection() {
    let row = |scheme, snr_db, mse| ComparisonRow {
        scheme,
        snr_db,
        reps: 1,
        payload_bits_ul: 0,
        payload_bits_dl: 0,
        t_tx_s: 0.0,
        t_compute_s: 0.0,
        t_e2e_s: 0.0,
        mse,
        psnr_db: 0.0,
    };
    let rows = vec![
        row(Scheme::Meg, -5.0, 3.0),
        row(Scheme::Meg, 0.0, 0.5),
        row(Scheme::Meg, 5.0, 0.1),
        row(Scheme::E2eMeg, -5.0, 1.0),
        row(Scheme::E2eMeg, 0.0, 0.6),
        row(Scheme::E2eMeg, 5.0, 0.4),
    ];
    assert_eq!(crossover_snr_db(&rows), Some(0.0));
    // A dip back above E2E_MEG resets the crossover.
    let mut dip = rows.clone();
    dip[1].mse = 0.7;
    assert_eq!(crossover_snr_db(&dip), Some(5.0));
    let mut never = rows.clone();
    never[2].mse = 0.5;
    assert_eq!(crossover_snr_db(&never), None);
    assert_eq!(crossover_snr_db(&rows[..3]), None);
}

#[test]
fn case_study_has_low_snr_advantage_and_crossover() {
    let mut s = case_study().scenario;
    s.schemes = vec![Scheme::Meg, Scheme::E2eMeg];
    s.repetitions = 2;
    let cmp = comparison(&sweep_snr_with(&s, -10.0, 10.0, 5.0, 4).unwrap());
    let mse = |scheme, snr| {
        cmp.rows
            .iter()
            .find(|r| r.scheme == scheme && r.snr_db == snr)
            .unwrap()
            .mse
    };
    for snr in [-10.0, -5.0] {
        assert!(mse(Scheme::E2eMeg, snr) < mse(Scheme::Meg, snr));
    }
    let x = cmp.crossover_snr_db.expect("crossover");
    assert!(x > -5.0 && x <= 10.0, "{x}");
}

#[test]
fn validation_errors_carry_paths() {
    let path = |s: Scenario| match s.validate().unwrap_err() {
        megsim::Error::Config { path, .. } => path,
        e => panic!("{e:?}"),
    };
    let base = case_study().scenario;
    let mut s = base.clone();
    s.schemes.clear();
    assert_eq!(path(s), "scenario.schemes");
    let mut s = base.clone();
    s.snr_db.clear();
    assert_eq!(path(s), "scenario.snr_db");
    let mut s = base.clone();
    s.snr_db = vec![1.0, 1.0];
    assert_eq!(path(s), "scenario.snr_db[1]");
    let mut s = base.clone();
    s.snr_db = vec![f64::NAN];
    assert_eq!(path(s), "scenario.snr_db[0]");
    let mut s = base.clone();
    s.repetitions = 0;
    assert_eq!(path(s), "scenario.repetitions");
    let mut s = base.clone();
    s.codec.merged_dim = None;
    assert_eq!(path(s), "scenario.codec.merged_dim");
    let mut s = base.clone();
    s.pipeline.split_index = 7;
    assert!(path(s).starts_with("scenario.pipeline"));
    let mut s = base.clone();
    s.mechanism = Mechanism::PEU;
    assert_eq!(path(s), "scenario.mechanism");
}

#[test]
fn multi_user_scenario_runs() {
    let doc = parse_config(
        CASE_STUDY_TOML,
        &[
            "schemes=[\"MEG\"]".into(),
            "mechanism=\"SEU\"".into(),
            "multi_user.mode=\"coordinated_fused\"".into(),
            "multi_user.num_ues=3".into(),
            "multi_user.deliver_output=false".into(),
        ],
    )
    .unwrap();
    let mu = doc.scenario.multi_user.as_ref().unwrap();
    assert_eq!(mu.mode, MultiUserMode::CoordinatedFused);
    let r = run_scenario(&doc.scenario).unwrap();
    assert_eq!(r.len(), 1);
    // Three UEs each send the latent up twice: once in SEU, once to share.
    assert_eq!(r[0].payload_bits_ul, 3 * 2 * 1_048_576);
}

#[test]
fn csv_format() {
    assert_eq!(
        CSV_HEADER,
        "scenario,scheme,mechanism,snr_db,rep,payload_bits_ul,payload_bits_dl,t_tx_s,t_compute_s,t_e2e_s,mse,psnr_db,seed"
    );
    let s = small(vec![Scheme::Meg]);
    let csv = records_to_csv(&run_scenario(&s).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("small,MEG,E2U,10,0,0,8192,"), "{}", lines[1]);
}

#[test]
fn format_g_matches_printf() {
    // Reference strings from C printf("%g").
    let cases = [
        (50.331648, "50.3316"),
        (1.048576, "1.04858"),
        (0.58, "0.58"),
        (57.911648, "57.9116"),
        (10.0, "10"),
        (-10.0, "-10"),
        (0.0, "0"),
        (1e-5, "1e-05"),
        (0.0001, "0.0001"),
        (123456.0, "123456"),
        (1234567.0, "1.23457e+06"),
        (999999.5, "1e+06"),
        (0.000123456789, "0.000123457"),
        (2.5e-10, "2.5e-10"),
        (1e100, "1e+100"),
        (200.0, "200"),
        (0.1 + 0.2, "0.3"),
        (-0.5, "-0.5"),
    ];
    for (x, want) in cases {
        assert_eq!(format_g(x), want, "{x}");
    }
}
