mod common;

use std::path::PathBuf;

use nalgebra::DMatrix;
use solicit::assortment::d2_closed_form;
use solicit::harness::{self, run_sweep, write_csv, Mode, Scenario};
use solicit::waterfill;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_d2.csv")
}

fn golden_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::standard(Mode::Depth, 2, vec![0, 1, 2, 4, 8], 100, 314).unwrap(),
        Scenario::standard(Mode::Breadth, 2, vec![1, 2, 3, 4, 8], 100, 314).unwrap(),
    ]
}

fn csv_bytes(scenarios: &[Scenario]) -> Vec<u8> {
    let rows: Vec<_> = scenarios.iter().flat_map(|s| run_sweep(s).unwrap()).collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    buf
}

#[test]
fn golden_csv() {
    let bytes = csv_bytes(&golden_scenarios());
    if std::env::var_os("SOLICIT_BLESS").is_some() {
        std::fs::write(golden_path(), &bytes).unwrap();
    }
    let expected = std::fs::read(golden_path()).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), String::from_utf8(expected).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let scenarios = golden_scenarios();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = single.install(|| csv_bytes(&scenarios));
    let b = many.install(|| csv_bytes(&scenarios));
    assert_eq!(a, b);
}

#[test]
fn baseline_distance_is_chi_mean() {
    let s = Scenario::standard(Mode::Depth, 10, vec![0], 20_000, 1).unwrap();
    let p = &run_sweep(&s).unwrap()[0];
    let expected = common::chi_mean(10);
    assert!((expected - 3.0843).abs() < 1e-4);
    assert!((p.mean_distance - expected).abs() < 3.0 * p.std_error, "{p:?}");
}

#[test]
fn depth_squared_loss_matches_posterior_trace() {
    let s = Scenario::standard(Mode::Depth, 4, vec![0, 1, 3, 6, 12], 20_000, 2).unwrap();
    for p in run_sweep(&s).unwrap() {
        let trace = waterfill(&DMatrix::identity(4, 4), p.m, 1.0).unwrap().posterior_trace();
        let (mean, se) = p.squared_loss.unwrap();
        assert!((mean - trace).abs() < 3.0 * se, "m={}: {mean} ± {se} vs {trace}", p.m);
    }
}

#[test]
fn pair_loss_matches_two_point_distortion() {
    let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, 1.0, 0.5]));
    let mut s = Scenario::standard(Mode::Breadth, 3, vec![2], 20_000, 3).unwrap();
    s.prior = solicit::generalprior::PriorSpec::gaussian(nalgebra::DVector::zeros(3), cov.clone()).unwrap();
    let p = &run_sweep(&s).unwrap()[0];
    let (mean, se) = p.squared_loss.unwrap();
    let d2 = d2_closed_form(&cov);
    assert!((mean - d2).abs() < 3.0 * se, "{mean} ± {se} vs {d2}");
}

#[test]
fn curves_decrease() {
    for mode in [Mode::Depth, Mode::Breadth] {
        let values = match mode {
            Mode::Depth => vec![0, 1, 2, 4, 8, 16],
            _ => vec![1, 2, 4, 8, 16],
        };
        let s = Scenario::standard(mode, 6, values, 5_000, 4).unwrap();
        let rows = run_sweep(&s).unwrap();
        for w in rows.windows(2) {
            let slack = 3.0 * (w[0].std_error + w[1].std_error);
            assert!(w[1].mean_distance <= w[0].mean_distance + slack, "{:?}", w);
        }
    }
}

#[test]
fn lloyd_refinement_does_not_hurt() {
    let mut base = Scenario::standard(Mode::Breadth, 2, vec![5], 20_000, 6).unwrap();
    let plain = run_sweep(&base).unwrap()[0].squared_loss.unwrap();
    base.assortment_method = solicit::assortment::AssortmentMethod::LloydRefined { n_samples: 20_000 };
    let refined = run_sweep(&base).unwrap()[0].squared_loss.unwrap();
    assert!(
        refined.0 <= plain.0 + 3.0 * (plain.1 + refined.1),
        "{refined:?} vs {plain:?}"
    );
}

#[test]
fn config_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(
        &cfg,
        "mode = \"depth\"\nd = 2\nvalues = [0, 2]\ntrials = 50\nseed = 9\n",
    )
    .unwrap();
    let s = harness::load_config(&cfg).unwrap();
    let rows = run_sweep(&s).unwrap();
    let out = dir.path().join("s.csv");
    harness::emit_csv(&rows, &out).unwrap();
    let back = harness::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.mean_distance, b.mean_distance);
        assert_eq!(a.p25, b.p25);
        assert_eq!(a.std_error, b.std_error);
    }
}
