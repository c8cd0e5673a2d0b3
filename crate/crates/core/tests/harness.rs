mod common;

use nlgalerkin::fem::ElementKind;
use nlgalerkin::harness::{
    estimate_rate, read_text, run_convergence, write_csv, write_json, ConvergenceConfig, ConvergenceReport, CSV_HEADER,
};
use nlgalerkin::mms::ProblemKind;
use nlgalerkin::schemes::{Scheme, SchemeConfig};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn small_grid() -> ConvergenceConfig {
    ConvergenceConfig {
        schemes: vec![Scheme::Nlgm1, Scheme::NlgmLin, Scheme::GalerkinCoarse],
        coarse_levels: vec![1, 2],
        fine_level: 3,
        element: ElementKind::P1isoP2,
        problem: ProblemKind::Mms1,
        base: SchemeConfig { dt: 1.0 / 64.0, t0: 1.0 / 16.0, t_end: 0.125, ..Default::default() },
        timing: false,
    }
}

#[test]
fn collinear_points_give_their_slope() {
    let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625].iter().map(|&h: &f64| (h, 3.0 * h.powi(4))).collect();
    assert!((estimate_rate(&pts).unwrap() - 4.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn rate_is_scale_invariant(errs in proptest::collection::vec(1e-8f64..1.0, 3), c in 1e-3f64..1e3) {
        let hs = [0.25, 0.125, 0.0625];
        let a: Vec<_> = hs.iter().copied().zip(errs.iter().copied()).collect();
        let b: Vec<_> = hs.iter().copied().zip(errs.iter().map(|e| c * e)).collect();
        prop_assert!((estimate_rate(&a).unwrap() - estimate_rate(&b).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn report_round_trips_and_is_deterministic() {
    let cfg = small_grid();
    let r1 = run_convergence(&cfg).unwrap();
    let r2 = run_convergence(&cfg).unwrap();
    assert_eq!(r1.rows.len(), 6);
    assert!(r1.rows.iter().all(|r| r.error.is_none() && r.wall_s.is_none()));
    let (c1, c2) = (r1.to_csv(), r2.to_csv());
    assert_eq!(Sha256::digest(c1.as_bytes()), Sha256::digest(c2.as_bytes()));
    assert!(c1.starts_with(&format!("{CSV_HEADER}\n")));
    assert!(!c1.contains('\r'));
    assert_eq!(ConvergenceReport::from_csv(&c1).unwrap(), r1);
    assert_eq!(ConvergenceReport::from_json(&r1.to_json()).unwrap(), r1);
    assert!(r1.rates.contains_key(&Scheme::Nlgm1));
    for r in r1.rows_for(Scheme::GalerkinCoarse) {
        assert!(r.err_l2.unwrap() > 0.0 && r.gap_l2.unwrap() > 0.0);
    }

    let dir = tempfile::tempdir().unwrap();
    write_csv(&r1, &dir.path().join("r.csv")).unwrap();
    write_json(&r1, &dir.path().join("r.json")).unwrap();
    assert_eq!(read_text(&dir.path().join("r.csv")).unwrap(), c1);
    let missing = dir.path().join("no/such/dir/r.csv");
    let err = write_csv(&r1, &missing).unwrap_err().to_string();
    assert!(err.contains("no/such/dir"), "{err}");
}

#[test]
fn failed_rows_are_reported_not_fatal() {
    // one interior velocity node cannot carry the level-0 pressure space
    let cfg = ConvergenceConfig {
        schemes: vec![Scheme::GalerkinCoarse, Scheme::Nlgm1],
        coarse_levels: vec![0, 1],
        fine_level: 2,
        ..small_grid()
    };
    let r = run_convergence(&cfg).unwrap();
    assert_eq!(r.rows.len(), 4);
    let failed: Vec<_> = r.rows.iter().filter(|row| row.error.is_some()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!((failed[0].scheme, failed[0].coarse_h), (Scheme::GalerkinCoarse, 0.5));
    assert!(failed[0].error.as_deref().unwrap().contains("singular"));
    assert!(failed[0].gap_l2.is_none());
    assert!(r.rates.contains_key(&Scheme::Nlgm1) && !r.rates.contains_key(&Scheme::GalerkinCoarse));
    let csv = r.to_csv();
    assert_eq!(ConvergenceReport::from_csv(&csv).unwrap().rows.len(), 4);
}

#[test]
fn reference_failure_aborts_the_study() {
    let cfg = ConvergenceConfig { base: SchemeConfig { picard_max: 1, ..small_grid().base }, ..small_grid() };
    assert!(run_convergence(&cfg).unwrap_err().is_numerical());
}
