mod common;

use std::f64::consts::PI;

use common::*;
use nlgalerkin::fem::ElementKind;
use nlgalerkin::harness::LevelCache;
use nlgalerkin::twogrid::TwoGridHierarchy;
use proptest::prelude::*;
use std::sync::Arc;

fn hierarchy(coarse: usize, fine: usize, kind: ElementKind) -> Arc<TwoGridHierarchy> {
    LevelCache::new(fine, kind).hierarchy(coarse, fine).unwrap()
}

fn m_dot(h: &TwoGridHierarchy, a: &[f64], b: &[f64]) -> f64 {
    h.fine().mass.bilinear(a, b)
}

#[test]
fn projection_matches_dense_normal_equations() {
    for kind in [ElementKind::P1isoP2, ElementKind::TaylorHoodP2] {
        let h = hierarchy(1, 2, kind);
        let v = h.fine().space.interpolate(|x| {
            let s = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
            [s, 0.5 * s]
        });
        let y = h.project_coarse(&v).unwrap();
        let oracle = projection_oracle(&h.coarse().space, &h.fine().space, &v);
        let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * scale, "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn prolongation_reproduces_coarse_functions() {
    let h = hierarchy(1, 3, ElementKind::TaylorHoodP2);
    let f = |x: [f64; 2]| [x[0] * x[0] - x[1], x[0] * x[1]];
    let pc = h.prolongate(&h.coarse().space.interpolate(f));
    let fine = h.fine().space.interpolate(f);
    for (a, b) in pc.iter().zip(&fine) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn complement_of_coarse_field_is_zero() {
    let h = hierarchy(1, 3, ElementKind::P1isoP2);
    let mut r = rng(11);
    let y = random_field(&h.coarse().space, &mut r);
    let s = h.split(&h.prolongate(&y)).unwrap();
    for (a, b) in s.y.iter().zip(&y) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(s.z.iter().all(|z| z.abs() < 1e-12));
}

#[test]
fn degenerate_split_has_no_small_scales() {
    let h = hierarchy(2, 2, ElementKind::P1isoP2);
    assert!(h.is_degenerate());
    let v = random_field(&h.fine().space, &mut rng(5));
    let s = h.split(&v).unwrap();
    assert!(s.z.iter().all(|z| z.abs() < 1e-12));
    assert_eq!(h.probe_complement_poincare().unwrap().constant, 0.0);
}

#[test]
fn probe_constants_are_in_range() {
    for kind in [ElementKind::P1isoP2, ElementKind::TaylorHoodP2] {
        let h = hierarchy(1, 3, kind);
        let r = h.probe_report().unwrap();
        assert!(r.c_poincare > 0.0 && r.c_poincare < r.coarse_h, "{kind}: {r:?}");
        assert!(r.rho > 0.0 && r.rho < 1.0, "{kind}: {r:?}");
        let full = h.probe_full_poincare().unwrap().constant;
        assert!(r.c_poincare < full && full <= 1.0 / (PI * 2f64.sqrt()) + 1e-12, "{full}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projector_is_an_m_orthogonal_idempotent(seed in any::<u64>(), th in any::<bool>()) {
        let kind = if th { ElementKind::TaylorHoodP2 } else { ElementKind::P1isoP2 };
        let h = hierarchy(1, 3, kind);
        let mut r = rng(seed);
        let u = random_field(&h.fine().space, &mut r);
        let v = random_field(&h.fine().space, &mut r);
        let pi = |x: &[f64]| h.prolongate(&h.project_coarse(x).unwrap());
        let (pu, pv) = (pi(&u), pi(&v));
        let ppu = pi(&pu);
        let scale = pu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(pu.iter().zip(&ppu).all(|(a, b)| (a - b).abs() <= 1e-10 * scale));
        let (a, b) = (m_dot(&h, &pu, &v), m_dot(&h, &u, &pv));
        prop_assert!((a - b).abs() <= 1e-10 * (a.abs() + b.abs()).max(1e-300));
        let s = h.split(&u).unwrap();
        let (uu, yy, zz) = (m_dot(&h, &u, &u), m_dot(&h, &pu, &pu), m_dot(&h, &s.z, &s.z));
        prop_assert!((uu - yy - zz).abs() <= 1e-9 * uu);
        prop_assert!(h.complement_residual(&s.z) <= 1e-9 * uu.sqrt());
        let back = s.reassemble(&h);
        prop_assert!(back.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-13));
    }
}

#[test]
fn coercivity_follows_from_strengthened_cauchy_schwarz() {
    let h = hierarchy(1, 3, ElementKind::P1isoP2);
    let rho = h.probe_strengthened_cs().unwrap().rho();
    let a = &h.fine().stiffness;
    let mut r = rng(17);
    for _ in 0..20 {
        let phi = h.prolongate(&random_field(&h.coarse().space, &mut r));
        let chi = h.split(&random_field(&h.fine().space, &mut r)).unwrap().z;
        let sum: Vec<f64> = phi.iter().zip(&chi).map(|(a, b)| a + b).collect();
        let cross = a.bilinear(&phi, &chi).abs() / (a.bilinear(&phi, &phi) * a.bilinear(&chi, &chi)).sqrt();
        assert!(cross <= 1.0 - rho + 1e-9);
        assert!(rho * (a.bilinear(&phi, &phi) + a.bilinear(&chi, &chi)) <= a.bilinear(&sum, &sum) * (1.0 + 1e-12));
    }
}

#[test]
fn prolongation_is_a_partition_of_unity() {
    for kind in [ElementKind::P1isoP2, ElementKind::TaylorHoodP2] {
        let h = hierarchy(1, 3, kind);
        let ones = h.prolongate(&vec![1.0; h.coarse().space.n_dofs()]);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-14), "{kind}");
    }
}

#[test]
fn smallness_report_uses_the_projected_norm() {
    let h = hierarchy(1, 2, ElementKind::P1isoP2);
    let v = h.fine().space.interpolate(|x| [x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]), (PI * x[0]).sin() * (PI * x[1]).sin()]);
    let y_oracle = projection_oracle(&h.coarse().space, &h.fine().space, &v);
    let y = h.project_coarse(&v).unwrap();
    let rep = h.smallness_report(&y, 0.5);
    let expected = h.coarse().l2(&y_oracle);
    assert!((rep.y_norm - expected).abs() <= 1e-12 * expected);
    assert!((rep.product - rep.l_h * rep.y_norm).abs() <= 1e-15 * rep.product);
    assert_eq!(h.smallness_report(&vec![0.0; y.len()], 0.5).product, 0.0);
}

#[test]
fn small_scales_shrink_under_coarse_refinement() {
    let mut levels = LevelCache::new(5, ElementKind::P1isoP2);
    let v = levels.operators(5).unwrap().space.interpolate(|x| {
        let s = (PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
        [s, s * x[0]]
    });
    let z: Vec<f64> = (1..5)
        .map(|c| {
            let h = levels.hierarchy(c, 5).unwrap();
            h.fine().l2(&h.split(&v).unwrap().z)
        })
        .collect();
    assert!(z.windows(2).all(|w| w[1] < w[0]), "{z:?}");
}
