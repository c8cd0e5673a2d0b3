mod common;

use common::*;
use nlgalerkin::fem::{assemble_load, ElementKind};
use nlgalerkin::harness::LevelCache;
use nlgalerkin::mms::{mms1, ExactSolution, FrozenForcing, Mms1, Unforced, ZeroFlow};
use nlgalerkin::schemes::{self, handoff, initial_state, FlowState, Scheme, SchemeConfig, Setup, Stepper, TimeRule};

fn setup(coarse: usize, fine: usize) -> Setup {
    Setup::two_grid(LevelCache::new(fine, ElementKind::P1isoP2).hierarchy(coarse, fine).unwrap())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Steady Stokes solution from the dense saddle system `[νA Bᵀ 0; B 0 w; 0 wᵀ 0]`.
fn steady_stokes(setup: &Setup, problem: &dyn ExactSolution) -> (Vec<f64>, Vec<f64>) {
    let ops = &setup.fine;
    let (n, np) = (ops.n_free(), ops.n_pressure());
    let dim = n + np + 1;
    let mut a = vec![vec![0.0; dim]; dim];
    let stiff = ops.stiffness_free.to_dense();
    let div = ops.divergence_free.to_dense();
    for i in 0..n {
        for j in 0..n {
            a[i][j] = problem.nu() * stiff[i][j];
        }
    }
    for q in 0..np {
        for j in 0..n {
            a[n + q][j] = div[q][j];
            a[j][n + q] = div[q][j];
        }
        a[n + q][n + np] = ops.pressure_weights[q];
        a[n + np][n + q] = ops.pressure_weights[q];
    }
    let mut rhs = ops.bc.reduce_vec(&assemble_load(&ops.space, |x| problem.forcing(x, 0.0)));
    rhs.resize(dim, 0.0);
    let x = dense_solve(a, rhs);
    (ops.bc.expand_vec(&x[..n]), x[n..n + np].to_vec())
}

fn stokes_cfg(scheme: Scheme, dt: f64) -> SchemeConfig {
    SchemeConfig { scheme, dt, t0: dt, t_end: 40.0 * dt, convection: false, ..Default::default() }
}

#[test]
fn zero_state_is_a_fixed_point() {
    let s = setup(1, 3);
    let problem = ZeroFlow { nu: 1.0 };
    for scheme in Scheme::ALL {
        let cfg = SchemeConfig { scheme, dt: 1.0 / 64.0, t0: 1.0 / 16.0, t_end: 0.125, ..Default::default() };
        let tr = schemes::run(&cfg, &problem, &s).unwrap();
        assert!(tr.final_state.u.iter().all(|&u| u == 0.0), "{scheme}");
        assert!(tr.records.iter().all(|r| r.diagnostics.energy == 0.0), "{scheme}");
    }
}

#[test]
fn steady_stokes_solution_is_preserved_by_one_step() {
    let s = setup(1, 2);
    let problem = FrozenForcing { inner: mms1(1.0).unwrap(), t_frozen: 0.1 };
    let (u, p) = steady_stokes(&s, &problem);
    let hier = s.hier.as_deref();
    for scheme in [Scheme::GalerkinFine, Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin] {
        for rule in [TimeRule::BackwardEuler, TimeRule::CrankNicolson] {
            let cfg = SchemeConfig { time_rule: rule, ..stokes_cfg(scheme, 0.01) };
            let state = FlowState::new(&s.fine, scheme.is_two_scale().then_some(hier).flatten(), 1, 0.01, u.clone(), p.clone())
                .unwrap();
            let next = Stepper::new(&cfg, &s, &problem).unwrap().step(&state, None).unwrap();
            assert!(max_diff(&next.u, &u) <= 1e-10 * sup(&u), "{scheme} {rule:?}: {:e}", max_diff(&next.u, &u));
            assert!(max_diff(&next.p, &p) <= 1e-9 * sup(&p), "{scheme} {rule:?}");
        }
    }
}

#[test]
fn stokes_steady_states_coincide() {
    let s = setup(1, 2);
    let problem = FrozenForcing { inner: mms1(1.0).unwrap(), t_frozen: 0.1 };
    let (oracle, _) = steady_stokes(&s, &problem);
    for scheme in [Scheme::GalerkinFine, Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin] {
        let tr = schemes::run(&stokes_cfg(scheme, 0.25), &problem, &s).unwrap();
        let d = max_diff(&tr.final_state.u, &oracle);
        assert!(d <= 1e-8 * sup(&oracle), "{scheme}: {d:e}");
    }
}

#[test]
fn degenerate_hierarchy_reduces_to_coarse_galerkin() {
    let s = setup(2, 2);
    let problem = mms1(1.0).unwrap();
    let cfg = SchemeConfig { dt: 1.0 / 64.0, t0: 1.0 / 64.0, t_end: 1.0 / 32.0, ..Default::default() };
    let g0 = initial_state(&s.fine, &problem, 0.0).unwrap();
    let coarse_cfg = SchemeConfig { scheme: Scheme::GalerkinCoarse, ..cfg.clone() };
    let reference = Stepper::new(&coarse_cfg, &s, &problem).unwrap().step(&g0, None).unwrap();
    for scheme in [Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin] {
        let cfg = SchemeConfig { scheme, ..cfg.clone() };
        let state = FlowState::new(&s.fine, s.hier.as_deref(), 0, 0.0, g0.u.clone(), g0.p.clone()).unwrap();
        let next = Stepper::new(&cfg, &s, &problem).unwrap().step(&state, None).unwrap();
        assert!(max_diff(&next.u, &reference.u) <= 1e-10 * sup(&reference.u), "{scheme}");
        assert!(next.split.unwrap().z.iter().all(|z| z.abs() < 1e-10));
    }
}

#[test]
fn handoff_keeps_the_large_scales() {
    let s = setup(1, 3);
    let hier = s.hier.clone().unwrap();
    let problem = mms1(1.0).unwrap();
    let cfg = SchemeConfig { dt: 1.0 / 64.0, t0: 1.0 / 16.0, t_end: 0.125, ..Default::default() };
    let g0 = schemes::galerkin_until(&cfg, &problem, &s, cfg.handoff_step().unwrap(), &mut Vec::new()).unwrap();
    let y_ref = hier.project_coarse(&g0.u).unwrap();
    let z_ref = hier.split(&g0.u).unwrap().z;
    for scheme in [Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin] {
        let h0 = handoff(&SchemeConfig { scheme, ..cfg.clone() }, &s, &problem, &g0).unwrap();
        let split = h0.split.as_ref().unwrap();
        assert!(max_diff(&split.y, &y_ref) <= 1e-10 * sup(&y_ref), "{scheme}");
        assert!(max_diff(&hier.project_coarse(&h0.u).unwrap(), &split.y) <= 1e-10 * sup(&y_ref));
        let (z, zg) = (s.fine.l2(&split.z), s.fine.l2(&z_ref));
        assert!(z <= 2.0 * zg && zg <= 2.0 * z, "{scheme}: {z:e} vs {zg:e}");
        h0.check_constraints().unwrap();
    }
}

#[test]
fn nlgm_variants_differ_by_small_scale_interaction() {
    let problem = mms1(1.0).unwrap();
    let mut ratios = Vec::new();
    for coarse in [1, 2] {
        let s = setup(coarse, 4);
        let hier = s.hier.clone().unwrap();
        let cfg = SchemeConfig { dt: 1.0 / 64.0, t0: 1.0 / 16.0, t_end: 0.125, ..Default::default() };
        let g0 = schemes::galerkin_until(&cfg, &problem, &s, cfg.handoff_step().unwrap(), &mut Vec::new()).unwrap();
        let state = FlowState::new(&s.fine, Some(&hier), g0.step, g0.t, g0.u.clone(), g0.p.clone()).unwrap();
        let step = |scheme| Stepper::new(&SchemeConfig { scheme, ..cfg.clone() }, &s, &problem).unwrap().step(&state, None).unwrap();
        let (a, b) = (step(Scheme::Nlgm1), step(Scheme::Nlgm2));
        let d: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
        let z = &state.split.as_ref().unwrap().z;
        ratios.push(s.fine.l2(&d) / (s.fine.l2(z) * s.fine.h1(z)));
    }
    assert!(ratios.iter().all(|r| r.is_finite() && *r < 1.0), "{ratios:?}");
}

fn energy_trajectory(scheme: Scheme, s: &Setup, problem: &Unforced<Mms1>) -> Vec<f64> {
    let dt = 1.0 / 512.0;
    let cfg = SchemeConfig { scheme, dt, t0: 32.0 * dt, t_end: 100.0 * dt, ..Default::default() };
    let tr = schemes::run(&cfg, problem, s).unwrap();
    tr.records.iter().map(|r| r.diagnostics.energy).collect()
}

#[test]
fn backward_euler_dissipates_energy_without_forcing() {
    let s = setup(2, 4);
    let problem = Unforced { inner: mms1(1.0).unwrap() };
    for scheme in Scheme::ALL {
        let e = energy_trajectory(scheme, &s, &problem);
        assert!(e.len() >= 100);
        for w in e.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{scheme}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let s = setup(1, 2);
    let problem = mms1(1.0).unwrap();
    let bad = [
        SchemeConfig { t0: 0.0, ..Default::default() },
        SchemeConfig { dt: 0.3, ..Default::default() },
        SchemeConfig { t_end: 0.25 + 1e-3, ..Default::default() },
    ];
    for cfg in bad {
        assert!(schemes::run(&cfg, &problem, &s).is_err(), "{cfg:?}");
    }
    let fine_only = Setup::fine_only(s.fine.clone());
    assert!(schemes::run(&SchemeConfig::default(), &problem, &fine_only).is_err());
}
