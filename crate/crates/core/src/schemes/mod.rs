//! Time integration of the Galerkin and two-scale discretizations.
//!
//! Every scheme is integrated on `(0, t0]` by fine Galerkin. The two-scale schemes then
//! take over at `t0`: the large scales start from `y = P_H u_h(t0)` and the small
//! scales are slaved to them through a quasi-static equation (no time derivative).
//! Within a step all schemes share the same algebraic form (see [`system`]).

mod system;

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::assemble_load;
use crate::fem::operators::DiscreteOperators;
use crate::linsolve;
use crate::mms::ExactSolution;
use crate::twogrid::{SplitField, TwoGridHierarchy};

use system::{CoarseRows, StepSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GalerkinFine,
    GalerkinCoarse,
    Nlgm1,
    Nlgm2,
    NlgmLin,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::GalerkinFine, Scheme::GalerkinCoarse, Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin];

    pub fn is_two_scale(self) -> bool {
        matches!(self, Scheme::Nlgm1 | Scheme::Nlgm2 | Scheme::NlgmLin)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::GalerkinFine => "galerkin-fine",
            Scheme::GalerkinCoarse => "galerkin-coarse",
            Scheme::Nlgm1 => "nlgm1",
            Scheme::Nlgm2 => "nlgm2",
            Scheme::NlgmLin => "nlgm-lin",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TimeRule {
    #[default]
    #[serde(rename = "be")]
    BackwardEuler,
    #[serde(rename = "cn")]
    CrankNicolson,
}

impl TimeRule {
    /// Implicitness weight: the stage is `θu⁺ + (1−θ)u`.
    pub fn theta(self) -> f64 {
        match self {
            TimeRule::BackwardEuler => 1.0,
            TimeRule::CrankNicolson => 0.5,
        }
    }
}

impl std::fmt::Display for TimeRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TimeRule::BackwardEuler => "be",
            TimeRule::CrankNicolson => "cn",
        })
    }
}

impl FromStr for TimeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "be" => Ok(TimeRule::BackwardEuler),
            "cn" => Ok(TimeRule::CrankNicolson),
            _ => Err(Error::InvalidArgument(format!("unknown time rule '{s}' (expected be or cn)"))),
        }
    }
}

/// How the small scales are initialized at the handoff time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandoffInit {
    /// Solve the scheme's own small-scale equation once with `y` frozen.
    #[default]
    StaticSolve,
    /// Take `z = (I − P_H)u_h(t0)`.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SchemeConfig {
    pub nu: f64,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub time_rule: TimeRule,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Drop the convection term (Stokes flow).
    pub convection: bool,
    pub handoff: HandoffInit,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            nu: 1.0,
            dt: 1.0 / 512.0,
            t0: 1.0 / 16.0,
            t_end: 0.25,
            scheme: Scheme::Nlgm1,
            time_rule: TimeRule::BackwardEuler,
            picard_tol: 1e-10,
            picard_max: 50,
            convection: true,
            handoff: HandoffInit::StaticSolve,
        }
    }
}

/// Relative slack when matching times to the step grid.
const GRID_TOLERANCE: f64 = 1e-9;

fn steps_to(t: f64, dt: f64, what: &str) -> Result<usize> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > GRID_TOLERANCE * t.max(dt) {
        return Err(Error::InvalidArgument(format!("{what} = {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t0 >= 0.0 && self.t0 <= self.t_end && self.t_end.is_finite()) {
            return bad(format!("need 0 <= t0 <= t_end, got t0 = {}, t_end = {}", self.t0, self.t_end));
        }
        if !(self.picard_tol > 0.0 && self.picard_tol < 1.0) {
            return bad(format!("picard_tol must lie in (0, 1), got {}", self.picard_tol));
        }
        if self.picard_max == 0 {
            return bad("picard_max must be at least 1".into());
        }
        if self.scheme.is_two_scale() && self.t0 <= 0.0 {
            return bad(format!("{} starts from a Galerkin solution and needs t0 > 0", self.scheme));
        }
        self.n_steps()?;
        self.handoff_step()?;
        Ok(())
    }

    pub fn n_steps(&self) -> Result<usize> {
        steps_to(self.t_end, self.dt, "t_end")
    }

    pub fn handoff_step(&self) -> Result<usize> {
        steps_to(self.t0, self.dt, "t0")
    }

    /// Time of step `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Per-state monitoring quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖u‖`.
    pub energy: f64,
    /// `‖∇u‖`.
    pub h1: f64,
    /// `‖P y‖` (two-scale states).
    pub y_norm: Option<f64>,
    /// `‖z‖` (two-scale states).
    pub z_norm: Option<f64>,
    /// `‖B u‖∞`.
    pub div_residual: f64,
    /// `‖PᵀM z‖∞` (two-scale states).
    pub complement_residual: Option<f64>,
    pub picard_iters: usize,
    pub picard_update: f64,
    /// Relative residual of the step equations at the accepted solution.
    pub step_residual: f64,
}

/// Largest tolerated constraint residual of an accepted step.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub step: usize,
    pub t: f64,
    /// Full velocity coefficients on the space the scheme runs on.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Large/small-scale split of `u` (two-scale states).
    pub split: Option<SplitField>,
    /// Coarse multiplier on free coarse dofs (two-scale states).
    pub mu: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl FlowState {
    /// State with diagnostics (and, given a hierarchy, the scale split) of `u`.
    pub fn new(ops: &DiscreteOperators, hier: Option<&TwoGridHierarchy>, step: usize, t: f64, u: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let mut d = Diagnostics { energy: ops.l2(&u), h1: ops.h1(&u), div_residual: ops.divergence_residual(&u), ..Default::default() };
        let split = match hier {
            Some(h) => {
                let s = h.split(&u)?;
                d.y_norm = Some(ops.l2(&h.prolongate(&s.y)));
                d.z_norm = Some(ops.l2(&s.z));
                d.complement_residual = Some(h.complement_residual(&s.z));
                Some(s)
            }
            None => None,
        };
        Ok(FlowState { step, t, u, p, split, mu: None, diagnostics: d })
    }

    /// Checks the per-step invariants.
    pub fn check_constraints(&self) -> Result<()> {
        let d = &self.diagnostics;
        if d.div_residual > CONSTRAINT_TOLERANCE {
            return Err(Error::ConstraintViolation(format!("divergence residual {:e} above tolerance", d.div_residual)));
        }
        if let Some(c) = d.complement_residual {
            if c > CONSTRAINT_TOLERANCE {
                return Err(Error::ConstraintViolation(format!("complement residual {c:e} above tolerance")));
            }
        }
        Ok(())
    }
}

/// Spaces a run needs: the fine operators and, for two-scale schemes and coarse
/// Galerkin, the two-grid hierarchy over them.
#[derive(Debug, Clone)]
pub struct Setup {
    pub fine: Arc<DiscreteOperators>,
    pub hier: Option<Arc<TwoGridHierarchy>>,
}

impl Setup {
    pub fn fine_only(fine: Arc<DiscreteOperators>) -> Self {
        Setup { fine, hier: None }
    }

    pub fn two_grid(hier: Arc<TwoGridHierarchy>) -> Self {
        Setup { fine: hier.fine().clone(), hier: Some(hier) }
    }

    fn hierarchy(&self, scheme: Scheme) -> Result<&Arc<TwoGridHierarchy>> {
        self.hier.as_ref().ok_or_else(|| Error::InvalidArgument(format!("scheme {scheme} needs a coarse level")))
    }
}

/// Forcing vectors on free dofs, computed once per distinct time.
struct Forcing<'a> {
    ops: Arc<DiscreteOperators>,
    problem: &'a dyn ExactSolution,
    cached: Option<(f64, Vec<f64>)>,
}

impl<'a> Forcing<'a> {
    fn new(ops: Arc<DiscreteOperators>, problem: &'a dyn ExactSolution) -> Self {
        Forcing { ops, problem, cached: None }
    }

    fn at(&mut self, t: f64) -> &[f64] {
        let hit = matches!(&self.cached, Some((tc, _)) if *tc == t || self.problem.is_steady());
        if !hit {
            let f = assemble_load(&self.ops.space, |x| self.problem.forcing(x, t));
            self.cached = Some((t, self.ops.bc.reduce_vec(&f)));
        }
        &self.cached.as_ref().expect("filled").1
    }
}

/// L² projection of the problem's velocity at time `t` (full coefficients).
pub fn initial_state(ops: &DiscreteOperators, problem: &dyn ExactSolution, t: f64) -> Result<FlowState> {
    let load = ops.bc.reduce_vec(&assemble_load(&ops.space, |x| problem.velocity(x, t)));
    let u = ops.bc.expand_vec(&linsolve::factor(&ops.mass_free)?.solve(&load)?);
    FlowState::new(ops, None, 0, t, u, vec![0.0; ops.n_pressure()])
}

/// A stepper for one scheme on fixed spaces.
pub struct Stepper<'a> {
    cfg: SchemeConfig,
    ops: Arc<DiscreteOperators>,
    hier: Option<Arc<TwoGridHierarchy>>,
    system: StepSystem,
    forcing: Forcing<'a>,
}

impl std::fmt::Debug for Stepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper").field("cfg", &self.cfg).field("dim", &self.system.dim()).finish()
    }
}

impl<'a> Stepper<'a> {
    /// `cfg.scheme` selects the equations; Galerkin schemes run on `ops`, two-scale
    /// schemes on `hier.fine()`.
    pub fn new(cfg: &SchemeConfig, setup: &Setup, problem: &'a dyn ExactSolution) -> Result<Self> {
        let (ops, hier) = match cfg.scheme {
            Scheme::GalerkinFine => (setup.fine.clone(), None),
            Scheme::GalerkinCoarse => (setup.hierarchy(cfg.scheme)?.coarse().clone(), None),
            _ => (setup.fine.clone(), Some(setup.hierarchy(cfg.scheme)?.clone())),
        };
        let theta = cfg.time_rule.theta();
        let system =
            StepSystem::new(ops.clone(), hier.clone(), cfg.scheme, cfg.convection, cfg.nu, cfg.dt, theta, CoarseRows::Evolution)?;
        Ok(Stepper { cfg: cfg.clone(), forcing: Forcing::new(ops.clone(), problem), ops, hier, system })
    }

    pub fn operators(&self) -> &Arc<DiscreteOperators> {
        &self.ops
    }

    /// Advances `state` by one step; `previous` (the state before it) enables a
    /// linear extrapolation of the initial guess.
    pub fn step(&mut self, state: &FlowState, previous: Option<&FlowState>) -> Result<FlowState> {
        let ops = self.ops.clone();
        ops.space.check_len(&state.u)?;
        let n = ops.n_free();
        let np = ops.n_pressure();
        let u_old = ops.bc.reduce_vec(&state.u);
        let mut guess = match previous {
            Some(prev) if prev.u.len() == state.u.len() => {
                let up = ops.bc.reduce_vec(&prev.u);
                u_old.iter().zip(&up).map(|(a, b)| 2.0 * a - b).collect()
            }
            _ => u_old.clone(),
        };
        guess.extend_from_slice(&state.p);
        guess.push(0.0);
        if let Some(h) = &self.hier {
            match &state.mu {
                Some(mu) => guess.extend_from_slice(mu),
                None => guess.extend(std::iter::repeat_n(0.0, h.n_coarse_free())),
            }
        }
        debug_assert_eq!(guess.len(), self.system.dim());
        let theta = self.cfg.time_rule.theta();
        let t_new = self.cfg.time(state.step + 1);
        let t_stage = state.t + theta * (t_new - state.t);
        let load = self.forcing.at(t_stage).to_vec();
        let s = self.system.solve(guess, &u_old, &load, self.cfg.picard_tol, self.cfg.picard_max)?;
        debug_assert_eq!(s.u.len(), n);
        debug_assert_eq!(s.p.len(), np);
        let mut next = FlowState::new(&ops, self.hier.as_deref(), state.step + 1, t_new, ops.bc.expand_vec(&s.u), s.p)?;
        if self.hier.is_some() {
            next.mu = Some(s.mu);
        }
        next.diagnostics.picard_iters = s.iterations;
        next.diagnostics.picard_update = s.last_update;
        next.diagnostics.step_residual = s.residual;
        Ok(next)
    }
}

/// Builds the two-scale state at the handoff from the fine Galerkin state at `t0`.
pub fn handoff(cfg: &SchemeConfig, setup: &Setup, problem: &dyn ExactSolution, galerkin: &FlowState) -> Result<FlowState> {
    let hier = setup.hierarchy(cfg.scheme)?;
    let ops = hier.fine();
    ops.space.check_len(&galerkin.u)?;
    if !cfg.scheme.is_two_scale() {
        return Err(Error::InvalidArgument(format!("{} has no handoff", cfg.scheme)));
    }
    match cfg.handoff {
        HandoffInit::Projection => {
            FlowState::new(ops, Some(hier), galerkin.step, galerkin.t, galerkin.u.clone(), galerkin.p.clone())
        }
        HandoffInit::StaticSolve => {
            let mut system = StepSystem::new(
                ops.clone(),
                Some(hier.clone()),
                cfg.scheme,
                cfg.convection,
                cfg.nu,
                cfg.dt,
                1.0,
                CoarseRows::Frozen,
            )?;
            let u_ref = ops.bc.reduce_vec(&galerkin.u);
            let mut guess = u_ref.clone();
            guess.extend_from_slice(&galerkin.p);
            guess.push(0.0);
            guess.extend(std::iter::repeat_n(0.0, hier.n_coarse_free()));
            let load = ops.bc.reduce_vec(&assemble_load(&ops.space, |x| problem.forcing(x, galerkin.t)));
            let s = system.solve(guess, &u_ref, &load, cfg.picard_tol, cfg.picard_max)?;
            let mut st = FlowState::new(ops, Some(hier), galerkin.step, galerkin.t, ops.bc.expand_vec(&s.u), s.p)?;
            st.diagnostics.picard_iters = s.iterations;
            st.diagnostics.picard_update = s.last_update;
            st.diagnostics.step_residual = s.residual;
            Ok(st)
        }
    }
}

/// One CSV row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub phase: Phase,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Initial,
    Galerkin,
    Handoff,
    TwoScale,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Initial => "initial",
            Phase::Galerkin => "galerkin",
            Phase::Handoff => "handoff",
            Phase::TwoScale => "two-scale",
        })
    }
}

impl StepRecord {
    fn of(state: &FlowState, phase: Phase) -> Self {
        StepRecord { step: state.step, t: state.t, phase, diagnostics: state.diagnostics }
    }
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "step,t,phase,energy,h1,y_norm,z_norm,div_residual,complement_residual,picard_iters,picard_update,step_residual";

pub fn trajectory_csv(records: &[StepRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for r in records {
        let d = &r.diagnostics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            r.t,
            r.phase,
            d.energy,
            d.h1,
            opt(d.y_norm),
            opt(d.z_norm),
            d.div_residual,
            opt(d.complement_residual),
            d.picard_iters,
            d.picard_update,
            d.step_residual
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    /// Fine Galerkin state at `t0` (two-scale runs).
    pub galerkin_t0: Option<FlowState>,
    pub final_state: FlowState,
}

fn wrap(step: usize, t: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::Step { .. } => e,
        e => Error::Step { step, t, source: Box::new(e) },
    }
}

/// Advances with `stepper` from `state` up to step `until`, asserting the
/// constraints after every step.
fn integrate(
    stepper: &mut Stepper<'_>,
    mut state: FlowState,
    until: usize,
    phase: Phase,
    records: &mut Vec<StepRecord>,
) -> Result<FlowState> {
    let mut previous: Option<FlowState> = None;
    while state.step < until {
        let (k, t) = (state.step + 1, state.t);
        let next = stepper.step(&state, previous.as_ref()).map_err(wrap(k, t))?;
        next.check_constraints().map_err(wrap(k, t))?;
        records.push(StepRecord::of(&next, phase));
        previous = Some(std::mem::replace(&mut state, next));
    }
    Ok(state)
}

/// Integrates `0 → t_end`: fine (or coarse) Galerkin throughout, or fine Galerkin up
/// to `t0` followed by the handoff and the two-scale scheme.
pub fn run(cfg: &SchemeConfig, problem: &dyn ExactSolution, setup: &Setup) -> Result<Trajectory> {
    cfg.validate()?;
    let n_steps = cfg.n_steps()?;
    let mut records = Vec::new();
    if !cfg.scheme.is_two_scale() {
        let mut stepper = Stepper::new(cfg, setup, problem)?;
        let s0 = initial_state(stepper.operators(), problem, 0.0)?;
        records.push(StepRecord::of(&s0, Phase::Initial));
        let final_state = integrate(&mut stepper, s0, n_steps, Phase::Galerkin, &mut records)?;
        return Ok(Trajectory { records, galerkin_t0: None, final_state });
    }
    let g0 = galerkin_until(cfg, problem, setup, cfg.handoff_step()?, &mut records)?;
    let mut rest = continue_two_scale(cfg, problem, setup, &g0)?;
    records.append(&mut rest.records);
    rest.records = records;
    Ok(rest)
}

/// Fine Galerkin from the projected initial data up to step `until`.
pub fn galerkin_until(
    cfg: &SchemeConfig,
    problem: &dyn ExactSolution,
    setup: &Setup,
    until: usize,
    records: &mut Vec<StepRecord>,
) -> Result<FlowState> {
    let gcfg = SchemeConfig { scheme: Scheme::GalerkinFine, ..cfg.clone() };
    let mut stepper = Stepper::new(&gcfg, setup, problem)?;
    let s0 = initial_state(&setup.fine, problem, 0.0)?;
    records.push(StepRecord::of(&s0, Phase::Initial));
    integrate(&mut stepper, s0, until, Phase::Galerkin, records)
}

/// Handoff at the given fine Galerkin state and two-scale integration to `t_end`.
pub fn continue_two_scale(
    cfg: &SchemeConfig,
    problem: &dyn ExactSolution,
    setup: &Setup,
    galerkin_t0: &FlowState,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut records = Vec::new();
    let h0 = handoff(cfg, setup, problem, galerkin_t0).map_err(wrap(galerkin_t0.step, galerkin_t0.t))?;
    h0.check_constraints().map_err(wrap(galerkin_t0.step, galerkin_t0.t))?;
    records.push(StepRecord::of(&h0, Phase::Handoff));
    let mut stepper = Stepper::new(cfg, setup, problem)?;
    let final_state = integrate(&mut stepper, h0, cfg.n_steps()?, Phase::TwoScale, &mut records)?;
    Ok(Trajectory { records, galerkin_t0: Some(galerkin_t0.clone()), final_state })
}
