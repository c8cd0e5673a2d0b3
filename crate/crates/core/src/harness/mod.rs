//! Convergence studies, rate fitting and report emission.

pub mod cli;
pub mod config;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::operators::DiscreteOperators;
use crate::fem::space::{ElementKind, VelocitySpace};
use crate::mesh::MeshHierarchy;
use crate::mms::{evaluate_errors, scheme_gap, ExactSolution, ProblemKind};
use crate::schemes::{self, galerkin_until, FlowState, Scheme, SchemeConfig, Setup};
use crate::twogrid::TwoGridHierarchy;

/// Least-squares slope of `log e` against `log H`.
pub fn estimate_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} point(s), need at least 2", pairs.len())));
    }
    for &(h, e) in pairs {
        for v in [h, e] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonpositiveValue(v));
            }
        }
    }
    let (h0, e0) = pairs[0];
    let xs: Vec<f64> = pairs.iter().map(|p| (p.0 / h0).ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| (p.1 / e0).ln()).collect();
    let n = pairs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all mesh sizes coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// A grid of runs against one fine Galerkin reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub schemes: Vec<Scheme>,
    pub coarse_levels: Vec<usize>,
    pub fine_level: usize,
    pub element: ElementKind,
    pub problem: ProblemKind,
    /// Time stepping parameters; its `scheme` field is ignored.
    pub base: SchemeConfig,
    /// Record wall-clock time per row (the only nondeterministic column).
    pub timing: bool,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            schemes: vec![Scheme::Nlgm1, Scheme::Nlgm2, Scheme::NlgmLin],
            coarse_levels: vec![1, 2, 3],
            fine_level: 5,
            element: ElementKind::P1isoP2,
            problem: ProblemKind::Mms1,
            base: SchemeConfig::default(),
            timing: true,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.coarse_levels.is_empty() {
            return Err(Error::InvalidArgument("need at least one scheme and one coarse level".into()));
        }
        if let Some(&l) = self.coarse_levels.iter().find(|&&l| l >= self.fine_level) {
            return Err(Error::InvalidArgument(format!(
                "coarse level {l} is not strictly coarser than fine level {}",
                self.fine_level
            )));
        }
        for &s in &self.schemes {
            if s == Scheme::GalerkinFine {
                return Err(Error::InvalidArgument("galerkin-fine is the reference, not a row".into()));
            }
            SchemeConfig { scheme: s, ..self.base.clone() }.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scheme: Scheme,
    #[serde(rename = "H")]
    pub coarse_h: f64,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub gap_l2: Option<f64>,
    pub gap_h1: Option<f64>,
    pub err_l2: Option<f64>,
    pub err_h1: Option<f64>,
    pub wall_s: Option<f64>,
    /// Failure message of a row that did not complete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeRates {
    pub rate_l2: f64,
    pub rate_h1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Sorted by scheme, then by decreasing `H`.
    pub rows: Vec<ConvergenceRow>,
    /// Gap rates per scheme, for schemes with at least two completed rows.
    pub rates: BTreeMap<Scheme, SchemeRates>,
}

impl ConvergenceReport {
    pub fn from_rows(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(b.coarse_h.total_cmp(&a.coarse_h)));
        let mut rates = BTreeMap::new();
        let mut schemes: Vec<Scheme> = rows.iter().map(|r| r.scheme).collect();
        schemes.dedup();
        for s in schemes {
            let pick = |f: fn(&ConvergenceRow) -> Option<f64>| -> Vec<(f64, f64)> {
                rows.iter().filter(|r| r.scheme == s).filter_map(|r| f(r).map(|v| (r.coarse_h, v))).collect()
            };
            if let (Ok(l2), Ok(h1)) = (estimate_rate(&pick(|r| r.gap_l2)), estimate_rate(&pick(|r| r.gap_h1))) {
                rates.insert(s, SchemeRates { rate_l2: l2, rate_h1: h1 });
            }
        }
        ConvergenceReport { rows, rates }
    }

    pub fn rows_for(&self, scheme: Scheme) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let rates = self.rates.get(&r.scheme);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scheme,
                r.coarse_h,
                r.h,
                r.dt,
                r.t_end,
                opt(r.gap_l2),
                opt(r.gap_h1),
                opt(r.err_l2),
                opt(r.err_h1),
                opt(rates.map(|x| x.rate_l2)),
                opt(rates.map(|x| x.rate_h1)),
                opt(r.wall_s),
            ));
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv); failure messages are not carried by the CSV.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Parse("missing or wrong CSV header".into()));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'"))) };
        let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
        let mut rows = Vec::new();
        let mut rates = BTreeMap::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(Error::Parse(format!("expected 12 fields, got {}: '{line}'", f.len())));
            }
            let scheme: Scheme = f[0].parse().map_err(|_| Error::Parse(format!("bad scheme '{}'", f[0])))?;
            if let (Some(l2), Some(h1)) = (opt(f[9])?, opt(f[10])?) {
                rates.insert(scheme, SchemeRates { rate_l2: l2, rate_h1: h1 });
            }
            rows.push(ConvergenceRow {
                scheme,
                coarse_h: num(f[1])?,
                h: num(f[2])?,
                dt: num(f[3])?,
                t_end: num(f[4])?,
                gap_l2: opt(f[5])?,
                gap_h1: opt(f[6])?,
                err_l2: opt(f[7])?,
                err_h1: opt(f[8])?,
                wall_s: opt(f[11])?,
                error: None,
            });
        }
        Ok(ConvergenceReport { rows, rates })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub const CSV_HEADER: &str = "scheme,H,h,dt,t_end,gap_l2,gap_h1,err_l2,err_h1,rate_l2,rate_h1,wall_s";

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_csv())
}

pub fn write_json(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_json())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Assembled operators per level of one element family, built on demand.
pub struct LevelCache {
    mesh: MeshHierarchy,
    kind: ElementKind,
    ops: BTreeMap<usize, Arc<DiscreteOperators>>,
}

impl LevelCache {
    pub fn new(max_level: usize, kind: ElementKind) -> Self {
        LevelCache { mesh: MeshHierarchy::new(max_level + 1), kind, ops: BTreeMap::new() }
    }

    pub fn operators(&mut self, level: usize) -> Result<Arc<DiscreteOperators>> {
        if let Some(o) = self.ops.get(&level) {
            return Ok(o.clone());
        }
        let o = Arc::new(DiscreteOperators::new(VelocitySpace::new(&self.mesh, level, self.kind)?)?);
        self.ops.insert(level, o.clone());
        Ok(o)
    }

    pub fn hierarchy(&mut self, coarse: usize, fine: usize) -> Result<Arc<TwoGridHierarchy>> {
        Ok(Arc::new(TwoGridHierarchy::build(self.operators(coarse)?, self.operators(fine)?)?))
    }
}

/// Fine Galerkin reference of a convergence study.
pub struct Reference {
    pub at_t0: FlowState,
    pub at_t_end: FlowState,
}

pub fn fine_reference(base: &SchemeConfig, problem: &dyn ExactSolution, fine: Arc<DiscreteOperators>) -> Result<Reference> {
    let cfg = SchemeConfig { scheme: Scheme::GalerkinFine, ..base.clone() };
    cfg.validate()?;
    let setup = Setup::fine_only(fine);
    let mut records = Vec::new();
    let at_t0 = galerkin_until(&cfg, problem, &setup, cfg.handoff_step()?, &mut records)?;
    let mut stepper = schemes::Stepper::new(&cfg, &setup, problem)?;
    let mut state = at_t0.clone();
    let mut previous: Option<FlowState> = None;
    while state.step < cfg.n_steps()? {
        let next = stepper.step(&state, previous.as_ref()).map_err(|e| Error::Step {
            step: state.step + 1,
            t: state.t,
            source: Box::new(e),
        })?;
        previous = Some(std::mem::replace(&mut state, next));
    }
    Ok(Reference { at_t0, at_t_end: state })
}

fn run_row(
    cfg: &SchemeConfig,
    problem: &dyn ExactSolution,
    hier: &Arc<TwoGridHierarchy>,
    reference: &Reference,
) -> Result<((f64, f64), (f64, f64))> {
    let fine = hier.fine();
    let setup = Setup::two_grid(hier.clone());
    if cfg.scheme == Scheme::GalerkinCoarse {
        let tr = schemes::run(cfg, problem, &setup)?;
        let coarse = hier.coarse();
        let err = evaluate_errors(&coarse.space, &tr.final_state.u, problem, cfg.t_end)?;
        let gap = scheme_gap(fine, &reference.at_t_end.u, &hier.prolongate(&tr.final_state.u))?;
        return Ok((gap, err));
    }
    let tr = schemes::continue_two_scale(cfg, problem, &setup, &reference.at_t0)?;
    let err = evaluate_errors(&fine.space, &tr.final_state.u, problem, cfg.t_end)?;
    let gap = scheme_gap(fine, &reference.at_t_end.u, &tr.final_state.u)?;
    Ok((gap, err))
}

/// Runs every (scheme, coarse level) pair against one fine Galerkin reference. Row
/// failures are recorded in the report; only failures of the reference abort.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let problem = cfg.problem.build(cfg.base.nu)?;
    let mut levels = LevelCache::new(cfg.fine_level, cfg.element);
    let fine = levels.operators(cfg.fine_level)?;
    let reference = fine_reference(&cfg.base, problem.as_ref(), fine.clone())?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &level in &cfg.coarse_levels {
            let start = Instant::now();
            let scfg = SchemeConfig { scheme, ..cfg.base.clone() };
            let hier = levels.hierarchy(level, cfg.fine_level)?;
            let result = run_row(&scfg, problem.as_ref(), &hier, &reference);
            let wall = cfg.timing.then(|| start.elapsed().as_secs_f64());
            let mut row = ConvergenceRow {
                scheme,
                coarse_h: hier.coarse_size(),
                h: hier.fine_size(),
                dt: scfg.dt,
                t_end: scfg.t_end,
                gap_l2: None,
                gap_h1: None,
                err_l2: None,
                err_h1: None,
                wall_s: wall,
                error: None,
            };
            match result {
                Ok(((g2, g1), (e2, e1))) => {
                    row.gap_l2 = Some(g2);
                    row.gap_h1 = Some(g1);
                    row.err_l2 = Some(e2);
                    row.err_h1 = Some(e1);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    Ok(ConvergenceReport::from_rows(rows))
}
