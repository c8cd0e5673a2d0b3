//! One implicit step as a sparse saddle system.
//!
//! Unknowns are stacked as `[u (free velocity) | p | λ | μ]`: `λ` is the zero-mean
//! multiplier of the pressure and `μ` (two-scale schemes only) the coarse multiplier
//! through which the fine residual is required to be an L² representer of a coarse
//! function. The nonlinear equations are solved by a chord iteration: the residual is
//! always the exact one, the matrix is the Oseen linearization with the transport
//! taken from the initial guess.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::convection_action;
use crate::fem::operators::DiscreteOperators;
use crate::fem::sparse::{norm_inf, CsrMatrix};
use crate::linsolve::{self, Factorization, SymbolicStructure};
use crate::twogrid::{push_block, TwoGridHierarchy};

use super::Scheme;

/// How the coarse row block of a two-scale system reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CoarseRows {
    /// `PᵀM(u − u_old)/dt + Gμ + Pᵀ(r_c − r_f) = 0`.
    Evolution,
    /// `PᵀM u = PᵀM u_ref` (coarse part frozen, used once at the handoff).
    Frozen,
}

pub(crate) struct StepSystem {
    ops: Arc<DiscreteOperators>,
    hier: Option<Arc<TwoGridHierarchy>>,
    scheme: Scheme,
    convection: bool,
    nu: f64,
    dt: f64,
    theta: f64,
    /// Coefficient of `M(u − u_old)/dt` in the velocity rows.
    mass_coeff: f64,
    coarse_rows: CoarseRows,
    base: CsrMatrix,
    conv_slots: Vec<[Option<usize>; 2]>,
    symbolic: SymbolicStructure,
    factor: Option<Factorization>,
    /// `max|A|` of the factored matrix.
    scale: f64,
}

/// A step that needs more iterations than this refreshes the linearization before the
/// next step.
pub(crate) const REFACTOR_ABOVE: usize = 5;

/// Outcome of one nonlinear solve.
pub(crate) struct Solved {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub last_update: f64,
    pub residual: f64,
}

impl StepSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ops: Arc<DiscreteOperators>,
        hier: Option<Arc<TwoGridHierarchy>>,
        scheme: Scheme,
        convection: bool,
        nu: f64,
        dt: f64,
        theta: f64,
        coarse_rows: CoarseRows,
    ) -> Result<Self> {
        let two_scale = scheme.is_two_scale();
        if two_scale != hier.is_some() {
            return Err(Error::InvalidArgument(format!("scheme {scheme} needs {} hierarchy", if two_scale { "a" } else { "no" })));
        }
        let mass_coeff = if two_scale { 0.0 } else { 1.0 };
        let n = ops.n_free();
        let np = ops.n_pressure();
        let nc = hier.as_ref().map_or(0, |h| h.n_coarse_free());
        let dim = n + np + 1 + nc;
        let (off_p, off_l, off_m) = (n, n + np, n + np + 1);

        let vel = ops.mass_free.add_scaled(mass_coeff / dt, &ops.stiffness_free, theta * nu)?;
        let mut trip = Vec::with_capacity(vel.nnz() * 2);
        push_block(&mut trip, &vel, 0, 0, 1.0);
        // keep every convection entry in the pattern
        let template = ops.pattern.template();
        let nn = ops.space.n_nodes();
        let f2f = ops.bc.full_to_free();
        for i in 0..nn {
            let (cols, _) = template.row(i);
            for &j in cols {
                for c in 0..2 {
                    if let (Some(a), Some(b)) = (f2f[c * nn + i], f2f[c * nn + j]) {
                        trip.push((a, b, 0.0));
                    }
                }
            }
        }
        push_block(&mut trip, &ops.divergence_free.transpose(), 0, off_p, 1.0);
        push_block(&mut trip, &ops.divergence_free, off_p, 0, 1.0);
        for (q, &w) in ops.pressure_weights.iter().enumerate() {
            trip.push((off_p + q, off_l, w));
            trip.push((off_l, off_p + q, w));
        }
        trip.push((off_l, off_l, 0.0));
        if let Some(h) = &hier {
            let mp = h.mass_prolongation();
            push_block(&mut trip, mp, 0, off_m, -1.0);
            match coarse_rows {
                CoarseRows::Evolution => {
                    push_block(&mut trip, &mp.transpose(), off_m, 0, 1.0 / dt);
                    push_block(&mut trip, h.gram(), off_m, off_m, 1.0);
                }
                CoarseRows::Frozen => {
                    push_block(&mut trip, &mp.transpose(), off_m, 0, 1.0);
                    for k in 0..nc {
                        trip.push((off_m + k, off_m + k, 0.0));
                    }
                }
            }
        }
        let base = CsrMatrix::from_triplets(dim, dim, trip);

        let mut conv_slots = Vec::with_capacity(template.nnz());
        for i in 0..nn {
            let (cols, _) = template.row(i);
            for &j in cols {
                let mut s = [None; 2];
                for (c, slot) in s.iter_mut().enumerate() {
                    if let (Some(a), Some(b)) = (f2f[c * nn + i], f2f[c * nn + j]) {
                        *slot = base.position(a, b);
                    }
                }
                conv_slots.push(s);
            }
        }
        let symbolic = linsolve::analyze(&base)?;
        Ok(StepSystem { ops, hier, scheme, convection, nu, dt, theta, mass_coeff, coarse_rows, base, conv_slots, symbolic, factor: None, scale: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn n_coarse(&self) -> usize {
        self.hier.as_ref().map_or(0, |h| h.n_coarse_free())
    }

    /// Oseen matrix with transport `w` (full coefficients). The velocity rows of
    /// the linearized scheme see the velocity only through its large scales and
    /// get no convection block.
    fn matrix(&self, w: &[f64]) -> Result<CsrMatrix> {
        let mut m = self.base.clone();
        if self.convection && self.scheme != Scheme::NlgmLin {
            let conv = self.ops.convection_scalar(w)?;
            let vals = m.values_mut();
            for (slots, &v) in self.conv_slots.iter().zip(conv.values()) {
                for s in slots.iter().flatten() {
                    vals[*s] += self.theta * v;
                }
            }
        }
        Ok(m)
    }

    /// Large-scale part `P G⁻¹PᵀM v` of a free fine vector.
    fn coarse_part(&self, v: &[f64]) -> Result<Vec<f64>> {
        let h = self.hier.as_ref().expect("two-scale system");
        Ok(h.prolongation_free().mul_vec(&h.project_free(v)?))
    }

    /// Convection vectors `(r_f, r_c)` on free dofs: `r_f` enters the velocity rows,
    /// `r_c − r_f` the coarse rows.
    fn convection_terms(&self, u_star: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n = self.ops.n_free();
        if !self.convection {
            return Ok((vec![0.0; n], None));
        }
        let bc = &self.ops.bc;
        let sp = &self.ops.space;
        let uf = bc.expand_vec(u_star);
        let full = |w: &[f64], v: &[f64]| -> Result<Vec<f64>> { Ok(bc.reduce_vec(&convection_action(sp, w, v)?)) };
        match self.scheme {
            Scheme::GalerkinFine | Scheme::GalerkinCoarse | Scheme::Nlgm1 => Ok((full(&uf, &uf)?, None)),
            Scheme::Nlgm2 => {
                let y = bc.expand_vec(&self.coarse_part(u_star)?);
                let z: Vec<f64> = uf.iter().zip(&y).map(|(a, b)| a - b).collect();
                let mut rf = full(&uf, &y)?;
                for (a, b) in rf.iter_mut().zip(full(&y, &z)?) {
                    *a += b;
                }
                Ok((rf, Some(full(&uf, &uf)?)))
            }
            Scheme::NlgmLin => {
                let y = bc.expand_vec(&self.coarse_part(u_star)?);
                Ok((full(&y, &y)?, Some(full(&uf, &uf)?)))
            }
        }
    }

    /// Nonlinear residual at `x = [u|p|λ|μ]`. `load` is the forcing vector on free
    /// dofs at the stage time, `u_ref` the old velocity (or the frozen reference).
    fn residual(&self, x: &[f64], u_ref: &[f64], load: &[f64]) -> Result<Vec<f64>> {
        let ops = &self.ops;
        let n = ops.n_free();
        let np = ops.n_pressure();
        let (u, rest) = x.split_at(n);
        let (p, rest) = rest.split_at(np);
        let (lam, mu) = (rest[0], &rest[1..]);
        let u_star: Vec<f64> = u.iter().zip(u_ref).map(|(a, b)| self.theta * a + (1.0 - self.theta) * b).collect();
        let du: Vec<f64> = u.iter().zip(u_ref).map(|(a, b)| a - b).collect();

        let (rf, rc) = self.convection_terms(&u_star)?;
        let mut r = vec![0.0; self.dim()];
        let au = ops.stiffness_free.mul_vec(&u_star);
        let bp = ops.divergence_free.mul_transpose_vec(p);
        for i in 0..n {
            r[i] = self.nu * au[i] + rf[i] - load[i] + bp[i];
        }
        if self.mass_coeff != 0.0 {
            let mdu = ops.mass_free.mul_vec(&du);
            for i in 0..n {
                r[i] += self.mass_coeff / self.dt * mdu[i];
            }
        }
        let bu = ops.divergence_free.mul_vec(u);
        for q in 0..np {
            r[n + q] = bu[q] + ops.pressure_weights[q] * lam;
        }
        r[n + np] = ops.pressure_weights.iter().zip(p).map(|(a, b)| a * b).sum();
        if let Some(h) = &self.hier {
            let mp = h.mass_prolongation();
            let mpm = mp.mul_vec(mu);
            for i in 0..n {
                r[i] -= mpm[i];
            }
            let off = n + np + 1;
            match self.coarse_rows {
                CoarseRows::Evolution => {
                    let pm_du = mp.mul_transpose_vec(&du);
                    let gmu = h.gram().mul_vec(mu);
                    let diff = match &rc {
                        Some(rc) => {
                            let d: Vec<f64> = rc.iter().zip(&rf).map(|(a, b)| a - b).collect();
                            h.prolongation_free().mul_transpose_vec(&d)
                        }
                        None => vec![0.0; self.n_coarse()],
                    };
                    for k in 0..self.n_coarse() {
                        r[off + k] = pm_du[k] / self.dt + gmu[k] + diff[k];
                    }
                }
                CoarseRows::Frozen => {
                    let pm_du = mp.mul_transpose_vec(&du);
                    r[off..off + self.n_coarse()].copy_from_slice(&pm_du);
                }
            }
        }
        Ok(r)
    }

    /// Solves the step equations from the initial guess `x0`. The linearization is
    /// kept from earlier calls until convergence slows down, then rebuilt around the
    /// guess; the fixed point does not depend on it.
    pub fn solve(&mut self, x0: Vec<f64>, u_ref: &[f64], load: &[f64], tol: f64, max_iter: usize) -> Result<Solved> {
        let n = self.ops.n_free();
        let np = self.ops.n_pressure();
        let mut x = x0;
        if self.factor.is_none() {
            let u_star: Vec<f64> =
                x[..n].iter().zip(u_ref).map(|(a, b)| self.theta * a + (1.0 - self.theta) * b).collect();
            let a = self.matrix(&self.ops.bc.expand_vec(&u_star))?;
            self.factor = Some(linsolve::factor_with(&self.symbolic, &a)?);
            self.scale = a.max_abs();
        }
        let lu = self.factor.as_ref().expect("factored");
        let mut last_update = f64::INFINITY;
        for it in 1..=max_iter {
            let r = self.residual(&x, u_ref, load)?;
            let dx = lu.solve(&r)?;
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi -= d;
            }
            let du = norm_inf(&dx[..n]);
            let un = norm_inf(&x[..n]);
            last_update = if du == 0.0 { 0.0 } else { du / un };
            if !last_update.is_finite() {
                break;
            }
            if last_update <= tol {
                let r = self.residual(&x, u_ref, load)?;
                let scale = self.scale * norm_inf(&x) + norm_inf(load);
                let residual = if scale == 0.0 { 0.0 } else { norm_inf(&r) / scale };
                if it > REFACTOR_ABOVE {
                    self.factor = None;
                }
                let mu = x[n + np + 1..].to_vec();
                x.truncate(n + np);
                let p = x.split_off(n);
                return Ok(Solved { u: x, p, mu, iterations: it, last_update, residual });
            }
        }
        self.factor = None;
        Err(Error::PicardDiverged { iterations: max_iter, last_update })
    }
}
