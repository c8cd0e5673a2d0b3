//! Two-scale splitting of a fine velocity space.
//!
//! A fine function `v` splits L²-orthogonally into its projection onto the nested
//! coarse space and the complement: `v = P·y + z` with `y = G⁻¹PᵀM_h v` and
//! `PᵀM_h z = 0`, where `P` is the prolongation and `G = PᵀM_hP` the coarse Gram
//! matrix. Everything is posed on the spaces with homogeneous Dirichlet data, so only
//! interior coarse basis functions span the large scales.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::operators::DiscreteOperators;
use crate::fem::sparse::{dot, norm_inf, CsrMatrix};
use crate::fem::space::{Basis, VelocitySpace};
use crate::fem::assembly::block_diag;
use crate::linsolve::{self, Factorization};

/// Cap on probe iterations.
pub const PROBE_MAX_ITERATIONS: usize = 10_000;
/// Relative change of the Rayleigh quotient at which a probe stops.
pub const PROBE_TOLERANCE: f64 = 1e-12;

pub struct TwoGridHierarchy {
    coarse: Arc<DiscreteOperators>,
    fine: Arc<DiscreteOperators>,
    prolongation: CsrMatrix,
    prolongation_free: CsrMatrix,
    mass_prolongation: CsrMatrix,
    gram: CsrMatrix,
    gram_factor: Factorization,
}

impl std::fmt::Debug for TwoGridHierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoGridHierarchy")
            .field("H", &self.coarse_size())
            .field("h", &self.fine_size())
            .field("n_coarse_free", &self.n_coarse_free())
            .field("n_fine_free", &self.n_fine_free())
            .finish()
    }
}

/// Scalar nodal interpolation of coarse basis functions at fine nodes.
fn scalar_prolongation(coarse: &VelocitySpace, fine: &VelocitySpace) -> Result<CsrMatrix> {
    if coarse.kind() != fine.kind() {
        return Err(Error::NonNestedSpaces(format!("element kinds differ ({} vs {})", coarse.kind(), fine.kind())));
    }
    let cl = coarse.mesh().level();
    if fine.mesh().level() < cl || fine.mesh().ancestor(cl).is_none_or(|m| !std::ptr::eq(m, coarse.mesh().as_ref())) {
        return Err(Error::NonNestedSpaces("fine mesh does not refine the coarse mesh".into()));
    }
    let basis = coarse.basis();
    let nl = basis.n_local();
    let mut seen = vec![false; fine.n_nodes()];
    let mut trip = Vec::new();
    let mut phi = [0.0; 6];
    for t in 0..fine.n_cells() {
        let ct = fine.mesh().ancestor_triangle(t, cl).expect("nested meshes");
        let geo = coarse.geometry(ct);
        let cnodes = coarse.cell_nodes(ct);
        for &node in fine.cell_nodes(t) {
            if seen[node] {
                continue;
            }
            seen[node] = true;
            let l = geo.barycentric(fine.node_coords()[node]);
            basis.values(&l, &mut phi);
            for a in 0..nl {
                if phi[a].abs() > 1e-13 {
                    trip.push((node, cnodes[a], phi[a]));
                }
            }
        }
    }
    debug_assert!(basis == Basis::P1 || basis == Basis::P2);
    Ok(CsrMatrix::from_triplets(fine.n_nodes(), coarse.n_nodes(), trip))
}

impl TwoGridHierarchy {
    pub fn build(coarse: Arc<DiscreteOperators>, fine: Arc<DiscreteOperators>) -> Result<Self> {
        let prolongation = block_diag(&scalar_prolongation(&coarse.space, &fine.space)?);
        let prolongation_free = prolongation.select(
            fine.bc.full_to_free(),
            fine.n_free(),
            coarse.bc.full_to_free(),
            coarse.n_free(),
        );
        let mass_prolongation = fine.mass_free.matmul(&prolongation_free)?;
        let gram = prolongation_free.transpose().matmul(&mass_prolongation)?;
        let gram_factor = linsolve::factor(&gram)?;
        Ok(TwoGridHierarchy { coarse, fine, prolongation, prolongation_free, mass_prolongation, gram, gram_factor })
    }

    pub fn coarse(&self) -> &Arc<DiscreteOperators> {
        &self.coarse
    }

    pub fn fine(&self) -> &Arc<DiscreteOperators> {
        &self.fine
    }

    /// Nominal coarse mesh size `H`.
    pub fn coarse_size(&self) -> f64 {
        self.coarse.space.mesh_size()
    }

    /// Nominal fine mesh size `h`.
    pub fn fine_size(&self) -> f64 {
        self.fine.space.mesh_size()
    }

    pub fn n_coarse_free(&self) -> usize {
        self.coarse.n_free()
    }

    pub fn n_fine_free(&self) -> usize {
        self.fine.n_free()
    }

    /// True when the complement space is `{0}`.
    pub fn is_degenerate(&self) -> bool {
        self.n_coarse_free() == self.n_fine_free()
    }

    /// Full prolongation (all dofs, `n_h × n_H`).
    pub fn prolongation(&self) -> &CsrMatrix {
        &self.prolongation
    }

    /// Prolongation between the free dofs.
    pub fn prolongation_free(&self) -> &CsrMatrix {
        &self.prolongation_free
    }

    /// `M_h P` on free dofs.
    pub fn mass_prolongation(&self) -> &CsrMatrix {
        &self.mass_prolongation
    }

    /// `G = PᵀM_hP` on free dofs.
    pub fn gram(&self) -> &CsrMatrix {
        &self.gram
    }

    pub fn gram_factor(&self) -> &Factorization {
        &self.gram_factor
    }

    /// Coarse coefficients (full) to fine coefficients (full).
    pub fn prolongate(&self, y: &[f64]) -> Vec<f64> {
        self.prolongation.mul_vec(y)
    }

    /// L² projection `y = P_H v` (full coefficient vectors in and out).
    pub fn project_coarse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.fine.space.check_len(v)?;
        let y = self.project_free(&self.fine.bc.reduce_vec(v))?;
        Ok(self.coarse.bc.expand_vec(&y))
    }

    /// Projection on free dofs: solves `G y = PᵀM_h v`.
    pub fn project_free(&self, v_free: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.mass_prolongation.mul_transpose_vec(v_free);
        self.gram_factor.solve(&rhs)
    }

    /// `(I − M_hPG⁻¹Pᵀ) r`: removes from a residual (dual vector on free fine dofs)
    /// its action on the coarse space, keeping only what the complement sees.
    pub fn complement_dual(&self, r_free: &[f64]) -> Result<Vec<f64>> {
        let c = self.gram_factor.solve(&self.prolongation_free.mul_transpose_vec(r_free))?;
        let mc = self.mass_prolongation.mul_vec(&c);
        Ok(r_free.iter().zip(&mc).map(|(a, b)| a - b).collect())
    }

    /// `‖PᵀM_h z‖∞` for full fine coefficients.
    pub fn complement_residual(&self, z: &[f64]) -> f64 {
        norm_inf(&self.mass_prolongation.mul_transpose_vec(&self.fine.bc.reduce_vec(z)))
    }

    pub fn split(&self, v: &[f64]) -> Result<SplitField> {
        let y = self.project_coarse(v)?;
        let py = self.prolongate(&y);
        let z: Vec<f64> = v.iter().zip(&py).map(|(a, b)| a - b).collect();
        Ok(SplitField { y, z, u: v.to_vec() })
    }

    /// `‖Py‖` of a coarse coefficient vector (equals `sqrt(yᵀGy)`).
    pub fn coarse_l2(&self, y: &[f64]) -> f64 {
        self.coarse.l2(y)
    }

    /// Saddle matrix `[A  −M_hP; (M_hP)ᵀ  0]` restricting the stiffness to the complement.
    fn complement_stiffness_system(&self) -> Result<Factorization> {
        let nf = self.n_fine_free();
        let nc = self.n_coarse_free();
        let mut trip = Vec::with_capacity(self.fine.stiffness_free.nnz() + 2 * self.mass_prolongation.nnz());
        push_block(&mut trip, &self.fine.stiffness_free, 0, 0, 1.0);
        push_block(&mut trip, &self.mass_prolongation, 0, nf, -1.0);
        push_block(&mut trip, &self.mass_prolongation.transpose(), nf, 0, 1.0);
        // structural zeros keep the diagonal present for the pivoting LU
        for k in 0..nc {
            trip.push((nf + k, nf + k, 0.0));
        }
        linsolve::factor(&CsrMatrix::from_triplets(nf + nc, nf + nc, trip))
    }

    /// Largest `‖χ‖/‖∇χ‖` over the complement space (power iteration on the
    /// generalized eigenproblem of `(M, A)` restricted to `PᵀM_hχ = 0`).
    pub fn probe_complement_poincare(&self) -> Result<PoincareProbe> {
        if self.is_degenerate() {
            return Ok(PoincareProbe { constant: 0.0, iterations: 0 });
        }
        let nf = self.n_fine_free();
        let nc = self.n_coarse_free();
        let sys = self.complement_stiffness_system()?;
        let ones = vec![1.0; nf];
        let y = self.project_free(&ones)?;
        let py = self.prolongation_free.mul_vec(&y);
        let start: Vec<f64> = ones.iter().zip(&py).map(|(a, b)| a - b).collect();
        let m = &self.fine.mass_free;
        let a = &self.fine.stiffness_free;
        let (lambda, iterations) = power_iteration(start, m, a, |x| {
            let mut rhs = m.mul_vec(x);
            rhs.extend(std::iter::repeat_n(0.0, nc));
            let mut sol = sys.solve(&rhs)?;
            sol.truncate(nf);
            Ok(sol)
        })?;
        Ok(PoincareProbe { constant: lambda.sqrt(), iterations })
    }

    /// Largest `‖v‖/‖∇v‖` over the whole fine space.
    pub fn probe_full_poincare(&self) -> Result<PoincareProbe> {
        let fine = &self.fine;
        let fa = linsolve::factor(&fine.stiffness_free)?;
        let start = vec![1.0; fine.n_free()];
        let (lambda, iterations) =
            power_iteration(start, &fine.mass_free, &fine.stiffness_free, |x| fa.solve(&fine.mass_free.mul_vec(x)))?;
        Ok(PoincareProbe { constant: lambda.sqrt(), iterations })
    }

    /// `sup |a(φ,χ)| / (‖∇φ‖‖∇χ‖)` over coarse `φ` and complement `χ`: the cosine of
    /// the angle between the two subspaces in the energy inner product.
    pub fn probe_strengthened_cs(&self) -> Result<CauchySchwarzProbe> {
        if self.is_degenerate() {
            return Ok(CauchySchwarzProbe { one_minus_rho: 0.0, iterations: 0 });
        }
        let nf = self.n_fine_free();
        let sys = self.complement_stiffness_system()?;
        let a = &self.fine.stiffness_free;
        let p = &self.prolongation_free;
        let coarse_a = p.transpose().matmul(&a.matmul(p)?)?;
        let coarse_fa = linsolve::factor(&coarse_a)?;
        let nc = self.n_coarse_free();
        let start = vec![1.0; nc];
        // Rayleigh quotient yᵀA_H(Ty) / yᵀA_H y with T = A_H⁻¹PᵀA·Proj_S·P.
        let (sigma2, iterations) = power_iteration_self(start, &coarse_a, |y| {
            let mut rhs = a.mul_vec(&p.mul_vec(y));
            rhs.extend(std::iter::repeat_n(0.0, nc));
            let mut chi = sys.solve(&rhs)?;
            chi.truncate(nf);
            coarse_fa.solve(&p.mul_transpose_vec(&a.mul_vec(&chi)))
        })?;
        Ok(CauchySchwarzProbe { one_minus_rho: sigma2.max(0.0).sqrt(), iterations })
    }

    pub fn smallness_report(&self, y: &[f64], nu: f64) -> SmallnessReport {
        let h = self.coarse_size();
        let l_h = h.ln().abs().sqrt();
        let y_norm = self.coarse_l2(y);
        SmallnessReport { coarse_h: h, l_h, y_norm, product: l_h * y_norm, nu }
    }
}

/// Monitoring data for the smallness condition `ν − c·L_H·‖y^H‖ > 0`; the constant
/// `c` is not computable, so only the product `L_H‖y^H‖` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    #[serde(rename = "H")]
    pub coarse_h: f64,
    pub l_h: f64,
    pub y_norm: f64,
    pub product: f64,
    pub nu: f64,
}

/// `L_H = |log H|^{1/2}`.
pub fn log_factor(h: f64) -> f64 {
    h.ln().abs().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareProbe {
    pub constant: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchySchwarzProbe {
    pub one_minus_rho: f64,
    pub iterations: usize,
}

impl CauchySchwarzProbe {
    pub fn rho(&self) -> f64 {
        1.0 - self.one_minus_rho
    }
}

/// Output of the `probe` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    #[serde(rename = "H")]
    pub coarse_h: f64,
    pub h: f64,
    pub c_poincare: f64,
    #[serde(rename = "c_over_H")]
    pub c_over_h: f64,
    pub one_minus_rho: f64,
    pub rho: f64,
}

impl TwoGridHierarchy {
    pub fn probe_report(&self) -> Result<ProbeReport> {
        let c = self.probe_complement_poincare()?.constant;
        let cs = self.probe_strengthened_cs()?;
        Ok(ProbeReport {
            coarse_h: self.coarse_size(),
            h: self.fine_size(),
            c_poincare: c,
            c_over_h: c / self.coarse_size(),
            one_minus_rho: cs.one_minus_rho,
            rho: cs.rho(),
        })
    }
}

/// Large/small scale decomposition of a fine field (full coefficient vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitField {
    /// Coarse coefficients of the large scales.
    pub y: Vec<f64>,
    /// Fine coefficients of the small scales.
    pub z: Vec<f64>,
    /// Fine coefficients of `P·y + z`.
    pub u: Vec<f64>,
}

impl SplitField {
    pub fn reassemble(&self, hier: &TwoGridHierarchy) -> Vec<f64> {
        let py = hier.prolongate(&self.y);
        py.iter().zip(&self.z).map(|(a, b)| a + b).collect()
    }
}

pub(crate) fn push_block(trip: &mut Vec<(usize, usize, f64)>, m: &CsrMatrix, r0: usize, c0: usize, scale: f64) {
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        trip.extend(cols.iter().zip(vals).map(|(&j, &v)| (r0 + i, c0 + j, scale * v)));
    }
}

/// Power iteration for the largest `xᵀMx / xᵀAx`, where `apply` maps `x` to the
/// (constrained) solution of `A x' = M x`.
fn power_iteration(
    mut x: Vec<f64>,
    m: &CsrMatrix,
    a: &CsrMatrix,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(f64, usize)> {
    let mut prev = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=PROBE_MAX_ITERATIONS {
        let scale = m.bilinear(&x, &x).sqrt();
        if scale == 0.0 {
            return Ok((0.0, it));
        }
        x.iter_mut().for_each(|v| *v /= scale);
        let lambda = 1.0 / a.bilinear(&x, &x);
        if it > 1 {
            change = ((lambda - prev) / lambda).abs();
            if change <= PROBE_TOLERANCE {
                return Ok((lambda, it));
            }
        }
        prev = lambda;
        x = apply(&x)?;
    }
    Err(Error::NonConverged { iterations: PROBE_MAX_ITERATIONS, last_change: change })
}

/// Power iteration for an operator `T` self-adjoint in the inner product of `a`;
/// returns its largest eigenvalue.
fn power_iteration_self(
    mut y: Vec<f64>,
    a: &CsrMatrix,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(f64, usize)> {
    let mut prev = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=PROBE_MAX_ITERATIONS {
        let scale = a.bilinear(&y, &y).sqrt();
        if scale == 0.0 {
            return Ok((0.0, it));
        }
        y.iter_mut().for_each(|v| *v /= scale);
        let ty = apply(&y)?;
        let ay = a.mul_vec(&y);
        let lambda = dot(&ay, &ty);
        if it > 1 {
            change = ((lambda - prev) / lambda).abs();
            if change <= PROBE_TOLERANCE {
                return Ok((lambda, it));
            }
        }
        prev = lambda;
        y = ty;
    }
    Err(Error::NonConverged { iterations: PROBE_MAX_ITERATIONS, last_change: change })
}
