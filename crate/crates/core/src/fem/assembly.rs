//! Element loops for every bilinear and trilinear form of the discrete system.
//!
//! Scalar matrices share one sparsity pattern per space; each element scatters into
//! precomputed value slots in element order, so re-assembly (the convection matrix is
//! rebuilt every Picard iterate) is cheap and bit-reproducible.

use crate::error::{Error, Result};
use crate::fem::quadrature::TriangleRule;
use crate::fem::space::{Basis, ElementGeometry, PressureSpace, VelocitySpace};
use crate::fem::sparse::CsrMatrix;
use crate::mesh::Point;

const MAX_LOCAL: usize = 6;

/// Basis values and gradients at one quadrature point of one element.
struct PointEval {
    x: Point,
    weight: f64,
    phi: [f64; MAX_LOCAL],
    grad: [[f64; 2]; MAX_LOCAL],
}

fn eval_cell(space: &VelocitySpace, t: usize, rule: &TriangleRule, out: &mut Vec<PointEval>) {
    out.clear();
    let geo = space.geometry(t);
    let basis = space.basis();
    for (l, &w) in rule.points.iter().zip(&rule.weights) {
        let mut e = PointEval { x: geo.to_physical(l), weight: w * geo.area, phi: [0.0; MAX_LOCAL], grad: [[0.0; 2]; MAX_LOCAL] };
        basis.values(l, &mut e.phi);
        basis.gradients(l, &geo, &mut e.grad);
        out.push(e);
    }
}

/// Value and gradient of the vector field `coeffs` at a quadrature point of cell `nodes`.
fn field_at(coeffs: &[f64], n_nodes: usize, nodes: &[usize], e: &PointEval) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for (a, &node) in nodes.iter().enumerate() {
        for c in 0..2 {
            let coef = coeffs[c * n_nodes + node];
            v[c] += coef * e.phi[a];
            g[c][0] += coef * e.grad[a][0];
            g[c][1] += coef * e.grad[a][1];
        }
    }
    (v, g)
}

/// Scalar sparsity pattern of a velocity space with per-element value slots.
#[derive(Debug, Clone)]
pub struct ScalarPattern {
    template: CsrMatrix,
    slots: Vec<usize>,
    n_local: usize,
}

impl ScalarPattern {
    pub fn new(space: &VelocitySpace) -> Self {
        let n = space.n_nodes();
        let nl = space.basis().n_local();
        let mut trip = Vec::with_capacity(space.n_cells() * nl * nl);
        for t in 0..space.n_cells() {
            let nodes = space.cell_nodes(t);
            for &i in nodes {
                for &j in nodes {
                    trip.push((i, j, 0.0));
                }
            }
        }
        let template = CsrMatrix::from_triplets(n, n, trip);
        let mut slots = Vec::with_capacity(space.n_cells() * nl * nl);
        for t in 0..space.n_cells() {
            let nodes = space.cell_nodes(t);
            for &i in nodes {
                for &j in nodes {
                    slots.push(template.position(i, j).expect("entry in pattern"));
                }
            }
        }
        ScalarPattern { template, slots, n_local: nl }
    }

    pub fn template(&self) -> &CsrMatrix {
        &self.template
    }

    /// Assembles `Σ_T local(T)` where `local` fills an `n_local × n_local` row-major block.
    fn assemble(&self, space: &VelocitySpace, rule: &TriangleRule, mut local: impl FnMut(usize, &[PointEval], &mut [f64])) -> CsrMatrix {
        let nl = self.n_local;
        let mut m = self.template.clone();
        let mut block = vec![0.0; nl * nl];
        let mut evals = Vec::with_capacity(rule.len());
        for t in 0..space.n_cells() {
            eval_cell(space, t, rule, &mut evals);
            block.iter_mut().for_each(|b| *b = 0.0);
            local(t, &evals, &mut block);
            let slots = &self.slots[t * nl * nl..(t + 1) * nl * nl];
            let vals = m.values_mut();
            for (&s, &b) in slots.iter().zip(&block) {
                vals[s] += b;
            }
        }
        m
    }
}

fn mass_rule(space: &VelocitySpace) -> TriangleRule {
    match space.basis() {
        Basis::P1 => TriangleRule::degree2(),
        Basis::P2 => TriangleRule::degree5(),
    }
}

/// Scalar mass matrix `(φ_j, φ_i)`.
pub fn assemble_mass_scalar(space: &VelocitySpace, pattern: &ScalarPattern) -> CsrMatrix {
    let nl = space.basis().n_local();
    pattern.assemble(space, &mass_rule(space), |_, evals, block| {
        for e in evals {
            for i in 0..nl {
                for j in 0..nl {
                    block[i * nl + j] += e.weight * e.phi[i] * e.phi[j];
                }
            }
        }
    })
}

/// Scalar stiffness matrix `(∇φ_j, ∇φ_i)`.
pub fn assemble_stiffness_scalar(space: &VelocitySpace, pattern: &ScalarPattern) -> CsrMatrix {
    let nl = space.basis().n_local();
    pattern.assemble(space, &TriangleRule::degree2(), |_, evals, block| {
        for e in evals {
            for i in 0..nl {
                for j in 0..nl {
                    block[i * nl + j] += e.weight * (e.grad[i][0] * e.grad[j][0] + e.grad[i][1] * e.grad[j][1]);
                }
            }
        }
    })
}

/// Scalar skew convection `N(w)[i][j] = ½(w·∇φ_j, φ_i) − ½(w·∇φ_i, φ_j)`.
pub fn assemble_convection_scalar(space: &VelocitySpace, pattern: &ScalarPattern, w: &[f64]) -> Result<CsrMatrix> {
    space.check_len(w)?;
    let nl = space.basis().n_local();
    let n = space.n_nodes();
    Ok(pattern.assemble(space, &TriangleRule::degree5(), |t, evals, block| {
        let nodes = space.cell_nodes(t);
        for e in evals {
            let (wv, _) = field_at(w, n, nodes, e);
            let mut adv = [0.0; MAX_LOCAL];
            for a in 0..nl {
                adv[a] = wv[0] * e.grad[a][0] + wv[1] * e.grad[a][1];
            }
            for i in 0..nl {
                for j in 0..nl {
                    block[i * nl + j] += 0.5 * e.weight * (adv[j] * e.phi[i] - adv[i] * e.phi[j]);
                }
            }
        }
    }))
}

/// `diag(S, S)` for the blocked dof layout.
pub fn block_diag(scalar: &CsrMatrix) -> CsrMatrix {
    let (n, m) = (scalar.nrows(), scalar.ncols());
    let mut trip = Vec::with_capacity(2 * scalar.nnz());
    for c in 0..2 {
        for i in 0..n {
            let (cols, vals) = scalar.row(i);
            trip.extend(cols.iter().zip(vals).map(|(&j, &v)| (c * n + i, c * m + j, v)));
        }
    }
    CsrMatrix::from_triplets(2 * n, 2 * m, trip)
}

/// Vector mass matrix `M[i][j] = (φ_j, φ_i)`.
pub fn assemble_mass(space: &VelocitySpace) -> CsrMatrix {
    block_diag(&assemble_mass_scalar(space, &ScalarPattern::new(space)))
}

/// Vector stiffness matrix `A[i][j] = (∇φ_j, ∇φ_i)`.
pub fn assemble_stiffness(space: &VelocitySpace) -> CsrMatrix {
    block_diag(&assemble_stiffness_scalar(space, &ScalarPattern::new(space)))
}

/// Vector convection matrix with transport field `w`: `N(w)[i][j] = b(w, φ_j, φ_i)`.
pub fn assemble_convection(space: &VelocitySpace, w: &[f64]) -> Result<CsrMatrix> {
    Ok(block_diag(&assemble_convection_scalar(space, &ScalarPattern::new(space), w)?))
}

fn p1_values(geo: &ElementGeometry, x: Point) -> [f64; 3] {
    geo.barycentric(x)
}

/// `B[q][v] = (∇·φ_v, ψ_q)`, integrated on the velocity mesh.
pub fn assemble_divergence(space: &VelocitySpace, pressure: &PressureSpace) -> Result<CsrMatrix> {
    if !std::sync::Arc::ptr_eq(space.pressure_mesh(), pressure.mesh()) {
        return Err(Error::IncompatibleMeshes("pressure space is not built on the velocity space's pressure mesh".into()));
    }
    let n = space.n_nodes();
    let nl = space.basis().n_local();
    let pmesh = pressure.mesh();
    // degree(∇φ) + degree(ψ) ≤ 2
    let rule = TriangleRule::degree2();
    let mut evals = Vec::with_capacity(rule.len());
    let mut trip = Vec::with_capacity(space.n_cells() * 3 * 2 * nl);
    for t in 0..space.n_cells() {
        eval_cell(space, t, &rule, &mut evals);
        let pt = space.pressure_triangle(t);
        let pnodes = pmesh.triangles()[pt];
        let pgeo = ElementGeometry::new(pmesh.triangle_points(pt));
        let nodes = space.cell_nodes(t);
        let mut local = vec![0.0; 3 * 2 * nl];
        for e in &evals {
            let psi = p1_values(&pgeo, e.x);
            for q in 0..3 {
                for a in 0..nl {
                    for c in 0..2 {
                        local[(q * nl + a) * 2 + c] += e.weight * psi[q] * e.grad[a][c];
                    }
                }
            }
        }
        for q in 0..3 {
            for (a, &node) in nodes.iter().enumerate() {
                for c in 0..2 {
                    trip.push((pnodes[q], c * n + node, local[(q * nl + a) * 2 + c]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(pressure.n_dofs(), space.n_dofs(), trip))
}

/// `∫ ψ_q` for every pressure basis function.
pub fn pressure_mean_weights(pressure: &PressureSpace) -> Vec<f64> {
    let mesh = pressure.mesh();
    let mut m = vec![0.0; pressure.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.signed_area(t);
        for &v in &mesh.triangles()[t] {
            m[v] += area / 3.0;
        }
    }
    m
}

/// Load vector `(f, φ_i)` for a vector field, degree-5 quadrature.
pub fn assemble_load(space: &VelocitySpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let n = space.n_nodes();
    let nl = space.basis().n_local();
    let rule = TriangleRule::degree5();
    let mut evals = Vec::with_capacity(rule.len());
    let mut out = vec![0.0; 2 * n];
    for t in 0..space.n_cells() {
        eval_cell(space, t, &rule, &mut evals);
        let nodes = space.cell_nodes(t);
        for e in &evals {
            let fv = f(e.x);
            for a in 0..nl {
                out[nodes[a]] += e.weight * fv[0] * e.phi[a];
                out[n + nodes[a]] += e.weight * fv[1] * e.phi[a];
            }
        }
    }
    out
}

/// `r_i = b(w, v, φ_i)` for every basis function `φ_i` (full coefficients), i.e. the
/// convection matrix of `w` applied to `v` without forming it.
pub fn convection_action(space: &VelocitySpace, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    space.check_len(w)?;
    space.check_len(v)?;
    let n = space.n_nodes();
    let nl = space.basis().n_local();
    let rule = TriangleRule::degree5();
    let mut evals = Vec::with_capacity(rule.len());
    let mut out = vec![0.0; 2 * n];
    for t in 0..space.n_cells() {
        eval_cell(space, t, &rule, &mut evals);
        let nodes = space.cell_nodes(t);
        for e in &evals {
            let (wv, _) = field_at(w, n, nodes, e);
            let (vv, vg) = field_at(v, n, nodes, e);
            let w_grad_v = [wv[0] * vg[0][0] + wv[1] * vg[0][1], wv[0] * vg[1][0] + wv[1] * vg[1][1]];
            for a in 0..nl {
                let adv = wv[0] * e.grad[a][0] + wv[1] * e.grad[a][1];
                for c in 0..2 {
                    out[c * n + nodes[a]] += 0.5 * e.weight * (w_grad_v[c] * e.phi[a] - adv * vv[c]);
                }
            }
        }
    }
    Ok(out)
}

/// Skew trilinear form `b(v, w, φ) = ½(v·∇w, φ) − ½(v·∇φ, w)` by direct quadrature.
pub fn trilinear_b(space: &VelocitySpace, v: &[f64], w: &[f64], phi: &[f64]) -> Result<f64> {
    space.check_len(v)?;
    space.check_len(w)?;
    space.check_len(phi)?;
    let n = space.n_nodes();
    let rule = TriangleRule::degree5();
    let mut evals = Vec::with_capacity(rule.len());
    let mut total = 0.0;
    for t in 0..space.n_cells() {
        eval_cell(space, t, &rule, &mut evals);
        let nodes = space.cell_nodes(t);
        for e in &evals {
            let (vv, _) = field_at(v, n, nodes, e);
            let (wv, wg) = field_at(w, n, nodes, e);
            let (pv, pg) = field_at(phi, n, nodes, e);
            let mut s = 0.0;
            for c in 0..2 {
                let v_grad_w = vv[0] * wg[c][0] + vv[1] * wg[c][1];
                let v_grad_phi = vv[0] * pg[c][0] + vv[1] * pg[c][1];
                s += v_grad_w * pv[c] - v_grad_phi * wv[c];
            }
            total += 0.5 * e.weight * s;
        }
    }
    Ok(total)
}

/// `‖f‖` by quadrature.
pub fn l2_norm(space: &VelocitySpace, f: &[f64]) -> Result<f64> {
    Ok(error_norms(space, f, |_| [0.0; 2], |_| [[0.0; 2]; 2])?.0)
}

/// `‖∇f‖` by quadrature.
pub fn h1_seminorm(space: &VelocitySpace, f: &[f64]) -> Result<f64> {
    Ok(error_norms(space, f, |_| [0.0; 2], |_| [[0.0; 2]; 2])?.1)
}

/// `(‖f − u‖, ‖∇(f − u)‖)` with a degree-5 rule; `grad_u[c][d] = ∂_d u_c`.
pub fn error_norms(
    space: &VelocitySpace,
    f: &[f64],
    u: impl Fn(Point) -> [f64; 2],
    grad_u: impl Fn(Point) -> [[f64; 2]; 2],
) -> Result<(f64, f64)> {
    space.check_len(f)?;
    let n = space.n_nodes();
    let rule = TriangleRule::degree5();
    let mut evals = Vec::with_capacity(rule.len());
    let (mut l2, mut h1) = (0.0, 0.0);
    for t in 0..space.n_cells() {
        eval_cell(space, t, &rule, &mut evals);
        let nodes = space.cell_nodes(t);
        for e in &evals {
            let (fv, fg) = field_at(f, n, nodes, e);
            let (uv, ug) = (u(e.x), grad_u(e.x));
            for c in 0..2 {
                l2 += e.weight * (fv[c] - uv[c]).powi(2);
                h1 += e.weight * ((fg[c][0] - ug[c][0]).powi(2) + (fg[c][1] - ug[c][1]).powi(2));
            }
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Value of the field at a point inside cell `t`.
pub fn evaluate_in_cell(space: &VelocitySpace, f: &[f64], t: usize, x: Point) -> [f64; 2] {
    let geo = space.geometry(t);
    let l = geo.barycentric(x);
    let mut phi = [0.0; MAX_LOCAL];
    space.basis().values(&l, &mut phi);
    let n = space.n_nodes();
    let mut v = [0.0; 2];
    for (a, &node) in space.cell_nodes(t).iter().enumerate() {
        v[0] += f[node] * phi[a];
        v[1] += f[n + node] * phi[a];
    }
    v
}
