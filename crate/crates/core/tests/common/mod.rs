#![allow(dead_code)]

use std::sync::Arc;

use nlgalerkin::fem::{DiscreteOperators, ElementKind, VelocitySpace};
use nlgalerkin::harness::LevelCache;
use nlgalerkin::mesh::{MeshHierarchy, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn space(level: usize, kind: ElementKind) -> Arc<VelocitySpace> {
    let extra = if kind == ElementKind::P1isoP2 { 1 } else { 0 };
    VelocitySpace::new(&MeshHierarchy::new(level + extra), level, kind).unwrap()
}

pub fn operators(level: usize, kind: ElementKind) -> Arc<DiscreteOperators> {
    LevelCache::new(level, kind).operators(level).unwrap()
}

/// Random coefficients that vanish on Dirichlet dofs.
pub fn random_field(space: &VelocitySpace, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for d in space.dirichlet_dofs() {
        v[d] = 0.0;
    }
    v
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

pub fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((0.5 * (x + 1.0), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Collapsed-square rule on a triangle: (barycentric point, weight fraction of area).
pub fn duffy_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::new();
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            let (l1, l2) = (s * (1.0 - t), t);
            out.push(([1.0 - l1 - l2, l1, l2], 2.0 * ws * wt * (1.0 - t)));
        }
    }
    out
}

pub struct Tri {
    pub p: [Point; 3],
    pub area: f64,
    /// `grad[k]` is the constant gradient of barycentric coordinate `k`.
    pub grad: [[f64; 2]; 3],
}

impl Tri {
    pub fn new(p: [Point; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grad = [[0.0; 2]; 3];
        for k in 0..3 {
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            grad[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        Tri { p, area: 0.5 * det.abs(), grad }
    }

    pub fn point(&self, l: &[f64; 3]) -> Point {
        [0, 1].map(|d| l[0] * self.p[0][d] + l[1] * self.p[1][d] + l[2] * self.p[2][d])
    }

    pub fn bary(&self, x: Point) -> [f64; 3] {
        let mut l = [0.0; 3];
        for k in 0..3 {
            let b = self.p[(k + 1) % 3];
            l[k] = self.grad[k][0] * (x[0] - b[0]) + self.grad[k][1] * (x[1] - b[1]);
        }
        l
    }

    pub fn contains(&self, x: Point) -> bool {
        self.bary(x).iter().all(|&l| l > -1e-12)
    }
}

fn close(a: Point, b: Point) -> bool {
    (a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13
}

/// Lagrange shape function of a node on a triangle, written from its nodal definition.
#[derive(Clone, Copy)]
pub enum Shape {
    P1Vertex(usize),
    P2Vertex(usize),
    P2Edge(usize, usize),
}

impl Shape {
    pub fn value(self, l: &[f64; 3]) -> f64 {
        match self {
            Shape::P1Vertex(k) => l[k],
            Shape::P2Vertex(k) => l[k] * (2.0 * l[k] - 1.0),
            Shape::P2Edge(a, b) => 4.0 * l[a] * l[b],
        }
    }

    pub fn grad(self, l: &[f64; 3], tri: &Tri) -> [f64; 2] {
        let g = &tri.grad;
        match self {
            Shape::P1Vertex(k) => g[k],
            Shape::P2Vertex(k) => [0, 1].map(|d| (4.0 * l[k] - 1.0) * g[k][d]),
            Shape::P2Edge(a, b) => [0, 1].map(|d| 4.0 * (l[a] * g[b][d] + l[b] * g[a][d])),
        }
    }
}

/// Global nodes supported on each velocity triangle, found by coordinates.
pub fn local_shapes(space: &VelocitySpace) -> Vec<(Tri, Vec<(usize, Shape)>)> {
    let mesh = space.mesh();
    let p2 = space.kind() == ElementKind::TaylorHoodP2;
    (0..mesh.n_triangles())
        .map(|t| {
            let tri = Tri::new(mesh.triangle_points(t));
            let mut shapes = Vec::new();
            for (i, &x) in space.node_coords().iter().enumerate() {
                for k in 0..3 {
                    if close(x, tri.p[k]) {
                        shapes.push((i, if p2 { Shape::P2Vertex(k) } else { Shape::P1Vertex(k) }));
                    }
                    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                    let mid = [0.5 * (tri.p[a][0] + tri.p[b][0]), 0.5 * (tri.p[a][1] + tri.p[b][1])];
                    if p2 && close(x, mid) {
                        shapes.push((i, Shape::P2Edge(a, b)));
                    }
                }
            }
            assert_eq!(shapes.len(), if p2 { 6 } else { 3 });
            (tri, shapes)
        })
        .collect()
}

/// Value and gradient (`g[c][d] = ∂_d v_c`) of a blocked vector field at a point.
pub fn field(v: &[f64], n: usize, shapes: &[(usize, Shape)], tri: &Tri, l: &[f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut val = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for &(i, s) in shapes {
        let (phi, dphi) = (s.value(l), s.grad(l, tri));
        for c in 0..2 {
            val[c] += v[c * n + i] * phi;
            g[c][0] += v[c * n + i] * dphi[0];
            g[c][1] += v[c * n + i] * dphi[1];
        }
    }
    (val, g)
}

/// Dense `b(v, w, φ) = ½(v·∇w, φ) − ½(v·∇φ, w)`.
pub fn trilinear_oracle(space: &VelocitySpace, v: &[f64], w: &[f64], phi: &[f64]) -> f64 {
    let n = space.n_nodes();
    let rule = duffy_rule(8);
    let mut total = 0.0;
    for (tri, shapes) in local_shapes(space) {
        for (l, wq) in &rule {
            let (vv, _) = field(v, n, &shapes, &tri, l);
            let (wv, wg) = field(w, n, &shapes, &tri, l);
            let (pv, pg) = field(phi, n, &shapes, &tri, l);
            let mut s = 0.0;
            for c in 0..2 {
                s += (vv[0] * wg[c][0] + vv[1] * wg[c][1]) * pv[c] - (vv[0] * pg[c][0] + vv[1] * pg[c][1]) * wv[c];
            }
            total += 0.5 * wq * tri.area * s;
        }
    }
    total
}

fn dense(n: usize, m: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; m]; n]
}

/// Dense scalar matrix `Σ_T ∫ form(φ_j, ∇φ_j, φ_i, ∇φ_i)`, placed on both components.
pub fn vector_oracle(space: &VelocitySpace, form: impl Fn(Point, f64, [f64; 2], f64, [f64; 2]) -> f64) -> Vec<Vec<f64>> {
    let n = space.n_nodes();
    let rule = duffy_rule(8);
    let mut a = dense(2 * n, 2 * n);
    for (tri, shapes) in local_shapes(space) {
        for (l, wq) in &rule {
            let x = tri.point(l);
            for &(i, si) in &shapes {
                for &(j, sj) in &shapes {
                    let v = wq * tri.area * form(x, sj.value(l), sj.grad(l, &tri), si.value(l), si.grad(l, &tri));
                    a[i][j] += v;
                    a[n + i][n + j] += v;
                }
            }
        }
    }
    a
}

pub fn divergence_oracle(space: &VelocitySpace) -> Vec<Vec<f64>> {
    let n = space.n_nodes();
    let pmesh = space.pressure_mesh();
    let ptris: Vec<Tri> = (0..pmesh.n_triangles()).map(|t| Tri::new(pmesh.triangle_points(t))).collect();
    let rule = duffy_rule(8);
    let mut b = dense(pmesh.n_vertices(), 2 * n);
    for (tri, shapes) in local_shapes(space) {
        let centroid = tri.point(&[1.0 / 3.0; 3]);
        let pt = ptris.iter().position(|p| p.contains(centroid)).unwrap();
        let pverts = pmesh.triangles()[pt];
        for (l, wq) in &rule {
            let psi = ptris[pt].bary(tri.point(l));
            for (k, &q) in pverts.iter().enumerate() {
                for &(i, s) in &shapes {
                    let g = s.grad(l, &tri);
                    for c in 0..2 {
                        b[q][c * n + i] += wq * tri.area * psi[k] * g[c];
                    }
                }
            }
        }
    }
    b
}

/// Dense `C[i][j] = b(w, φ_j, φ_i)`.
pub fn convection_oracle(space: &VelocitySpace, w: &[f64]) -> Vec<Vec<f64>> {
    let n = space.n_nodes();
    let rule = duffy_rule(8);
    let mut a = dense(2 * n, 2 * n);
    for (tri, shapes) in local_shapes(space) {
        for (l, wq) in &rule {
            let (wv, _) = field(w, n, &shapes, &tri, l);
            for &(i, si) in &shapes {
                for &(j, sj) in &shapes {
                    let (gi, gj) = (si.grad(l, &tri), sj.grad(l, &tri));
                    let adv_j = wv[0] * gj[0] + wv[1] * gj[1];
                    let adv_i = wv[0] * gi[0] + wv[1] * gi[1];
                    let v = 0.5 * wq * tri.area * (adv_j * si.value(l) - adv_i * sj.value(l));
                    a[i][j] += v;
                    a[n + i][n + j] += v;
                }
            }
        }
    }
    a
}

pub fn load_oracle(space: &VelocitySpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let n = space.n_nodes();
    let rule = duffy_rule(8);
    let mut out = vec![0.0; 2 * n];
    for (tri, shapes) in local_shapes(space) {
        for (l, wq) in &rule {
            let fx = f(tri.point(l));
            for &(i, s) in &shapes {
                out[i] += wq * tri.area * fx[0] * s.value(l);
                out[n + i] += wq * tri.area * fx[1] * s.value(l);
            }
        }
    }
    out
}

/// Relative discrepancies of every assembled operator against its dense oracle.
pub fn assembly_discrepancies(space: &VelocitySpace, seed: u64) -> Vec<(String, f64)> {
    use nlgalerkin::fem::{self, PressureSpace};
    let rel = |a: &[Vec<f64>], o: &[Vec<f64>]| max_abs_diff(a, o) / max_abs(o);
    let mut r = rng(seed);
    let w: Vec<f64> = (0..space.n_dofs()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..space.n_dofs()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let phi: Vec<f64> = (0..space.n_dofs()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let pressure = PressureSpace::new(space);
    let f = |x: Point| [x[0] * x[0] * x[1] + 1.0, x[0] - x[1].powi(3)];
    let load = fem::assemble_load(space, f);
    let load_o = load_oracle(space, f);
    let b = fem::trilinear_b(space, &v, &w, &phi).unwrap();
    let b_o = trilinear_oracle(space, &v, &w, &phi);
    let tag = format!("{}", space.kind());
    vec![
        (
            format!("{tag} mass"),
            rel(&fem::assemble_mass(space).to_dense(), &vector_oracle(space, |_, u, _, t, _| u * t)),
        ),
        (
            format!("{tag} stiffness"),
            rel(
                &fem::assemble_stiffness(space).to_dense(),
                &vector_oracle(space, |_, _, gu, _, gt| gu[0] * gt[0] + gu[1] * gt[1]),
            ),
        ),
        (
            format!("{tag} divergence"),
            rel(&fem::assemble_divergence(space, &pressure).unwrap().to_dense(), &divergence_oracle(space)),
        ),
        (
            format!("{tag} convection"),
            rel(&fem::assemble_convection(space, &w).unwrap().to_dense(), &convection_oracle(space, &w)),
        ),
        (
            format!("{tag} load"),
            load.iter().zip(&load_o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                / load_o.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        ),
        (format!("{tag} trilinear"), (b - b_o).abs() / b_o.abs()),
    ]
}

/// The two smallest meshes used by the assembly oracles (8 velocity triangles each).
pub fn oracle_spaces() -> Vec<Arc<VelocitySpace>> {
    vec![space(0, ElementKind::P1isoP2), space(1, ElementKind::TaylorHoodP2)]
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn on_boundary(x: Point) -> bool {
    x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0
}

/// L² projection of a fine field onto the coarse space from the dense normal
/// equations `(y, φ) = (v, φ)` for all interior coarse basis functions.
pub fn projection_oracle(coarse: &VelocitySpace, fine: &VelocitySpace, v: &[f64]) -> Vec<f64> {
    let (nc, nf) = (coarse.n_nodes(), fine.n_nodes());
    let cshapes = local_shapes(coarse);
    let interior: Vec<usize> = (0..nc).filter(|&i| !on_boundary(coarse.node_coords()[i])).collect();
    let index = |i: usize| interior.iter().position(|&k| k == i);
    let m = interior.len();
    let rule = duffy_rule(8);
    let mut g = vec![vec![0.0; m]; m];
    for (tri, shapes) in &cshapes {
        for (l, wq) in &rule {
            for &(i, si) in shapes {
                for &(j, sj) in shapes {
                    if let (Some(a), Some(b)) = (index(i), index(j)) {
                        g[a][b] += wq * tri.area * si.value(l) * sj.value(l);
                    }
                }
            }
        }
    }
    let mut y = vec![0.0; 2 * nc];
    for c in 0..2 {
        let mut rhs = vec![0.0; m];
        for (ftri, fshapes) in local_shapes(fine) {
            let centroid = ftri.point(&[1.0 / 3.0; 3]);
            let (ctri, cs) = cshapes.iter().find(|(t, _)| t.contains(centroid)).unwrap();
            for (l, wq) in &rule {
                let x = ftri.point(l);
                let (val, _) = field(v, nf, &fshapes, &ftri, l);
                let cl = ctri.bary(x);
                for &(i, s) in cs {
                    if let Some(a) = index(i) {
                        rhs[a] += wq * ftri.area * val[c] * s.value(&cl);
                    }
                }
            }
        }
        let sol = dense_solve(g.clone(), rhs);
        for (a, &i) in interior.iter().enumerate() {
            y[c * nc + i] = sol[a];
        }
    }
    y
}
