use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{MeshHierarchy, Point, TriMesh};

/// Velocity/pressure element pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ElementKind {
    /// Bercovier–Pironneau: P1 velocity on the once-refined mesh, P1 pressure.
    #[default]
    #[serde(rename = "p1isop2")]
    P1isoP2,
    /// P2 velocity, P1 pressure on the same mesh.
    #[serde(rename = "th")]
    TaylorHoodP2,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::P1isoP2 => "p1isop2",
            ElementKind::TaylorHoodP2 => "th",
        })
    }
}

impl FromStr for ElementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1isop2" => Ok(ElementKind::P1isoP2),
            "th" | "taylor-hood" => Ok(ElementKind::TaylorHoodP2),
            other => Err(Error::Parse(format!("unknown element `{other}` (expected p1isop2 or th)"))),
        }
    }
}

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let mut grad_lambda = [[0.0; 2]; 3];
        for (i, g) in grad_lambda.iter_mut().enumerate() {
            let a = points[(i + 1) % 3];
            let b = points[(i + 2) % 3];
            *g = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        ElementGeometry { points, area: 0.5 * det, grad_lambda }
    }

    pub fn to_physical(&self, bary: &[f64; 3]) -> Point {
        let mut x = [0.0; 2];
        for (b, p) in bary.iter().zip(&self.points) {
            x[0] += b * p[0];
            x[1] += b * p[1];
        }
        x
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let p0 = self.points[0];
        let mut l = [0.0; 3];
        for i in 1..3 {
            let g = self.grad_lambda[i];
            l[i] = g[0] * (x[0] - p0[0]) + g[1] * (x[1] - p0[1]);
        }
        l[0] = 1.0 - l[1] - l[2];
        l
    }
}

/// Scalar Lagrange basis on a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    P1,
    P2,
}

impl Basis {
    pub fn n_local(self) -> usize {
        match self {
            Basis::P1 => 3,
            Basis::P2 => 6,
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Basis::P1 => 1,
            Basis::P2 => 2,
        }
    }

    /// Basis values at a barycentric point. P2 ordering: three vertices, then the
    /// midpoints of the edges opposite vertex 0, 1, 2.
    pub fn values(self, l: &[f64; 3], out: &mut [f64]) {
        match self {
            Basis::P1 => out[..3].copy_from_slice(l),
            Basis::P2 => {
                for i in 0..3 {
                    out[i] = l[i] * (2.0 * l[i] - 1.0);
                    out[3 + i] = 4.0 * l[(i + 1) % 3] * l[(i + 2) % 3];
                }
            }
        }
    }

    pub fn gradients(self, l: &[f64; 3], geo: &ElementGeometry, out: &mut [[f64; 2]]) {
        let g = &geo.grad_lambda;
        match self {
            Basis::P1 => out[..3].copy_from_slice(g),
            Basis::P2 => {
                for i in 0..3 {
                    let s = 4.0 * l[i] - 1.0;
                    out[i] = [s * g[i][0], s * g[i][1]];
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    out[3 + i] = [
                        4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                        4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
                    ];
                }
            }
        }
    }
}

/// Vector-valued velocity space with homogeneous Dirichlet data on ∂Ω.
///
/// Dofs are blocked by component: node `i` carries dof `i` (x) and `n_nodes + i` (y).
#[derive(Debug)]
pub struct VelocitySpace {
    kind: ElementKind,
    level: usize,
    mesh: Arc<TriMesh>,
    pressure_mesh: Arc<TriMesh>,
    basis: Basis,
    node_coords: Vec<Point>,
    cell_nodes: Vec<usize>,
    boundary_node: Vec<bool>,
}

impl VelocitySpace {
    /// Space for the element pair whose pressure mesh is hierarchy level `level`.
    /// P1isoP2 puts the velocity on level `level + 1`, Taylor–Hood on `level` itself.
    pub fn new(hierarchy: &MeshHierarchy, level: usize, kind: ElementKind) -> Result<Arc<Self>> {
        let velocity_level = match kind {
            ElementKind::P1isoP2 => level + 1,
            ElementKind::TaylorHoodP2 => level,
        };
        if velocity_level > hierarchy.max_level() {
            return Err(Error::InvalidArgument(format!(
                "{kind} at level {level} needs mesh level {velocity_level}, hierarchy stops at {}",
                hierarchy.max_level()
            )));
        }
        let mesh = Arc::clone(hierarchy.level(velocity_level)?);
        let pressure_mesh = Arc::clone(hierarchy.level(level)?);
        Ok(Arc::new(Self::on_meshes(kind, level, mesh, pressure_mesh)?))
    }

    pub fn on_meshes(kind: ElementKind, level: usize, mesh: Arc<TriMesh>, pressure_mesh: Arc<TriMesh>) -> Result<Self> {
        let expected_level = match kind {
            ElementKind::P1isoP2 => pressure_mesh.level() + 1,
            ElementKind::TaylorHoodP2 => pressure_mesh.level(),
        };
        if mesh.level() != expected_level || mesh.ancestor(pressure_mesh.level()).is_none() {
            return Err(Error::IncompatibleMeshes(format!(
                "{kind}: velocity mesh level {} does not match pressure mesh level {}",
                mesh.level(),
                pressure_mesh.level()
            )));
        }
        let nv = mesh.n_vertices();
        let (basis, node_coords, cell_nodes, boundary_node) = match kind {
            ElementKind::P1isoP2 => {
                let cells = mesh.triangles().iter().flat_map(|t| t.iter().copied()).collect();
                let boundary = (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect();
                (Basis::P1, mesh.vertices().to_vec(), cells, boundary)
            }
            ElementKind::TaylorHoodP2 => {
                let mut coords = mesh.vertices().to_vec();
                let mut boundary: Vec<bool> = (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect();
                for (e, &[a, b]) in mesh.edges().iter().enumerate() {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    boundary.push(mesh.is_boundary_edge(e));
                }
                let mut cells = Vec::with_capacity(6 * mesh.n_triangles());
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    cells.extend_from_slice(tri);
                    cells.extend(mesh.triangle_edges(t).iter().map(|&e| nv + e));
                }
                (Basis::P2, coords, cells, boundary)
            }
        };
        Ok(VelocitySpace { kind, level, mesh, pressure_mesh, basis, node_coords, cell_nodes, boundary_node })
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    /// Level of the pressure mesh; the nominal mesh size is `2^-level`.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Nominal mesh size: the leg length of the velocity mesh, `2^-(level+1)` for
    /// P1isoP2 and `2^-level` for Taylor–Hood.
    pub fn mesh_size(&self) -> f64 {
        0.5f64.powi(self.mesh.level() as i32)
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn pressure_mesh(&self) -> &Arc<TriMesh> {
        &self.pressure_mesh
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    /// Coordinates of every dof (both components share the node coordinates).
    pub fn dof_coords(&self) -> Vec<Point> {
        let mut c = self.node_coords.clone();
        c.extend_from_slice(&self.node_coords);
        c
    }

    pub fn cell_nodes(&self, t: usize) -> &[usize] {
        let n = self.basis.n_local();
        &self.cell_nodes[n * t..n * (t + 1)]
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.triangle_points(t))
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.boundary_node[i]
    }

    /// Dofs on ∂Ω, ascending.
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let n = self.n_nodes();
        (0..2 * n).filter(|&d| self.boundary_node[d % n]).collect()
    }

    /// Pressure-mesh triangle containing velocity triangle `t`.
    pub fn pressure_triangle(&self, t: usize) -> usize {
        match self.kind {
            ElementKind::P1isoP2 => self.mesh.parent_triangle(t).expect("velocity mesh is refined"),
            ElementKind::TaylorHoodP2 => t,
        }
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let n = self.n_nodes();
        let mut c = vec![0.0; 2 * n];
        for (i, &p) in self.node_coords.iter().enumerate() {
            let v = f(p);
            c[i] = v[0];
            c[n + i] = v[1];
        }
        c
    }

    /// Same nodes, same meshes.
    pub fn is_same(&self, other: &VelocitySpace) -> bool {
        std::ptr::eq(self, other)
            || (self.kind == other.kind
                && self.level == other.level
                && self.n_nodes() == other.n_nodes()
                && Arc::ptr_eq(&self.mesh, &other.mesh))
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_dofs() {
            return Err(Error::SpaceMismatch(format!(
                "coefficient vector of length {} for a space with {} dofs",
                coeffs.len(),
                self.n_dofs()
            )));
        }
        Ok(())
    }
}

/// Continuous P1 pressure with zero mean (enforced by a multiplier in the solvers).
#[derive(Debug, Clone)]
pub struct PressureSpace {
    mesh: Arc<TriMesh>,
}

impl PressureSpace {
    pub fn new(velocity: &VelocitySpace) -> Self {
        PressureSpace { mesh: Arc::clone(velocity.pressure_mesh()) }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn zero_mean(&self) -> bool {
        true
    }
}
