//! Structured triangulations of the unit square and their red refinements.
//!
//! Level `k` of the hierarchy is `unit_square_mesh(1)` refined `k` times, so it has
//! `2^k` cells per side. Every refinement keeps the parent vertices (with identical
//! coordinates) at the front of the vertex list and appends the edge midpoints, which
//! makes the P1 and P2 spaces of successive levels nested.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Conforming triangulation of `[0,1]²`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    level: usize,
    parent: Option<Arc<TriMesh>>,
    /// For refined meshes, `child_parent[t]` is the parent triangle of child `t`.
    child_parent: Vec<usize>,
}

/// Summary metrics, also the payload of the `mesh-info` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub level: usize,
    pub h_max: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub min_angle: f64,
}

fn on_boundary(p: &Point) -> bool {
    p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
}

/// Edge list (sorted vertex pairs, in order of first appearance) and per-triangle
/// edge indices; local edge `k` is opposite local vertex `k`.
fn build_edges(triangles: &[[usize; 3]]) -> (Vec<[usize; 2]>, Vec<[usize; 3]>) {
    let mut index: HashMap<[usize; 2], usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut tri_edges = Vec::with_capacity(triangles.len());
    for tri in triangles {
        let mut te = [0usize; 3];
        for (k, slot) in te.iter_mut().enumerate() {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            let key = if a < b { [a, b] } else { [b, a] };
            *slot = *index.entry(key).or_insert_with(|| {
                edges.push(key);
                edges.len() - 1
            });
        }
        tri_edges.push(te);
    }
    (edges, tri_edges)
}

impl TriMesh {
    fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        level: usize,
        parent: Option<Arc<TriMesh>>,
        child_parent: Vec<usize>,
    ) -> Self {
        let boundary = vertices.iter().map(on_boundary).collect();
        let (edges, triangle_edges) = build_edges(&triangles);
        TriMesh {
            vertices,
            triangles,
            boundary,
            edges,
            triangle_edges,
            level,
            parent,
            child_parent,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices of triangle `t`, local edge `k` opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn parent(&self) -> Option<&Arc<TriMesh>> {
        self.parent.as_ref()
    }

    /// Parent triangle of child triangle `t` (refined meshes only).
    pub fn parent_triangle(&self, t: usize) -> Option<usize> {
        self.parent.as_ref().map(|_| self.child_parent[t])
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Indices of vertices on the boundary of the unit square, ascending.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pa[0] == pb[0] && (pa[0] == 0.0 || pa[0] == 1.0))
            || (pa[1] == pb[1] && (pa[1] == 0.0 || pa[1] == 1.0))
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area (positive for counterclockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Longest edge length.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Walks the parent links up to the ancestor at `level`, returning the ancestor
    /// triangle that contains triangle `t`.
    pub fn ancestor_triangle(&self, t: usize, level: usize) -> Option<usize> {
        let mut mesh = self;
        let mut tri = t;
        while mesh.level > level {
            tri = mesh.parent_triangle(tri)?;
            mesh = mesh.parent.as_deref()?;
        }
        (mesh.level == level).then_some(tri)
    }

    /// The ancestor mesh at `level`, or `self` when `level == self.level()`.
    pub fn ancestor(&self, level: usize) -> Option<&TriMesh> {
        let mut mesh = self;
        while mesh.level > level {
            mesh = mesh.parent.as_deref()?;
        }
        (mesh.level == level).then_some(mesh)
    }

    /// Checks orientation, conformity, boundary marking and (if refined) the nesting
    /// relation with the parent.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is not positively oriented")));
            }
        }
        let mut edge_count = vec![0usize; self.n_edges()];
        for te in &self.triangle_edges {
            for &e in te {
                edge_count[e] += 1;
            }
        }
        for (e, &count) in edge_count.iter().enumerate() {
            let ok = match count {
                2 => !self.is_boundary_edge(e),
                1 => self.is_boundary_edge(e),
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidMesh(format!("edge {e} is shared by {count} triangles")));
            }
        }
        for (v, p) in self.vertices.iter().enumerate() {
            if self.boundary[v] != on_boundary(p) {
                return Err(Error::InvalidMesh(format!("boundary flag of vertex {v} is wrong")));
            }
        }
        if let Some(parent) = &self.parent {
            if self.n_triangles() != 4 * parent.n_triangles() {
                return Err(Error::InvalidMesh("refined mesh must have 4 children per parent".into()));
            }
            let mut children = vec![0usize; parent.n_triangles()];
            for &p in &self.child_parent {
                children[p] += 1;
            }
            if children.iter().any(|&c| c != 4) {
                return Err(Error::InvalidMesh("parent triangle without exactly 4 children".into()));
            }
            for (v, p) in parent.vertices.iter().enumerate() {
                if self.vertices[v] != *p {
                    return Err(Error::InvalidMesh(format!("parent vertex {v} moved")));
                }
            }
            for (t, &pt) in self.child_parent.iter().enumerate() {
                let area_ratio = self.signed_area(t) / parent.signed_area(pt);
                if (area_ratio - 0.25).abs() > 1e-12 {
                    return Err(Error::InvalidMesh(format!("child {t} is not a quarter of its parent")));
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> MeshStats {
        mesh_stats(self)
    }
}

/// Structured mesh with `n` cells per side, each cell split along the diagonal from
/// its bottom-left to its top-right corner.
pub fn unit_square_mesh(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("unit_square_mesh needs n >= 1".into()));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(TriMesh::from_parts(vertices, triangles, 0, None, Vec::new()))
}

/// Red refinement: every triangle is split into four through its edge midpoints.
/// Parent vertices keep their indices, midpoints follow in parent edge order.
pub fn refine_uniform(mesh: &Arc<TriMesh>) -> TriMesh {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(mesh.n_edges());
    for &[a, b] in &mesh.edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut child_parent = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let te = mesh.triangle_edges[t];
        // local edge k is opposite vertex k
        let m_bc = nv + te[0];
        let m_ca = nv + te[1];
        let m_ab = nv + te[2];
        triangles.push([a, m_ab, m_ca]);
        triangles.push([m_ab, b, m_bc]);
        triangles.push([m_ca, m_bc, c]);
        triangles.push([m_ab, m_bc, m_ca]);
        child_parent.extend_from_slice(&[t; 4]);
    }
    TriMesh::from_parts(vertices, triangles, mesh.level + 1, Some(Arc::clone(mesh)), child_parent)
}

fn min_angle_deg(points: &[Point; 3]) -> f64 {
    let mut min = f64::INFINITY;
    for k in 0..3 {
        let p = points[k];
        let u = points[(k + 1) % 3];
        let w = points[(k + 2) % 3];
        let (ux, uy) = (u[0] - p[0], u[1] - p[1]);
        let (wx, wy) = (w[0] - p[0], w[1] - p[1]);
        min = min.min((ux * wy - uy * wx).abs().atan2(ux * wx + uy * wy).to_degrees());
    }
    min
}

pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    let min_angle = (0..mesh.n_triangles())
        .map(|t| min_angle_deg(&mesh.triangle_points(t)))
        .fold(f64::INFINITY, f64::min);
    MeshStats {
        level: mesh.level,
        h_max: mesh.h_max(),
        n_vertices: mesh.n_vertices(),
        n_triangles: mesh.n_triangles(),
        min_angle,
    }
}

/// The meshes of levels `0..=max_level`, each refining the previous one.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<Arc<TriMesh>>,
}

impl MeshHierarchy {
    pub fn new(max_level: usize) -> Self {
        let mut levels = vec![Arc::new(unit_square_mesh(1).expect("n = 1 is valid"))];
        for _ in 0..max_level {
            let next = refine_uniform(levels.last().unwrap());
            levels.push(Arc::new(next));
        }
        MeshHierarchy { levels }
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> Result<&Arc<TriMesh>> {
        self.levels
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("level {k} exceeds hierarchy depth {}", self.max_level())))
    }
}
