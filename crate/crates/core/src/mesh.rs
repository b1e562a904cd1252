//! Crossed ("union-jack") triangulations of a rectangle, uniform
//! quadrisection, and nested-mesh metadata.
//!
//! Every cell of the `n × n` grid is split into four right isosceles
//! triangles by both diagonals, which meet at a cell-centre vertex. No
//! triangle of such a mesh has more than one edge on the boundary, and
//! quadrisection through edge midpoints preserves that property, so the
//! whole hierarchy is admissible for the Taylor-Hood pair.
//!
//! Vertices are stored in lexicographic `(y, x)` order. Positions are kept
//! as exact integer lattice keys alongside the floating-point coordinates,
//! which makes ordering and nesting checks exact.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT_SQUARE: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// A conforming triangulation with edge connectivity and optional parent link.
#[derive(Debug)]
pub struct Mesh {
    id: u64,
    domain: Rect,
    /// Cells per side of the generating crossed grid.
    base_cells: usize,
    level: usize,
    /// Lattice keys: coordinates in units of `width / denominator`.
    lattice: Vec<[u64; 2]>,
    denominator: u64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// Local edge `k` of a triangle is the edge opposite local vertex `k`.
    triangle_edges: Vec<[usize; 3]>,
    boundary_edge: Vec<bool>,
    boundary_vertices: Vec<usize>,
    parent: Option<Arc<Mesh>>,
    parent_triangle: Vec<usize>,
}

impl Mesh {
    /// Crossed triangulation of `domain` with `n` cells per side.
    pub fn crossed(domain: Rect, n: usize) -> Result<Arc<Mesh>> {
        build_crossed_mesh(domain, n)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Cells per side of the equivalent crossed grid (`base · 2^level`).
    pub fn cells_per_side(&self) -> usize {
        self.base_cells << self.level
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.parent.as_ref()
    }

    /// For a refined mesh, the index of the parent triangle of each triangle.
    pub fn parent_triangle(&self) -> &[usize] {
        &self.parent_triangle
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Exact lattice key of vertex `v` together with the common denominator.
    pub fn lattice_key(&self, v: usize) -> ([u64; 2], u64) {
        (self.lattice[v], self.denominator)
    }

    /// Mesh size: the longest edge (the hypotenuse of every triangle).
    pub fn h(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Diagonal of one grid cell, `√2 · h`. This is the size a mesh with the
    /// same grid split along a single diagonal would report.
    pub fn cell_diagonal(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.h()
    }

    /// Signed area of triangle `t`.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Whether `ancestor` appears in this mesh's parent chain.
    pub fn descends_from(&self, ancestor: &Mesh) -> bool {
        let mut cur = self.parent.as_deref();
        while let Some(m) = cur {
            if m.id == ancestor.id {
                return true;
            }
            cur = m.parent.as_deref();
        }
        false
    }

    /// Checks orientation, conformity, the boundary-edge rule and, for
    /// refined meshes, that every parent vertex survives.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is not counterclockwise")));
            }
        }
        let mut edge_use = vec![0usize; self.edges.len()];
        for te in &self.triangle_edges {
            for &e in te {
                edge_use[e] += 1;
            }
        }
        for (e, &uses) in edge_use.iter().enumerate() {
            let expected = if self.boundary_edge[e] { 1 } else { 2 };
            if uses != expected {
                return Err(Error::InvalidMesh(format!("edge {e} shared by {uses} triangles")));
            }
            if self.boundary_edge[e] && !self.edge_on_rect_boundary(e) {
                return Err(Error::InvalidMesh(format!("hanging edge {e} inside the domain")));
            }
        }
        for (t, te) in self.triangle_edges.iter().enumerate() {
            let nb = te.iter().filter(|&&e| self.boundary_edge[e]).count();
            if nb > 1 {
                return Err(Error::InvalidMesh(format!("triangle {t} has {nb} boundary edges")));
            }
        }
        if let Some(parent) = &self.parent {
            let scale = self.denominator / parent.denominator;
            let mut keys: Vec<[u64; 2]> = self.lattice.clone();
            keys.sort_unstable();
            for k in &parent.lattice {
                let scaled = [k[0] * scale, k[1] * scale];
                if keys.binary_search(&scaled).is_err() {
                    return Err(Error::InvalidMesh("parent vertex missing from refinement".into()));
                }
            }
        }
        Ok(())
    }

    fn edge_on_rect_boundary(&self, e: usize) -> bool {
        let [a, b] = self.edges[e];
        let (ka, kb) = (self.lattice[a], self.lattice[b]);
        let max = self.denominator;
        (0..2).any(|d| ka[d] == kb[d] && (ka[d] == 0 || ka[d] == max))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Builds the crossed triangulation with `4n²` triangles and `(n+1)² + n²`
/// vertices.
pub fn build_crossed_mesh(domain: Rect, n: usize) -> Result<Arc<Mesh>> {
    if n == 0 {
        return Err(Error::InvalidMesh("cells per side must be at least 1".into()));
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::InvalidMesh(format!("degenerate rectangle {domain:?}")));
    }
    let den = 2 * n as u64;
    let mut lattice = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n as u64 {
        for i in 0..=n as u64 {
            lattice.push([2 * i, 2 * j]);
        }
    }
    for j in 0..n as u64 {
        for i in 0..n as u64 {
            lattice.push([2 * i + 1, 2 * j + 1]);
        }
    }
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let centre = |i: usize, j: usize| (n + 1) * (n + 1) + j * n + i;
    let mut triangles = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (sw, se, ne, nw) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
            let c = centre(i, j);
            triangles.push([sw, se, c]);
            triangles.push([se, ne, c]);
            triangles.push([ne, nw, c]);
            triangles.push([nw, sw, c]);
        }
    }
    Ok(Arc::new(finish(domain, n, 0, lattice, den, triangles, None, Vec::new())))
}

/// Quadrisects every triangle through its edge midpoints.
pub fn uniform_refine(mesh: &Arc<Mesh>) -> Result<Arc<Mesh>> {
    mesh.validate()?;
    let nv = mesh.num_vertices();
    let mut lattice: Vec<[u64; 2]> = mesh.lattice.iter().map(|k| [2 * k[0], 2 * k[1]]).collect();
    for &[a, b] in &mesh.edges {
        let (ka, kb) = (mesh.lattice[a], mesh.lattice[b]);
        lattice.push([ka[0] + kb[0], ka[1] + kb[1]]);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut parent_triangle = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, (&[a, b, c], te)) in mesh.triangles.iter().zip(&mesh.triangle_edges).enumerate() {
        let m_bc = nv + te[0];
        let m_ca = nv + te[1];
        let m_ab = nv + te[2];
        triangles.push([a, m_ab, m_ca]);
        triangles.push([m_ab, b, m_bc]);
        triangles.push([m_ca, m_bc, c]);
        triangles.push([m_ab, m_bc, m_ca]);
        parent_triangle.extend([t; 4]);
    }
    let child = finish(
        mesh.domain,
        mesh.base_cells,
        mesh.level + 1,
        lattice,
        2 * mesh.denominator,
        triangles,
        Some(Arc::clone(mesh)),
        parent_triangle,
    );
    Ok(Arc::new(child))
}

/// Sorts vertices by `(y, x)`, renumbers triangles, and derives edges and
/// boundary information.
#[allow(clippy::too_many_arguments)]
fn finish(
    domain: Rect,
    base_cells: usize,
    level: usize,
    lattice: Vec<[u64; 2]>,
    denominator: u64,
    triangles: Vec<[usize; 3]>,
    parent: Option<Arc<Mesh>>,
    parent_triangle: Vec<usize>,
) -> Mesh {
    let mut order: Vec<usize> = (0..lattice.len()).collect();
    order.sort_unstable_by_key(|&v| (lattice[v][1], lattice[v][0]));
    let mut new_index = vec![0usize; lattice.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let lattice: Vec<[u64; 2]> = order.iter().map(|&v| lattice[v]).collect();
    let triangles: Vec<[usize; 3]> = triangles
        .into_iter()
        .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
        .collect();
    let den = denominator as f64;
    let vertices: Vec<[f64; 2]> = lattice
        .iter()
        .map(|k| {
            [
                domain.x0 + domain.width() * (k[0] as f64 / den),
                domain.y0 + domain.height() * (k[1] as f64 / den),
            ]
        })
        .collect();

    let mut edge_map: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len() / 2 + 8);
    let mut edges = Vec::new();
    let mut use_count = Vec::new();
    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let mut te = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let e = *edge_map.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                use_count.push(0u8);
                edges.len() - 1
            });
            use_count[e] += 1;
            te[k] = e;
        }
        triangle_edges.push(te);
    }
    let boundary_edge: Vec<bool> = use_count.iter().map(|&c| c == 1).collect();
    let mut on_boundary = vec![false; vertices.len()];
    for (e, &[a, b]) in edges.iter().enumerate() {
        if boundary_edge[e] {
            on_boundary[a] = true;
            on_boundary[b] = true;
        }
    }
    let boundary_vertices = (0..vertices.len()).filter(|&v| on_boundary[v]).collect();

    Mesh {
        id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
        domain,
        base_cells,
        level,
        lattice,
        denominator,
        vertices,
        triangles,
        edges,
        triangle_edges,
        boundary_edge,
        boundary_vertices,
        parent,
        parent_triangle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Arc<Mesh> {
        build_crossed_mesh(Rect::UNIT_SQUARE, n).unwrap()
    }

    #[test]
    fn single_cell() {
        let m = unit(1);
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.num_vertices(), 5);
        let corners: Vec<[f64; 2]> = m.boundary_vertices().iter().map(|&v| m.vertices()[v]).collect();
        assert_eq!(corners, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        m.validate().unwrap();
    }

    #[test]
    fn two_cells_conforming() {
        let m = unit(2);
        assert_eq!(m.num_triangles(), 16);
        assert_eq!(m.num_vertices(), 13);
        // Independent edge census: every interior edge in exactly two triangles.
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in m.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for (&(a, b), &c) in &count {
            let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
            let on_side = (0..2).any(|d| pa[d] == pb[d] && (pa[d] == 0.0 || pa[d] == 1.0));
            assert_eq!(c, if on_side { 1 } else { 2 }, "edge {a}-{b}");
        }
        assert_eq!(count.len(), m.num_edges());
    }

    #[test]
    fn at_most_one_boundary_edge_n8() {
        let m = unit(8);
        for t in m.triangles() {
            let on_boundary = |a: usize, b: usize| {
                let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
                (0..2).any(|d| pa[d] == pb[d] && (pa[d] == 0.0 || pa[d] == 1.0))
            };
            let nb = (0..3).filter(|&k| on_boundary(t[k], t[(k + 1) % 3])).count();
            assert!(nb <= 1);
        }
    }

    #[test]
    fn vertex_order_is_y_then_x() {
        let m = unit(3);
        for w in m.vertices().windows(2) {
            assert!((w[0][1], w[0][0]) < (w[1][1], w[1][0]));
        }
    }

    #[test]
    fn mesh_size() {
        let m = unit(4);
        assert!((m.h() - 0.25).abs() < 1e-15);
        let r = uniform_refine(&m).unwrap();
        assert!((r.h() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn refine_counts_and_parent() {
        let m = unit(1);
        let r = uniform_refine(&m).unwrap();
        assert_eq!(r.num_triangles(), 16);
        assert!((r.h() - m.h() / 2.0).abs() < 1e-15);
        assert!(r.descends_from(&m));
        assert!(!m.descends_from(&r));
        r.validate().unwrap();
        for v in m.vertices() {
            assert!(r.vertices().contains(v));
        }
    }

    #[test]
    fn twice_refined_matches_crossed_vertex_set() {
        let r = uniform_refine(&uniform_refine(&unit(8)).unwrap()).unwrap();
        let direct = unit(32);
        let key = |p: &[f64; 2]| ((p[0] * 64.0).round() as i64, (p[1] * 64.0).round() as i64);
        let mut a: Vec<_> = r.vertices().iter().map(key).collect();
        let mut b: Vec<_> = direct.vertices().iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn invariants_survive_refinement() {
        let mut m = build_crossed_mesh(Rect::new(-1.0, 2.0, 0.5, 1.5), 3).unwrap();
        for _ in 0..3 {
            m = uniform_refine(&m).unwrap();
            m.validate().unwrap();
        }
        let total: f64 = (0..m.num_triangles()).map(|t| m.signed_area(t)).sum();
        assert!((total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_crossed_mesh(Rect::UNIT_SQUARE, 0).is_err());
        assert!(build_crossed_mesh(Rect::new(0.0, 0.0, 0.0, 1.0), 2).is_err());
    }
}
