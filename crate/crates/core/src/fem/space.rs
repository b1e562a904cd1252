use std::sync::Arc;

use crate::mesh::Mesh;

/// Finite element family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Continuous piecewise linears.
    P1,
    /// Continuous piecewise quadratics.
    P2,
    /// Two-component continuous piecewise quadratics (Taylor-Hood velocity),
    /// component-blocked: all x dofs, then all y dofs.
    P2Vector,
}

impl Family {
    /// Local dofs per triangle.
    pub fn local_dofs(self) -> usize {
        match self {
            Family::P1 => 3,
            Family::P2 => 6,
            Family::P2Vector => 12,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, Family::P2Vector)
    }

    /// Scalar family underlying each component.
    pub fn scalar(self) -> Family {
        match self {
            Family::P2Vector => Family::P2,
            f => f,
        }
    }
}

/// Degree-of-freedom map for one family on one mesh.
///
/// Scalar P2 numbering: vertex dofs first (same numbering as the mesh), then
/// one dof per edge in mesh edge order. Local P2 dofs are the three vertices
/// followed by the midpoints of the edges opposite vertices 0, 1, 2.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    family: Family,
    scalar_dofs: usize,
    cell_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    mean_zero: bool,
}

impl FeSpace {
    pub fn new(mesh: &Arc<Mesh>, family: Family) -> Arc<FeSpace> {
        Arc::new(Self::build(mesh, family, false))
    }

    /// The zero-mean subspace marker (pressure, ξ). The dof map is the same;
    /// the constraint is imposed by the solvers.
    pub fn new_mean_zero(mesh: &Arc<Mesh>, family: Family) -> Arc<FeSpace> {
        Arc::new(Self::build(mesh, family, true))
    }

    fn build(mesh: &Arc<Mesh>, family: Family, mean_zero: bool) -> FeSpace {
        let nv = mesh.num_vertices();
        let scalar_dofs = match family {
            Family::P1 => nv,
            Family::P2 | Family::P2Vector => nv + mesh.num_edges(),
        };
        let stride = family.local_dofs();
        let mut cell_dofs = Vec::with_capacity(stride * mesh.num_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let te = mesh.triangle_edges()[t];
            match family {
                Family::P1 => cell_dofs.extend_from_slice(tri),
                Family::P2 => {
                    cell_dofs.extend_from_slice(tri);
                    cell_dofs.extend(te.iter().map(|&e| nv + e));
                }
                Family::P2Vector => {
                    for comp in 0..2 {
                        let off = comp * scalar_dofs;
                        cell_dofs.extend(tri.iter().map(|&v| off + v));
                        cell_dofs.extend(te.iter().map(|&e| off + nv + e));
                    }
                }
            }
        }
        let boundary_dofs = if family.is_vector() {
            let mut scalar: Vec<usize> = mesh.boundary_vertices().to_vec();
            scalar.extend((0..mesh.num_edges()).filter(|&e| mesh.is_boundary_edge(e)).map(|e| nv + e));
            scalar.sort_unstable();
            let mut all = scalar.clone();
            all.extend(scalar.iter().map(|&d| d + scalar_dofs));
            all
        } else {
            Vec::new()
        };
        FeSpace { mesh: Arc::clone(mesh), family, scalar_dofs, cell_dofs, boundary_dofs, mean_zero }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dof_count(&self) -> usize {
        if self.family.is_vector() {
            2 * self.scalar_dofs
        } else {
            self.scalar_dofs
        }
    }

    /// Dofs per component.
    pub fn scalar_dof_count(&self) -> usize {
        self.scalar_dofs
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let s = self.family.local_dofs();
        &self.cell_dofs[s * t..s * (t + 1)]
    }

    /// Dofs carrying the homogeneous Dirichlet condition (velocity only).
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    /// Dofs not on the boundary, ascending.
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut is_bd = vec![false; self.dof_count()];
        for &d in &self.boundary_dofs {
            is_bd[d] = true;
        }
        (0..self.dof_count()).filter(|&d| !is_bd[d]).collect()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Nodal points of the scalar dofs (vertices, then edge midpoints).
    pub fn scalar_dof_points(&self) -> Vec<[f64; 2]> {
        let mut pts = self.mesh.vertices().to_vec();
        if self.family.scalar() == Family::P2 {
            let v = self.mesh.vertices();
            pts.extend(self.mesh.edges().iter().map(|&[a, b]| [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])]));
        }
        pts
    }

    /// Whether two spaces share mesh and family.
    pub fn same_as(&self, other: &FeSpace) -> bool {
        self.mesh.id() == other.mesh.id() && self.family == other.family
    }
}

/// Per-triangle affine geometry.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
    pub vertices: [[f64; 2]; 3],
}

impl Geometry {
    pub fn of(mesh: &Mesh, t: usize) -> Geometry {
        let [a, b, c] = mesh.triangles()[t];
        let v = mesh.vertices();
        let (p0, p1, p2) = (v[a], v[b], v[c]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * det;
        let g0 = [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det];
        let g1 = [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det];
        let g2 = [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det];
        Geometry { area, grad_bary: [g0, g1, g2], vertices: [p0, p1, p2] }
    }

    pub fn point(&self, bary: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    /// Barycentric coordinates of a point.
    pub fn barycentric(&self, x: [f64; 2]) -> [f64; 3] {
        let v = &self.vertices;
        let l1 = self.grad_bary[1][0] * (x[0] - v[0][0]) + self.grad_bary[1][1] * (x[1] - v[0][1]);
        let l2 = self.grad_bary[2][0] * (x[0] - v[0][0]) + self.grad_bary[2][1] * (x[1] - v[0][1]);
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Values of the scalar basis of `family` at a barycentric point.
pub fn basis_values(family: Family, l: &[f64; 3], out: &mut [f64]) {
    match family.scalar() {
        Family::P1 => out[..3].copy_from_slice(l),
        _ => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                out[3 + k] = 4.0 * l[i] * l[j];
            }
        }
    }
}

/// Gradients of the scalar basis of `family` at a barycentric point.
pub fn basis_gradients(family: Family, geo: &Geometry, l: &[f64; 3], out: &mut [[f64; 2]]) {
    let g = &geo.grad_bary;
    match family.scalar() {
        Family::P1 => out[..3].copy_from_slice(g),
        _ => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * g[i][0], s * g[i][1]];
            }
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                out[3 + k] = [4.0 * (l[j] * g[i][0] + l[i] * g[j][0]), 4.0 * (l[j] * g[i][1] + l[i] * g[j][1])];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_crossed_mesh, Rect};

    #[test]
    fn dof_counts() {
        let m = build_crossed_mesh(Rect::UNIT_SQUARE, 2).unwrap();
        let p1 = FeSpace::new(&m, Family::P1);
        let p2 = FeSpace::new(&m, Family::P2);
        let v = FeSpace::new(&m, Family::P2Vector);
        assert_eq!(p1.dof_count(), 13);
        assert_eq!(p2.dof_count(), 13 + m.num_edges());
        assert_eq!(v.dof_count(), 2 * p2.dof_count());
        assert!(p1.boundary_dofs().is_empty() && p2.boundary_dofs().is_empty());
        // 8 boundary vertices + 8 boundary edges, per component
        assert_eq!(v.boundary_dofs().len(), 32);
        for t in 0..m.num_triangles() {
            assert!(v.cell_dofs(t).iter().all(|&d| d < v.dof_count()));
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut vals = [0.0; 6];
        let l = [0.2, 0.3, 0.5];
        basis_values(Family::P2, &l, &mut vals);
        assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        basis_values(Family::P1, &l, &mut vals);
        assert!((vals[..3].iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn barycentric_roundtrip() {
        let m = build_crossed_mesh(Rect::new(0.0, 2.0, 1.0, 3.0), 3).unwrap();
        let g = Geometry::of(&m, 5);
        let l = [0.1, 0.6, 0.3];
        let back = g.barycentric(g.point(&l));
        for i in 0..3 {
            assert!((back[i] - l[i]).abs() < 1e-14);
        }
    }
}
