//! Assembly of the bilinear forms `a(·,·)`, `(·,·)`, `c(v, q) = (∇·v, q)`,
//! the convection form `b(φ, v, ν) = (∇φ·v, ν)`, the Newton linearization of
//! the cubic term, and the matching load vectors. Every integral uses the
//! 7-point degree-5 rule.

use std::sync::Arc;

use super::function::FeFunction;
use super::space::{basis_gradients, basis_values, FeSpace, Family, Geometry};
use crate::error::{Error, Result};
use crate::linalg::sparse::{SparseMatrix, DROPPED};
use crate::quadrature::Rule;

/// Matrix forms. For all kinds the row index is the test dof and the column
/// index the trial dof.
#[derive(Clone, Copy, Debug)]
pub enum MatrixKind<'a> {
    /// `(trial, test)` for scalar spaces.
    Mass,
    /// `(∇trial, ∇test)` for scalar spaces.
    Stiffness,
    /// Component-wise `(u, v)` on the vector space.
    VectorMass,
    /// Component-wise `(∇u, ∇v)` on the vector space.
    VectorStiffness,
    /// `(∇·v_trial, q_test)`: vector trial space, scalar test space.
    Divergence,
    /// `(∇φ·v_trial, ν_test)`: vector trial space, scalar test space.
    Convection(&'a FeFunction),
    /// `(3φ² trial, test)`.
    CubicJacobian(&'a FeFunction),
}

/// Load vectors.
#[derive(Clone, Copy, Debug)]
pub enum VectorKind<'a> {
    /// `(φ³, ψ_i)`.
    Cubic(&'a FeFunction),
    /// `(g, ψ_i)`.
    WeightedMass(&'a FeFunction),
}

/// Reference basis tables at the quadrature points.
struct Tables {
    rule: Rule,
    p1: Vec<[f64; 6]>,
    p2: Vec<[f64; 6]>,
}

impl Tables {
    fn new() -> Self {
        let rule = Rule::degree5();
        let table = |fam| {
            rule.points
                .iter()
                .map(|l| {
                    let mut v = [0.0; 6];
                    basis_values(fam, l, &mut v);
                    v
                })
                .collect()
        };
        let p1 = table(Family::P1);
        let p2 = table(Family::P2);
        Tables { rule, p1, p2 }
    }

    fn values(&self, fam: Family) -> &[[f64; 6]] {
        match fam.scalar() {
            Family::P1 => &self.p1,
            _ => &self.p2,
        }
    }
}

/// Assembler for one (trial, test) pair with a cached sparsity pattern, so
/// forms that change every step (convection, cubic Jacobian) are refilled
/// without re-sorting. Optional maps restrict rows/columns to a subset of
/// dofs (e.g. free velocity dofs).
pub struct FormAssembler {
    trial: Arc<FeSpace>,
    test: Arc<FeSpace>,
    pattern: SparseMatrix,
    slots: Vec<usize>,
    tables: Tables,
}

impl FormAssembler {
    pub fn new(trial: &Arc<FeSpace>, test: &Arc<FeSpace>) -> Result<Self> {
        Self::restricted(trial, test, None, None)
    }

    /// `row_keep` / `col_keep` list the retained test / trial dofs; retained
    /// dofs are renumbered in the listed order.
    pub fn restricted(
        trial: &Arc<FeSpace>,
        test: &Arc<FeSpace>,
        row_keep: Option<&[usize]>,
        col_keep: Option<&[usize]>,
    ) -> Result<Self> {
        if trial.mesh().id() != test.mesh().id() {
            return Err(Error::MeshMismatch("trial and test spaces live on different meshes".into()));
        }
        let map = |keep: Option<&[usize]>, n: usize| -> (Vec<usize>, usize) {
            match keep {
                None => ((0..n).collect(), n),
                Some(k) => {
                    let mut m = vec![DROPPED; n];
                    for (new, &old) in k.iter().enumerate() {
                        m[old] = new;
                    }
                    (m, k.len())
                }
            }
        };
        let (row_map, nrows) = map(row_keep, test.dof_count());
        let (col_map, ncols) = map(col_keep, trial.dof_count());
        let mesh = trial.mesh();
        let (nt, nr) = (test.family().local_dofs(), trial.family().local_dofs());
        let mut coords = Vec::with_capacity(mesh.num_triangles() * nt * nr);
        let mut which = Vec::with_capacity(mesh.num_triangles() * nt * nr);
        for t in 0..mesh.num_triangles() {
            let (td, rd) = (test.cell_dofs(t), trial.cell_dofs(t));
            for &i in td {
                for &j in rd {
                    let (ri, cj) = (row_map[i], col_map[j]);
                    if ri != DROPPED && cj != DROPPED {
                        which.push(coords.len());
                        coords.push((ri, cj));
                    } else {
                        which.push(DROPPED);
                    }
                }
            }
        }
        let (pattern, pos) = SparseMatrix::pattern(nrows, ncols, &coords);
        let slots = which.into_iter().map(|w| if w == DROPPED { DROPPED } else { pos[w] }).collect();
        Ok(FormAssembler { trial: Arc::clone(trial), test: Arc::clone(test), pattern, slots, tables: Tables::new() })
    }

    pub fn trial(&self) -> &Arc<FeSpace> {
        &self.trial
    }

    pub fn test(&self) -> &Arc<FeSpace> {
        &self.test
    }

    /// Assembles with a kernel that fills the local `test × trial` matrix
    /// (row-major) for triangle `t`.
    pub fn assemble_with<K>(&self, mut kernel: K) -> SparseMatrix
    where
        K: FnMut(usize, &Geometry, &mut [f64]),
    {
        let mesh = self.trial.mesh();
        let (nt, nr) = (self.test.family().local_dofs(), self.trial.family().local_dofs());
        let mut local = vec![0.0; nt * nr];
        let mut out = self.pattern.clone();
        let vals = out.values_mut();
        for t in 0..mesh.num_triangles() {
            let geo = Geometry::of(mesh, t);
            local.iter_mut().for_each(|v| *v = 0.0);
            kernel(t, &geo, &mut local);
            let slots = &self.slots[t * nt * nr..(t + 1) * nt * nr];
            for (&s, &v) in slots.iter().zip(&local) {
                if s != DROPPED {
                    vals[s] += v;
                }
            }
        }
        out
    }

    pub fn assemble(&self, kind: MatrixKind<'_>) -> Result<SparseMatrix> {
        let (trial_fam, test_fam) = (self.trial.family(), self.test.family());
        let scalar_pair = !trial_fam.is_vector() && !test_fam.is_vector();
        let rule = &self.tables.rule;
        let tv = self.tables.values(test_fam);
        let rv = self.tables.values(trial_fam);
        let (nts, nrs) = (test_fam.scalar().local_dofs(), trial_fam.scalar().local_dofs());
        let check_phi = |phi: &FeFunction| -> Result<()> {
            if phi.space().mesh().id() != self.trial.mesh().id() {
                return Err(Error::MeshMismatch("coefficient function lives on another mesh".into()));
            }
            if phi.space().family().is_vector() {
                return Err(Error::SpaceMismatch("coefficient function must be scalar".into()));
            }
            Ok(())
        };
        match kind {
            MatrixKind::Mass | MatrixKind::Stiffness | MatrixKind::CubicJacobian(_) if !scalar_pair => {
                Err(Error::SpaceMismatch(format!("{kind:?} needs scalar trial and test spaces")))
            }
            MatrixKind::VectorMass | MatrixKind::VectorStiffness if !(trial_fam.is_vector() && test_fam.is_vector()) => {
                Err(Error::SpaceMismatch(format!("{kind:?} needs vector trial and test spaces")))
            }
            MatrixKind::Divergence | MatrixKind::Convection(_) if !(trial_fam.is_vector() && !test_fam.is_vector()) => {
                Err(Error::SpaceMismatch(format!("{kind:?} needs a vector trial and a scalar test space")))
            }
            MatrixKind::Mass => Ok(self.assemble_with(|_, geo, local| {
                for (q, w) in rule.weights.iter().enumerate() {
                    let wa = w * geo.area;
                    for i in 0..nts {
                        for j in 0..nrs {
                            local[i * nrs + j] += wa * tv[q][i] * rv[q][j];
                        }
                    }
                }
            })),
            MatrixKind::Stiffness => Ok(self.assemble_with(|_, geo, local| {
                let (mut gt, mut gr) = ([[0.0; 2]; 6], [[0.0; 2]; 6]);
                for (l, w) in rule.points.iter().zip(&rule.weights) {
                    basis_gradients(test_fam, geo, l, &mut gt);
                    basis_gradients(trial_fam, geo, l, &mut gr);
                    let wa = w * geo.area;
                    for i in 0..nts {
                        for j in 0..nrs {
                            local[i * nrs + j] += wa * (gt[i][0] * gr[j][0] + gt[i][1] * gr[j][1]);
                        }
                    }
                }
            })),
            MatrixKind::VectorMass | MatrixKind::VectorStiffness => {
                let stiff = matches!(kind, MatrixKind::VectorStiffness);
                let n = 2 * nrs;
                Ok(self.assemble_with(|_, geo, local| {
                    let mut g = [[0.0; 2]; 6];
                    for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                        let wa = w * geo.area;
                        if stiff {
                            basis_gradients(Family::P2, geo, l, &mut g);
                        }
                        for i in 0..nrs {
                            for j in 0..nrs {
                                let v = if stiff {
                                    wa * (g[i][0] * g[j][0] + g[i][1] * g[j][1])
                                } else {
                                    wa * rv[q][i] * rv[q][j]
                                };
                                local[i * n + j] += v;
                                local[(nrs + i) * n + nrs + j] += v;
                            }
                        }
                    }
                }))
            }
            MatrixKind::Divergence => {
                let n = 2 * nrs;
                Ok(self.assemble_with(|_, geo, local| {
                    let mut g = [[0.0; 2]; 6];
                    for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                        let wa = w * geo.area;
                        basis_gradients(trial_fam, geo, l, &mut g);
                        for i in 0..nts {
                            for k in 0..nrs {
                                local[i * n + k] += wa * tv[q][i] * g[k][0];
                                local[i * n + nrs + k] += wa * tv[q][i] * g[k][1];
                            }
                        }
                    }
                }))
            }
            MatrixKind::Convection(phi) => {
                check_phi(phi)?;
                let n = 2 * nrs;
                Ok(self.assemble_with(|t, geo, local| {
                    for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                        let wa = w * geo.area;
                        let gphi = phi.grad_local(t, geo, l, 0);
                        for i in 0..nts {
                            for k in 0..nrs {
                                let base = wa * tv[q][i] * rv[q][k];
                                local[i * n + k] += base * gphi[0];
                                local[i * n + nrs + k] += base * gphi[1];
                            }
                        }
                    }
                }))
            }
            MatrixKind::CubicJacobian(phi) => {
                check_phi(phi)?;
                Ok(self.assemble_with(|t, geo, local| {
                    for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                        let p = phi.eval_local(t, l, 0);
                        let wa = w * geo.area * 3.0 * p * p;
                        for i in 0..nts {
                            for j in 0..nrs {
                                local[i * nrs + j] += wa * tv[q][i] * rv[q][j];
                            }
                        }
                    }
                }))
            }
        }
    }
}

/// One-shot matrix assembly.
pub fn assemble_matrix(kind: MatrixKind<'_>, trial: &Arc<FeSpace>, test: &Arc<FeSpace>) -> Result<SparseMatrix> {
    FormAssembler::new(trial, test)?.assemble(kind)
}

/// Assembles a load vector against the basis of a scalar `test` space.
pub fn assemble_vector(kind: VectorKind<'_>, test: &Arc<FeSpace>) -> Result<Vec<f64>> {
    let f = match kind {
        VectorKind::Cubic(f) | VectorKind::WeightedMass(f) => f,
    };
    if f.space().mesh().id() != test.mesh().id() {
        return Err(Error::MeshMismatch("load function lives on another mesh".into()));
    }
    if test.family().is_vector() || f.space().family().is_vector() {
        return Err(Error::SpaceMismatch("load vectors are assembled for scalar spaces".into()));
    }
    let cube = matches!(kind, VectorKind::Cubic(_));
    let rule = Rule::degree5();
    let mesh = test.mesh();
    let nl = test.family().local_dofs();
    let mut out = vec![0.0; test.dof_count()];
    let mut vals = [0.0; 6];
    for t in 0..mesh.num_triangles() {
        let area = Geometry::of(mesh, t).area;
        let dofs = test.cell_dofs(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let v = f.eval_local(t, l, 0);
            let g = if cube { v * v * v } else { v };
            basis_values(test.family(), l, &mut vals);
            for i in 0..nl {
                out[dofs[i]] += w * area * g * vals[i];
            }
        }
    }
    Ok(out)
}
