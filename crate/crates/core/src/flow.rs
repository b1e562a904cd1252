//! Taylor-Hood (P2²/P1) saddle-point systems for the Darcy-Stokes operator
//! `α(u, v) + λ(∇u, ∇v) − (∇·v, p)`, `(∇·u, q) = g`, with homogeneous
//! Dirichlet velocity and zero-mean pressure.
//!
//! Boundary velocity dofs are removed from the system. Since `Dᵀ1 = 0`, the
//! pressure is determined up to a constant: the saddle solver pins pressure
//! dof 0 and shifts the result to zero mean afterwards.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{assemble_matrix, FeSpace, Family, FormAssembler, MatrixKind};
use crate::linalg::{dot, Block, BlockMatrix, LdltFactor, SparseMatrix};
use crate::mesh::Mesh;

/// Velocity and pressure spaces with the constant pieces of every flow
/// operator, restricted to free velocity dofs.
pub struct FlowSpaces {
    pub velocity: Arc<FeSpace>,
    pub pressure: Arc<FeSpace>,
    free: Vec<usize>,
    /// Velocity mass on free dofs.
    pub mass: SparseMatrix,
    /// Velocity stiffness on free dofs.
    pub stiffness: SparseMatrix,
    /// `D[q, v] = (∇·v, q)`, pressure rows × free velocity columns.
    pub divergence: SparseMatrix,
    /// `(1, q_i)` for the pressure basis.
    pub pressure_integrals: Vec<f64>,
}

impl FlowSpaces {
    pub fn new(mesh: &Arc<Mesh>) -> Result<Self> {
        let velocity = FeSpace::new(mesh, Family::P2Vector);
        let pressure = FeSpace::new_mean_zero(mesh, Family::P1);
        let free = velocity.free_dofs();
        let vel_free = FormAssembler::restricted(&velocity, &velocity, Some(&free), Some(&free))?;
        let mass = vel_free.assemble(MatrixKind::VectorMass)?;
        let stiffness = vel_free.assemble(MatrixKind::VectorStiffness)?;
        let divergence =
            FormAssembler::restricted(&velocity, &pressure, None, Some(&free))?.assemble(MatrixKind::Divergence)?;
        let pmass = assemble_matrix(MatrixKind::Mass, &pressure, &pressure)?;
        let pressure_integrals = pmass.mul_vec(&vec![1.0; pressure.dof_count()]);
        Ok(FlowSpaces { velocity, pressure, free, mass, stiffness, divergence, pressure_integrals })
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn num_pressure(&self) -> usize {
        self.pressure.dof_count()
    }

    /// Restricts a full velocity coefficient vector to free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Extends free-dof values by zero on the boundary.
    pub fn extend(&self, free_vals: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.velocity.dof_count()];
        for (&d, &v) in self.free.iter().zip(free_vals) {
            full[d] = v;
        }
        full
    }

    /// Factors the saddle system for `α·M + λ·K`.
    pub fn saddle(&self, alpha: f64, lambda: f64) -> Result<SaddleSolver> {
        if !(lambda > 0.0) || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("flow operator needs λ > 0 and α ≥ 0 (λ={lambda}, α={alpha})")));
        }
        let nf = self.num_free();
        let np = self.num_pressure();
        let pinned: Vec<usize> = (1..np).collect();
        let all: Vec<usize> = (0..nf).collect();
        let d = self.divergence.submatrix(&pinned, &all);
        let dt = d.transpose();
        let blocks = [
            Block::new(0, 0, &self.mass, alpha),
            Block::new(0, 0, &self.stiffness, lambda),
            Block::new(0, nf, &dt, -1.0),
            Block::new(nf, 0, &d, -1.0),
        ];
        let system = BlockMatrix::new(nf + np - 1, nf + np - 1, &blocks);
        let mut signs = vec![1i8; nf + np - 1];
        signs[nf..].iter_mut().for_each(|s| *s = -1);
        let factor = LdltFactor::new(system.matrix(), &signs)?;
        let total = self.pressure_integrals.iter().sum();
        Ok(SaddleSolver { nf, np, alpha, lambda, factor, integrals: self.pressure_integrals.clone(), total })
    }
}

/// A factored Darcy-Stokes saddle system.
pub struct SaddleSolver {
    nf: usize,
    np: usize,
    pub alpha: f64,
    pub lambda: f64,
    factor: LdltFactor,
    integrals: Vec<f64>,
    total: f64,
}

impl SaddleSolver {
    /// Solves `A u − Dᵀ p = f`, `D u = g`, `(p, 1) = 0`. `f` is indexed by
    /// free velocity dofs, `g` by pressure dofs (consistent: `Σ g = 0`).
    /// Returns `(u_free, p)`.
    pub fn solve(&self, f: &[f64], g: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(f.len(), self.nf);
        let mut rhs = vec![0.0; self.nf + self.np - 1];
        rhs[..self.nf].copy_from_slice(f);
        if let Some(g) = g {
            // drop any constant component, as a mean multiplier would
            let ell = g.iter().sum::<f64>() / self.total;
            for (q, r) in rhs[self.nf..].iter_mut().enumerate() {
                *r = -(g[q + 1] - ell * self.integrals[q + 1]);
            }
        }
        let x = self.factor.solve(&rhs);
        let mut p = Vec::with_capacity(self.np);
        p.push(0.0);
        p.extend_from_slice(&x[self.nf..]);
        let shift = dot(&self.integrals, &p) / self.total;
        p.iter_mut().for_each(|v| *v -= shift);
        (x[..self.nf].to_vec(), p)
    }
}
