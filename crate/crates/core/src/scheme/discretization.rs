use std::sync::Arc;

use crate::error::Result;
use crate::fem::{assemble_vector, FeFunction, FeSpace, FormAssembler, MatrixKind, VectorKind};
use crate::flow::FlowSpaces;
use crate::linalg::SparseMatrix;
use crate::mesh::Mesh;
use crate::operators::NegNormWorkspace;

/// Everything the scheme needs on one mesh: the P1 operators, the
/// Taylor-Hood flow pieces and cached assembly patterns for the
/// state-dependent forms.
pub struct Discretization {
    mesh: Arc<Mesh>,
    pub ops: NegNormWorkspace,
    pub flow: FlowSpaces,
    cubic: FormAssembler,
    convection: FormAssembler,
}

impl Discretization {
    pub fn new(mesh: &Arc<Mesh>) -> Result<Self> {
        let ops = NegNormWorkspace::new(mesh)?;
        let flow = FlowSpaces::new(mesh)?;
        let cubic = FormAssembler::new(ops.space(), ops.space())?;
        let convection = FormAssembler::restricted(&flow.velocity, ops.space(), None, Some(flow.free_dofs()))?;
        Ok(Discretization { mesh: Arc::clone(mesh), ops, flow, cubic, convection })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// The P1 space of φ, μ and ξ.
    pub fn p1(&self) -> &Arc<FeSpace> {
        self.ops.space()
    }

    pub fn velocity(&self) -> &Arc<FeSpace> {
        &self.flow.velocity
    }

    /// The zero-mean P1 pressure space.
    pub fn pressure(&self) -> &Arc<FeSpace> {
        &self.flow.pressure
    }

    pub fn num_p1(&self) -> usize {
        self.p1().dof_count()
    }

    fn wrap(&self, phi: &[f64]) -> FeFunction {
        FeFunction::from_coeffs(self.p1(), phi.to_vec()).expect("P1 coefficient length")
    }

    /// `((φ)³, ψ_i)`.
    pub fn cubic_vector(&self, phi: &[f64]) -> Vec<f64> {
        assemble_vector(VectorKind::Cubic(&self.wrap(phi)), self.p1()).expect("P1 load vector")
    }

    /// `(3φ² ψ_j, ψ_i)`; its pattern equals the P1 mass pattern.
    pub fn cubic_jacobian(&self, phi: &[f64]) -> SparseMatrix {
        self.cubic.assemble(MatrixKind::CubicJacobian(&self.wrap(phi))).expect("P1 forms")
    }

    /// `B[i, j] = (∇φ·v_j, ψ_i)` on free velocity columns, so that
    /// `b(φ, u, ν) = νᵀ B u_free`.
    pub fn convection(&self, phi: &[f64]) -> SparseMatrix {
        self.convection.assemble(MatrixKind::Convection(&self.wrap(phi))).expect("convection form")
    }
}
