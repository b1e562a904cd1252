use std::sync::Arc;

use super::space::{basis_gradients, basis_values, FeSpace, Geometry};
use crate::error::{Error, Result};
use crate::quadrature::Rule;

/// A scalar field with a known gradient.
pub trait ScalarField: Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

/// A 2D vector field with a known Jacobian (`jacobian[i] = ∇u_i`).
pub trait VectorField: Sync {
    fn value(&self, x: [f64; 2]) -> [f64; 2];
    fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2];
}

/// Closure pair implementing [`ScalarField`] or [`VectorField`].
pub struct Analytic<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> ScalarField for Analytic<F, G>
where
    F: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        (self.gradient)(x)
    }
}

impl<F, G> VectorField for Analytic<F, G>
where
    F: Fn([f64; 2]) -> [f64; 2] + Sync,
    G: Fn([f64; 2]) -> [[f64; 2]; 2] + Sync,
{
    fn value(&self, x: [f64; 2]) -> [f64; 2] {
        (self.value)(x)
    }
    fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        (self.gradient)(x)
    }
}

pub fn analytic<F, G>(value: F, gradient: G) -> Analytic<F, G> {
    Analytic { value, gradient }
}

/// Norms available through [`FeFunction::norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1Semi,
    H1,
    /// Maximum absolute coefficient; a nodal surrogate for the L∞ norm.
    LinfNodal,
}

/// Coefficient vector tied to its space.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        FeFunction { space: Arc::clone(space), coeffs: vec![0.0; space.dof_count()] }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dof_count() {
            return Err(Error::Dimension { expected: space.dof_count(), got: coeffs.len() });
        }
        Ok(FeFunction { space: Arc::clone(space), coeffs })
    }

    pub fn constant(space: &Arc<FeSpace>, c: f64) -> Self {
        assert!(!space.family().is_vector(), "constant() is for scalar spaces");
        FeFunction { space: Arc::clone(space), coeffs: vec![c; space.dof_count()] }
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(space: &Arc<FeSpace>, f: impl Fn([f64; 2]) -> f64) -> Self {
        assert!(!space.family().is_vector(), "interpolate() is for scalar spaces");
        let coeffs = space.scalar_dof_points().into_iter().map(f).collect();
        FeFunction { space: Arc::clone(space), coeffs }
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate_vector(space: &Arc<FeSpace>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        assert!(space.family().is_vector());
        let pts = space.scalar_dof_points();
        let n = pts.len();
        let mut coeffs = vec![0.0; 2 * n];
        for (i, p) in pts.into_iter().enumerate() {
            let v = f(p);
            coeffs[i] = v[0];
            coeffs[n + i] = v[1];
        }
        FeFunction { space: Arc::clone(space), coeffs }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `self + alpha · other` in the same space.
    pub fn axpy(&self, alpha: f64, other: &FeFunction) -> Result<FeFunction> {
        if !self.space.same_as(&other.space) {
            return Err(Error::SpaceMismatch("axpy across different spaces".into()));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + alpha * b).collect();
        Ok(FeFunction { space: Arc::clone(&self.space), coeffs })
    }

    /// Value (component `comp` for vector spaces) at barycentric point `l`
    /// of triangle `t`.
    pub fn eval_local(&self, t: usize, l: &[f64; 3], comp: usize) -> f64 {
        let fam = self.space.family();
        let dofs = self.space.cell_dofs(t);
        let ns = fam.scalar().local_dofs();
        let mut vals = [0.0; 6];
        basis_values(fam, l, &mut vals);
        let off = if fam.is_vector() { comp * ns } else { 0 };
        (0..ns).map(|k| vals[k] * self.coeffs[dofs[off + k]]).sum()
    }

    /// Gradient (of component `comp`) at barycentric point `l` of triangle `t`.
    pub fn grad_local(&self, t: usize, geo: &Geometry, l: &[f64; 3], comp: usize) -> [f64; 2] {
        let fam = self.space.family();
        let dofs = self.space.cell_dofs(t);
        let ns = fam.scalar().local_dofs();
        let mut grads = [[0.0; 2]; 6];
        basis_gradients(fam, geo, l, &mut grads);
        let off = if fam.is_vector() { comp * ns } else { 0 };
        let mut g = [0.0; 2];
        for k in 0..ns {
            let c = self.coeffs[dofs[off + k]];
            g[0] += c * grads[k][0];
            g[1] += c * grads[k][1];
        }
        g
    }

    pub fn components(&self) -> usize {
        if self.space.family().is_vector() {
            2
        } else {
            1
        }
    }

    /// `∫ f dx` for scalar functions.
    pub fn integral(&self) -> f64 {
        let rule = Rule::degree5();
        let mesh = self.space.mesh();
        (0..mesh.num_triangles())
            .map(|t| {
                let area = Geometry::of(mesh, t).area;
                rule.points.iter().zip(&rule.weights).map(|(l, w)| w * area * self.eval_local(t, l, 0)).sum::<f64>()
            })
            .sum()
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::L2 => self.squared_norms().0.sqrt(),
            NormKind::H1Semi => self.squared_norms().1.sqrt(),
            NormKind::H1 => {
                let (l2, semi) = self.squared_norms();
                (l2 + semi).sqrt()
            }
            NormKind::LinfNodal => self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    /// `(‖f‖²_{L2}, ‖∇f‖²_{L2})` by degree-5 quadrature (exact for P1, P2).
    pub fn squared_norms(&self) -> (f64, f64) {
        let rule = Rule::degree5();
        let mesh = self.space.mesh();
        let mut l2 = 0.0;
        let mut semi = 0.0;
        for t in 0..mesh.num_triangles() {
            let geo = Geometry::of(mesh, t);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                for c in 0..self.components() {
                    let v = self.eval_local(t, l, c);
                    let g = self.grad_local(t, &geo, l, c);
                    l2 += w * geo.area * v * v;
                    semi += w * geo.area * (g[0] * g[0] + g[1] * g[1]);
                }
            }
        }
        (l2, semi)
    }

    /// `(‖f − g‖²_{L2}, ‖∇(f − g)‖²_{L2})` against an exact scalar field,
    /// using a high-order rule so the field's own quadrature error is
    /// negligible.
    pub fn squared_errors(&self, exact: &dyn ScalarField) -> (f64, f64) {
        assert!(!self.space.family().is_vector());
        self.error_sums(|x, _| (exact.value(x), exact.gradient(x)))
    }

    /// Vector counterpart of [`squared_errors`](Self::squared_errors).
    pub fn squared_errors_vector(&self, exact: &dyn VectorField) -> (f64, f64) {
        assert!(self.space.family().is_vector());
        self.error_sums(|x, c| (exact.value(x)[c], exact.jacobian(x)[c]))
    }

    fn error_sums(&self, exact: impl Fn([f64; 2], usize) -> (f64, [f64; 2])) -> (f64, f64) {
        let rule = Rule::collapsed_gauss(6);
        let mesh = self.space.mesh();
        let mut l2 = 0.0;
        let mut semi = 0.0;
        for t in 0..mesh.num_triangles() {
            let geo = Geometry::of(mesh, t);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = geo.point(l);
                for c in 0..self.components() {
                    let (v, g) = exact(x, c);
                    let dv = self.eval_local(t, l, c) - v;
                    let dg = self.grad_local(t, &geo, l, c);
                    l2 += w * geo.area * dv * dv;
                    semi += w * geo.area * ((dg[0] - g[0]).powi(2) + (dg[1] - g[1]).powi(2));
                }
            }
        }
        (l2, semi)
    }
}
