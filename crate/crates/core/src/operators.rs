//! Discrete operators on the P1 space: the inverse Neumann Laplacian `T_h`
//! and its negative norm, the discrete Laplacian, Ritz, L2 and Darcy-Stokes
//! projections, and the coupled bilinear form `ℓ` used in the solvability
//! argument.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_matrix, basis_gradients, basis_values, FeFunction, FeSpace, Family, FormAssembler, Geometry, MatrixKind,
    ScalarField, VectorField,
};
use crate::flow::{FlowSpaces, SaddleSolver};
use crate::linalg::{dot, NeumannPoisson, CholeskyFactor, SparseMatrix};
use crate::mesh::Mesh;
use crate::quadrature::Rule;
use crate::scheme::Params;

/// Tolerance on `|(ζ, 1)|` below which a function counts as zero-mean.
pub const MEAN_TOL: f64 = 1e-10;

/// P1 mass and stiffness matrices with their factorizations. Built once per
/// mesh and shared read-only afterwards.
pub struct NegNormWorkspace {
    space: Arc<FeSpace>,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    integrals: Vec<f64>,
    poisson: NeumannPoisson,
    mass_factor: CholeskyFactor,
}

impl NegNormWorkspace {
    pub fn new(mesh: &Arc<Mesh>) -> Result<Self> {
        let space = FeSpace::new(mesh, Family::P1);
        let mass = assemble_matrix(MatrixKind::Mass, &space, &space)?;
        let stiffness = assemble_matrix(MatrixKind::Stiffness, &space, &space)?;
        let integrals = mass.mul_vec(&vec![1.0; space.dof_count()]);
        let poisson = NeumannPoisson::new(&stiffness, &integrals)?;
        let mass_factor = CholeskyFactor::new(&mass)?;
        Ok(NegNormWorkspace { space, mass, stiffness, integrals, poisson, mass_factor })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// `(1, ψ_i)` for every basis function.
    pub fn basis_integrals(&self) -> &[f64] {
        &self.integrals
    }

    pub fn area(&self) -> f64 {
        self.integrals.iter().sum()
    }

    /// `(f, 1)` for P1 coefficients.
    pub fn integral(&self, coeffs: &[f64]) -> f64 {
        dot(&self.integrals, coeffs)
    }

    fn check(&self, f: &FeFunction) -> Result<()> {
        if f.space().family() != Family::P1 || f.space().mesh().id() != self.space.mesh().id() {
            return Err(Error::SpaceMismatch("expected a P1 function on the workspace mesh".into()));
        }
        Ok(())
    }

    /// `T_h` on raw coefficients.
    pub fn apply_th_coeffs(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        let mean = self.integral(zeta);
        if mean.abs() > MEAN_TOL {
            return Err(Error::NonzeroMean(mean));
        }
        Ok(self.poisson.solve_unchecked(&self.mass.mul_vec(zeta)))
    }

    /// The zero-mean `w` with `a(w, χ) = (ζ, χ)` for every `χ`.
    pub fn apply_th(&self, zeta: &FeFunction) -> Result<FeFunction> {
        self.check(zeta)?;
        FeFunction::from_coeffs(zeta.space(), self.apply_th_coeffs(zeta.coeffs())?)
    }

    /// `(ζ, ξ)_{−1,h} = (ζ, T_h ξ)`.
    pub fn neg_inner_coeffs(&self, zeta: &[f64], xi: &[f64]) -> Result<f64> {
        let t = self.apply_th_coeffs(xi)?;
        let mean = self.integral(zeta);
        if mean.abs() > MEAN_TOL {
            return Err(Error::NonzeroMean(mean));
        }
        Ok(self.mass.bilinear(zeta, &t))
    }

    pub fn neg_norm_coeffs(&self, zeta: &[f64]) -> Result<f64> {
        Ok(self.neg_inner_coeffs(zeta, zeta)?.max(0.0).sqrt())
    }

    /// `‖ζ‖_{−1,h} = √(ζ, T_h ζ)`.
    pub fn neg_norm(&self, zeta: &FeFunction) -> Result<f64> {
        self.check(zeta)?;
        self.neg_norm_coeffs(zeta.coeffs())
    }

    /// `Δ_h v` on raw coefficients: solves `M w = −K v`.
    pub fn laplacian_coeffs(&self, v: &[f64]) -> Vec<f64> {
        let kv = self.stiffness.mul_vec(v);
        let neg: Vec<f64> = kv.iter().map(|x| -x).collect();
        self.mass_factor.solve(&neg)
    }

    /// `(Δ_h v, χ) = −a(v, χ)` for every `χ`.
    pub fn discrete_laplacian(&self, v: &FeFunction) -> Result<FeFunction> {
        self.check(v)?;
        FeFunction::from_coeffs(v.space(), self.laplacian_coeffs(v.coeffs()))
    }

    /// Solves `M x = b`.
    pub fn mass_solve(&self, b: &[f64]) -> Vec<f64> {
        self.mass_factor.solve(b)
    }
}

/// One-shot discrete Laplacian.
pub fn discrete_laplacian(v: &FeFunction) -> Result<FeFunction> {
    NegNormWorkspace::new(v.space().mesh())?.discrete_laplacian(v)
}

/// Accumulates `∫ (g ψ_i + G·∇ψ_i)` over the scalar basis of `space`, where
/// `integrand(x) = (g, G)`.
fn load_scalar(space: &FeSpace, integrand: impl Fn([f64; 2]) -> (f64, [f64; 2])) -> Vec<f64> {
    let rule = Rule::collapsed_gauss(5);
    let mesh = space.mesh();
    let fam = space.family();
    let nl = fam.local_dofs();
    let mut out = vec![0.0; space.dof_count()];
    let (mut vals, mut grads) = ([0.0; 6], [[0.0; 2]; 6]);
    for t in 0..mesh.num_triangles() {
        let geo = Geometry::of(mesh, t);
        let dofs = space.cell_dofs(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let (g, gv) = integrand(geo.point(l));
            basis_values(fam, l, &mut vals);
            basis_gradients(fam, &geo, l, &mut grads);
            let wa = w * geo.area;
            for i in 0..nl {
                out[dofs[i]] += wa * (g * vals[i] + gv[0] * grads[i][0] + gv[1] * grads[i][1]);
            }
        }
    }
    out
}

/// The Ritz projection: `a(R_h f − f, χ) = 0` for all `χ` and
/// `(R_h f − f, 1) = 0`.
pub fn ritz_projection(f: &dyn ScalarField, space: &Arc<FeSpace>) -> Result<FeFunction> {
    if space.family() != Family::P1 {
        return Err(Error::SpaceMismatch("Ritz projection is defined on P1".into()));
    }
    let ws = NegNormWorkspace::new(space.mesh())?;
    ritz_with(f, &ws)
}

pub(crate) fn ritz_with(f: &dyn ScalarField, ws: &NegNormWorkspace) -> Result<FeFunction> {
    let b = load_scalar(ws.space(), |x| (0.0, f.gradient(x)));
    let integral: f64 = load_scalar(ws.space(), |x| (f.value(x), [0.0; 2])).iter().sum();
    FeFunction::from_coeffs(ws.space(), ws.poisson.solve_with_integral(&b, integral))
}

/// The L2 projection onto a scalar space.
pub fn l2_projection(f: impl Fn([f64; 2]) -> f64, space: &Arc<FeSpace>) -> Result<FeFunction> {
    if space.family().is_vector() {
        return Err(Error::SpaceMismatch("L2 projection is implemented for scalar spaces".into()));
    }
    let mass = assemble_matrix(MatrixKind::Mass, space, space)?;
    let b = load_scalar(space, |x| (f(x), [0.0; 2]));
    let x = CholeskyFactor::new(&mass)?.solve(&b);
    FeFunction::from_coeffs(space, x)
}

/// The Darcy-Stokes projection `(P_h u, P_h p)`:
/// `λ a(P_h u − u, v) + η (P_h u − u, v) − c(v, P_h p − p) = 0`,
/// `c(P_h u, q) = 0`, with zero-mean pressure.
pub fn darcy_stokes_projection(
    u0: &dyn VectorField,
    p0: Option<&dyn ScalarField>,
    flow: &FlowSpaces,
    lambda: f64,
    eta: f64,
) -> Result<(FeFunction, FeFunction)> {
    let saddle = flow.saddle(eta, lambda)?;
    let vel = &flow.velocity;
    let rule = Rule::collapsed_gauss(5);
    let mesh = vel.mesh();
    let nv = vel.scalar_dof_count();
    let mut rhs = vec![0.0; vel.dof_count()];
    let (mut vals, mut grads) = ([0.0; 6], [[0.0; 2]; 6]);
    for t in 0..mesh.num_triangles() {
        let geo = Geometry::of(mesh, t);
        let dofs = vel.cell_dofs(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(l);
            let (u, j) = (u0.value(x), u0.jacobian(x));
            let p = p0.map_or(0.0, |p| p.value(x));
            basis_values(Family::P2, l, &mut vals);
            basis_gradients(Family::P2, &geo, l, &mut grads);
            let wa = w * geo.area;
            for k in 0..6 {
                for c in 0..2 {
                    // v = ψ_k e_c, so ∇·v = ∂_c ψ_k
                    let val = lambda * (j[c][0] * grads[k][0] + j[c][1] * grads[k][1]) + eta * u[c] * vals[k]
                        - p * grads[k][c];
                    rhs[dofs[c * 6 + k]] += wa * val;
                }
            }
        }
    }
    debug_assert_eq!(rhs.len(), 2 * nv);
    let (u_free, p) = saddle.solve(&flow.restrict(&rhs), None);
    Ok((
        FeFunction::from_coeffs(vel, flow.extend(&u_free))?,
        FeFunction::from_coeffs(&flow.pressure, p)?,
    ))
}

/// The form `ℓ(μ1, μ2) = ε a(μ1, μ2) + b(φ_prev, u(μ1), μ2)` where `u(μ)`
/// solves the auxiliary flow problem with coefficient `η + 1/τ` driven by
/// `γ b(φ_prev, v, μ)`. Factorizations are built once per `φ_prev`.
pub struct EllForm {
    epsilon: f64,
    gamma: f64,
    stiffness: SparseMatrix,
    flow: FlowSpaces,
    saddle: SaddleSolver,
    /// `B[i, j] = (∇φ_prev·v_j, ψ_i)` on free velocity columns.
    convection: SparseMatrix,
}

impl EllForm {
    pub fn new(phi_prev: &FeFunction, params: &Params, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        let mesh = phi_prev.space().mesh();
        let p1 = FeSpace::new(mesh, Family::P1);
        let stiffness = assemble_matrix(MatrixKind::Stiffness, &p1, &p1)?;
        let flow = FlowSpaces::new(mesh)?;
        let saddle = flow.saddle(params.eta + 1.0 / tau, params.lambda)?;
        let convection = FormAssembler::restricted(&flow.velocity, &p1, None, Some(flow.free_dofs()))?
            .assemble(MatrixKind::Convection(phi_prev))?;
        Ok(EllForm { epsilon: params.epsilon, gamma: params.gamma, stiffness, flow, saddle, convection })
    }

    /// The auxiliary velocity `u(μ)` (full coefficient vector).
    pub fn velocity(&self, mu: &FeFunction) -> Result<FeFunction> {
        let f: Vec<f64> = self.convection.mul_transpose_vec(mu.coeffs()).iter().map(|v| self.gamma * v).collect();
        let (u, _) = self.saddle.solve(&f, None);
        FeFunction::from_coeffs(&self.flow.velocity, self.flow.extend(&u))
    }

    pub fn eval(&self, mu1: &FeFunction, mu2: &FeFunction) -> Result<f64> {
        let u = self.velocity(mu1)?;
        let uf = self.flow.restrict(u.coeffs());
        Ok(self.epsilon * self.stiffness.bilinear(mu1.coeffs(), mu2.coeffs())
            + dot(mu2.coeffs(), &self.convection.mul_vec(&uf)))
    }
}

/// One-shot evaluation of `ℓ(μ1, μ2)`.
pub fn ell_form(mu1: &FeFunction, mu2: &FeFunction, phi_prev: &FeFunction, params: &Params, tau: f64) -> Result<f64> {
    EllForm::new(phi_prev, params, tau)?.eval(mu1, mu2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{analytic, NormKind};
    use crate::linalg::dense;
    use crate::mesh::{build_crossed_mesh, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Mesh> {
        build_crossed_mesh(Rect::UNIT_SQUARE, n).unwrap()
    }

    fn random_zero_mean(ws: &NegNormWorkspace, rng: &mut ChaCha8Rng) -> FeFunction {
        let mut c: Vec<f64> = (0..ws.space().dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = ws.integral(&c) / ws.area();
        c.iter_mut().for_each(|v| *v -= mean);
        FeFunction::from_coeffs(ws.space(), c).unwrap()
    }

    #[test]
    fn th_of_cosine() {
        let ws = NegNormWorkspace::new(&unit(32)).unwrap();
        let z = FeFunction::interpolate(ws.space(), |x| (PI * x[0]).cos());
        let t = ws.apply_th(&z).unwrap();
        let exact = analytic(|x: [f64; 2]| (PI * x[0]).cos() / (PI * PI), |x: [f64; 2]| [-(PI * x[0]).sin() / PI, 0.0]);
        let (l2, _) = t.squared_errors(&exact);
        assert!(l2.sqrt() < 2e-3, "{}", l2.sqrt());
        let zero = ws.apply_th(&FeFunction::zeros(ws.space())).unwrap();
        assert!(zero.coeffs().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn th_rejects_nonzero_mean() {
        let ws = NegNormWorkspace::new(&unit(2)).unwrap();
        let one = FeFunction::constant(ws.space(), 1.0);
        match ws.apply_th(&one) {
            Err(Error::NonzeroMean(m)) => assert!((m - 1.0).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn th_self_adjoint_and_positive() {
        let ws = NegNormWorkspace::new(&unit(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z = random_zero_mean(&ws, &mut rng);
            let x = random_zero_mean(&ws, &mut rng);
            let tz = ws.apply_th(&z).unwrap();
            let tx = ws.apply_th(&x).unwrap();
            let lhs = ws.mass().bilinear(z.coeffs(), tx.coeffs());
            let rhs = ws.mass().bilinear(tz.coeffs(), x.coeffs());
            assert!((lhs - rhs).abs() < 1e-11);
            let a = ws.stiffness().bilinear(tz.coeffs(), tz.coeffs());
            let b = ws.mass().bilinear(z.coeffs(), tz.coeffs());
            assert!((a - b).abs() < 1e-12 && b > 0.0);
        }
    }

    #[test]
    fn neg_norm_matches_sup_oracle() {
        let ws = NegNormWorkspace::new(&unit(2)).unwrap();
        let n = ws.space().dof_count();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = ws.stiffness().to_dense();
        for _ in 0..10 {
            let z = random_zero_mean(&ws, &mut rng);
            let b = ws.mass().mul_vec(z.coeffs());
            // sup over χ of (ζ, χ)²/‖∇χ‖²; constants drop out, so pin χ_0 = 0
            let kr: Vec<Vec<f64>> = (1..n).map(|i| (1..n).map(|j| k[i][j]).collect()).collect();
            let br: Vec<Vec<f64>> = (1..n).map(|i| (1..n).map(|j| b[i] * b[j]).collect()).collect();
            let sup = dense::max_generalized_eigenvalue(&br, &kr).unwrap().sqrt();
            let nn = ws.neg_norm(&z).unwrap();
            assert!((sup - nn).abs() < 1e-8 * nn.max(1.0), "{sup} vs {nn}");
        }
    }

    #[test]
    fn duality_poincare_and_inverse_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut poincare = Vec::new();
        let mut inverse = Vec::new();
        for n in [4, 8, 16] {
            let ws = NegNormWorkspace::new(&unit(n)).unwrap();
            let (mut pmax, mut imax) = (0.0f64, 0.0f64);
            for _ in 0..100 {
                let z = random_zero_mean(&ws, &mut rng);
                let chi: Vec<f64> = (0..ws.space().dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nn = ws.neg_norm(&z).unwrap();
                let pair = ws.mass().bilinear(z.coeffs(), &chi);
                let grad = ws.stiffness().bilinear(&chi, &chi).sqrt();
                assert!(pair.abs() <= nn * grad * (1.0 + 1e-12));
                let l2 = z.norm(NormKind::L2);
                pmax = pmax.max(nn / l2);
                imax = imax.max(ws.space().mesh().h() * l2 / nn);
            }
            poincare.push(pmax);
            inverse.push(imax);
        }
        // the Poincaré ratio is bounded by its coarsest-level value
        assert!(poincare.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{poincare:?}");
        assert!(poincare[0] <= 1.0 / PI + 1e-12);
        let spread = inverse.iter().cloned().fold(0.0, f64::max) / inverse.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 2.0, "{inverse:?}");
    }

    #[test]
    fn laplacian_identities() {
        let ws = NegNormWorkspace::new(&unit(8)).unwrap();
        let c = ws.discrete_laplacian(&FeFunction::constant(ws.space(), 3.0)).unwrap();
        assert!(c.norm(NormKind::LinfNodal) < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..ws.space().dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = FeFunction::from_coeffs(ws.space(), v).unwrap();
        let lv = ws.discrete_laplacian(&v).unwrap();
        let lhs = ws.mass().bilinear(lv.coeffs(), lv.coeffs());
        let rhs = -ws.stiffness().bilinear(v.coeffs(), lv.coeffs());
        assert!((lhs - rhs).abs() < 1e-11 * lhs.max(1.0));
        assert!(ws.integral(lv.coeffs()).abs() < 1e-9);
    }

    #[test]
    fn laplacian_of_cosine_converges() {
        // Δ_h R_h v = Q_h Δv for Neumann-compatible v, so the error decays at
        // the L2-projection rate. The nodal interpolant does not share this
        // on the crossed mesh: centre and corner vertices see different
        // stencils and the pointwise error stays O(1).
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let ws = NegNormWorkspace::new(&unit(n)).unwrap();
            let v = analytic(|x: [f64; 2]| (PI * x[0]).cos(), |x: [f64; 2]| [-PI * (PI * x[0]).sin(), 0.0]);
            let lv = ws.discrete_laplacian(&ritz_with(&v, &ws).unwrap()).unwrap();
            let exact = analytic(|x: [f64; 2]| -PI * PI * (PI * x[0]).cos(), |x: [f64; 2]| [PI.powi(3) * (PI * x[0]).sin(), 0.0]);
            errs.push(lv.squared_errors(&exact).0.sqrt());
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn ritz_reproduces_linears() {
        let s = FeSpace::new(&unit(4), Family::P1);
        let r = ritz_projection(&analytic(|x: [f64; 2]| x[0] + 2.0 * x[1], |_| [1.0, 2.0]), &s).unwrap();
        let i = FeFunction::interpolate(&s, |x| x[0] + 2.0 * x[1]);
        for (a, b) in r.coeffs().iter().zip(i.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = ritz_projection(&analytic(|_: [f64; 2]| -0.7, |_| [0.0, 0.0]), &s).unwrap();
        assert!(c.coeffs().iter().all(|v| (v + 0.7).abs() < 1e-12));
    }

    #[test]
    fn l2_projection_reproduces_linears() {
        let s = FeSpace::new(&unit(4), Family::P1);
        let q = l2_projection(|x| 1.0 - x[0] + 0.5 * x[1], &s).unwrap();
        let i = FeFunction::interpolate(&s, |x| 1.0 - x[0] + 0.5 * x[1]);
        for (a, b) in q.coeffs().iter().zip(i.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn darcy_stokes_zero_and_constraint() {
        let mesh = unit(4);
        let flow = FlowSpaces::new(&mesh).unwrap();
        let zero = analytic(|_: [f64; 2]| [0.0, 0.0], |_: [f64; 2]| [[0.0; 2]; 2]);
        let (u, p) = darcy_stokes_projection(&zero, None, &flow, 1.0, 1.0).unwrap();
        assert!(u.coeffs().iter().chain(p.coeffs()).all(|v| *v == 0.0));
        let (u, p) = darcy_stokes_projection(&stream_velocity(), None, &flow, 1.0, 1.0).unwrap();
        let du = flow.divergence.mul_vec(&flow.restrict(u.coeffs()));
        assert!(du.iter().all(|v| v.abs() < 1e-10));
        assert!(dot(p.coeffs(), &flow.pressure_integrals).abs() < 1e-12);
    }

    /// Curl of `ψ = sin²(πx) sin²(πy)`; vanishes on the boundary of the
    /// unit square.
    pub(crate) fn stream_velocity() -> impl VectorField {
        let s = |t: f64| (PI * t).sin();
        let c = |t: f64| (PI * t).cos();
        analytic(
            move |x: [f64; 2]| {
                let (sx, sy, cx, cy) = (s(x[0]), s(x[1]), c(x[0]), c(x[1]));
                [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
            },
            move |x: [f64; 2]| {
                let (sx, sy, cx, cy) = (s(x[0]), s(x[1]), c(x[0]), c(x[1]));
                let p2 = 2.0 * PI * PI;
                [
                    [2.0 * p2 * sx * cx * sy * cy, p2 * sx * sx * (cy * cy - sy * sy)],
                    [-p2 * (cx * cx - sx * sx) * sy * sy, -2.0 * p2 * sx * cx * sy * cy],
                ]
            },
        )
    }

    #[test]
    fn ell_form_symmetric_and_coercive() {
        let mesh = unit(4);
        let ws = NegNormWorkspace::new(&mesh).unwrap();
        let phi = FeFunction::interpolate(ws.space(), |x| (2.0 * PI * x[0]).cos() * (PI * x[1]).sin());
        let params = Params::default();
        let tau = 1e-2;
        let ell = EllForm::new(&phi, &params, tau).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zero = FeFunction::zeros(ws.space());
        assert_eq!(ell.eval(&zero, &zero).unwrap(), 0.0);
        for _ in 0..10 {
            let a = random_zero_mean(&ws, &mut rng);
            let b = random_zero_mean(&ws, &mut rng);
            let ab = ell.eval(&a, &b).unwrap();
            let ba = ell.eval(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab.abs()), "{ab} {ba}");
            let aa = ell.eval(&a, &a).unwrap();
            let grad = params.epsilon * ws.stiffness().bilinear(a.coeffs(), a.coeffs());
            let u = ell.velocity(&a).unwrap();
            let (ul2, uh1) = u.squared_norms();
            let identity = grad + (params.lambda * uh1 + (params.eta + 1.0 / tau) * ul2) / params.gamma;
            assert!(aa >= grad - 1e-10);
            assert!((aa - identity).abs() < 1e-10 * identity.max(1.0));
        }
    }
}
