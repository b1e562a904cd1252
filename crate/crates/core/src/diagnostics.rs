//! Discrete energy, the per-step energy law, conservation residuals and
//! running stability sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{Geometry, NormKind};
use crate::linalg::dot;
use crate::quadrature::Rule;
use crate::scheme::{Discretization, Params, State, OMEGA};

/// The energy split into its four terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `(ω/2γ)‖u‖²`; zero when γ = 0 (the flow is then decoupled).
    pub kinetic: f64,
    /// `(1/4ε)‖φ² − 1‖²`.
    pub double_well: f64,
    /// `(ε/2)‖∇φ‖²`.
    pub gradient: f64,
    /// `(θ/2)‖φ − φ̄0‖²_{−1,h}`.
    pub longrange: f64,
    pub total: f64,
}

/// `∫ g(φ_a, φ_b) dx` for two P1 coefficient vectors; exact for polynomial
/// `g` up to degree 5.
fn integrate_pair(disc: &Discretization, a: &[f64], b: &[f64], g: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = Rule::degree5();
    let mesh = disc.mesh();
    let mut sum = 0.0;
    for t in 0..mesh.num_triangles() {
        let area = Geometry::of(mesh, t).area;
        let tri = mesh.triangles()[t];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let va = l[0] * a[tri[0]] + l[1] * a[tri[1]] + l[2] * a[tri[2]];
            let vb = l[0] * b[tri[0]] + l[1] * b[tri[1]] + l[2] * b[tri[2]];
            sum += w * area * g(va, vb);
        }
    }
    sum
}

fn check_state(disc: &Discretization, s: &State) -> Result<()> {
    if s.phi.space().mesh().id() != disc.mesh().id() || s.u.space().mesh().id() != disc.mesh().id() {
        return Err(Error::MeshMismatch("state lives on another mesh".into()));
    }
    Ok(())
}

fn shifted(phi: &[f64], c: f64) -> Vec<f64> {
    phi.iter().map(|v| v - c).collect()
}

/// The discrete energy of a state.
pub fn energy(disc: &Discretization, state: &State, params: &Params) -> Result<EnergyBreakdown> {
    check_state(disc, state)?;
    let phi = state.phi.coeffs();
    let eps = params.epsilon;
    let kinetic = if params.gamma > 0.0 {
        OMEGA / (2.0 * params.gamma) * state.u.squared_norms().0
    } else {
        0.0
    };
    let double_well = integrate_pair(disc, phi, phi, |a, _| (a * a - 1.0).powi(2)) / (4.0 * eps);
    let gradient = 0.5 * eps * disc.ops.stiffness().bilinear(phi, phi);
    let longrange = if params.theta > 0.0 {
        0.5 * params.theta * disc.ops.neg_norm_coeffs(&shifted(phi, state.mass_average))?.powi(2)
    } else {
        0.0
    };
    Ok(EnergyBreakdown { kinetic, double_well, gradient, longrange, total: kinetic + double_well + gradient + longrange })
}

/// The physical dissipation `τ[ε‖∇μ‖² + (λ/γ)‖∇u‖² + (η/γ)‖u‖²]` of a step
/// ending in `next`.
pub fn dissipation(disc: &Discretization, next: &State, params: &Params) -> f64 {
    let mu = next.mu.coeffs();
    let mut d = params.epsilon * disc.ops.stiffness().bilinear(mu, mu);
    if params.gamma > 0.0 {
        let (l2, semi) = next.u.squared_norms();
        d += (params.lambda * semi + params.eta * l2) / params.gamma;
    }
    params.tau * d
}

/// Left side of the per-step energy identity:
/// `E^m − E^{m−1} + τ[ε‖∇μ‖² + (λ/γ)‖∇u‖² + (η/γ)‖u‖²]`
/// `+ τ²[(ε/2)‖∇δφ‖² + (1/2γ)‖δu‖² + (1/4ε)‖δ(φ²)‖² + (1/2ε)‖φ δφ‖²`
/// `+ (1/2ε)‖δφ‖² + (θ/2)‖δφ‖²_{−1,h}]`, where `δ` is the backward
/// difference quotient. Zero for an exact solution of the scheme.
pub fn energy_law_residual(disc: &Discretization, prev: &State, next: &State, params: &Params) -> Result<f64> {
    check_state(disc, prev)?;
    check_state(disc, next)?;
    let eps = params.epsilon;
    let e0 = energy(disc, prev, params)?.total;
    let e1 = energy(disc, next, params)?.total;
    let (p0, p1) = (prev.phi.coeffs(), next.phi.coeffs());
    // τ·δφ = φ^m − φ^{m−1}
    let dphi: Vec<f64> = p1.iter().zip(p0).map(|(a, b)| a - b).collect();
    let mut rem = 0.5 * eps * disc.ops.stiffness().bilinear(&dphi, &dphi);
    rem += integrate_pair(disc, p1, p0, |a, b| (a * a - b * b).powi(2)) / (4.0 * eps);
    rem += integrate_pair(disc, p1, &dphi, |a, d| (a * d).powi(2)) / (2.0 * eps);
    rem += disc.ops.mass().bilinear(&dphi, &dphi) / (2.0 * eps);
    if params.theta > 0.0 {
        rem += 0.5 * params.theta * disc.ops.neg_norm_coeffs(&dphi)?.powi(2);
    }
    if params.gamma > 0.0 {
        let du = next.u.axpy(-1.0, &prev.u)?;
        rem += OMEGA * du.squared_norms().0 / (2.0 * params.gamma);
    }
    Ok(e1 - e0 + dissipation(disc, next, params) + rem)
}

/// Conservation and identity residuals of a single state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InvariantResiduals {
    /// `|(φ − φ̄0, 1)|`.
    pub mass_dev: f64,
    /// `max_q |c(u, q)|` over the pressure basis.
    pub div_res: f64,
    /// `|mean(μ) − (ε⁻¹|Ω|⁻¹(φ³, 1) − φ̄0/ε)|`.
    pub mu_mean_res: f64,
    /// `|(ξ, 1)|`.
    pub xi_mean_res: f64,
    /// `|(p, 1)|`.
    pub p_mean_res: f64,
}

pub fn invariant_residuals(disc: &Discretization, state: &State, params: &Params) -> Result<InvariantResiduals> {
    check_state(disc, state)?;
    let ops = &disc.ops;
    let area = ops.area();
    let phi = state.phi.coeffs();
    let eps = params.epsilon;
    let mass_dev = (ops.integral(phi) - state.mass_average * area).abs();
    let du = disc.flow.divergence.mul_vec(&disc.flow.restrict(state.u.coeffs()));
    let div_res = du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cube: f64 = disc.cubic_vector(phi).iter().sum();
    let mu_mean = ops.integral(state.mu.coeffs()) / area;
    let mu_mean_res = (mu_mean - (cube / (eps * area) - state.mass_average / eps)).abs();
    Ok(InvariantResiduals {
        mass_dev,
        div_res,
        mu_mean_res,
        xi_mean_res: ops.integral(state.xi.coeffs()).abs(),
        p_mean_res: dot(&disc.flow.pressure_integrals, state.p.coeffs()).abs(),
    })
}

/// Running sums of the stability estimates and the maxima of `‖μ‖` and
/// `‖Δ_h φ‖` over a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StabilityMonitor {
    /// `τ Σ ‖∇μ^m‖²`.
    pub mu_gradient_sum: f64,
    /// `τ Σ ‖∇u^m‖²`.
    pub u_gradient_sum: f64,
    /// `Σ ‖φ^m − φ^{m−1}‖²_{H1}`.
    pub phi_increment_sum: f64,
    pub max_mu_l2: f64,
    pub max_laplacian_l2: f64,
    pub steps: usize,
}

impl StabilityMonitor {
    pub fn start(disc: &Discretization, initial: &State) -> Self {
        let mut m = StabilityMonitor::default();
        m.observe_maxima(disc, initial);
        m
    }

    fn observe_maxima(&mut self, disc: &Discretization, s: &State) {
        let ops = &disc.ops;
        let mu = s.mu.coeffs();
        self.max_mu_l2 = self.max_mu_l2.max(ops.mass().bilinear(mu, mu).sqrt());
        let lap = ops.laplacian_coeffs(s.phi.coeffs());
        self.max_laplacian_l2 = self.max_laplacian_l2.max(ops.mass().bilinear(&lap, &lap).sqrt());
    }

    pub fn update(&mut self, disc: &Discretization, prev: &State, next: &State, params: &Params) {
        let ops = &disc.ops;
        let mu = next.mu.coeffs();
        self.mu_gradient_sum += params.tau * ops.stiffness().bilinear(mu, mu);
        self.u_gradient_sum += params.tau * next.u.norm(NormKind::H1Semi).powi(2);
        let d: Vec<f64> = next.phi.coeffs().iter().zip(prev.phi.coeffs()).map(|(a, b)| a - b).collect();
        self.phi_increment_sum += ops.mass().bilinear(&d, &d) + ops.stiffness().bilinear(&d, &d);
        self.observe_maxima(disc, next);
        self.steps += 1;
    }

    pub fn is_finite(&self) -> bool {
        [
            self.mu_gradient_sum,
            self.u_gradient_sum,
            self.phi_increment_sum,
            self.max_mu_l2,
            self.max_laplacian_l2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}
