use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Discretization, Params};
use crate::error::Result;
use crate::fem::{FeFunction, ScalarField, VectorField};
use crate::operators::{darcy_stokes_projection, ritz_with};

/// The benchmark phase field `½(1 − cos 4πx)(1 − cos 2πy) − 1` on the unit
/// square: two bumps of the +1 phase in a −1 matrix, with mean −½.
#[derive(Clone, Copy, Debug, Default)]
pub struct BenchmarkPhase;

impl ScalarField for BenchmarkPhase {
    fn value(&self, x: [f64; 2]) -> f64 {
        let (a, b) = (4.0 * PI * x[0], 2.0 * PI * x[1]);
        0.5 * (1.0 - a.cos()) * (1.0 - b.cos()) - 1.0
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (4.0 * PI * x[0], 2.0 * PI * x[1]);
        [2.0 * PI * a.sin() * (1.0 - b.cos()), PI * (1.0 - a.cos()) * b.sin()]
    }
}

/// How the initial phase field is brought into the P1 space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Nodal interpolation.
    #[default]
    Interpolate,
    /// Ritz projection with matched mean.
    Ritz,
}

/// The five discrete fields at one time level.
#[derive(Clone, Debug)]
pub struct State {
    pub phi: FeFunction,
    pub mu: FeFunction,
    pub xi: FeFunction,
    pub u: FeFunction,
    pub p: FeFunction,
    pub step: usize,
    pub time: f64,
    /// `(φ⁰, 1)/|Ω|`, conserved by every step.
    pub mass_average: f64,
}

/// Builds the initial state: φ⁰ by interpolation or Ritz projection, u⁰ by
/// Darcy-Stokes projection (zero if absent), μ⁰ from
/// `(μ⁰, ψ) = ε a(φ⁰, ψ) + ε⁻¹((φ⁰)³ − φ⁰, ψ) + θ (T_h(φ⁰ − φ̄0), ψ)`,
/// `ξ⁰ = θ T_h(φ⁰ − φ̄0)` and `p⁰ = 0`.
pub fn initialize(
    disc: &Discretization,
    params: &Params,
    phi0: &dyn ScalarField,
    u0: Option<&dyn VectorField>,
    mode: InitMode,
) -> Result<State> {
    params.validate()?;
    let ops = &disc.ops;
    let phi = match mode {
        InitMode::Interpolate => FeFunction::interpolate(disc.p1(), |x| phi0.value(x)),
        InitMode::Ritz => ritz_with(phi0, ops)?,
    };
    let u = match u0 {
        Some(u0) => darcy_stokes_projection(u0, None, &disc.flow, params.lambda, params.eta)?.0,
        None => FeFunction::zeros(disc.velocity()),
    };
    initial_from_fields(disc, params, phi, u)
}

/// As [`initialize`] but from discrete φ⁰ and u⁰.
pub fn initial_from_fields(disc: &Discretization, params: &Params, phi: FeFunction, u: FeFunction) -> Result<State> {
    let ops = &disc.ops;
    let eps = params.epsilon;
    let mass_average = ops.integral(phi.coeffs()) / ops.area();
    let xi = long_range_potential(disc, params, phi.coeffs(), mass_average)?;
    let c = phi.coeffs();
    let kphi = ops.stiffness().mul_vec(c);
    let mphi = ops.mass().mul_vec(c);
    let f3 = disc.cubic_vector(c);
    let mxi = ops.mass().mul_vec(&xi);
    let rhs: Vec<f64> = (0..c.len()).map(|i| eps * kphi[i] + (f3[i] - mphi[i]) / eps + mxi[i]).collect();
    let mu = ops.mass_solve(&rhs);
    Ok(State {
        mu: FeFunction::from_coeffs(disc.p1(), mu)?,
        xi: FeFunction::from_coeffs(disc.p1(), xi)?,
        p: FeFunction::zeros(disc.pressure()),
        phi,
        u,
        step: 0,
        time: 0.0,
        mass_average,
    })
}

/// `θ T_h(φ − φ̄0)`, zero when θ = 0.
pub(crate) fn long_range_potential(
    disc: &Discretization,
    params: &Params,
    phi: &[f64],
    mass_average: f64,
) -> Result<Vec<f64>> {
    if params.theta == 0.0 {
        return Ok(vec![0.0; phi.len()]);
    }
    let shifted: Vec<f64> = phi.iter().map(|v| v - mass_average).collect();
    let t = disc.ops.apply_th_coeffs(&shifted)?;
    Ok(t.into_iter().map(|v| params.theta * v).collect())
}
