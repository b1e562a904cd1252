use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The mobility-type coefficient in front of the long-range term. The
/// analysis fixes it to one and so does this implementation.
pub const OMEGA: f64 = 1.0;

/// Model coefficients, time grid and solver controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Interface width ε.
    pub epsilon: f64,
    /// Coupling strength γ between flow and phase field.
    pub gamma: f64,
    /// Viscosity λ.
    pub lambda: f64,
    /// Darcy drag η.
    pub eta: f64,
    /// Long-range (Ohta-Kawasaki) strength θ.
    pub theta: f64,
    /// Time step τ.
    pub tau: f64,
    /// Final time T.
    pub final_time: f64,
    pub picard_tol: f64,
    pub newton_tol: f64,
    pub linear_tol: f64,
    pub max_picard: usize,
    pub max_newton: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            epsilon: 6.25e-2,
            gamma: 1.0,
            lambda: 1.0,
            eta: 1.0,
            theta: 0.0,
            tau: 1.25e-4,
            final_time: 0.4,
            picard_tol: 1e-9,
            newton_tol: 1e-12,
            linear_tol: 1e-12,
            max_picard: 100,
            max_newton: 50,
        }
    }
}

impl Params {
    /// Checks signs, tolerances and that τ divides T.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("lambda", self.lambda),
            ("tau", self.tau),
            ("final_time", self.final_time),
            ("picard_tol", self.picard_tol),
            ("newton_tol", self.newton_tol),
            ("linear_tol", self.linear_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("eta", self.eta), ("theta", self.theta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        if self.max_picard == 0 || self.max_newton == 0 {
            return Err(Error::InvalidArgument("max_picard and max_newton must be at least 1".into()));
        }
        self.checked_steps().map(|_| ())
    }

    fn checked_steps(&self) -> Result<usize> {
        let ratio = self.final_time / self.tau;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-12 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau = {} does not divide final_time = {} (ratio {ratio})",
                self.tau, self.final_time
            )));
        }
        Ok(m as usize)
    }

    /// Number of uniform steps `round(T/τ)`.
    pub fn num_steps(&self) -> usize {
        self.checked_steps().unwrap_or_else(|_| (self.final_time / self.tau).round().max(1.0) as usize)
    }
}
