use std::time::Instant;

use serde::Serialize;

use super::{Discretization, Params, State, StepStats, Stepper};
use crate::diagnostics::{
    dissipation, energy, energy_law_residual, invariant_residuals, EnergyBreakdown, InvariantResiduals,
    StabilityMonitor,
};
use crate::error::Result;

/// Diagnostics of one completed step, as streamed to the run CSV.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub energy: EnergyBreakdown,
    pub dissipation: f64,
    pub invariants: InvariantResiduals,
    /// Left side of the per-step energy identity.
    pub law_residual: f64,
    pub picard_iters: usize,
    pub newton_iters: usize,
    pub monolithic: bool,
}

impl StepRecord {
    pub const CSV_HEADER: [&'static str; 13] = [
        "step",
        "time",
        "E_total",
        "E_kinetic",
        "E_double_well",
        "E_gradient",
        "E_longrange",
        "dissipation",
        "mass_dev",
        "div_res",
        "mu_mean_res",
        "picard_iters",
        "newton_iters",
    ];

    /// The record as CSV fields, reals in scientific notation with 12
    /// significant digits.
    pub fn csv_fields(&self) -> Vec<String> {
        let e = &self.energy;
        let mut out = vec![self.step.to_string()];
        out.extend(
            [
                self.time,
                e.total,
                e.kinetic,
                e.double_well,
                e.gradient,
                e.longrange,
                self.dissipation,
                self.invariants.mass_dev,
                self.invariants.div_res,
                self.invariants.mu_mean_res,
            ]
            .iter()
            .map(|v| format!("{v:.11e}")),
        );
        out.push(self.picard_iters.to_string());
        out.push(self.newton_iters.to_string());
        out
    }
}

/// Aggregates of a whole trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub initial_energy: EnergyBreakdown,
    pub final_energy: EnergyBreakdown,
    /// Largest `E^m − E^{m−1}`; negative when the energy fell every step.
    pub max_energy_increase: f64,
    pub max_law_residual: f64,
    pub max_mass_dev: f64,
    pub max_div_res: f64,
    pub max_mu_mean_res: f64,
    pub total_picard: usize,
    pub max_picard: usize,
    pub total_newton: usize,
    pub monolithic_steps: usize,
    pub monitor: StabilityMonitor,
    pub wall_seconds: f64,
}

impl RunSummary {
    /// Whether the energy never rose by more than `slack · max(1, E⁰)`.
    pub fn energy_monotone(&self, slack: f64) -> bool {
        self.max_energy_increase <= slack * self.initial_energy.total.max(1.0)
    }
}

/// Evaluates the diagnostics of the step `prev → next`.
pub fn step_record(
    disc: &Discretization,
    params: &Params,
    prev: &State,
    next: &State,
    stats: &StepStats,
) -> Result<StepRecord> {
    Ok(StepRecord {
        step: next.step,
        time: next.time,
        energy: energy(disc, next, params)?,
        dissipation: dissipation(disc, next, params),
        invariants: invariant_residuals(disc, next, params)?,
        law_residual: energy_law_residual(disc, prev, next, params)?,
        picard_iters: stats.picard_iters,
        newton_iters: stats.newton_iters,
        monolithic: stats.monolithic,
    })
}

/// Runs `params.num_steps()` steps from `initial`. `observe` sees every
/// step record with the new state, in order; an error from it, or from a
/// step, aborts the run after everything observed so far.
pub fn run(
    disc: &Discretization,
    params: &Params,
    initial: State,
    mut observe: impl FnMut(&StepRecord, &State) -> Result<()>,
) -> Result<(State, RunSummary)> {
    let clock = Instant::now();
    params.validate()?;
    let steps = params.num_steps();
    let mut stepper = Stepper::new(disc, params)?;
    let initial_energy = energy(disc, &initial, params)?;
    let mut summary = RunSummary {
        steps: 0,
        final_time: initial.time,
        initial_energy,
        final_energy: initial_energy,
        max_energy_increase: f64::NEG_INFINITY,
        max_law_residual: 0.0,
        max_mass_dev: 0.0,
        max_div_res: 0.0,
        max_mu_mean_res: 0.0,
        total_picard: 0,
        max_picard: 0,
        total_newton: 0,
        monolithic_steps: 0,
        monitor: StabilityMonitor::start(disc, &initial),
        wall_seconds: 0.0,
    };
    let mut state = initial;
    for _ in 0..steps {
        let (next, stats) = stepper.step(&state)?;
        let rec = step_record(disc, params, &state, &next, &stats)?;
        summary.max_energy_increase = summary.max_energy_increase.max(rec.energy.total - summary.final_energy.total);
        summary.final_energy = rec.energy;
        summary.max_law_residual = summary.max_law_residual.max(rec.law_residual.abs());
        summary.max_mass_dev = summary.max_mass_dev.max(rec.invariants.mass_dev);
        summary.max_div_res = summary.max_div_res.max(rec.invariants.div_res);
        summary.max_mu_mean_res = summary.max_mu_mean_res.max(rec.invariants.mu_mean_res);
        summary.total_picard += stats.picard_iters;
        summary.max_picard = summary.max_picard.max(stats.picard_iters);
        summary.total_newton += stats.newton_iters;
        summary.monolithic_steps += usize::from(stats.monolithic);
        summary.monitor.update(disc, &state, &next, params);
        summary.steps += 1;
        summary.final_time = next.time;
        observe(&rec, &next)?;
        state = next;
    }
    summary.wall_seconds = clock.elapsed().as_secs_f64();
    Ok((state, summary))
}
