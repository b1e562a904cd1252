//! The convex-splitting time stepper.

mod discretization;
mod params;
mod run;
mod state;
mod stepper;

pub use discretization::Discretization;
pub use params::{Params, OMEGA};
pub use run::{run, step_record, RunSummary, StepRecord};
pub use state::{initial_from_fields, initialize, BenchmarkPhase, InitMode, State};
pub use stepper::{StepStats, Stepper};
