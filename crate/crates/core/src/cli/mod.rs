//! The batch command layer behind the `chds` binary.

mod config;
mod expr;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{Config, InitialData};
pub use expr::Expr;
pub use output::{write_mesh_vtk, write_state_vtk, RunCsv};

use crate::diagnostics::{energy, energy_law_residual, invariant_residuals};
use crate::error::{Error, Result};
use crate::harness::{cauchy_convergence, write_csv, ConvergenceReport};
use crate::mesh::{build_crossed_mesh, Rect};
use crate::scheme::{initialize, run, Discretization, RunSummary, State, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    Converge,
    Diagnose,
    MeshInfo,
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Command> {
        match s {
            "run" => Ok(Command::Run),
            "converge" => Ok(Command::Converge),
            "diagnose" => Ok(Command::Diagnose),
            "mesh-info" => Ok(Command::MeshInfo),
            _ => Err(Error::InvalidArgument(format!("unknown command {s:?}"))),
        }
    }
}

/// Command-line overrides of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub snapshots: Option<usize>,
    pub levels: Option<usize>,
    /// Add one refinement level beyond the configured ones.
    pub finest: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut Config) {
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(s) = self.snapshots {
            config.snapshots = s;
        }
        if let Some(l) = self.levels {
            config.levels = l;
        }
        if self.finest {
            config.levels += 1;
        }
    }
}

/// Process exit codes by failure category.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad config, arguments or unknown command.
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    /// A solver did not converge or a matrix was singular.
    pub const SOLVER: i32 = 4;
    /// The run finished but a checked invariant was violated.
    pub const CHECK: i32 = 5;
    pub const OTHER: i32 = 1;
}

/// A failed invariant check reported by `diagnose`.
pub const CHECK_FAILED: &str = "invariant check failed";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Expr { .. } => exit::USAGE,
        Error::InvalidArgument(m) if m.starts_with(CHECK_FAILED) => exit::CHECK,
        Error::InvalidArgument(_) => exit::USAGE,
        Error::Io { .. } => exit::IO,
        Error::NoConvergence { .. } | Error::StepFailed { .. } | Error::Singular { .. } => exit::SOLVER,
        _ => exit::OTHER,
    }
}

/// Runs `command` and writes its human-readable report to `log`.
pub fn dispatch(command: Command, config: &Config, log: &mut dyn Write) -> Result<()> {
    match command {
        Command::Run => run_command(config, log).map(|_| ()),
        Command::Converge => converge_command(config, log).map(|_| ()),
        Command::Diagnose => diagnose_command(config, log),
        Command::MeshInfo => mesh_info(config, log),
    }
}

fn say(log: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    log.write_fmt(text).and_then(|_| writeln!(log)).map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn setup(config: &Config) -> Result<(Discretization, State)> {
    let mesh = build_crossed_mesh(Rect::UNIT_SQUARE, config.n)?;
    let disc = Discretization::new(&mesh)?;
    let state = initialize(&disc, &config.params, &config.initial, None, config.init)?;
    Ok((disc, state))
}

/// Integrates to the final time, writing `run.csv`, `summary.json`,
/// `config.txt` and, when enabled, `snapshot_NNNNNN.vtk` into the output
/// directory.
pub fn run_command(config: &Config, log: &mut dyn Write) -> Result<RunSummary> {
    let (disc, s0) = setup(config)?;
    let out = &config.out;
    create_dir(out)?;
    let cfg_path = out.join("config.txt");
    std::fs::write(&cfg_path, config.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    let mut csv = RunCsv::create(&out.join("run.csv"))?;
    let every = config.snapshots;
    let snapshot = |s: &State| write_state_vtk(&out.join(format!("snapshot_{:06}.vtk", s.step)), s);
    if every > 0 {
        snapshot(&s0)?;
    }
    say(log, format_args!("run: n = {}, {} steps of tau = {:e}", config.n, config.params.num_steps(), config.params.tau))?;
    let (_, summary) = run(&disc, &config.params, s0, |rec, s| {
        csv.push(rec)?;
        if every > 0 && s.step % every == 0 {
            snapshot(s)?;
        }
        Ok(())
    })?;
    write_json(&out.join("summary.json"), &summary)?;
    say(
        log,
        format_args!(
            "energy {:.9e} -> {:.9e}, max law residual {:.3e}, max mass deviation {:.3e}, {} Picard iterations, {:.1} s",
            summary.initial_energy.total,
            summary.final_energy.total,
            summary.max_law_residual,
            summary.max_mass_dev,
            summary.total_picard,
            summary.wall_seconds
        ),
    )?;
    Ok(summary)
}

/// The Cauchy convergence study, written as `convergence.csv` and
/// `convergence.json`. A failed level still writes the partial report and
/// then returns the failure.
pub fn converge_command(config: &Config, log: &mut dyn Write) -> Result<ConvergenceReport> {
    let cc = config.convergence();
    create_dir(&config.out)?;
    say(log, format_args!("converge: n = {} .. {}", cc.base_n, cc.base_n << (cc.levels - 1)))?;
    let report = cauchy_convergence(&cc, &config.initial)?;
    let csv_path = config.out.join("convergence.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(&report, file)?;
    write_json(&config.out.join("convergence.json"), &report)?;
    for l in &report.levels {
        say(log, format_args!("  n = {:4}  tau = {:.4e}  {:.1} s", l.n, l.tau, l.wall_seconds))?;
    }
    for (i, d) in report.differences.iter().enumerate() {
        let rate = |r: &[f64]| if i == 0 { "   --".to_string() } else { format!("{:5.2}", r[i - 1]) };
        let r = &report.rates;
        say(
            log,
            format_args!(
                "  h {:.4e} -> {:.4e}  phi {:.4e} {}  mu {:.4e} {}  p {:.4e} {}",
                d.h_coarse,
                d.h_fine,
                d.phi,
                rate(&r.phi),
                d.mu,
                rate(&r.mu),
                d.p,
                rate(&r.p)
            ),
        )?;
    }
    if let Some(f) = &report.failure {
        return Err(Error::InvalidArgument(format!("convergence study incomplete: {f}")));
    }
    Ok(report)
}

/// Thresholds checked by `diagnose`.
const MASS_TOL: f64 = 1e-10;
const DIV_TOL: f64 = 1e-10;
const MU_MEAN_TOL: f64 = 1e-9;
const LAW_TOL: f64 = 1e-8;

/// Initializes, takes one step, and checks the invariants of both states
/// and the energy identity of the step.
pub fn diagnose_command(config: &Config, log: &mut dyn Write) -> Result<()> {
    let (disc, s0) = setup(config)?;
    let p = &config.params;
    let (s1, stats) = Stepper::new(&disc, p)?.step(&s0)?;
    let e0 = energy(&disc, &s0, p)?.total;
    let law = energy_law_residual(&disc, &s0, &s1, p)?;
    let mut failed = Vec::new();
    for (label, s) in [("initial", &s0), ("step 1", &s1)] {
        let r = invariant_residuals(&disc, s, p)?;
        say(
            log,
            format_args!(
                "{label:8} mass {:.3e}  div {:.3e}  mu-mean {:.3e}  xi-mean {:.3e}  p-mean {:.3e}",
                r.mass_dev, r.div_res, r.mu_mean_res, r.xi_mean_res, r.p_mean_res
            ),
        )?;
        for (name, v, tol) in [("mass", r.mass_dev, MASS_TOL), ("div", r.div_res, DIV_TOL), ("mu-mean", r.mu_mean_res, MU_MEAN_TOL)] {
            if !(v <= tol) {
                failed.push(format!("{label} {name} {v:.3e} > {tol:.0e}"));
            }
        }
    }
    let law_tol = LAW_TOL * e0.max(1.0);
    say(log, format_args!("energy {e0:.9e}, law residual {law:.3e}, {} Picard, {} Newton", stats.picard_iters, stats.newton_iters))?;
    if !(law.abs() <= law_tol) {
        failed.push(format!("law residual {law:.3e} > {law_tol:.0e}"));
    }
    if failed.is_empty() {
        say(log, format_args!("all invariants within tolerance"))
    } else {
        Err(Error::InvalidArgument(format!("{CHECK_FAILED}: {}", failed.join("; "))))
    }
}

pub fn mesh_info(config: &Config, log: &mut dyn Write) -> Result<()> {
    let mesh = build_crossed_mesh(Rect::UNIT_SQUARE, config.n)?;
    mesh.validate()?;
    let boundary = (0..mesh.num_edges()).filter(|&e| mesh.is_boundary_edge(e)).count();
    say(log, format_args!("cells per side: {}", config.n))?;
    say(log, format_args!("vertices: {}", mesh.num_vertices()))?;
    say(log, format_args!("triangles: {}", mesh.num_triangles()))?;
    say(log, format_args!("edges: {} ({boundary} on the boundary)", mesh.num_edges()))?;
    say(log, format_args!("h (longest edge): {:.9e}", mesh.h()))?;
    say(log, format_args!("conforming: yes"))
}
