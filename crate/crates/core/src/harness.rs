//! Nested-mesh Cauchy convergence study: the same problem is run to a
//! common final time on a hierarchy of uniformly refined meshes, with the
//! time step tied to the mesh size, and the final fields of consecutive
//! levels are compared on the finer mesh.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{prolongate, FeFunction, NormKind, ScalarField};
use crate::mesh::{build_crossed_mesh, uniform_refine, Mesh, Rect};
use crate::scheme::{initialize, run, Discretization, InitMode, Params, RunSummary, State};

/// Environment variable capping the number of mesh levels run at once.
pub const THREADS_VAR: &str = "CHDS_THREADS";

/// The path constant of the reference study: `τ = 0.001·√2·h` with `h` the
/// cell diagonal.
pub const DEFAULT_PATH_CONSTANT: f64 = 0.001 * std::f64::consts::SQRT_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Model and solver parameters; `tau` is replaced per level.
    pub params: Params,
    /// Cells per side of the coarsest mesh.
    pub base_n: usize,
    pub levels: usize,
    /// `τ = c · cell_diagonal` on every level.
    pub path_constant: f64,
    pub init: InitMode,
    /// Concurrent levels; `None` reads [`THREADS_VAR`], falling back to
    /// rayon's default.
    pub threads: Option<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            params: Params::default(),
            base_n: 8,
            levels: 4,
            path_constant: DEFAULT_PATH_CONSTANT,
            init: InitMode::Interpolate,
            threads: None,
        }
    }
}

impl ConvergenceConfig {
    /// The time step on a mesh with `n` cells per side of the unit square,
    /// snapped so that it divides the final time exactly.
    pub fn tau_for(&self, n: usize) -> f64 {
        let raw = self.path_constant * std::f64::consts::SQRT_2 / n as f64;
        let steps = (self.params.final_time / raw).round().max(1.0);
        if ((self.params.final_time / raw) - steps).abs() <= 1e-9 * steps {
            self.params.final_time / steps
        } else {
            raw
        }
    }

    pub fn level_params(&self, n: usize) -> Params {
        Params { tau: self.tau_for(n), ..self.params.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidArgument(format!("levels must be at least 2, got {}", self.levels)));
        }
        if self.base_n == 0 {
            return Err(Error::InvalidArgument("base_n must be at least 1".into()));
        }
        if !(self.path_constant > 0.0) {
            return Err(Error::InvalidArgument(format!("path_constant must be positive, got {}", self.path_constant)));
        }
        for l in 0..self.levels {
            let n = self.base_n << l;
            self.level_params(n)
                .validate()
                .map_err(|e| Error::InvalidArgument(format!("level {l} (n = {n}): {e}")))?;
        }
        Ok(())
    }
}

/// Outcome of one mesh level.
#[derive(Clone, Debug, Serialize)]
pub struct LevelRun {
    pub level: usize,
    pub n: usize,
    /// Longest edge.
    pub h: f64,
    pub tau: f64,
    pub summary: RunSummary,
    pub wall_seconds: f64,
}

/// H1 norms of the differences between consecutive levels, measured on the
/// finer mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyDifference {
    pub h_coarse: f64,
    pub h_fine: f64,
    pub phi: f64,
    pub mu: f64,
    pub p: f64,
    pub u: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub levels: Vec<LevelRun>,
    pub differences: Vec<CauchyDifference>,
    pub rates: Rates,
    /// Set when a level failed; the report then covers the levels before it.
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// `rate_i = log(norm_{i−1}/norm_i) / log(h_{i−1}/h_i)`.
pub fn compute_rates(norms: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if norms.len() != hs.len() {
        return Err(Error::Dimension { expected: norms.len(), got: hs.len() });
    }
    if norms.len() < 2 {
        return Err(Error::InvalidArgument("rates need at least two values".into()));
    }
    if let Some(v) = norms.iter().chain(hs).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("rates need positive finite inputs, got {v}")));
    }
    Ok(norms
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// H1 norms of `fine − P coarse` for φ, μ, p and u, with `P` the exact
/// prolongation to the fine mesh.
pub fn cauchy_difference(coarse: &State, fine: &State) -> Result<CauchyDifference> {
    fn diff(c: &FeFunction, f: &FeFunction) -> Result<f64> {
        let pc = prolongate(c, f.space())?;
        Ok(f.axpy(-1.0, &pc)?.norm(NormKind::H1))
    }
    Ok(CauchyDifference {
        h_coarse: coarse.phi.space().mesh().h(),
        h_fine: fine.phi.space().mesh().h(),
        phi: diff(&coarse.phi, &fine.phi)?,
        mu: diff(&coarse.mu, &fine.mu)?,
        p: diff(&coarse.p, &fine.p)?,
        u: diff(&coarse.u, &fine.u)?,
    })
}

/// The nested hierarchy `base, refine(base), …` on the unit square.
pub fn mesh_hierarchy(base_n: usize, levels: usize) -> Result<Vec<Arc<Mesh>>> {
    let mut meshes = vec![build_crossed_mesh(Rect::UNIT_SQUARE, base_n)?];
    for _ in 1..levels {
        let next = uniform_refine(meshes.last().expect("nonempty"))?;
        meshes.push(next);
    }
    Ok(meshes)
}

fn thread_cap(config: &ConvergenceConfig) -> Option<usize> {
    config.threads.or_else(|| std::env::var(THREADS_VAR).ok()?.trim().parse().ok()).filter(|&t| t > 0)
}

fn run_level(config: &ConvergenceConfig, level: usize, mesh: &Arc<Mesh>, phi0: &dyn ScalarField) -> Result<(LevelRun, State)> {
    let clock = Instant::now();
    let n = mesh.cells_per_side();
    let params = config.level_params(n);
    let disc = Discretization::new(mesh)?;
    let initial = initialize(&disc, &params, phi0, None, config.init)?;
    let (state, summary) = run(&disc, &params, initial, |_, _| Ok(()))?;
    let record = LevelRun { level, n, h: mesh.h(), tau: params.tau, summary, wall_seconds: clock.elapsed().as_secs_f64() };
    Ok((record, state))
}

/// Runs every level to the final time and assembles the report. Invalid
/// configurations are errors; a failing level yields a partial report.
pub fn cauchy_convergence(config: &ConvergenceConfig, phi0: &dyn ScalarField) -> Result<ConvergenceReport> {
    config.validate()?;
    let meshes = mesh_hierarchy(config.base_n, config.levels)?;
    let work = || -> Vec<Result<(LevelRun, State)>> {
        // finest first, so the longest run starts immediately
        let mut out: Vec<_> = meshes
            .par_iter()
            .enumerate()
            .rev()
            .map(|(l, m)| run_level(config, l, m, phi0))
            .collect();
        out.reverse();
        out
    };
    let results = match thread_cap(config) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut report = ConvergenceReport {
        config: config.clone(),
        levels: Vec::new(),
        differences: Vec::new(),
        rates: Rates::default(),
        failure: None,
    };
    let mut states: Vec<State> = Vec::new();
    for (l, res) in results.into_iter().enumerate() {
        match res {
            Ok((rec, state)) => {
                report.levels.push(rec);
                states.push(state);
            }
            Err(e) => {
                report.failure = Some(format!("level {l} (n = {}): {e}", config.base_n << l));
                break;
            }
        }
    }
    for w in states.windows(2) {
        report.differences.push(cauchy_difference(&w[0], &w[1])?);
    }
    report.rates = rates_of(&report.differences);
    Ok(report)
}

/// Rates between consecutive differences; empty with fewer than two.
pub fn rates_of(diffs: &[CauchyDifference]) -> Rates {
    if diffs.len() < 2 {
        return Rates::default();
    }
    let hs: Vec<f64> = diffs.iter().map(|d| d.h_fine).collect();
    let col = |f: fn(&CauchyDifference) -> f64| {
        let norms: Vec<f64> = diffs.iter().map(f).collect();
        // a zero difference has no rate
        compute_rates(&norms, &hs).unwrap_or_else(|_| vec![f64::NAN; diffs.len() - 1])
    };
    Rates { phi: col(|d| d.phi), mu: col(|d| d.mu), p: col(|d| d.p), u: col(|d| d.u) }
}

pub const CSV_HEADER: [&str; 10] =
    ["h_coarse", "h_fine", "phi_h1", "phi_rate", "mu_h1", "mu_rate", "p_h1", "p_rate", "u_h1", "u_rate"];

fn sci(v: f64) -> String {
    format!("{v:.11e}")
}

/// Writes one row per level pair; the rate cells of the first row are empty.
pub fn write_csv(report: &ConvergenceReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for (i, d) in report.differences.iter().enumerate() {
        let rate = |r: &[f64]| if i == 0 { String::new() } else { sci(r[i - 1]) };
        let r = &report.rates;
        w.write_record([
            sci(d.h_coarse),
            sci(d.h_fine),
            sci(d.phi),
            rate(&r.phi),
            sci(d.mu),
            rate(&r.mu),
            sci(d.p),
            rate(&r.p),
            sci(d.u),
            rate(&r.u),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

/// Reads back the differences and printed rates of a report CSV.
pub fn read_csv(path: &Path) -> Result<(Vec<CauchyDifference>, Rates)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut diffs = Vec::new();
    let mut rates = Rates::default();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec.get(i).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| Error::InvalidArgument(format!("{}: bad number {s:?}", path.display())))
        };
        let need = |i: usize| num(i)?.ok_or_else(|| Error::InvalidArgument(format!("{}: empty cell", path.display())));
        diffs.push(CauchyDifference {
            h_coarse: need(0)?,
            h_fine: need(1)?,
            phi: need(2)?,
            mu: need(4)?,
            p: need(6)?,
            u: need(8)?,
        });
        for (i, col) in [(3, &mut rates.phi), (5, &mut rates.mu), (7, &mut rates.p), (9, &mut rates.u)] {
            if let Some(v) = num(i)? {
                col.push(v);
            }
        }
    }
    Ok((diffs, rates))
}
