//! One time step of the convex-splitting scheme.
//!
//! The phase-field block (φ, μ, ξ) is solved by Newton's method with
//! Jacobian reuse: a factorization is kept across iterations and steps and
//! refreshed only when the residual stops contracting quickly. The flow
//! block is a constant saddle matrix, factored once. The two blocks are
//! coupled by Picard iteration; if that stalls the whole system is solved
//! monolithically by the same Newton driver.

use super::state::State;
use super::{Discretization, Params};
use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::flow::SaddleSolver;
use crate::linalg::{dot, Block, BlockMatrix, LuFactor, SparseMatrix};

/// Refresh the Jacobian when a reused factorization contracts the residual
/// by less than this factor.
const CHORD_RATIO: f64 = 0.1;
/// Smallest step length tried by the damped fallback.
const MIN_DAMPING: f64 = 1e-6;
/// Relative changes are measured against at least this norm.
const CHANGE_FLOOR: f64 = 1e-12;

/// Per-step solver statistics.
#[derive(Clone, Debug, Default)]
pub struct StepStats {
    pub picard_iters: usize,
    /// Linear solves inside the Newton iterations.
    pub newton_iters: usize,
    pub factorizations: usize,
    /// The step needed the monolithic fallback.
    pub monolithic: bool,
    /// Final scaled Newton residual.
    pub residual: f64,
    /// Relative velocity change per Picard iteration.
    pub picard_history: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖r‖∞ / scale`, with an all-zero block counting as converged.
fn scaled(r: &[f64], scale: f64) -> f64 {
    let rn = inf_norm(r);
    if rn == 0.0 {
        0.0
    } else if !rn.is_finite() {
        f64::INFINITY
    } else {
        rn / scale.max(f64::MIN_POSITIVE)
    }
}

/// A square nonlinear system with a Jacobian of fixed sparsity pattern.
trait System {
    /// Residual vector and its scaled size.
    fn residual(&self, x: &[f64]) -> (Vec<f64>, f64);
    fn jacobian(&mut self, x: &[f64]) -> &SparseMatrix;
}

/// Cached factorization for Jacobian reuse.
#[derive(Default)]
struct Chord {
    factor: Option<LuFactor>,
    stale: bool,
}

struct NewtonReport {
    iters: usize,
    factorizations: usize,
    residual: f64,
}

struct NewtonFailure {
    reason: String,
    history: Vec<f64>,
}

fn newton<S: System>(
    sys: &mut S,
    chord: &mut Chord,
    x: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<NewtonReport, NewtonFailure> {
    let (mut r, mut res) = sys.residual(x);
    let mut history = vec![res];
    let mut report = NewtonReport { iters: 0, factorizations: 0, residual: res };
    // whether the cached factorization was computed at the current iterate
    let mut fresh = false;
    while res > tol {
        if report.iters >= max_iter {
            return Err(NewtonFailure { reason: format!("no convergence in {max_iter} Newton iterations"), history });
        }
        if chord.factor.is_none() || chord.stale {
            refactor(sys, chord, x).map_err(|e| NewtonFailure { reason: e.to_string(), history: history.clone() })?;
            report.factorizations += 1;
            fresh = true;
        }
        let factor = chord.factor.as_ref().expect("factor present");
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        factor.solve_in_place(&mut delta);
        report.iters += 1;
        let mut trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let (mut r_new, mut res_new) = sys.residual(&trial);
        if !(res_new < res) {
            if !fresh {
                chord.stale = true;
                continue;
            }
            // damped fallback: halve the step until the residual decreases
            let mut s = 0.5;
            while !(res_new < res) && s >= MIN_DAMPING {
                trial = x.iter().zip(&delta).map(|(a, d)| a + s * d).collect();
                (r_new, res_new) = sys.residual(&trial);
                s *= 0.5;
            }
            if !(res_new < res) {
                history.push(res_new);
                return Err(NewtonFailure { reason: "damped Newton step did not reduce the residual".into(), history });
            }
        }
        chord.stale = res_new > CHORD_RATIO * res;
        *x = trial;
        r = r_new;
        res = res_new;
        fresh = false;
        history.push(res);
    }
    report.residual = res;
    Ok(report)
}

fn refactor<S: System>(sys: &mut S, chord: &mut Chord, x: &[f64]) -> Result<()> {
    let jac = sys.jacobian(x);
    match chord.factor.as_mut() {
        Some(f) => f.refactor(jac)?,
        None => chord.factor = Some(LuFactor::new(jac)?),
    }
    chord.stale = false;
    Ok(())
}

/// Data fixed during one step.
struct StepData {
    mphi_prev: Vec<f64>,
    mass_average: f64,
    /// `B(φ_prev)` on free velocity columns.
    convection: SparseMatrix,
    /// `M_v u_prev / τ` on free dofs.
    flow_base: Vec<f64>,
}

/// Term-wise residual of the phase-field rows, shared by the block and the
/// monolithic systems. `bu = B u_free`.
fn ch_residual(
    disc: &Discretization,
    p: &Params,
    data: &StepData,
    with_xi: bool,
    x: &[f64],
    bu: &[f64],
    out: &mut Vec<f64>,
) -> f64 {
    let n = disc.num_p1();
    let ops = &disc.ops;
    let (m, k) = (ops.mass(), ops.stiffness());
    let (eps, tau) = (p.epsilon, p.tau);
    let phi = &x[..n];
    let mu = &x[n..2 * n];
    let mphi = m.mul_vec(phi);
    let kmu = k.mul_vec(mu);
    let kphi = k.mul_vec(phi);
    let mmu = m.mul_vec(mu);
    let f3 = disc.cubic_vector(phi);
    let (mxi, kxi) = if with_xi {
        let xi = &x[2 * n..3 * n];
        (m.mul_vec(xi), k.mul_vec(xi))
    } else {
        (vec![0.0; n], vec![0.0; n])
    };
    out.clear();
    out.extend((0..n).map(|i| mphi[i] - data.mphi_prev[i] + tau * (eps * kmu[i] + bu[i])));
    // scales use |A||x| so that cancellation inside a row cannot push the
    // rounding floor above the tolerance
    let abs_phi = inf_norm(&m.abs_mul_vec(phi));
    let scale_a = abs_phi + inf_norm(&data.mphi_prev) + tau * (eps * inf_norm(&k.abs_mul_vec(mu)) + inf_norm(bu));
    let mut res = scaled(&out[..n], scale_a);
    out.extend((0..n).map(|i| (f3[i] - data.mphi_prev[i]) / eps + eps * kphi[i] - mmu[i] + mxi[i]));
    let scale_b = (inf_norm(&f3) + inf_norm(&data.mphi_prev)) / eps
        + eps * inf_norm(&k.abs_mul_vec(phi))
        + inf_norm(&m.abs_mul_vec(mu))
        + if with_xi { inf_norm(&m.abs_mul_vec(&x[2 * n..3 * n])) } else { 0.0 };
    res = res.max(scaled(&out[n..2 * n], scale_b));
    if with_xi {
        let ints = ops.basis_integrals();
        let l = x[3 * n];
        let shifted: Vec<f64> = (0..n).map(|i| mphi[i] - data.mass_average * ints[i]).collect();
        out.extend((0..n).map(|i| kxi[i] + ints[i] * l - p.theta * shifted[i]));
        let scale_c = inf_norm(&k.abs_mul_vec(&x[2 * n..3 * n]))
            + l.abs() * inf_norm(ints)
            + p.theta * (abs_phi + data.mass_average.abs() * inf_norm(ints));
        res = res.max(scaled(&out[2 * n..3 * n], scale_c));
        let xi = &x[2 * n..3 * n];
        out.push(dot(ints, xi));
        let scale_l: f64 = ints.iter().zip(xi).map(|(a, b)| (a * b).abs()).sum();
        res = res.max(scaled(&out[3 * n..], scale_l));
    }
    res
}

/// Constant helper matrices for the Jacobian blocks.
struct Borders {
    /// `(1, ψ_i)` as an `n × 1` column.
    col: SparseMatrix,
    row: SparseMatrix,
}

impl Borders {
    fn new(ints: &[f64]) -> Self {
        let col = SparseMatrix::from_triplets(
            ints.len(),
            1,
            &ints.iter().enumerate().map(|(i, &v)| (i, 0, v)).collect::<Vec<_>>(),
        );
        let row = col.transpose();
        Borders { col, row }
    }
}

fn ch_blocks<'a>(
    disc: &'a Discretization,
    p: &Params,
    borders: &'a Borders,
    j3: &'a SparseMatrix,
    with_xi: bool,
) -> Vec<Block<'a>> {
    let n = disc.num_p1();
    let (m, k) = (disc.ops.mass(), disc.ops.stiffness());
    let (eps, tau) = (p.epsilon, p.tau);
    let mut blocks = vec![
        Block::new(0, 0, m, 1.0),
        Block::new(0, n, k, tau * eps),
        Block::new(n, 0, j3, 1.0 / eps),
        Block::new(n, 0, k, eps),
        Block::new(n, n, m, -1.0),
    ];
    if with_xi {
        blocks.extend([
            Block::new(n, 2 * n, m, 1.0),
            Block::new(2 * n, 0, m, -p.theta),
            Block::new(2 * n, 2 * n, k, 1.0),
            Block::new(2 * n, 3 * n, &borders.col, 1.0),
            Block::new(3 * n, 2 * n, &borders.row, 1.0),
        ]);
    }
    blocks
}

/// Phase-field block with the velocity frozen.
struct ChSystem<'a> {
    disc: &'a Discretization,
    params: &'a Params,
    data: &'a StepData,
    borders: &'a Borders,
    with_xi: bool,
    bu: Vec<f64>,
    jac: &'a mut Option<BlockMatrix>,
}

impl System for ChSystem<'_> {
    fn residual(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let mut out = Vec::with_capacity(x.len());
        let res = ch_residual(self.disc, self.params, self.data, self.with_xi, x, &self.bu, &mut out);
        (out, res)
    }

    fn jacobian(&mut self, x: &[f64]) -> &SparseMatrix {
        let n = self.disc.num_p1();
        let j3 = self.disc.cubic_jacobian(&x[..n]);
        let blocks = ch_blocks(self.disc, self.params, self.borders, &j3, self.with_xi);
        match self.jac.as_mut() {
            Some(j) => j.refill(&blocks),
            None => *self.jac = Some(BlockMatrix::new(x.len(), x.len(), &blocks)),
        }
        self.jac.as_ref().expect("jacobian").matrix()
    }
}

/// Layout of the monolithic unknown vector
/// `[φ, μ, (ξ, ℓ_ξ), u_free, p, ℓ_p]`.
#[derive(Clone, Copy)]
struct MonoLayout {
    ch: usize,
    nf: usize,
    np: usize,
}

impl MonoLayout {
    fn u(&self) -> std::ops::Range<usize> {
        self.ch..self.ch + self.nf
    }
    fn p(&self) -> std::ops::Range<usize> {
        self.ch + self.nf..self.ch + self.nf + self.np
    }
    fn len(&self) -> usize {
        self.ch + self.nf + self.np + 1
    }
}

/// The fully coupled system.
struct MonoSystem<'a> {
    disc: &'a Discretization,
    params: &'a Params,
    data: &'a StepData,
    borders: &'a Borders,
    pressure_borders: &'a Borders,
    convection_t: SparseMatrix,
    with_xi: bool,
    layout: MonoLayout,
    jac: &'a mut Option<BlockMatrix>,
}

impl System for MonoSystem<'_> {
    fn residual(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let l = self.layout;
        let flow = &self.disc.flow;
        let p = self.params;
        let u = &x[l.u()];
        let pr = &x[l.p()];
        let lp = x[l.len() - 1];
        let bu = self.data.convection.mul_vec(u);
        let mut out = Vec::with_capacity(l.len());
        let mut res = ch_residual(self.disc, p, self.data, self.with_xi, &x[..l.ch], &bu, &mut out);
        let n = self.disc.num_p1();
        let mu = &x[n..2 * n];
        let alpha = 1.0 / p.tau + p.eta;
        let mu_u = flow.mass.mul_vec(u);
        let ku = flow.stiffness.mul_vec(u);
        let dtp = flow.divergence.mul_transpose_vec(pr);
        let btmu = self.data.convection.mul_transpose_vec(mu);
        out.extend((0..l.nf).map(|i| {
            alpha * mu_u[i] + p.lambda * ku[i] - dtp[i] - p.gamma * btmu[i] - self.data.flow_base[i]
        }));
        let scale_d = alpha * inf_norm(&flow.mass.abs_mul_vec(u))
            + p.lambda * inf_norm(&flow.stiffness.abs_mul_vec(u))
            + inf_norm(&dtp)
            + p.gamma * inf_norm(&btmu)
            + inf_norm(&self.data.flow_base);
        res = res.max(scaled(&out[l.u()], scale_d));
        let du = flow.divergence.mul_vec(u);
        let ints = &flow.pressure_integrals;
        out.extend((0..l.np).map(|i| -du[i] + ints[i] * lp));
        // |D||u| bounds the size of each divergence entry
        let scale_e = (0..l.np)
            .map(|i| {
                let (cols, vals) = flow.divergence.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| (v * u[j]).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
            + lp.abs() * inf_norm(ints);
        res = res.max(scaled(&out[l.p()], scale_e));
        out.push(dot(ints, pr));
        let scale_l: f64 = ints.iter().zip(pr).map(|(a, b)| (a * b).abs()).sum();
        res = res.max(scaled(&out[l.len() - 1..], scale_l));
        (out, res)
    }

    fn jacobian(&mut self, x: &[f64]) -> &SparseMatrix {
        let l = self.layout;
        let n = self.disc.num_p1();
        let p = self.params;
        let flow = &self.disc.flow;
        let j3 = self.disc.cubic_jacobian(&x[..n]);
        let dt = flow.divergence.transpose();
        let mut blocks = ch_blocks(self.disc, p, self.borders, &j3, self.with_xi);
        let (u0, p0) = (l.u().start, l.p().start);
        blocks.extend([
            Block::new(0, u0, &self.data.convection, p.tau),
            Block::new(u0, n, &self.convection_t, -p.gamma),
            Block::new(u0, u0, &flow.mass, 1.0 / p.tau + p.eta),
            Block::new(u0, u0, &flow.stiffness, p.lambda),
            Block::new(u0, p0, &dt, -1.0),
            Block::new(p0, u0, &flow.divergence, -1.0),
            Block::new(p0, l.len() - 1, &self.pressure_borders.col, 1.0),
            Block::new(l.len() - 1, p0, &self.pressure_borders.row, 1.0),
        ]);
        match self.jac.as_mut() {
            Some(j) => j.refill(&blocks),
            None => *self.jac = Some(BlockMatrix::new(l.len(), l.len(), &blocks)),
        }
        self.jac.as_ref().expect("jacobian").matrix()
    }
}

/// Advances states of one discretization with fixed parameters.
pub struct Stepper<'d> {
    disc: &'d Discretization,
    params: Params,
    with_xi: bool,
    flow: SaddleSolver,
    borders: Borders,
    pressure_borders: Borders,
    ch_jac: Option<BlockMatrix>,
    ch_chord: Chord,
    mono_jac: Option<BlockMatrix>,
    mono_chord: Chord,
    /// Increments of the last accepted step, for the predictor.
    last_dx: Option<Vec<f64>>,
    last_du: Option<Vec<f64>>,
}

impl<'d> Stepper<'d> {
    pub fn new(disc: &'d Discretization, params: &Params) -> Result<Self> {
        params.validate()?;
        let flow = disc.flow.saddle(1.0 / params.tau + params.eta, params.lambda)?;
        Ok(Stepper {
            disc,
            params: params.clone(),
            with_xi: params.theta > 0.0,
            flow,
            borders: Borders::new(disc.ops.basis_integrals()),
            pressure_borders: Borders::new(&disc.flow.pressure_integrals),
            ch_jac: None,
            ch_chord: Chord::default(),
            mono_jac: None,
            mono_chord: Chord::default(),
            last_dx: None,
            last_du: None,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn discretization(&self) -> &'d Discretization {
        self.disc
    }

    fn ch_len(&self) -> usize {
        let n = self.disc.num_p1();
        if self.with_xi {
            3 * n + 1
        } else {
            2 * n
        }
    }

    fn step_data(&self, phi_prev: &[f64], mass_average: f64, u_prev: &[f64]) -> StepData {
        let disc = self.disc;
        let convection = disc.convection(phi_prev);
        let uf = disc.flow.restrict(u_prev);
        let flow_base = disc.flow.mass.mul_vec(&uf).into_iter().map(|v| v / self.params.tau).collect();
        StepData {
            mphi_prev: disc.ops.mass().mul_vec(phi_prev),
            mass_average,
            convection,
            flow_base,
        }
    }

    fn ch_vector(&self, phi: &[f64], mu: &[f64], xi: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.ch_len());
        x.extend_from_slice(phi);
        x.extend_from_slice(mu);
        if self.with_xi {
            x.extend_from_slice(xi);
            x.push(0.0);
        }
        x
    }

    fn solve_ch(
        &mut self,
        data: &StepData,
        u_free: &[f64],
        x: &mut Vec<f64>,
        stats: &mut StepStats,
    ) -> std::result::Result<(), NewtonFailure> {
        let mut sys = ChSystem {
            disc: self.disc,
            params: &self.params,
            data,
            borders: &self.borders,
            with_xi: self.with_xi,
            bu: data.convection.mul_vec(u_free),
            jac: &mut self.ch_jac,
        };
        let rep = newton(&mut sys, &mut self.ch_chord, x, self.params.newton_tol, self.params.max_newton)?;
        stats.newton_iters += rep.iters;
        stats.factorizations += rep.factorizations;
        stats.residual = rep.residual;
        Ok(())
    }

    fn solve_flow(&self, data: &StepData, mu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let btmu = data.convection.mul_transpose_vec(mu);
        let f: Vec<f64> = data.flow_base.iter().zip(&btmu).map(|(a, b)| a + self.params.gamma * b).collect();
        self.flow.solve(&f, None)
    }

    /// Solves the phase-field equations with a frozen velocity. Returns
    /// `(φ, μ, ξ)`.
    pub fn solve_ch_block(
        &mut self,
        phi_prev: &FeFunction,
        u_fixed: &FeFunction,
    ) -> Result<(FeFunction, FeFunction, FeFunction)> {
        let disc = self.disc;
        let mass_average = disc.ops.integral(phi_prev.coeffs()) / disc.ops.area();
        let data = self.step_data(phi_prev.coeffs(), mass_average, &vec![0.0; disc.velocity().dof_count()]);
        let n = disc.num_p1();
        let mut x = self.ch_vector(phi_prev.coeffs(), &vec![0.0; n], &vec![0.0; n]);
        let mut stats = StepStats::default();
        self.solve_ch(&data, &disc.flow.restrict(u_fixed.coeffs()), &mut x, &mut stats)
            .map_err(|f| Error::StepFailed { step: 0, reason: f.reason, history: f.history })?;
        let (phi, mu, xi) = self.split_ch(&x);
        Ok((
            FeFunction::from_coeffs(disc.p1(), phi)?,
            FeFunction::from_coeffs(disc.p1(), mu)?,
            FeFunction::from_coeffs(disc.p1(), xi)?,
        ))
    }

    /// Solves the flow equations with frozen φ_prev and μ. Returns `(u, p)`.
    pub fn solve_flow_block(
        &self,
        phi_prev: &FeFunction,
        mu_fixed: &FeFunction,
        u_prev: &FeFunction,
    ) -> Result<(FeFunction, FeFunction)> {
        let disc = self.disc;
        let data = self.step_data(phi_prev.coeffs(), 0.0, u_prev.coeffs());
        let (u, p) = self.solve_flow(&data, mu_fixed.coeffs());
        Ok((
            FeFunction::from_coeffs(disc.velocity(), disc.flow.extend(&u))?,
            FeFunction::from_coeffs(disc.pressure(), p)?,
        ))
    }

    fn split_ch(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.disc.num_p1();
        let xi = if self.with_xi { x[2 * n..3 * n].to_vec() } else { vec![0.0; n] };
        (x[..n].to_vec(), x[n..2 * n].to_vec(), xi)
    }

    fn h1_sq(&self, v: &[f64]) -> f64 {
        let ops = &self.disc.ops;
        ops.mass().bilinear(v, v) + ops.stiffness().bilinear(v, v)
    }

    fn l2_sq_velocity(&self, v: &[f64]) -> f64 {
        self.disc.flow.mass.bilinear(v, v)
    }

    /// Advances one step.
    pub fn step(&mut self, state: &State) -> Result<(State, StepStats)> {
        let disc = self.disc;
        let n = disc.num_p1();
        let data = self.step_data(state.phi.coeffs(), state.mass_average, state.u.coeffs());
        let x_prev = self.ch_vector(state.phi.coeffs(), state.mu.coeffs(), state.xi.coeffs());
        let u_prev = disc.flow.restrict(state.u.coeffs());
        let mut stats = StepStats::default();

        // linear extrapolation from the last two levels
        let mut x = match &self.last_dx {
            Some(d) => x_prev.iter().zip(d).map(|(a, b)| a + b).collect(),
            None => x_prev.clone(),
        };
        let mut u = match &self.last_du {
            Some(d) => u_prev.iter().zip(d).map(|(a, b)| a + b).collect(),
            None => u_prev.clone(),
        };

        let mut result = self.picard(&data, &mut x, &mut u, &mut stats);
        if result.is_none() {
            stats.monolithic = true;
            x = x_prev.clone();
            u = u_prev.clone();
            result = self.monolithic(&data, &mut x, &mut u, &mut stats, state.step + 1)?.into();
        }
        let p = result.expect("solution");
        self.last_dx = Some(x.iter().zip(&x_prev).map(|(a, b)| a - b).collect());
        self.last_du = Some(u.iter().zip(&u_prev).map(|(a, b)| a - b).collect());
        let (phi, mu, xi) = self.split_ch(&x);
        debug_assert_eq!(phi.len(), n);
        let next = State {
            phi: FeFunction::from_coeffs(disc.p1(), phi)?,
            mu: FeFunction::from_coeffs(disc.p1(), mu)?,
            xi: FeFunction::from_coeffs(disc.p1(), xi)?,
            u: FeFunction::from_coeffs(disc.velocity(), disc.flow.extend(&u))?,
            p: FeFunction::from_coeffs(disc.pressure(), p)?,
            step: state.step + 1,
            time: (state.step + 1) as f64 * self.params.tau,
            mass_average: state.mass_average,
        };
        Ok((next, stats))
    }

    /// Picard coupling. Returns the pressure on success, `None` when the
    /// iteration fails or stalls.
    fn picard(&mut self, data: &StepData, x: &mut Vec<f64>, u: &mut Vec<f64>, stats: &mut StepStats) -> Option<Vec<f64>> {
        let n = self.disc.num_p1();
        let tol = self.params.picard_tol;
        let mut growth = 0;
        for k in 1..=self.params.max_picard {
            stats.picard_iters = k;
            let phi_before = x[..n].to_vec();
            if self.solve_ch(data, u, x, stats).is_err() {
                return None;
            }
            let (u_new, p) = self.solve_flow(data, &x[n..2 * n]);
            let du: Vec<f64> = u_new.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
            let du_rel = self.l2_sq_velocity(&du).sqrt() / self.l2_sq_velocity(&u_new).sqrt().max(CHANGE_FLOOR);
            let dphi: Vec<f64> = x[..n].iter().zip(&phi_before).map(|(a, b)| a - b).collect();
            let dphi_rel = self.h1_sq(&dphi).sqrt() / self.h1_sq(&x[..n]).sqrt().max(CHANGE_FLOOR);
            if !du_rel.is_finite() {
                return None;
            }
            if let Some(&last) = stats.picard_history.last() {
                growth = if du_rel > last { growth + 1 } else { 0 };
            }
            let change = if k == 1 { du_rel } else { du_rel.max(dphi_rel) };
            // contraction-based estimate of the distance to the fixed point
            let estimate = match stats.picard_history.last() {
                Some(&last) if k >= 2 && last > 0.0 && du_rel < last => {
                    let rho = du_rel / last;
                    change * rho / (1.0 - rho)
                }
                _ => f64::INFINITY,
            };
            stats.picard_history.push(du_rel);
            *u = u_new;
            // In the first iteration φ was solved against the predicted
            // velocity, so a small velocity change already certifies it.
            if change <= tol || estimate <= tol {
                return Some(p);
            }
            if growth >= 3 && du_rel > 1.0 {
                return None;
            }
        }
        None
    }

    fn monolithic(
        &mut self,
        data: &StepData,
        x: &mut Vec<f64>,
        u: &mut Vec<f64>,
        stats: &mut StepStats,
        step: usize,
    ) -> Result<Vec<f64>> {
        let layout = MonoLayout { ch: self.ch_len(), nf: self.disc.flow.num_free(), np: self.disc.flow.num_pressure() };
        let mut full = Vec::with_capacity(layout.len());
        full.extend_from_slice(x);
        full.extend_from_slice(u);
        full.extend(std::iter::repeat(0.0).take(layout.np + 1));
        let mut sys = MonoSystem {
            disc: self.disc,
            params: &self.params,
            data,
            borders: &self.borders,
            pressure_borders: &self.pressure_borders,
            convection_t: data.convection.transpose(),
            with_xi: self.with_xi,
            layout,
            jac: &mut self.mono_jac,
        };
        // the coupling blocks change every step
        self.mono_chord.stale = true;
        let rep = newton(&mut sys, &mut self.mono_chord, &mut full, self.params.newton_tol, self.params.max_newton)
            .map_err(|f| Error::StepFailed { step, reason: format!("monolithic solve: {}", f.reason), history: f.history })?;
        stats.newton_iters += rep.iters;
        stats.factorizations += rep.factorizations;
        stats.residual = rep.residual;
        x.copy_from_slice(&full[..layout.ch]);
        u.copy_from_slice(&full[layout.u()]);
        Ok(full[layout.p()].to_vec())
    }
}
