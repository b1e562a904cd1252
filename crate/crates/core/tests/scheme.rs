use std::sync::Arc;

use chds::diagnostics::{energy, invariant_residuals};
use chds::fem::{FeFunction, NormKind, ScalarField};
use chds::linalg::dense;
use chds::mesh::{build_crossed_mesh, Mesh, Rect};
use chds::scheme::{
    initial_from_fields, initialize, run, BenchmarkPhase, Discretization, InitMode, Params, State, Stepper,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(n: usize) -> Arc<Mesh> {
    build_crossed_mesh(Rect::UNIT_SQUARE, n).unwrap()
}

fn params(tau: f64, steps: usize) -> Params {
    Params { tau, final_time: tau * steps as f64, ..Params::default() }
}

fn benchmark_state(disc: &Discretization, p: &Params) -> State {
    initialize(disc, p, &BenchmarkPhase, None, InitMode::Interpolate).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn zero_and_pure_phase_initial_potentials() {
    let disc = Discretization::new(&mesh(4)).unwrap();
    let p = Params::default();
    for c in [0.0, 1.0] {
        let phi = FeFunction::constant(disc.p1(), c);
        let s = initial_from_fields(&disc, &p, phi, FeFunction::zeros(disc.velocity())).unwrap();
        assert!(max_abs(s.mu.coeffs()) < 1e-12, "c = {c}");
        assert!(max_abs(s.xi.coeffs()) < 1e-12);
        assert!((s.mass_average - c).abs() < 1e-14);
    }
}

#[test]
fn benchmark_datum_mean() {
    let disc = Discretization::new(&mesh(16)).unwrap();
    let s = initialize(&disc, &Params::default(), &BenchmarkPhase, None, InitMode::Ritz).unwrap();
    assert!((s.mass_average + 0.5).abs() < 1e-10, "{}", s.mass_average);
}

#[test]
fn constant_state_is_fixed() {
    let disc = Discretization::new(&mesh(4)).unwrap();
    let p = params(1e-2, 1);
    let c = 0.3;
    let phi = FeFunction::constant(disc.p1(), c);
    let zero_u = FeFunction::zeros(disc.velocity());
    let mut stepper = Stepper::new(&disc, &p).unwrap();
    let (phi1, mu1, xi1) = stepper.solve_ch_block(&phi, &zero_u).unwrap();
    let mu_exact = (c * c * c - c) / p.epsilon;
    assert!(phi1.coeffs().iter().all(|v| (v - c).abs() < 1e-12));
    assert!(mu1.coeffs().iter().all(|v| (v - mu_exact).abs() < 1e-10));
    assert!(max_abs(xi1.coeffs()) < 1e-14);

    let s = initial_from_fields(&disc, &p, phi, zero_u).unwrap();
    let (next, _) = stepper.step(&s).unwrap();
    assert!(next.phi.coeffs().iter().all(|v| (v - c).abs() < 1e-12));
    assert!(max_abs(next.u.coeffs()) < 1e-12);
    assert_eq!(next.step, 1);
}

/// Solves the phase-field block by a stabilized fixed-point iteration on
/// dense matrices: the cubic is lagged, `F(φ) ≈ F(φ_k) + c M (φ − φ_k)`.
fn fixed_point_oracle(disc: &Discretization, p: &Params, phi_prev: &[f64], u_free: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = disc.num_p1();
    let m = disc.ops.mass().to_dense();
    let k = disc.ops.stiffness().to_dense();
    let bu = disc.convection(phi_prev).mul_vec(u_free);
    let mphi_prev = disc.ops.mass().mul_vec(phi_prev);
    let (eps, tau, c) = (p.epsilon, p.tau, 2.0);
    let mut a = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = m[i][j];
            a[i][n + j] = tau * eps * k[i][j];
            a[n + i][j] = eps * k[i][j] + c / eps * m[i][j];
            a[n + i][n + j] = -m[i][j];
        }
    }
    let mut phi = phi_prev.to_vec();
    let mut mu = vec![0.0; n];
    for _ in 0..2000 {
        let f3 = disc.cubic_vector(&phi);
        let mphi = disc.ops.mass().mul_vec(&phi);
        let mut b = vec![0.0; 2 * n];
        for i in 0..n {
            b[i] = mphi_prev[i] - tau * bu[i];
            b[n + i] = (c * mphi[i] - f3[i] + mphi_prev[i]) / eps;
        }
        let x = dense::solve(&a, &b).unwrap();
        let change = (0..n).map(|i| (x[i] - phi[i]).abs()).fold(0.0, f64::max);
        phi.copy_from_slice(&x[..n]);
        mu.copy_from_slice(&x[n..]);
        if change < 1e-16 {
            break;
        }
    }
    (phi, mu)
}

#[test]
fn ch_block_matches_fixed_point_oracle() {
    let disc = Discretization::new(&mesh(2)).unwrap();
    let p = params(1e-2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phi_prev: Vec<f64> = (0..disc.num_p1()).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let phi_prev = FeFunction::from_coeffs(disc.p1(), phi_prev).unwrap();
    let mu_drive: Vec<f64> = (0..disc.num_p1()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mu_drive = FeFunction::from_coeffs(disc.p1(), mu_drive).unwrap();

    let mut stepper = Stepper::new(&disc, &p).unwrap();
    // a discretely solenoidal velocity with nonzero transport
    let (u, _) = stepper.solve_flow_block(&phi_prev, &mu_drive, &FeFunction::zeros(disc.velocity())).unwrap();
    assert!(u.norm(NormKind::H1Semi) > 1e-6);
    let (phi, mu, _) = stepper.solve_ch_block(&phi_prev, &u).unwrap();
    let (phi_o, mu_o) = fixed_point_oracle(&disc, &p, phi_prev.coeffs(), &disc.flow.restrict(u.coeffs()));
    for i in 0..disc.num_p1() {
        assert!((phi.coeffs()[i] - phi_o[i]).abs() < 1e-13, "φ[{i}]");
        assert!((mu.coeffs()[i] - mu_o[i]).abs() < 1e-11 * max_abs(&mu_o).max(1.0), "μ[{i}]");
    }
    let ops = &disc.ops;
    assert!((ops.integral(phi.coeffs()) - ops.integral(phi_prev.coeffs())).abs() < 1e-11);
}

#[test]
fn ch_block_conserves_mass_with_long_range() {
    let disc = Discretization::new(&mesh(4)).unwrap();
    let p = Params { theta: 50.0, ..params(1e-2, 1) };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phi_prev: Vec<f64> = (0..disc.num_p1()).map(|_| rng.gen_range(-0.9..0.9)).collect();
    let phi_prev = FeFunction::from_coeffs(disc.p1(), phi_prev).unwrap();
    let mut stepper = Stepper::new(&disc, &p).unwrap();
    let (phi, _, xi) = stepper.solve_ch_block(&phi_prev, &FeFunction::zeros(disc.velocity())).unwrap();
    let ops = &disc.ops;
    assert!((ops.integral(phi.coeffs()) - ops.integral(phi_prev.coeffs())).abs() < 1e-11);
    assert!(ops.integral(xi.coeffs()).abs() < 1e-11);
    assert!(max_abs(xi.coeffs()) > 0.0);
}

#[test]
fn flow_block_examples() {
    let disc = Discretization::new(&mesh(4)).unwrap();
    let p = params(1e-2, 1);
    let stepper = Stepper::new(&disc, &p).unwrap();
    let phi = FeFunction::interpolate(disc.p1(), |x| BenchmarkPhase.value(x));
    let zero_u = FeFunction::zeros(disc.velocity());

    // constant μ only produces a pressure gradient
    let (u, _) = stepper.solve_flow_block(&phi, &FeFunction::constant(disc.p1(), 2.5), &zero_u).unwrap();
    assert!(u.norm(NormKind::H1) <= 1e-10, "{}", u.norm(NormKind::H1));

    let mu = FeFunction::interpolate(disc.p1(), |x| (3.0 * x[0]).sin() * x[1]);
    let (u, pr) = stepper.solve_flow_block(&phi, &mu, &zero_u).unwrap();
    assert!(u.norm(NormKind::H1) > 1e-6);
    let du = disc.flow.divergence.mul_vec(&disc.flow.restrict(u.coeffs()));
    assert!(max_abs(&du) <= 1e-10);
    assert!(pr.integral().abs() < 1e-12);

    let uncoupled = Params { gamma: 0.0, ..p };
    let stepper = Stepper::new(&disc, &uncoupled).unwrap();
    let (u, _) = stepper.solve_flow_block(&phi, &mu, &zero_u).unwrap();
    assert_eq!(max_abs(u.coeffs()), 0.0);
}

#[test]
fn energy_decreases_for_any_step_size() {
    let disc = Discretization::new(&mesh(8)).unwrap();
    for tau in [1e-3, 1e-1, 1.0] {
        let p = params(tau, 5);
        let s0 = benchmark_state(&disc, &p);
        let mut prev = energy(&disc, &s0, &p).unwrap().total;
        let (_, summary) = run(&disc, &p, s0, |rec, _| {
            assert!(rec.energy.total <= prev + 1e-10 * prev.max(1.0), "τ = {tau}: {} > {prev}", rec.energy.total);
            prev = rec.energy.total;
            Ok(())
        })
        .unwrap();
        assert_eq!(summary.steps, 5);
        assert!(summary.energy_monotone(1e-10));
    }
}

#[test]
fn solvable_for_any_step_size() {
    let disc = Discretization::new(&mesh(8)).unwrap();
    for tau in [1e-4, 1e-2, 1.0, 10.0] {
        let p = params(tau, 3);
        let (s, summary) = run(&disc, &p, benchmark_state(&disc, &p), |rec, _| {
            assert!(rec.picard_iters <= p.max_picard);
            Ok(())
        })
        .unwrap();
        assert_eq!(s.step, 3);
        assert!(summary.max_mass_dev < 1e-11, "τ = {tau}");
        assert!(summary.max_div_res < 1e-10, "τ = {tau}");
        assert!(summary.max_mu_mean_res < 1e-9, "τ = {tau}");
    }
}

/// `‖φ_{2 steps of τ} − φ_{1 step of 2τ}‖_{H1}`.
fn splitting_gap(disc: &Discretization, s0: &State, tau: f64) -> f64 {
    let fine = params(tau, 2);
    let coarse = params(2.0 * tau, 1);
    let s0 = State { step: 0, time: 0.0, ..s0.clone() };
    let mut st = Stepper::new(disc, &fine).unwrap();
    let (s1, _) = st.step(&s0).unwrap();
    let (s2, _) = st.step(&s1).unwrap();
    let (c1, _) = Stepper::new(disc, &coarse).unwrap().step(&s0).unwrap();
    s2.phi.axpy(-1.0, &c1.phi).unwrap().norm(NormKind::H1)
}

#[test]
fn halving_the_step_shrinks_the_splitting_gap() {
    let disc = Discretization::new(&mesh(8)).unwrap();
    // leave the stiff initial transient behind first
    let warm = params(1e-3, 20);
    let (s0, _) = run(&disc, &warm, benchmark_state(&disc, &warm), |_, _| Ok(())).unwrap();
    let gaps: Vec<f64> = [2e-3, 1e-3, 5e-4, 2.5e-4].iter().map(|&t| splitting_gap(&disc, &s0, t)).collect();
    for w in gaps.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 0.9, "{gaps:?}");
    }
}

#[test]
fn single_step_run_matches_step() {
    let disc = Discretization::new(&mesh(4)).unwrap();
    let p = params(1e-3, 1);
    let s0 = benchmark_state(&disc, &p);
    let (direct, _) = Stepper::new(&disc, &p).unwrap().step(&s0).unwrap();
    let mut rows = 0;
    let (s, summary) = run(&disc, &p, s0, |_, _| {
        rows += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(rows, 1);
    assert_eq!(summary.steps, 1);
    assert_eq!(s.phi.coeffs(), direct.phi.coeffs());
    assert!((s.time - 1e-3).abs() < 1e-15);
    let inv = invariant_residuals(&disc, &s, &p).unwrap();
    assert!(inv.mass_dev < 1e-11 && inv.div_res < 1e-10 && inv.p_mean_res < 1e-12);
}

#[test]
fn run_stops_at_observer_error() {
    let disc = Discretization::new(&mesh(4)).unwrap();
    let p = params(1e-3, 5);
    let mut seen = 0;
    let err = run(&disc, &p, benchmark_state(&disc, &p), |rec, _| {
        seen += 1;
        if rec.step == 3 {
            Err(chds::Error::InvalidArgument("stop".into()))
        } else {
            Ok(())
        }
    });
    assert!(err.is_err());
    assert_eq!(seen, 3);
}
