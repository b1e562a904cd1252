//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use chds::fem::{analytic, FeSpace, Family, VectorField};
use chds::flow::FlowSpaces;
use chds::mesh::{build_crossed_mesh, Mesh, Rect};
use chds::operators::{darcy_stokes_projection, l2_projection, ritz_projection};
use nalgebra::{DMatrix, DVector};

pub fn unit(n: usize) -> Arc<Mesh> {
    build_crossed_mesh(Rect::UNIT_SQUARE, n).unwrap()
}

/// Least-squares slope of `log err` against `log h`.
pub fn fitted_rate(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Curl of `ψ = sin²(πx) sin²(πy)`: divergence free, zero on the boundary.
pub fn stream_velocity() -> impl VectorField {
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

/// Errors of the three projections on meshes with `ns` cells per side:
/// `(h, ‖R_h f − f‖_H1, ‖Q_h f − f‖_L2, ‖P_h u − u‖_H1)` with
/// `f = cos(2πx) cos(πy)`.
pub fn projection_errors(ns: &[usize]) -> Vec<(f64, f64, f64, f64)> {
    let f = analytic(
        |x: [f64; 2]| (2.0 * PI * x[0]).cos() * (PI * x[1]).cos(),
        |x: [f64; 2]| {
            [-2.0 * PI * (2.0 * PI * x[0]).sin() * (PI * x[1]).cos(), -PI * (2.0 * PI * x[0]).cos() * (PI * x[1]).sin()]
        },
    );
    let u = stream_velocity();
    ns.iter()
        .map(|&n| {
            let mesh = unit(n);
            let p1 = FeSpace::new(&mesh, Family::P1);
            let r = ritz_projection(&f, &p1).unwrap();
            let (l2, semi) = r.squared_errors(&f);
            let q = l2_projection(|x| (2.0 * PI * x[0]).cos() * (PI * x[1]).cos(), &p1).unwrap();
            let flow = FlowSpaces::new(&mesh).unwrap();
            let (uh, _) = darcy_stokes_projection(&u, None, &flow, 1.0, 1.0).unwrap();
            let (ul2, usemi) = uh.squared_errors_vector(&u);
            (mesh.h(), (l2 + semi).sqrt(), q.squared_errors(&f).0.sqrt(), (ul2 + usemi).sqrt())
        })
        .collect()
}

/// P1 mass and stiffness matrices assembled element by element from the
/// mesh geometry alone, with the exact local formulas.
pub fn dense_p1(mesh: &Mesh) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = mesh.num_vertices();
    let (mut m, mut k) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
    let v = mesh.vertices();
    for t in mesh.triangles() {
        let p = t.map(|i| v[i]);
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
        // ∇λ_i = rot(edge opposite i) / 2|T|
        let grad = |i: usize| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
        };
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (grad(i), grad(j));
                k[(t[i], t[j])] += area * (gi[0] * gj[0] + gi[1] * gj[1]);
                m[(t[i], t[j])] += area * if i == j { 1.0 / 6.0 } else { 1.0 / 12.0 };
            }
        }
    }
    (m, k)
}

/// `sup_χ (ζ, χ)/‖∇χ‖` as the square root of the largest generalized
/// eigenvalue of `(b bᵀ, K)` on the complement of the constants.
pub fn sup_negative_norm(m: &DMatrix<f64>, k: &DMatrix<f64>, zeta: &DVector<f64>) -> f64 {
    let n = k.nrows();
    let b = m * zeta;
    // constants are in the kernel of both forms for mean-zero ζ; drop dof 0
    let kr = k.view((1, 1), (n - 1, n - 1)).into_owned();
    let br = b.rows(1, n - 1).into_owned();
    let l = kr.cholesky().expect("pinned stiffness is SPD").l();
    let li = l.clone().try_inverse().unwrap();
    let c = &li * (&br * br.transpose()) * li.transpose();
    let eig = nalgebra::SymmetricEigen::new(c);
    eig.eigenvalues.max().max(0.0).sqrt()
}
