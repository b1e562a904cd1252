mod common;

use chds::fem::FeFunction;
use chds::operators::NegNormWorkspace;
use common::*;
use nalgebra::DVector;

#[test]
fn projection_rates() {
    let errs = projection_errors(&[8, 16, 32]);
    let hs: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let col = |f: fn(&(f64, f64, f64, f64)) -> f64| errs.iter().map(f).collect::<Vec<_>>();
    let ritz = fitted_rate(&hs, &col(|e| e.1));
    let l2 = fitted_rate(&hs, &col(|e| e.2));
    let ds = fitted_rate(&hs, &col(|e| e.3));
    assert!((ritz - 1.0).abs() <= 0.2, "Ritz H1 rate {ritz}");
    assert!((l2 - 2.0).abs() <= 0.2, "L2 rate {l2}");
    assert!((ds - 2.0).abs() <= 0.2, "Darcy-Stokes H1 rate {ds}");
}

#[test]
fn dense_matrices_agree_with_assembly() {
    let mesh = unit(2);
    let ws = NegNormWorkspace::new(&mesh).unwrap();
    let (m, k) = dense_p1(&mesh);
    let (sm, sk) = (ws.mass().to_dense(), ws.stiffness().to_dense());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            assert!((m[(i, j)] - sm[i][j]).abs() < 1e-15 && (k[(i, j)] - sk[i][j]).abs() < 1e-14);
        }
    }
}

#[test]
fn negative_norm_of_a_cosine() {
    let mesh = unit(2);
    let ws = NegNormWorkspace::new(&mesh).unwrap();
    let (m, k) = dense_p1(&mesh);
    let mut z = FeFunction::interpolate(ws.space(), |x| (std::f64::consts::PI * x[0]).cos());
    let mean = ws.integral(z.coeffs()) / ws.area();
    z.coeffs_mut().iter_mut().for_each(|c| *c -= mean);
    let oracle = sup_negative_norm(&m, &k, &DVector::from_column_slice(z.coeffs()));
    let nn = ws.neg_norm(&z).unwrap();
    assert!((oracle - nn).abs() < 1e-8 * nn, "{oracle} vs {nn}");
}
