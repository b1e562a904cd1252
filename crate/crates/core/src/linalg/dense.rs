//! Small dense routines: Gaussian elimination with partial pivoting and a
//! symmetric generalized eigenvalue solver. Used as reference solvers and to
//! locate zero pivots.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-13;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[p][k].abs() <= PIVOT_TOL * scale {
            return Err(Error::Singular { pivot: Some(k) });
        }
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    Ok(x)
}

/// Elimination step at which a (numerically) zero pivot appears, if any.
pub fn singular_pivot(a: &[Vec<f64>]) -> Option<usize> {
    match solve(a, &vec![0.0; a.len()]) {
        Err(Error::Singular { pivot }) => pivot,
        _ => None,
    }
}

/// Cholesky factor `L` of an SPD matrix (lower triangular, row-major).
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidArgument(format!("not positive definite at row {i}")));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest eigenvalue of the symmetric-definite pencil `A v = λ B v`
/// (`B` SPD), via `L⁻¹ A L⁻ᵀ` with `B = L Lᵀ`.
pub fn max_generalized_eigenvalue(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    let l = cholesky(b)?;
    // Y = L⁻¹ A
    let mut y = a.to_vec();
    for col in 0..n {
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * y[k][col]).sum();
            y[i][col] = (y[i][col] - s) / l[i][i];
        }
    }
    // C = Y L⁻ᵀ, i.e. solve L Cᵀ = Yᵀ
    let mut c = vec![vec![0.0; n]; n];
    for row in 0..n {
        for j in 0..n {
            let s: f64 = (0..j).map(|k| l[j][k] * c[row][k]).sum();
            c[row][j] = (y[row][j] - s) / l[j][j];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = avg;
            c[j][i] = avg;
        }
    }
    Ok(*symmetric_eigenvalues(&c).last().unwrap_or(&0.0))
}
