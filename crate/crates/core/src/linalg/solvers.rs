//! Sparse linear solvers: preconditioned CG, sparse Cholesky and LU (via
//! `faer`), and the bordered Neumann-Poisson solve.

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{get_global_parallelism, Conj, MatMut, Side};

use super::dense;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Systems at or below this size skip CG and are factored directly.
pub const DIRECT_THRESHOLD: usize = 500;

/// Largest system for which a singular failure is re-run densely to locate
/// the zero pivot.
const PIVOT_SEARCH_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ConjugateGradient,
    Cholesky,
    Lu,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual `‖Ax − b‖ / ‖b‖`.
    pub residual: f64,
    pub method: Method,
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

fn check_square(a: &SparseMatrix, b: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension { expected: a.nrows(), got: a.ncols() });
    }
    if b.len() != a.nrows() {
        return Err(Error::Dimension { expected: a.nrows(), got: b.len() });
    }
    Ok(())
}

fn csc_view(a: &SparseMatrix) -> SparseColMatRef<'_, usize, f64> {
    // The CSR arrays of A are the CSC arrays of Aᵀ.
    let sym = SymbolicSparseColMatRef::new_checked(a.ncols(), a.nrows(), a.row_ptr(), None, a.col_idx());
    SparseColMatRef::new(sym, a.values())
}

fn lu_error(err: LuError) -> Error {
    match err {
        LuError::SymbolicSingular { index } => Error::Singular { pivot: Some(index) },
        LuError::Generic(e) => Error::InvalidArgument(format!("sparse LU: {e:?}")),
    }
}

/// Sparse LU factorization with partial pivoting. The symbolic analysis is
/// kept so matrices with the same pattern can be refactored cheaply.
pub struct LuFactor {
    n: usize,
    symbolic: SymbolicLu<usize>,
    numeric: Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension { expected: a.nrows(), got: a.ncols() });
        }
        let view = csc_view(a);
        let symbolic = SymbolicLu::try_new(view.symbolic()).map_err(|e| Error::InvalidArgument(format!("{e:?}")))?;
        let numeric = Lu::try_new_with_symbolic(symbolic.clone(), view).map_err(lu_error)?;
        Ok(LuFactor { n: a.nrows(), symbolic, numeric })
    }

    /// Refactors a matrix with the same sparsity pattern.
    pub fn refactor(&mut self, a: &SparseMatrix) -> Result<()> {
        if a.nrows() != self.n {
            return Err(Error::Dimension { expected: self.n, got: a.nrows() });
        }
        self.numeric = Lu::try_new_with_symbolic(self.symbolic.clone(), csc_view(a)).map_err(lu_error)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let rhs = MatMut::from_column_major_slice_mut(x, self.n, 1);
        // the factor is of Aᵀ
        self.numeric.solve_transpose_in_place(rhs);
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct CholeskyFactor {
    n: usize,
    numeric: Llt<usize, f64>,
}

impl CholeskyFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension { expected: a.nrows(), got: a.ncols() });
        }
        let view = csc_view(a);
        let symbolic = SymbolicLlt::try_new(view.symbolic(), Side::Lower)
            .map_err(|e| Error::InvalidArgument(format!("{e:?}")))?;
        let numeric = Llt::try_new_with_symbolic(symbolic, view, Side::Lower)
            .map_err(|e| Error::InvalidArgument(format!("matrix is not positive definite: {e:?}")))?;
        Ok(CholeskyFactor { n: a.nrows(), numeric })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let rhs = MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
        self.numeric.solve_in_place(rhs);
        x
    }
}

/// Sparse LDLᵀ factorization of a symmetric quasi-definite matrix, such as
/// a saddle system `[A Bᵀ; B 0]` with `A` positive definite.
///
/// `signs[i]` is the expected sign of pivot `i` (+1 or −1). Pivots that are
/// tiny or of the wrong sign are replaced by a small value of the right
/// sign; [`LdltFactor::solve`] then removes that perturbation by iterative
/// refinement against the exact matrix.
pub struct LdltFactor {
    a: SparseMatrix,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    scratch: StackReq,
}

/// Refinement sweeps before a solve is reported as stalled.
const MAX_REFINE: usize = 20;

impl LdltFactor {
    pub fn new(a: &SparseMatrix, signs: &[i8]) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension { expected: a.nrows(), got: a.ncols() });
        }
        if signs.len() != a.nrows() {
            return Err(Error::Dimension { expected: a.nrows(), got: signs.len() });
        }
        let view = csc_view(a);
        let symbolic = factorize_symbolic_cholesky(
            view.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::InvalidArgument(format!("symbolic LDLᵀ: {e:?}")))?;
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let par = get_global_parallelism();
        let req = symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default());
        let mut values = vec![0.0; symbolic.len_val()];
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(signs),
            dynamic_regularization_delta: 1e-13 * scale,
            dynamic_regularization_epsilon: 1e-14 * scale,
        };
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                view,
                Side::Lower,
                regularization,
                par,
                MemStack::new(&mut MemBuffer::new(req)),
                Default::default(),
            )
            .map_err(|e| Error::InvalidArgument(format!("numeric LDLᵀ: {e:?}")))?;
        let scratch = symbolic.solve_in_place_scratch::<f64>(1, par);
        Ok(LdltFactor { a: a.clone(), symbolic, values, scratch })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply_inverse(&self, x: &mut [f64], buf: &mut MemBuffer) {
        let n = x.len();
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            rhs,
            get_global_parallelism(),
            MemStack::new(buf),
        );
    }

    /// Solves `A x = b` to a relative ∞-norm residual of `tol`, returning
    /// the solution and the number of refinement sweeps.
    pub fn solve_refined(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension { expected: n, got: b.len() });
        }
        let mut buf = MemBuffer::new(self.scratch);
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x = b.to_vec();
        self.apply_inverse(&mut x, &mut buf);
        let mut r = vec![0.0; n];
        let mut prev = f64::INFINITY;
        for sweep in 0..=MAX_REFINE {
            self.a.mul_vec_into(&x, &mut r);
            let mut rnorm = 0.0f64;
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
                rnorm = rnorm.max(ri.abs());
            }
            if rnorm <= tol * bnorm || bnorm == 0.0 {
                return Ok((x, sweep));
            }
            if !(rnorm < prev) || sweep == MAX_REFINE {
                // stagnation at round-off is accepted, divergence is not
                if rnorm <= 1e3 * tol * bnorm {
                    return Ok((x, sweep));
                }
                return Err(Error::NoConvergence { method: "LDLᵀ refinement", iterations: sweep, residual: rnorm / bnorm });
            }
            prev = rnorm;
            self.apply_inverse(&mut r, &mut buf);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        unreachable!()
    }

    /// [`LdltFactor::solve_refined`] with a relative residual tolerance of 1e-12.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self.solve_refined(b, 1e-12) {
            Ok((x, _)) => x,
            Err(_) => {
                let mut buf = MemBuffer::new(self.scratch);
                let mut x = b.to_vec();
                self.apply_inverse(&mut x, &mut buf);
                x
            }
        }
    }
}

/// Solves an SPD system: Jacobi-preconditioned CG, or Cholesky for small
/// systems. The iteration cap is `10 · dim`.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, b)?;
    let n = b.len();
    if n <= DIRECT_THRESHOLD {
        let x = CholeskyFactor::new(a)?.solve(b);
        let residual = relative_residual(a, &x, b);
        return Ok((x, SolveReport { iterations: 1, residual, method: Method::Cholesky }));
    }
    conjugate_gradient(a, b, None, tol, 10 * n)
}

/// Jacobi-preconditioned conjugate gradients from an optional initial guess.
pub fn conjugate_gradient(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, b)?;
    let n = b.len();
    let nb = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if nb == 0.0 {
        return Ok((vec![0.0; n], SolveReport { iterations: 0, residual: 0.0, method: Method::ConjugateGradient }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm2(&r) / nb;
    let mut it = 0;
    while res > tol {
        if it >= max_iter {
            return Err(Error::NoConvergence { method: "conjugate gradient", iterations: it, residual: res });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::InvalidArgument("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = norm2(&r) / nb;
    }
    // report the true residual, not the recurrence
    let residual = relative_residual(a, &x, b);
    Ok((x, SolveReport { iterations: it, residual, method: Method::ConjugateGradient }))
}

/// Direct solve of a square, possibly indefinite system.
pub fn solve_indefinite(a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, b)?;
    let locate = |a: &SparseMatrix| {
        if a.nrows() <= PIVOT_SEARCH_LIMIT {
            dense::singular_pivot(&a.to_dense())
        } else {
            None
        }
    };
    let factor = match LuFactor::new(a) {
        Ok(f) => f,
        Err(Error::Singular { pivot }) => return Err(Error::Singular { pivot: pivot.or_else(|| locate(a)) }),
        Err(e) => return Err(e),
    };
    let x = factor.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { pivot: locate(a) });
    }
    let residual = relative_residual(a, &x, b);
    Ok((x, SolveReport { iterations: 1, residual, method: Method::Lu }))
}

/// Factored Neumann-Poisson operator: the zero-mean solution of `K x = b`
/// for consistent `b` (`Σ b = 0`), where `m` holds the integrals of the
/// basis functions.
///
/// The result equals that of the bordered system `[K m; mᵀ 0]`, but the
/// constraint is imposed by pinning dof 0, factoring the remaining SPD
/// block and shifting by a constant afterwards. A dense border row would
/// wreck the sparsity of the factor.
pub struct NeumannPoisson {
    integrals: Vec<f64>,
    total: f64,
    factor: CholeskyFactor,
}

impl NeumannPoisson {
    pub fn new(stiffness: &SparseMatrix, basis_integrals: &[f64]) -> Result<Self> {
        let n = stiffness.nrows();
        if basis_integrals.len() != n {
            return Err(Error::Dimension { expected: n, got: basis_integrals.len() });
        }
        if n < 2 {
            return Err(Error::InvalidArgument("Neumann problem needs at least two dofs".into()));
        }
        let rest: Vec<usize> = (1..n).collect();
        let factor = CholeskyFactor::new(&stiffness.submatrix(&rest, &rest))?;
        let total = basis_integrals.iter().sum();
        Ok(NeumannPoisson { integrals: basis_integrals.to_vec(), total, factor })
    }

    /// Solves without a consistency check; an inconsistent constant
    /// component is absorbed by the multiplier.
    pub fn solve_unchecked(&self, b: &[f64]) -> Vec<f64> {
        self.solve_with_integral(b, 0.0)
    }

    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        check_consistent(b, tol)?;
        Ok(self.solve_unchecked(b))
    }

    /// Solves `K x + m ℓ = b` with `mᵀx = integral`.
    pub fn solve_with_integral(&self, b: &[f64], integral: f64) -> Vec<f64> {
        let n = self.integrals.len();
        assert_eq!(b.len(), n);
        let ell = b.iter().sum::<f64>() / self.total;
        let rhs: Vec<f64> = (1..n).map(|i| b[i] - ell * self.integrals[i]).collect();
        let mut x = Vec::with_capacity(n);
        x.push(0.0);
        x.extend(self.factor.solve(&rhs));
        let shift = (integral - dot(&self.integrals, &x)) / self.total;
        x.iter_mut().for_each(|v| *v += shift);
        x
    }
}

/// `[K m; mᵀ 0]` for a symmetric `K`.
pub fn border(k: &SparseMatrix, m: &[f64]) -> SparseMatrix {
    let n = k.nrows();
    let mut triplets = Vec::with_capacity(k.nnz() + 2 * n);
    for i in 0..n {
        let (cols, vals) = k.row(i);
        triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        triplets.push((i, n, m[i]));
        triplets.push((n, i, m[i]));
    }
    SparseMatrix::from_triplets(n + 1, n + 1, &triplets)
}

fn check_consistent(b: &[f64], tol: f64) -> Result<()> {
    let sum: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|v| v.abs()).sum();
    if sum.abs() > tol * scale.max(f64::MIN_POSITIVE) && sum.abs() > tol {
        return Err(Error::NonzeroMean(sum));
    }
    Ok(())
}

/// One-shot zero-mean solve of the Neumann problem `K x = b`.
pub fn solve_constrained_poisson(
    stiffness: &SparseMatrix,
    basis_integrals: &[f64],
    b: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    check_consistent(b, tol)?;
    Ok(NeumannPoisson::new(stiffness, basis_integrals)?.solve_unchecked(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_spd() {
        let b = vec![1.0, -2.0, 3.0];
        let (x, rep) = solve_spd(&SparseMatrix::identity(3), &b, 1e-12).unwrap();
        assert_eq!(x, b);
        assert!(rep.residual <= 1e-12);
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                a[i][j] = (0..5).map(|k| m[k][i] * m[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = dense::solve(&a, &b).unwrap();
        let sa = SparseMatrix::from_dense(&a);
        let (x, _) = solve_spd(&sa, &b, 1e-14).unwrap();
        let (xc, rep) = conjugate_gradient(&sa, &b, None, 1e-14, 50).unwrap();
        assert_eq!(rep.method, Method::ConjugateGradient);
        for i in 0..5 {
            assert!((x[i] - oracle[i]).abs() < 1e-10);
            assert!((xc[i] - oracle[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = SparseMatrix::from_dense(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let err = conjugate_gradient(&a, &[1.0, 2.0, 3.0], None, 1e-15, 1).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 1, .. }));
    }

    #[test]
    fn swap_matrix() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (x, rep) = solve_indefinite(&a, &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![2.0, 1.0]);
        assert_eq!(rep.method, Method::Lu);
    }

    #[test]
    fn duplicated_row_is_singular() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 0.0]]);
        match solve_indefinite(&a, &[1.0, 1.0, 1.0]) {
            Err(Error::Singular { pivot }) => assert_eq!(pivot, Some(2)),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn refactor_same_pattern() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let mut f = LuFactor::new(&a).unwrap();
        let b = a.scaled(2.0);
        f.refactor(&b).unwrap();
        let x = f.solve(&[3.0, 4.0]);
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonsymmetric_lu() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 5.0], vec![3.0, 0.0, 1.0]]);
        let b = [1.0, 2.0, 3.0];
        let (x, _) = solve_indefinite(&a, &b).unwrap();
        let oracle = dense::solve(&a.to_dense(), &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - oracle[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn inconsistent_poisson_rhs_rejected() {
        let k = SparseMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let m = [0.5, 0.5];
        assert!(matches!(solve_constrained_poisson(&k, &m, &[1.0, 0.0], 1e-10), Err(Error::NonzeroMean(_))));
        let x = solve_constrained_poisson(&k, &m, &[1.0, -1.0], 1e-10).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] + 0.5).abs() < 1e-15);
        let zero = solve_constrained_poisson(&k, &m, &[0.0, 0.0], 1e-10).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }
}
