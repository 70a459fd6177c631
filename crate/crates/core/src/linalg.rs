//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Schur, SymmetricEigen, SVD};
use num_traits::Float;

use crate::error::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const MAX_ITERATIONS: usize = 10_000;

/// Replaces `a` by `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut Matrix) {
    debug_assert!(a.is_square());
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut a: Matrix) -> Matrix {
    symmetrize(&mut a);
    a
}

/// Cholesky factorization that rejects pivots which are zero up to rounding.
///
/// A pivot `l_kk²` is accepted only if it exceeds `dim · ε · max_diag(a)`.
pub fn cholesky(a: &Matrix) -> Option<Cholesky<f64, Dyn>> {
    let n = a.nrows();
    if n == 0 {
        return Cholesky::new(a.clone());
    }
    let max_diag = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = n as f64 * f64::EPSILON * max_diag;
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    if (0..n).all(|k| l[(k, k)] * l[(k, k)] > floor) {
        Some(chol)
    } else {
        None
    }
}

pub fn is_positive_definite(a: &Matrix) -> bool {
    a.is_square() && is_symmetric(a, 1e-12) && cholesky(a).is_some()
}

pub fn is_symmetric(a: &Matrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= rel_tol * scale))
}

/// Result of a symmetric positive-definite solve that may have needed diagonal jitter.
#[derive(Debug, Clone)]
pub struct RegularizedSolve {
    pub solution: Matrix,
    /// Diagonal jitter that made the factorization succeed, if any was needed.
    pub jitter: Option<f64>,
}

/// Solves `a · x = rhs` for symmetric positive (semi)definite `a`.
///
/// When the plain factorization fails, `scale · trace(a) / dim` is added to the
/// diagonal and the factorization retried, growing the jitter tenfold per
/// attempt for at most eight attempts.
pub fn solve_spd_regularized(a: &Matrix, rhs: &Matrix, scale: f64) -> Option<RegularizedSolve> {
    if let Some(chol) = cholesky(a) {
        return Some(RegularizedSolve {
            solution: chol.solve(rhs),
            jitter: None,
        });
    }
    let dim = a.nrows().max(1) as f64;
    let base = (a.trace().abs() / dim).max(f64::MIN_POSITIVE);
    let mut jitter = scale * base;
    for _ in 0..8 {
        let mut shifted = a.clone();
        for d in 0..a.nrows() {
            shifted[(d, d)] += jitter;
        }
        if let Some(chol) = cholesky(&shifted) {
            return Some(RegularizedSolve {
                solution: chol.solve(rhs),
                jitter: Some(jitter),
            });
        }
        jitter *= 10.0;
    }
    None
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(a: &Matrix, what: &'static str) -> Result<Matrix, Error> {
    cholesky(a)
        .map(|c| c.inverse())
        .ok_or(Error::NotPositiveDefinite(what))
}

pub fn singular_values(a: &Matrix) -> Result<Vector, Error> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vector::zeros(0));
    }
    SVD::try_new(a.clone(), false, false, f64::EPSILON, MAX_ITERATIONS)
        .map(|svd| svd.singular_values)
        .ok_or(Error::Decomposition("singular value decomposition"))
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(singular_values: &Vector, rel_tol: f64) -> usize {
    let max = singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|s| **s > rel_tol * max).count()
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &Matrix) -> Result<f64, Error> {
    match a.nrows() {
        0 => Ok(0.0),
        1 => Ok(a[(0, 0)].abs()),
        _ => {
            let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_ITERATIONS)
                .ok_or(Error::Decomposition("Schur decomposition"))?;
            Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|c| Float::sqrt(c.re * c.re + c.im * c.im))
                .fold(0.0, f64::max))
        }
    }
}

pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen<f64, Dyn>, Error> {
    SymmetricEigen::try_new(a.clone(), f64::EPSILON, MAX_ITERATIONS)
        .ok_or(Error::Decomposition("symmetric eigendecomposition"))
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, dropping eigenvalues
/// below `rel_tol · |λ|_max`. With `positive_only`, negative eigenvalues are
/// dropped too, which inverts the projection onto the PSD cone.
pub fn symmetric_pseudo_inverse(a: &Matrix, rel_tol: f64, positive_only: bool) -> Result<Matrix, Error> {
    let eig = symmetric_eigen(&symmetrized(a.clone()))?;
    let max = eig.eigenvalues.amax();
    let inv = eig.eigenvalues.map(|l| {
        let kept = if positive_only { l } else { l.abs() };
        if max > 0.0 && kept > rel_tol * max {
            1.0 / l
        } else {
            0.0
        }
    });
    let v = &eig.eigenvectors;
    Ok(v * Matrix::from_diagonal(&inv) * v.transpose())
}

/// Projects `a` onto the PSD cone if its smallest eigenvalue is below
/// `-tol · trace(a)`. Returns whether a clamp happened.
pub fn clamp_psd(a: &mut Matrix, tol: f64) -> Result<bool, Error> {
    let eig = symmetric_eigen(a)?;
    let floor = -tol * a.trace().abs();
    if eig.eigenvalues.iter().all(|l| *l >= floor) {
        return Ok(false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    *a = symmetrized(v * Matrix::from_diagonal(&clamped) * v.transpose());
    Ok(true)
}

/// Block-diagonal matrix with the given square or rectangular blocks.
pub fn block_diagonal<'a>(blocks: impl IntoIterator<Item = &'a Matrix> + Clone) -> Matrix {
    let (rows, cols) = blocks
        .clone()
        .into_iter()
        .fold((0, 0), |(r, c), b| (r + b.nrows(), c + b.ncols()));
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Vertical concatenation of matrices sharing a column count.
pub fn vstack<'a>(cols: usize, blocks: impl IntoIterator<Item = &'a Matrix> + Clone) -> Matrix {
    let rows = blocks.clone().into_iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Horizontal concatenation of matrices sharing a row count.
pub fn hstack<'a>(rows: usize, blocks: impl IntoIterator<Item = &'a Matrix> + Clone) -> Matrix {
    let cols = blocks.clone().into_iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}
