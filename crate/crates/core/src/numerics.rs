//! Dense complex linear-algebra kernels.
//!
//! Everything here is a pure function of its inputs. Decompositions are
//! deterministic for fixed input bits, which is what makes whole simulations
//! bit-reproducible from a seed.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense complex matrix, `[row, col]` indexed.
///
/// Zero-column matrices are legal and stand for empty subspaces (a trivial
/// null space, a message carrying no streams).
pub type ComplexMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },
    #[error("matrix is not positive definite")]
    NotPd,
}

/// Numerical thresholds used wherever exact arithmetic would say "zero".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Singular values at or below `rank_eps * sigma_max` count as zero.
    pub rank_eps: f64,
    /// Absolute residual threshold.
    pub zero_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_eps: 1e-10,
            zero_eps: 1e-9,
        }
    }
}

impl Tolerance {
    /// Returns `None` unless `0 < rank_eps < 1` and `zero_eps > 0`.
    pub fn new(rank_eps: f64, zero_eps: f64) -> Option<Self> {
        (rank_eps > 0.0 && rank_eps < 1.0 && zero_eps > 0.0).then_some(Tolerance { rank_eps, zero_eps })
    }
}

/// I.i.d. circularly-symmetric complex Gaussian entries with the given
/// per-entry variance (each of the real and imaginary parts carries half).
///
/// The stream is always consumed, so a zero variance yields the zero matrix
/// while keeping later draws aligned with a non-zero-variance run.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> ComplexMatrix {
    assert!(variance >= 0.0, "variance must be nonnegative");
    let scale = (variance / 2.0).sqrt();
    // Column-major fill order, matching nalgebra's storage.
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

fn to_faer(a: &ComplexMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, Complex64>) -> ComplexMatrix {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Descending singular values. nalgebra's complex SVD occasionally returns
/// a wrong factorisation for rank-deficient input, so decompositions go
/// through faer.
fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_faer(a).singular_values().expect("SVD did not converge")
}

fn svd(a: &ComplexMatrix) -> faer::linalg::solvers::Svd<Complex64> {
    to_faer(a).svd().expect("SVD did not converge")
}

fn numerical_rank(sv: &[f64], tol: &Tolerance) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax <= 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol.rank_eps * smax).count()
}

/// Number of singular values above `rank_eps` times the largest one.
pub fn rank_of(a: &ComplexMatrix, tol: &Tolerance) -> usize {
    numerical_rank(&singular_values(a), tol)
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Largest entry magnitude; zero for an empty matrix.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Orthonormal basis of the right null space of `a` (`ncols x nullity`).
///
/// The nullity follows the relative `rank_eps` cutoff; a trivial null space
/// comes back as a zero-column matrix.
pub fn null_space(a: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::identity(n, n);
    }
    let f = svd(a);
    let sv: Vec<f64> = f.S().column_vector().iter().map(|z| z.re).collect();
    let r = numerical_rank(&sv, tol);
    from_faer(f.V().get(.., r..))
}

/// Orthonormal basis of the column space of `a` (`nrows x rank`).
pub fn column_space(a: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    if a.is_empty() {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let f = svd(a);
    let sv: Vec<f64> = f.S().column_vector().iter().map(|z| z.re).collect();
    let r = numerical_rank(&sv, tol);
    from_faer(f.U().get(.., ..r))
}

/// Orthonormal basis of the left null space of `a`: columns `u` with
/// `u^H a = 0` (`nrows x (nrows - rank)`).
pub fn left_null_space(a: &ComplexMatrix, tol: &Tolerance) -> ComplexMatrix {
    null_space(&a.adjoint(), tol)
}

fn hermitian_asymmetry(r: &ComplexMatrix) -> f64 {
    max_abs(&(r - r.adjoint()))
}

/// Hermitian positive-semidefinite square root `S` with `S S = r`.
///
/// Eigenvalues in `[-zero_eps, 0)` are clamped to zero so that
/// near-singular correlation matrices stay usable.
pub fn hermitian_sqrt(r: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix, NumericsError> {
    if !r.is_square() {
        return Err(NumericsError::NotSquare {
            rows: r.nrows(),
            cols: r.ncols(),
        });
    }
    let asymmetry = hermitian_asymmetry(r);
    if asymmetry > tol.zero_eps {
        return Err(NumericsError::NotHermitian { asymmetry });
    }
    let sym = (r + r.adjoint()).scale(0.5);
    if sym.nrows() == 0 {
        return Ok(sym);
    }
    let eig = to_faer(&sym)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("eigendecomposition did not converge");
    let mut roots = Vec::with_capacity(sym.nrows());
    for lambda in eig.S().column_vector().iter().map(|z| z.re) {
        if lambda < -tol.zero_eps {
            return Err(NumericsError::NotPsd { eigenvalue: lambda });
        }
        roots.push(Complex64::new(lambda.max(0.0).sqrt(), 0.0));
    }
    let q = from_faer(eig.U());
    let mut scaled = q.clone();
    for (mut col, root) in scaled.column_iter_mut().zip(&roots) {
        col *= *root;
    }
    let s = &scaled * q.adjoint();
    Ok((&s + s.adjoint()).scale(0.5))
}

/// Base-2 log-determinant of a Hermitian positive-definite matrix.
pub fn log_det_hermitian(a: &ComplexMatrix) -> Result<f64, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let chol = Cholesky::new(sym).ok_or(NumericsError::NotPd)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        if d <= 0.0 || !d.is_finite() {
            return Err(NumericsError::NotPd);
        }
        acc += d.log2();
    }
    Ok(2.0 * acc)
}

/// `a a^H`, the Gram matrix of the columns of `a`.
pub fn gram(a: &ComplexMatrix) -> ComplexMatrix {
    a * a.adjoint()
}

/// `trace(a a^H)`, i.e. the squared Frobenius norm.
pub fn power(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Converts a real matrix literal (rows of values) into a complex matrix.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nrows, ncols, |i, j| Complex64::new(rows[i][j], 0.0))
}

/// Diagonal complex matrix from real entries.
pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) })
}
