//! Thin helpers shared by the pencil, pipeline and bounds modules.
//!
//! Matrices are `nalgebra` types throughout; singular value and nonsymmetric eigenvalue
//! decompositions are delegated to `faer`.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn no_convergence(what: &str) -> Error {
    Error::NoConvergence(what.to_string())
}

/// Thin SVD with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let svd = to_faer(m).thin_svd().map_err(|_| no_convergence("SVD"))?;
        let s = svd.S().column_vector();
        Ok(Svd {
            u: from_faer(svd.U()),
            singular_values: (0..s.nrows()).map(|i| s[i]).collect(),
            v_t: from_faer(svd.V()).transpose(),
        })
    }

    /// Number of singular values above `max(rows, cols) * eps * sigma_max`.
    pub fn numerical_rank(&self, rows: usize, cols: usize) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(m)
        .singular_values()
        .map_err(|_| no_convergence("singular values"))
}

pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Eigenvalues of a square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let ev = to_faer(m)
        .eigenvalues()
        .map_err(|_| no_convergence("eigenvalues"))?;
    Ok(ev.into_iter().map(|z| (z.re, z.im)).collect())
}

/// Unit vector spanning the (numerical) null space of a square matrix:
/// the right singular vector of the smallest singular value.
pub fn null_vector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = Svd::new(m)?;
    let last = svd.v_t.nrows() - 1;
    Ok(svd.v_t.row(last).transpose())
}

/// Orthonormal basis of the orthogonal complement of the column space of `q`,
/// where `q` has orthonormal columns.
pub fn orthonormal_complement(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = q.shape();
    if k >= n {
        return Ok(DMatrix::zeros(n, 0));
    }
    let svd = to_faer(q).svd().map_err(|_| no_convergence("SVD"))?;
    Ok(from_faer(svd.U().subcols(k, n - k)))
}

/// Outcome of a Householder least-squares solve.
pub enum LeastSquares {
    Solved(DVector<f64>),
    /// Column `j` is numerically dependent on the preceding ones.
    Deficient(usize),
}

/// Solves `min ||a x - b||_2` by Householder QR on the column-equilibrated matrix.
pub fn least_squares_qr(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let (rows, cols) = a.shape();
    assert!(rows >= cols, "least squares needs rows >= cols");
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return LeastSquares::Deficient(j);
    }
    let mut scaled = a.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let qr = scaled.qr();
    let r = qr.r();
    let tol = rows as f64 * f64::EPSILON * 16.0;
    for j in 0..cols {
        if r[(j, j)].abs() <= tol {
            return LeastSquares::Deficient(j);
        }
    }
    let qtb = qr.q().transpose() * b;
    let mut x = r
        .solve_upper_triangular(&qtb)
        .expect("diagonal checked non-zero");
    for (j, n) in norms.iter().enumerate() {
        x[j] /= n;
    }
    LeastSquares::Solved(x)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}
