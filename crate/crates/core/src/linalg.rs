//! Dense symmetric matrices, Cholesky factors and symmetric eigendecomposition.
//!
//! Storage is `nalgebra`'s column-major `DMatrix<f64>`; the newtypes here carry
//! the invariants the rest of the crate relies on (symmetry, finiteness,
//! lower-triangularity).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Entries may differ from their transpose by at most this much (relative to
/// the largest absolute entry) and still be accepted as symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

/// A dense, finite, symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates `m` and symmetrizes away round-off asymmetry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
                context: "square matrix",
            });
        }
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if i > j {
                    let gap = (v - m[(j, i)]).abs();
                    if gap > SYMMETRY_TOL * scale {
                        return Err(Error::NotSymmetric { row: i, col: j, gap });
                    }
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds a symmetric matrix as `(m + mᵀ) / 2` without further checks.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let m = DMatrix::from_fn(dim, dim, |i, j| if i <= j { f(i, j) } else { f(j, i) });
        SymMatrix(m)
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        SymMatrix(DMatrix::identity(dim, dim) * scale)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Entry-wise absolute value; the result stays symmetric.
    pub fn abs(&self) -> SymMatrix {
        SymMatrix(self.0.abs())
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)] == 0.0))
    }
}

/// Lower-triangular factor `L` with `L·Lᵀ` equal to some symmetric PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(DMatrix<f64>);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn zeros(dim: usize) -> Self {
        LowerTriangular(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        LowerTriangular(DMatrix::identity(dim, dim))
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::symmetrized(&self.0 * self.0.transpose())
    }

    /// Writes `L·z` into `out`, touching only the lower triangle.
    pub fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(z.len(), n);
        debug_assert_eq!(out.len(), n);
        out.fill(0.0);
        // column-major walk
        for (j, &zj) in z.iter().enumerate() {
            if zj == 0.0 {
                continue;
            }
            let col = self.0.column(j);
            for i in j..n {
                out[i] += col[i] * zj;
            }
        }
    }
}

fn cholesky_raw(a: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, (usize, f64)> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let neg_tol = -1e-8 * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < neg_tol || !d.is_finite() {
            return Err((j, d));
        }
        if d <= 0.0 {
            // PSD-but-singular direction: leave the column at zero
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Cholesky factorization of a symmetric positive semidefinite matrix.
///
/// If the plain factorization hits a pivot below `-1e-8 * max(diag)`, the
/// diagonal is shifted once by `1e-10 * trace / dim` and the factorization is
/// retried before giving up with [`Error::NotPositiveSemidefinite`].
pub fn cholesky(s: &SymMatrix) -> Result<LowerTriangular> {
    let a = s.as_matrix();
    match cholesky_raw(a) {
        Ok(l) => Ok(LowerTriangular(l)),
        Err(_) => {
            let n = s.dim().max(1);
            let jitter = 1e-10 * s.trace().abs() / n as f64;
            let mut shifted = a.clone();
            for i in 0..s.dim() {
                shifted[(i, i)] += jitter;
            }
            cholesky_raw(&shifted)
                .map(LowerTriangular)
                .map_err(|(index, pivot)| Error::NotPositiveSemidefinite { index, pivot })
        }
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `‖V·diag(λ)·Vᵀ − S‖_F`
    pub fn reconstruction_error(&self, s: &SymMatrix) -> f64 {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        (&self.vectors * lambda * self.vectors.transpose() - s.as_matrix()).norm()
    }
}

const EIGEN_MAX_ITER: usize = 10_000;

pub fn sym_eigen(s: &SymMatrix) -> Result<SymEigen> {
    let n = s.dim();
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let Some(eig) = SymmetricEigen::try_new(s.as_matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER)
    else {
        return Err(Error::NoConvergence {
            dim: n,
            residual: f64::NAN,
        });
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    let out = SymEigen { values, vectors };
    let residual = out.reconstruction_error(s);
    let norm = s.as_matrix().norm();
    if !residual.is_finite() || residual > 1e-6 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence { dim: n, residual });
    }
    Ok(out)
}
