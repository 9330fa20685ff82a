//! Small dense linear-algebra helpers shared by the likelihood code.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Matrix = DMatrix<f64>;

/// Relative threshold used for every rank and pseudo-determinant decision.
pub const REL_TOL: f64 = 1e-10;

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: Matrix,
}

impl CholFactor {
    /// Factor `m`. On failure returns the (1-based) order of the first
    /// leading minor that is not positive.
    pub fn new(m: &Matrix) -> Result<Self, usize> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "cholesky of non-square matrix");
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for c in 0..j {
                d -= l[(j, c)] * l[(j, c)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(j + 1);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for c in 0..j {
                    s -= l[(i, c)] * l[(j, c)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(CholFactor { l })
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solve `M x = b`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let z = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky factor has positive diagonal");
        self.l
            .tr_solve_lower_triangular(&z)
            .expect("cholesky factor has positive diagonal")
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.nrows();
        symmetrized(&self.solve(&Matrix::identity(n, n)))
    }
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

pub fn symmetrized(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    max_abs(&(a - b))
}

/// Eigenvalues of a symmetric matrix (symmetrized first).
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    SymmetricEigen::new(symmetrized(m)).eigenvalues.iter().copied().collect()
}

/// Number of eigenvalues above `REL_TOL * max|eigenvalue|` together with the
/// log of their product. Negative eigenvalues above the threshold make the
/// log undefined and yield `None` for the log term.
pub fn pseudo_log_det(m: &Matrix) -> (usize, Option<f64>) {
    let eig = sym_eigenvalues(m);
    let scale = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return (0, Some(0.0));
    }
    let thresh = REL_TOL * scale;
    let mut rank = 0;
    let mut log = 0.0;
    let mut ok = true;
    for &v in &eig {
        if v.abs() > thresh {
            rank += 1;
            if v > 0.0 {
                log += v.ln();
            } else {
                ok = false;
            }
        }
    }
    (rank, ok.then_some(log))
}

/// Numerical column rank by SVD with threshold `REL_TOL * largest singular value`.
pub fn column_rank(m: &Matrix) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, v| a.max(*v));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > REL_TOL * smax).count()
}

/// Symmetric square root of a symmetric positive semi-definite matrix.
pub fn sym_sqrt(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(symmetrized(m));
    let d = Matrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Columns of `m` at the given indices, in that order.
pub fn select_columns(m: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Horizontal concatenation; either block may have zero columns.
pub fn hcat(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.nrows(), b.nrows());
    let n = a.nrows();
    let (pa, pb) = (a.ncols(), b.ncols());
    Matrix::from_fn(n, pa + pb, |i, j| if j < pa { a[(i, j)] } else { b[(i, j - pa)] })
}
