//! Residual projections for the restricted likelihoods.
//!
//! For a design X and weight W = Γ⁻¹ the projection is
//! `Q = I - X (X'WX)⁻¹ X'W`, the W-orthogonal projection whose kernel is
//! span(X). The likelihoods mostly need the symmetric kernel `WQ` and its
//! pseudo-determinant.

use crate::error::{Error, Result};
use crate::linalg::{column_rank, hcat, symmetrized, CholFactor, Matrix};

/// An n×p model matrix of full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: Matrix,
}

impl DesignMatrix {
    pub fn new(x: Matrix) -> Result<Self> {
        let (n, p) = x.shape();
        if p > n {
            return Err(Error::domain(format!("design has {p} columns but only {n} rows")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("design has non-finite entries"));
        }
        let rank = column_rank(&x);
        if rank < p {
            return Err(Error::domain(format!("design matrix is rank deficient (rank {rank} < {p})")));
        }
        Ok(DesignMatrix { x })
    }

    /// The constant column.
    pub fn intercept(n: usize) -> Self {
        DesignMatrix { x: Matrix::from_element(n, 1, 1.0) }
    }

    /// Polynomial trend 1, t, t², … in centred and scaled coordinates.
    pub fn polynomial(points: &[f64], p: usize) -> Result<Self> {
        let n = points.len();
        let mean = points.iter().sum::<f64>() / n as f64;
        let spread = points.iter().fold(0.0_f64, |a, v| a.max((v - mean).abs())).max(1e-300);
        let x = Matrix::from_fn(n, p, |i, j| ((points[i] - mean) / spread).powi(j as i32));
        Self::new(x)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }
}

/// Q, WQ, rank(Q) and log Det(WQ).
#[derive(Debug, Clone)]
pub struct Projector {
    pub q: Matrix,
    pub wq: Matrix,
    pub rank: usize,
    pub log_pdet_wq: f64,
}

/// Orthonormal basis of the orthogonal complement of span(`span`).
///
/// Householder QR of [S | I]: the leading s columns of the orthogonal factor
/// span S, the remaining n − s span its complement.
fn complement_basis(span: &Matrix) -> Matrix {
    let (n, s) = span.shape();
    let q = hcat(span, &Matrix::identity(n, n)).qr().q();
    q.columns(s, n - s).into_owned()
}

/// Projector with kernel span(`span`), after a rank check at the shared tolerance.
///
/// WQ is formed as N(N'ΓN)⁻¹N' with N an orthonormal basis of the complement
/// of the span, which equals W − WS(S'WS)⁻¹S'W but does not square the
/// conditioning of S. Then Q = Γ·WQ and Det(WQ) = 1/det(N'ΓN).
pub(crate) fn complement_projector(w: &Matrix, span: &Matrix) -> Result<Projector> {
    let n = w.nrows();
    if span.ncols() > n {
        return Err(Error::domain("more spanning columns than observations"));
    }
    if span.ncols() > 0 && column_rank(span) < span.ncols() {
        return Err(Error::domain("spanning columns are linearly dependent"));
    }
    let chol_w = CholFactor::new(&symmetrized(w))
        .map_err(|minor| Error::domain(format!("weight matrix not positive definite (leading minor {minor})")))?;
    let rank = n - span.ncols();
    if rank == 0 {
        return Ok(Projector { q: Matrix::zeros(n, n), wq: Matrix::zeros(n, n), rank, log_pdet_wq: 0.0 });
    }
    if span.ncols() == 0 {
        return Ok(Projector { q: Matrix::identity(n, n), wq: symmetrized(w), rank, log_pdet_wq: chol_w.log_det() });
    }
    let gamma = chol_w.inverse();
    let basis = complement_basis(span);
    let inner = CholFactor::new(&symmetrized(&(basis.transpose() * &gamma * &basis)))
        .map_err(|_| Error::domain("restricted covariance is not positive definite"))?;
    let wq = symmetrized(&(&basis * inner.solve(&basis.transpose())));
    let q = &gamma * &wq;
    Ok(Projector { q, wq, rank, log_pdet_wq: -inner.log_det() })
}

fn check_weight(w: &Matrix) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::domain("weight matrix must be square"));
    }
    CholFactor::new(&symmetrized(w))
        .map(|_| ())
        .map_err(|minor| Error::domain(format!("weight matrix not positive definite (leading minor {minor})")))
}

/// Build Q = I − X(X'WX)⁻¹X'W and its weighted kernel.
pub fn make_projector(w: &Matrix, x: &DesignMatrix) -> Result<Projector> {
    check_weight(w)?;
    if x.n() != w.nrows() {
        return Err(Error::domain("design and weight matrix disagree on n"));
    }
    complement_projector(w, x.matrix())
}

/// Projector with no design: Q = I, WQ = W.
pub fn identity_projector(w: &Matrix) -> Result<Projector> {
    check_weight(w)?;
    complement_projector(w, &Matrix::zeros(w.nrows(), 0))
}

/// Which earlier series enter the kernel of the r-th projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequentialMode {
    /// Kernel span(X, Y_1, …, Y_{r-1}).
    UtFull,
    /// Kernel span(X, Y_{r-1}).
    Markov,
}

pub(crate) fn sequential_span(x: Option<&DesignMatrix>, y: &Matrix, r: usize, mode: SequentialMode) -> Matrix {
    let n = y.nrows();
    let base = x.map(|d| d.matrix().clone()).unwrap_or_else(|| Matrix::zeros(n, 0));
    match mode {
        SequentialMode::UtFull => hcat(&base, &y.columns(0, r).into_owned()),
        SequentialMode::Markov if r == 0 => base,
        SequentialMode::Markov => hcat(&base, &y.columns(r - 1, 1).into_owned()),
    }
}

/// Number of terms the sequential likelihood uses for `k` series.
pub(crate) fn sequential_terms(n: usize, p: usize, k: usize, mode: SequentialMode) -> usize {
    match mode {
        SequentialMode::UtFull => k.min(n.saturating_sub(p)),
        SequentialMode::Markov => k,
    }
}

/// Projectors Q_1, …, Q_k for the series in the order given.
///
/// In `UtFull` mode, terms stop once the kernel would fill the whole space
/// (rank(Q_r) = 0), so at most n − p projectors are returned.
pub fn sequential_projectors(
    w: &Matrix,
    x: Option<&DesignMatrix>,
    y: &Matrix,
    mode: SequentialMode,
) -> Result<Vec<Projector>> {
    check_weight(w)?;
    let n = w.nrows();
    if y.nrows() != n {
        return Err(Error::domain("data and weight matrix disagree on n"));
    }
    let p = x.map_or(0, |d| d.p());
    if mode == SequentialMode::Markov && y.ncols() > 1 && n < p + 2 {
        return Err(Error::domain("markov projectors need n >= p + 2"));
    }
    (0..sequential_terms(n, p, y.ncols(), mode))
        .map(|r| {
            let span = sequential_span(x, y, r, mode);
            complement_projector(w, &span).map_err(|e| match e {
                Error::Domain(msg) => Error::domain(format!("projector r = {}: {msg}", r + 1)),
                other => other,
            })
        })
        .collect()
}

/// Inner-product matrix S = YY' and squared distances D_ij = S_ii + S_jj − 2S_ij.
#[derive(Debug, Clone)]
pub struct DistancePair {
    pub s: Matrix,
    pub dsq: Matrix,
    /// Number of series the matrices were accumulated over.
    pub k: usize,
}

pub fn distance_pair(y: &Matrix) -> DistancePair {
    let s = y * y.transpose();
    DistancePair { dsq: squared_distances(&s), s, k: y.ncols() }
}

/// Squared-distance matrix from an inner-product matrix.
pub fn squared_distances(s: &Matrix) -> Matrix {
    let n = s.nrows();
    Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (s[(i, i)] + s[(j, j)] - 2.0 * s[(i, j)]).max(0.0) })
}

/// Per-series squared distances D_r(i, j) = (Y_ir − Y_jr)².
pub fn series_distances(y: &Matrix) -> Vec<Matrix> {
    let n = y.nrows();
    (0..y.ncols())
        .map(|r| Matrix::from_fn(n, n, |i, j| (y[(i, r)] - y[(j, r)]).powi(2)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{gamma_of, Ar1Model};
    use crate::linalg::{max_abs, max_abs_diff, pseudo_log_det, trace_product};
    use crate::sampling::{derive_rng, standard_normal_matrix};

    #[test]
    fn orthonormal_case() {
        let x = DesignMatrix::new(Matrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let p = make_projector(&Matrix::identity(2, 2), &x).unwrap();
        assert!(max_abs_diff(&p.q, &Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])) < 1e-15);
        assert_eq!(p.rank, 1);
        assert!(p.log_pdet_wq.abs() < 1e-15);
    }

    #[test]
    fn centering_projector() {
        let p = make_projector(&Matrix::identity(3, 3), &DesignMatrix::intercept(3)).unwrap();
        let c = Matrix::identity(3, 3) - Matrix::from_element(3, 3, 1.0 / 3.0);
        assert!(max_abs_diff(&p.q, &c) < 1e-15);
        assert_eq!(p.rank, 2);
    }

    #[test]
    fn ar1_weight_with_intercept() {
        let b = gamma_of(&Ar1Model::new(5).unwrap(), 0.4).unwrap();
        let p = make_projector(&b.w, &DesignMatrix::intercept(5)).unwrap();
        assert!(max_abs_diff(&(&p.q * &p.q), &p.q) < 1e-10);
        let ones = Matrix::from_element(5, 1, 1.0);
        assert!(max_abs(&(&p.wq * ones)) < 1e-10);
        assert_eq!(p.rank, 4);
    }

    #[test]
    fn rejects_rank_deficient_design_and_bad_weight() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(DesignMatrix::new(x).is_err());
        let w = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(make_projector(&w, &DesignMatrix::intercept(2)).is_err());
    }

    #[test]
    fn random_projector_invariants() {
        for seed in 0..120u64 {
            let mut rng = derive_rng(99, seed);
            let n = 3 + (seed % 6) as usize;
            let p = 1 + (seed % 2) as usize;
            let g = standard_normal_matrix(&mut rng, n, n);
            let w = &g * g.transpose() + Matrix::identity(n, n) * 0.5;
            let x = DesignMatrix::new(hcat(&Matrix::from_element(n, 1, 1.0), &standard_normal_matrix(&mut rng, n, p - 1))).unwrap();
            let proj = make_projector(&w, &x).unwrap();
            let tol = 1e-9 * (1.0 + max_abs(&w));
            assert!(max_abs_diff(&(&proj.q * &proj.q), &proj.q) < tol);
            assert!(max_abs(&(&proj.q * x.matrix())) < tol);
            assert!(max_abs_diff(&proj.wq, &proj.wq.transpose()) < tol);
            assert_eq!(proj.rank, n - p);
            let ones = Matrix::from_element(1, n, 1.0);
            assert!(max_abs(&(ones * &proj.wq)) < tol);

            // basis change of span(X) leaves Q unchanged
            let m = standard_normal_matrix(&mut rng, p, p) + Matrix::identity(p, p) * 3.0;
            let xm = DesignMatrix::new(x.matrix() * m).unwrap();
            let proj2 = make_projector(&w, &xm).unwrap();
            assert!(max_abs_diff(&proj.q, &proj2.q) < tol);
            assert!((proj.log_pdet_wq - proj2.log_pdet_wq).abs() < 1e-8);

            // distance identity
            let y = standard_normal_matrix(&mut rng, n, 3);
            let dp = distance_pair(&y);
            let lhs = trace_product(&proj.wq, &dp.s);
            let rhs = -trace_product(&proj.wq, &dp.dsq) / 2.0;
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn sequential_ut_basis_example() {
        let y = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let ps = sequential_projectors(&Matrix::identity(3, 3), None, &y, SequentialMode::UtFull).unwrap();
        assert_eq!(ps.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![3, 2]);
        let e1 = Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(max_abs(&(&ps[1].q * e1)) < 1e-15);
    }

    #[test]
    fn sequential_ut_ranks_drop_by_one() {
        let mut rng = derive_rng(5, 0);
        let n = 7;
        let b = gamma_of(&Ar1Model::new(n).unwrap(), 0.3).unwrap();
        let y = standard_normal_matrix(&mut rng, n, 5);
        let x = DesignMatrix::intercept(n);
        let ps = sequential_projectors(&b.w, Some(&x), &y, SequentialMode::UtFull).unwrap();
        for (r, p) in ps.iter().enumerate() {
            let (count, _) = pseudo_log_det(&p.wq);
            assert_eq!(count, n - 1 - r);
            assert_eq!(p.rank, n - 1 - r);
        }
        // more series than the space allows: terms stop at rank 1
        let y = standard_normal_matrix(&mut rng, n, 9);
        let ps = sequential_projectors(&b.w, Some(&x), &y, SequentialMode::UtFull).unwrap();
        assert_eq!(ps.len(), n - 1);
        assert_eq!(ps.last().unwrap().rank, 1);
    }

    #[test]
    fn markov_kernel_uses_previous_series_only() {
        let mut rng = derive_rng(6, 0);
        let n = 6;
        let y = standard_normal_matrix(&mut rng, n, 3);
        let x = DesignMatrix::intercept(n);
        let w = Matrix::identity(n, n);
        let ps = sequential_projectors(&w, Some(&x), &y, SequentialMode::Markov).unwrap();
        assert_eq!(ps.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![5, 4, 4]);
        let y2 = y.columns(1, 1).into_owned();
        let y1 = y.columns(0, 1).into_owned();
        assert!(max_abs(&(&ps[2].q * y2)) < 1e-12);
        assert!(max_abs(&(&ps[2].q * y1)) > 1e-3);
    }

    #[test]
    fn collinear_series_name_the_step() {
        let mut y = Matrix::zeros(5, 4);
        y[(0, 0)] = 1.0;
        y[(1, 1)] = 1.0;
        y[(3, 3)] = 1.0;
        y.set_column(2, &(y.column(0) * 2.0));
        // Y_3 first enters a kernel at r = 4
        let err = sequential_projectors(&Matrix::identity(5, 5), None, &y, SequentialMode::UtFull).unwrap_err();
        assert!(err.to_string().contains("r = 4"), "{err}");
    }

    #[test]
    fn distance_pair_examples() {
        let dp = distance_pair(&Matrix::zeros(3, 2));
        assert_eq!(max_abs(&dp.s), 0.0);
        assert_eq!(max_abs(&dp.dsq), 0.0);
        let dp = distance_pair(&Matrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(dp.s, Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert_eq!(dp.dsq, Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }
}
