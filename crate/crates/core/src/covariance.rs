//! Autocorrelation family Γ(β) and the cross-series covariance Σ.
//!
//! Γ is the stationary exponential / AR(1) family `Γ_ij = β^|x_i - x_j|` on a
//! strictly increasing coordinate grid. The bundle carries Γ, its inverse W,
//! the derivative D = dΓ/dβ and log|Γ|, which is everything the likelihood
//! formulas need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{trace_product, CholFactor, Matrix};

/// Observation points for the AR(1) correlation family.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Model {
    points: Vec<f64>,
}

impl Ar1Model {
    /// Integer grid `1..=n`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_points((1..=n).map(|i| i as f64).collect())
    }

    pub fn with_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("AR(1) model needs at least two points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("observation points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("observation points must be strictly increasing"));
        }
        Ok(Ar1Model { points })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn integer_spacing(&self) -> bool {
        self.points
            .iter()
            .all(|&a| self.points.iter().all(|&b| ((a - b).abs().round() - (a - b).abs()).abs() < 1e-12))
    }

    pub fn bundle(&self, beta: f64) -> Result<CovBundle> {
        gamma_of(self, beta)
    }
}

/// Γ(β) together with W = Γ⁻¹, D = dΓ/dβ and log|Γ|.
#[derive(Debug, Clone)]
pub struct CovBundle {
    pub beta: f64,
    pub gamma: Matrix,
    pub w: Matrix,
    pub d: Matrix,
    pub log_det_gamma: f64,
}

impl CovBundle {
    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    /// A = W D W.
    pub fn a(&self) -> Matrix {
        &self.w * &self.d * &self.w
    }
}

// β^d and d·β^(d-1) with the convention 0^0 = 1.
fn lag_terms(beta: f64, lag: f64, integer: bool) -> Result<(f64, f64)> {
    if lag == 0.0 {
        return Ok((1.0, 0.0));
    }
    if beta == 0.0 {
        if lag == 1.0 {
            return Ok((0.0, 1.0));
        }
        if lag > 1.0 {
            return Ok((0.0, 0.0));
        }
        return Err(Error::domain("derivative at beta = 0 is unbounded for lags below one"));
    }
    if integer {
        let m = lag.round() as i32;
        Ok((beta.powi(m), lag * beta.powi(m - 1)))
    } else if beta > 0.0 {
        Ok((beta.powf(lag), lag * beta.powf(lag - 1.0)))
    } else {
        Err(Error::domain("negative autocorrelation requires integer spacing between points"))
    }
}

/// Build the correlation bundle for `beta`.
pub fn gamma_of(model: &Ar1Model, beta: f64) -> Result<CovBundle> {
    if !(beta.abs() < 1.0) {
        return Err(Error::domain(format!(
            "autocorrelation outside open unit interval: beta = {beta}"
        )));
    }
    let n = model.n();
    let x = model.points();
    let integer = model.integer_spacing();
    let mut gamma = Matrix::zeros(n, n);
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let lag = (x[i] - x[j]).abs();
            let (g, dg) = lag_terms(beta, lag, integer)?;
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
            d[(i, j)] = dg;
            d[(j, i)] = dg;
        }
    }
    let chol = CholFactor::new(&gamma).map_err(|minor| {
        Error::domain(format!("correlation matrix not positive definite (leading minor {minor})"))
    })?;
    Ok(CovBundle {
        beta,
        w: chol.inverse(),
        log_det_gamma: chol.log_det(),
        gamma,
        d,
    })
}

/// Cross-series covariance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    /// σ² I_k.
    ScalarVar(f64),
    /// diag(σ₁², …, σ_k²).
    DiagonalVar(Vec<f64>),
    /// Any symmetric positive definite k×k matrix (row-major).
    FullPd { k: usize, values: Vec<f64> },
    /// Green's matrix, Σ_rs = a_r b_s for r ≤ s.
    Green { a: Vec<f64>, b: Vec<f64> },
}

impl SigmaSpec {
    pub fn full(m: &Matrix) -> Self {
        SigmaSpec::FullPd {
            k: m.nrows(),
            values: m.transpose().iter().copied().collect(),
        }
    }

    /// True for the scalar and diagonal families (independent series).
    pub fn is_diagonal(&self) -> bool {
        matches!(self, SigmaSpec::ScalarVar(_) | SigmaSpec::DiagonalVar(_))
    }
}

/// Realize Σ for `k` series and check positive definiteness.
pub fn build_sigma(spec: &SigmaSpec, k: usize) -> Result<Matrix> {
    if k == 0 {
        return Err(Error::domain("number of series must be positive"));
    }
    let dim_err = |got: usize| Error::domain(format!("sigma spec has dimension {got}, expected {k}"));
    let sigma = match spec {
        SigmaSpec::ScalarVar(v) => Matrix::identity(k, k) * *v,
        SigmaSpec::DiagonalVar(v) => {
            if v.len() != k {
                return Err(dim_err(v.len()));
            }
            Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
        }
        SigmaSpec::FullPd { k: dim, values } => {
            if *dim != k || values.len() != k * k {
                return Err(dim_err(*dim));
            }
            let m = Matrix::from_row_slice(k, k, values);
            if (0..k).any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()))) {
                return Err(Error::domain("sigma matrix is not symmetric"));
            }
            m
        }
        SigmaSpec::Green { a, b } => {
            if a.len() != k || b.len() != k {
                return Err(dim_err(a.len().min(b.len())));
            }
            Matrix::from_fn(k, k, |r, s| {
                let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
                a[lo] * b[hi]
            })
        }
    };
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("sigma has non-finite entries"));
    }
    CholFactor::new(&sigma).map_err(|minor| {
        Error::domain(format!("sigma not positive definite: leading minor {minor} is not positive"))
    })?;
    Ok(sigma)
}

/// V = m·tr(PDPD) − tr²(PD) for a precision-like matrix `p` and effective size `m`.
pub fn v_factor_with(p: &Matrix, d: &Matrix, m: f64) -> f64 {
    let pd = p * d;
    m * trace_product(&pd, &pd) - pd.trace().powi(2)
}

/// V = n·tr(WDWD) − tr²(WD).
pub fn v_factor(bundle: &CovBundle) -> f64 {
    v_factor_with(&bundle.w, &bundle.d, bundle.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, max_abs_diff};

    fn path_adjacency(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn beta_zero_gives_identity_and_path_derivative() {
        let b = gamma_of(&Ar1Model::new(3).unwrap(), 0.0).unwrap();
        assert_eq!(b.gamma, Matrix::identity(3, 3));
        assert_eq!(b.d, path_adjacency(3));
    }

    #[test]
    fn two_by_two_closed_form() {
        let b = gamma_of(&Ar1Model::new(2).unwrap(), 0.5).unwrap();
        assert_eq!(b.gamma, Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        assert!((b.log_det_gamma.exp() - 0.75).abs() < 1e-14);
        assert_eq!(b.d, Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn inverse_is_tridiagonal_on_integer_grid() {
        let b = gamma_of(&Ar1Model::new(4).unwrap(), 0.5).unwrap();
        let dense_inv = b.gamma.clone().try_inverse().unwrap();
        assert!(max_abs_diff(&dense_inv, &b.w) < 1e-12);
        assert!(max_abs_diff(&(&b.w * &b.gamma), &Matrix::identity(4, 4)) < 1e-12);
        for i in 0..4usize {
            for j in 0..4usize {
                if i.abs_diff(j) >= 2 {
                    assert!(b.w[(i, j)].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_beta_on_boundary() {
        let m = Ar1Model::new(3).unwrap();
        let err = gamma_of(&m, 1.0).unwrap_err();
        assert!(err.to_string().contains("autocorrelation outside open unit interval"));
        assert!(gamma_of(&m, -1.0).is_err());
        assert!(gamma_of(&m, f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Ar1Model::new(1).is_err());
        assert!(Ar1Model::with_points(vec![0.0, 1.0, 1.0]).is_err());
        let irregular = Ar1Model::with_points(vec![0.0, 0.5, 1.7]).unwrap();
        assert!(gamma_of(&irregular, -0.3).is_err());
        assert!(gamma_of(&irregular, 0.3).is_ok());
    }

    #[test]
    fn derivative_matches_central_difference_on_grid() {
        let h = 1e-5;
        for model in [Ar1Model::new(6).unwrap(), Ar1Model::with_points(vec![0.0, 0.7, 1.1, 2.5, 4.0]).unwrap()] {
            let mut beta: f64 = -0.95;
            while beta <= 0.95 + 1e-12 {
                let lo_ok = model.integer_spacing() || beta - h > 0.0;
                if lo_ok && beta.abs() > 1e-9 {
                    let b = gamma_of(&model, beta).unwrap();
                    let n = b.n();
                    assert!(max_abs_diff(&(&b.gamma * &b.w), &Matrix::identity(n, n)) < 1e-10);
                    let fd = (gamma_of(&model, beta + h).unwrap().gamma - gamma_of(&model, beta - h).unwrap().gamma) / (2.0 * h);
                    let rel = max_abs_diff(&fd, &b.d) / max_abs(&b.d).max(1e-300);
                    assert!(rel < 1e-6, "beta={beta} rel={rel}");
                    for i in 0..n {
                        assert_eq!(b.gamma[(i, i)], 1.0);
                        assert_eq!(b.d[(i, i)], 0.0);
                    }
                }
                beta += 0.05;
            }
        }
    }

    #[test]
    fn v_factor_at_zero_is_two_n_n_minus_one() {
        for n in 2..12 {
            let b = gamma_of(&Ar1Model::new(n).unwrap(), 0.0).unwrap();
            assert_eq!(v_factor(&b), (2 * n * (n - 1)) as f64);
        }
        let b = gamma_of(&Ar1Model::new(4).unwrap(), 0.0).unwrap();
        assert_eq!(v_factor(&b), 24.0);
    }

    #[test]
    fn v_factor_matches_dense_evaluation() {
        let b = gamma_of(&Ar1Model::new(5).unwrap(), 0.3).unwrap();
        // independent route: nalgebra inverse and explicit products
        let w = b.gamma.clone().try_inverse().unwrap();
        let wd = &w * &b.d;
        let wdwd = &wd * &wd;
        let expected = 5.0 * wdwd.trace() - wd.trace() * wd.trace();
        assert!((v_factor(&b) - expected).abs() < 1e-10 * expected.abs());
        assert!(v_factor(&b) >= 0.0);
    }

    #[test]
    fn sigma_variants() {
        assert_eq!(build_sigma(&SigmaSpec::ScalarVar(1.0), 3).unwrap(), Matrix::identity(3, 3));
        let err = build_sigma(&SigmaSpec::Green { a: vec![1.0; 3], b: vec![1.0; 3] }, 3).unwrap_err();
        assert!(err.to_string().contains("leading minor 2"));
        let g = build_sigma(&SigmaSpec::Green { a: vec![1.0, 2.0, 4.0], b: vec![4.0, 2.0, 1.0] }, 3).unwrap();
        let inv = g.clone().try_inverse().unwrap();
        assert!(inv[(0, 2)].abs() < 1e-8 && inv[(2, 0)].abs() < 1e-8);
        assert!(build_sigma(&SigmaSpec::DiagonalVar(vec![1.0, 2.0]), 3).is_err());
        assert!(build_sigma(&SigmaSpec::ScalarVar(-1.0), 2).is_err());
        let full = SigmaSpec::full(&Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        assert_eq!(build_sigma(&full, 2).unwrap()[(0, 1)], 0.5);
    }
}
