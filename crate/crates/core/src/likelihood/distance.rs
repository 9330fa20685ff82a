//! Residual likelihoods written in terms of squared-distance matrices.
//!
//! With 1 ∈ span(X) the kernel WQ annihilates the constant vector, so
//! tr(WQ·S) = −tr(WQ·D)/2 for S = YY' and D_ij = S_ii + S_jj − 2S_ij. The
//! model-I and model-II residual likelihoods therefore depend on the data only
//! through distances.

use crate::covariance::CovBundle;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetrized, trace_product, Matrix};
use crate::projection::{make_projector, DesignMatrix, DistancePair, Projector};

struct DistanceKernel {
    proj: Projector,
    pd_trace: f64,
    pdp: Matrix,
}

fn kernel(bundle: &CovBundle, design: &DesignMatrix, n: usize) -> Result<DistanceKernel> {
    if bundle.n() != n {
        return Err(Error::domain("distance matrix and correlation matrix disagree on n"));
    }
    let proj = make_projector(&bundle.w, design)?;
    let ones = Matrix::from_element(n, 1, 1.0);
    if max_abs(&(&proj.wq * ones)) > 1e-8 * (1.0 + max_abs(&proj.wq)) {
        return Err(Error::domain("distance likelihoods require the constant vector in span(X)"));
    }
    let pd = &proj.wq * &bundle.d;
    let pdp = symmetrized(&(&pd * &proj.wq));
    Ok(DistanceKernel { pd_trace: pd.trace(), pdp, proj })
}

// tr(WQ S) recovered from a squared-distance matrix.
fn inner_trace(p: &Matrix, dsq: &Matrix) -> Result<f64> {
    let t = -0.5 * trace_product(p, dsq);
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::degenerate(format!("non-positive trace tr(WQS) = {t}")))
    }
}

fn check_square(dsq: &Matrix) -> Result<usize> {
    if dsq.nrows() != dsq.ncols() {
        return Err(Error::domain("distance matrix must be square"));
    }
    Ok(dsq.nrows())
}

/// Model-I residual likelihood from the pooled squared-distance matrix:
/// (k/2) log Det(WQ) − ((n−p)k/2) log(−tr(WQ·D)/2).
pub fn distance_loglik_model_i(dp: &DistancePair, bundle: &CovBundle, design: &DesignMatrix) -> Result<f64> {
    let n = check_square(&dp.dsq)?;
    let kr = kernel(bundle, design, n)?;
    let t = inner_trace(&kr.proj.wq, &dp.dsq)?;
    let k = dp.k as f64;
    let m = kr.proj.rank as f64;
    Ok(0.5 * k * kr.proj.log_pdet_wq - 0.5 * m * k * t.ln())
}

pub fn distance_score_model_i(dp: &DistancePair, bundle: &CovBundle, design: &DesignMatrix) -> Result<f64> {
    let n = check_square(&dp.dsq)?;
    let kr = kernel(bundle, design, n)?;
    let t = inner_trace(&kr.proj.wq, &dp.dsq)?;
    let a = -0.5 * trace_product(&kr.pdp, &dp.dsq);
    let k = dp.k as f64;
    let m = kr.proj.rank as f64;
    Ok(-0.5 * k * kr.pd_trace + 0.5 * m * k * a / t)
}

/// Model-II residual likelihood from per-series squared distances
/// D_r(i, j) = (Y_ir − Y_jr)².
pub fn distance_loglik_model_ii(dsqs: &[Matrix], bundle: &CovBundle, design: &DesignMatrix) -> Result<f64> {
    let first = dsqs.first().ok_or_else(|| Error::domain("no distance matrices"))?;
    let n = check_square(first)?;
    let kr = kernel(bundle, design, n)?;
    let m = kr.proj.rank as f64;
    let mut acc = 0.0;
    for d in dsqs {
        if check_square(d)? != n {
            return Err(Error::domain("distance matrices disagree on n"));
        }
        acc += inner_trace(&kr.proj.wq, d)?.ln();
    }
    Ok(0.5 * dsqs.len() as f64 * kr.proj.log_pdet_wq - 0.5 * m * acc)
}

pub fn distance_score_model_ii(dsqs: &[Matrix], bundle: &CovBundle, design: &DesignMatrix) -> Result<f64> {
    let first = dsqs.first().ok_or_else(|| Error::domain("no distance matrices"))?;
    let n = check_square(first)?;
    let kr = kernel(bundle, design, n)?;
    let m = kr.proj.rank as f64;
    let mut acc = 0.0;
    for d in dsqs {
        if check_square(d)? != n {
            return Err(Error::domain("distance matrices disagree on n"));
        }
        let t = inner_trace(&kr.proj.wq, d)?;
        acc += -0.5 * trace_product(&kr.pdp, d) / t;
    }
    Ok(-0.5 * dsqs.len() as f64 * kr.pd_trace + 0.5 * m * acc)
}
