//! Likelihoods built series by series from sequential residual projections.
//!
//! Series r contributes `(1/2) log Det(WQ_r) − (rank(Q_r)/2) log(Y_r'WQ_rY_r)`,
//! the marginal likelihood of Q_rY_r/‖Q_rY_r‖. For the upper-triangular
//! subgroup the kernel of Q_r is span(X, Y_1, …, Y_{r−1}); for a Green's
//! (Markov) Σ it is span(X, Y_{r−1}).

use serde::Serialize;

use crate::covariance::CovBundle;
use crate::error::{Error, Result};
use crate::linalg::{select_columns, symmetrized, Matrix};
use crate::projection::{sequential_projectors, DesignMatrix, SequentialMode};

/// One series' contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeqTerm {
    pub rank: usize,
    pub loglik: f64,
    pub score: f64,
}

fn permuted(y: &Matrix, order: Option<&[usize]>) -> Result<Matrix> {
    let Some(order) = order else {
        return Ok(y.clone());
    };
    let k = y.ncols();
    let mut seen = vec![false; k];
    if order.len() != k {
        return Err(Error::domain(format!("order has {} entries for {k} series", order.len())));
    }
    for &c in order {
        if c >= k || seen[c] {
            return Err(Error::domain("order is not a permutation of the series"));
        }
        seen[c] = true;
    }
    Ok(select_columns(y, order))
}

/// Per-series terms for the series in the order given.
pub fn sequential_likelihood_terms(
    bundle: &CovBundle,
    y: &Matrix,
    design: Option<&DesignMatrix>,
    mode: SequentialMode,
) -> Result<Vec<SeqTerm>> {
    let projectors = sequential_projectors(&bundle.w, design, y, mode)?;
    projectors
        .iter()
        .enumerate()
        .map(|(r, proj)| {
            let p = &proj.wq;
            let yr = y.column(r);
            let py = p * yr;
            let q = yr.dot(&py);
            if !(q > 0.0) {
                return Err(Error::degenerate(format!("series {} has a null residual", r + 1)));
            }
            let pd = p * &bundle.d;
            let pdp = symmetrized(&(&pd * p));
            let a = yr.dot(&(&pdp * yr));
            let rank = proj.rank as f64;
            Ok(SeqTerm {
                rank: proj.rank,
                loglik: 0.5 * proj.log_pdet_wq - 0.5 * rank * q.ln(),
                // a rank-one term is free of β; return its score exactly
                score: if proj.rank == 1 { 0.0 } else { -0.5 * pd.trace() + 0.5 * rank * a / q },
            })
        })
        .collect()
}

/// Log likelihood of the maximal invariant under the upper-triangular group.
///
/// `order` permutes the series before they are processed; `None` keeps the
/// given order.
pub fn ut_subgroup_loglik(
    bundle: &CovBundle,
    y: &Matrix,
    design: Option<&DesignMatrix>,
    order: Option<&[usize]>,
) -> Result<f64> {
    let y = permuted(y, order)?;
    Ok(sequential_likelihood_terms(bundle, &y, design, SequentialMode::UtFull)?
        .iter()
        .map(|t| t.loglik)
        .sum())
}

pub fn ut_subgroup_score(
    bundle: &CovBundle,
    y: &Matrix,
    design: Option<&DesignMatrix>,
    order: Option<&[usize]>,
) -> Result<f64> {
    let y = permuted(y, order)?;
    Ok(sequential_likelihood_terms(bundle, &y, design, SequentialMode::UtFull)?
        .iter()
        .map(|t| t.score)
        .sum())
}

/// Conditional residual log likelihood for a Green's-matrix Σ.
pub fn markov_conditional_loglik(bundle: &CovBundle, y: &Matrix, design: Option<&DesignMatrix>) -> Result<f64> {
    Ok(sequential_likelihood_terms(bundle, y, design, SequentialMode::Markov)?
        .iter()
        .map(|t| t.loglik)
        .sum())
}

pub fn markov_conditional_score(bundle: &CovBundle, y: &Matrix, design: Option<&DesignMatrix>) -> Result<f64> {
    Ok(sequential_likelihood_terms(bundle, y, design, SequentialMode::Markov)?
        .iter()
        .map(|t| t.score)
        .sum())
}
