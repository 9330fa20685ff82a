//! Profile, residual and marginal likelihoods for the autocorrelation β.
//!
//! Every likelihood here has the same skeleton. Let P be the precision-like
//! kernel (W = Γ⁻¹ without a design, WQ with one), `m` the effective number
//! of points (n or n − p) and `log Det P` its log pseudo-determinant. Then
//!
//! * model I:   (k/2) log Det P − (mk/2) log tr(Y'PY)
//! * model II:  (k/2) log Det P − (m/2) Σ_r log(Y_r'PY_r)
//! * model III: (k/2) log Det P − (max(k, m)/2) log Det(Y'PY)
//!
//! and using dP/dβ = −PDP the scores are exact derivatives of those
//! expressions.

mod distance;
mod fit;
mod sequential;

pub use distance::{
    distance_loglik_model_i, distance_loglik_model_ii, distance_score_model_i, distance_score_model_ii,
};
pub use fit::{fit_beta, FitResult, SearchConfig, DEGENERACY_GRID};
pub use sequential::{
    markov_conditional_loglik, markov_conditional_score, sequential_likelihood_terms, ut_subgroup_loglik,
    ut_subgroup_score, SeqTerm,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariance::{gamma_of, v_factor_with, Ar1Model, CovBundle};
use crate::error::{Error, Result};
use crate::linalg::{pseudo_log_det, symmetrized, CholFactor, Matrix};
use crate::projection::{identity_projector, make_projector, DesignMatrix, Projector};

/// The three cross-series covariance models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Σ = σ² I.
    I,
    /// Σ diagonal.
    II,
    /// Σ unrestricted positive definite.
    III,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::I => "I",
            ModelKind::II => "II",
            ModelKind::III => "III",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelKind::I),
            "II" | "2" => Ok(ModelKind::II),
            "III" | "3" => Ok(ModelKind::III),
            other => Err(Error::domain(format!("unknown model '{other}' (expected I, II or III)"))),
        }
    }
}

/// Everything the profile formulas need at a fixed β.
#[derive(Debug, Clone)]
pub struct ProfileKernel {
    p: Matrix,
    pdp: Matrix,
    tr_pd: f64,
    log_det_p: f64,
    m: usize,
    v: f64,
}

impl ProfileKernel {
    pub fn new(bundle: &CovBundle, design: Option<&DesignMatrix>) -> Result<Self> {
        let proj = match design {
            Some(x) => make_projector(&bundle.w, x)?,
            None => identity_projector(&bundle.w)?,
        };
        let log_det_p = if design.is_some() { proj.log_pdet_wq } else { -bundle.log_det_gamma };
        Ok(Self::from_projector(&proj, &bundle.d, log_det_p))
    }

    pub(crate) fn from_projector(proj: &Projector, d: &Matrix, log_det_p: f64) -> Self {
        let p = proj.wq.clone();
        let pd = &p * d;
        let pdp = symmetrized(&(&pd * &p));
        let m = proj.rank;
        ProfileKernel {
            tr_pd: pd.trace(),
            v: v_factor_with(&p, d, m as f64),
            p,
            pdp,
            log_det_p,
            m,
        }
    }

    /// Effective number of points (n or n − p).
    pub fn m(&self) -> usize {
        self.m
    }

    /// V computed from the kernel: m·tr(PDPD) − tr²(PD).
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn log_det_p(&self) -> f64 {
        self.log_det_p
    }

    fn check_rows(&self, y: &Matrix) -> Result<()> {
        if y.nrows() != self.p.nrows() {
            return Err(Error::domain(format!(
                "data has {} rows, expected {}",
                y.nrows(),
                self.p.nrows()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::domain("data has no series"));
        }
        Ok(())
    }

    // Column-wise quadratic forms y_r' M y_r.
    fn column_forms(m: &Matrix, y: &Matrix) -> Vec<f64> {
        let my = m * y;
        (0..y.ncols()).map(|r| my.column(r).dot(&y.column(r))).collect()
    }

    fn positive(q: f64, what: &str) -> Result<f64> {
        if q > 0.0 && q.is_finite() {
            Ok(q)
        } else {
            Err(Error::degenerate(format!("non-positive quadratic form {what} = {q}")))
        }
    }

    pub fn loglik(&self, y: &Matrix, model: ModelKind) -> Result<f64> {
        self.check_rows(y)?;
        let k = y.ncols();
        let kf = k as f64;
        let mf = self.m as f64;
        let head = 0.5 * kf * self.log_det_p;
        match model {
            ModelKind::I => {
                let q = Self::positive(Self::column_forms(&self.p, y).iter().sum(), "tr(Y'PY)")?;
                Ok(head - 0.5 * mf * kf * q.ln())
            }
            ModelKind::II => {
                let mut acc = 0.0;
                for q in Self::column_forms(&self.p, y) {
                    acc += Self::positive(q, "Y_r'PY_r")?.ln();
                }
                Ok(head - 0.5 * mf * acc)
            }
            ModelKind::III => {
                let gram = symmetrized(&(y.transpose() * &self.p * y));
                if k <= self.m {
                    let chol = CholFactor::new(&gram)
                        .map_err(|_| Error::degenerate("Y'PY is singular"))?;
                    Ok(head - 0.5 * mf * chol.log_det())
                } else {
                    // exponent max(k, m) = k with a pseudo-determinant
                    let (_, log) = pseudo_log_det(&gram);
                    let log = log.ok_or_else(|| Error::degenerate("Y'PY is not positive semi-definite"))?;
                    Ok(head - 0.5 * kf * log)
                }
            }
        }
    }

    pub fn score(&self, y: &Matrix, model: ModelKind) -> Result<f64> {
        self.check_rows(y)?;
        let k = y.ncols();
        let kf = k as f64;
        let mf = self.m as f64;
        let head = -0.5 * kf * self.tr_pd;
        match model {
            ModelKind::I => {
                let q = Self::positive(Self::column_forms(&self.p, y).iter().sum(), "tr(Y'PY)")?;
                let a: f64 = Self::column_forms(&self.pdp, y).iter().sum();
                Ok(head + 0.5 * mf * kf * a / q)
            }
            ModelKind::II => {
                let qs = Self::column_forms(&self.p, y);
                let as_ = Self::column_forms(&self.pdp, y);
                let mut acc = 0.0;
                for (q, a) in qs.into_iter().zip(as_) {
                    acc += a / Self::positive(q, "Y_r'PY_r")?;
                }
                Ok(head + 0.5 * mf * acc)
            }
            ModelKind::III => {
                if k >= self.m {
                    // the likelihood does not depend on β
                    return Ok(0.0);
                }
                let py = &self.p * y;
                let gram = symmetrized(&(y.transpose() * &py));
                let chol = CholFactor::new(&gram).map_err(|_| Error::degenerate("Y'PY is singular"))?;
                let ay = y.transpose() * &self.pdp * y;
                Ok(head + 0.5 * mf * chol.solve(&ay).trace())
            }
        }
    }

    /// Closed-form Fisher information at this β.
    pub fn expected_info(&self, k: usize, model: ModelKind) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("number of series must be positive"));
        }
        let kf = k as f64;
        let mf = self.m as f64;
        let v = self.v;
        match model {
            ModelKind::I => Ok(v * kf * kf / (2.0 * (mf * kf + 2.0))),
            ModelKind::II => Ok(v * kf / (2.0 * (mf + 2.0))),
            ModelKind::III => {
                if k > self.m {
                    return Err(Error::domain(format!(
                        "information formula undefined; likelihood degenerate (k = {k} > {})",
                        self.m
                    )));
                }
                if k == self.m {
                    return Ok(0.0);
                }
                Ok(v * kf * (mf - kf) / (2.0 * (mf - 1.0) * (mf + 2.0)))
            }
        }
    }
}

/// Profile (or, with a design, residual profile) log likelihood at β.
pub fn profile_loglik(
    model: &Ar1Model,
    y: &Matrix,
    beta: f64,
    kind: ModelKind,
    design: Option<&DesignMatrix>,
) -> Result<f64> {
    ProfileKernel::new(&gamma_of(model, beta)?, design)?.loglik(y, kind)
}

/// Exact derivative of [`profile_loglik`] in β.
pub fn score(model: &Ar1Model, y: &Matrix, beta: f64, kind: ModelKind, design: Option<&DesignMatrix>) -> Result<f64> {
    ProfileKernel::new(&gamma_of(model, beta)?, design)?.score(y, kind)
}

/// Fisher information for β with `k` series.
pub fn expected_info(bundle: &CovBundle, k: usize, kind: ModelKind, design: Option<&DesignMatrix>) -> Result<f64> {
    ProfileKernel::new(bundle, design)?.expected_info(k, kind)
}

/// Efficiency of model II relative to model I for iid series: (nk+2)/(nk+2k).
pub fn efficiency_ii_vs_i(n: u64, k: u64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    (n * k + 2.0) / (n * k + 2.0 * k)
}

/// Log likelihood, score and information at a single β.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodEval {
    pub loglik: f64,
    pub score: f64,
    pub expected_info: f64,
    pub observed_info: f64,
}

/// Step used for the numerical second derivative.
pub fn observed_info_step(beta: f64) -> f64 {
    1e-5 * beta.abs().max(1.0)
}

pub fn evaluate(
    model: &Ar1Model,
    y: &Matrix,
    beta: f64,
    kind: ModelKind,
    design: Option<&DesignMatrix>,
) -> Result<LikelihoodEval> {
    let bundle = gamma_of(model, beta)?;
    let kernel = ProfileKernel::new(&bundle, design)?;
    let loglik = kernel.loglik(y, kind)?;
    let score = kernel.score(y, kind)?;
    let k = y.ncols();
    let expected_info = kernel.expected_info(k, kind).unwrap_or(0.0);
    let h = observed_info_step(beta);
    let up = profile_loglik(model, y, beta + h, kind, design)?;
    let down = profile_loglik(model, y, beta - h, kind, design)?;
    Ok(LikelihoodEval {
        loglik,
        score,
        expected_info,
        observed_info: -(up - 2.0 * loglik + down) / (h * h),
    })
}
