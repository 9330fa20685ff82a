use serde::Serialize;

use super::{ModelKind, ProfileKernel};
use crate::covariance::{gamma_of, Ar1Model};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optimize::brent_max;
use crate::projection::DesignMatrix;

/// β grid used to decide whether a likelihood carries any information.
pub const DEGENERACY_GRID: [f64; 9] = [-0.9, -0.675, -0.45, -0.225, 0.0, 0.225, 0.45, 0.675, 0.9];

const FALLBACK_POINTS: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { lo: -1.0 + 1e-6, hi: 1.0 - 1e-6, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: f64,
    /// 1/√I(β̂); infinite when the information vanishes.
    pub se: f64,
    pub loglik_at_max: f64,
    pub evaluations: usize,
    pub at_boundary: bool,
}

/// Maximize the profile (or residual profile) likelihood over β.
pub fn fit_beta(
    model: &Ar1Model,
    y: &Matrix,
    kind: ModelKind,
    design: Option<&DesignMatrix>,
    search: SearchConfig,
) -> Result<FitResult> {
    if !(search.lo > -1.0 && search.hi < 1.0 && search.lo < search.hi && search.tol > 0.0) {
        return Err(Error::domain("search interval must lie inside (-1, 1)"));
    }
    let k = y.ncols();
    let m = model.n() - design.map_or(0, |d| d.p());
    if kind == ModelKind::III && k >= m {
        return Err(Error::degenerate(format!(
            "uninformative likelihood: model III with k = {k} >= {m}"
        )));
    }
    let loglik = |beta: f64| -> Result<f64> { ProfileKernel::new(&gamma_of(model, beta)?, design)?.loglik(y, kind) };

    let mut evaluations = 0;
    let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &b in DEGENERACY_GRID.iter().filter(|b| **b >= search.lo && **b <= search.hi) {
        let l = loglik(b)?;
        evaluations += 1;
        lmin = lmin.min(l);
        lmax = lmax.max(l);
    }
    if lmax - lmin < 1e-8 {
        return Err(Error::degenerate("uninformative likelihood: flat over the beta grid"));
    }

    let objective = |b: f64| loglik(b).unwrap_or(f64::NEG_INFINITY);
    let mut best = brent_max(objective, search.lo, search.hi, search.tol, 500);
    evaluations += best.evaluations;

    // the search assumes a single peak; confirm against a grid scan
    let step = (search.hi - search.lo) / (FALLBACK_POINTS - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..FALLBACK_POINTS)
        .map(|i| {
            let b = search.lo + step * i as f64;
            (b, objective(b))
        })
        .collect();
    evaluations += grid.len();
    let (gi, &(gb, gl)) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    if gl > best.fx + 1e-9 * (1.0 + gl.abs()) {
        let lo = grid[gi.saturating_sub(1)].0;
        let hi = grid[(gi + 1).min(grid.len() - 1)].0;
        let local = brent_max(objective, lo, hi, search.tol, 500);
        evaluations += local.evaluations;
        best = if local.fx >= gl { local } else { crate::optimize::LineMax { x: gb, fx: gl, evaluations: 0 } };
    }
    if !best.fx.is_finite() {
        return Err(Error::degenerate("likelihood is not finite anywhere on the search interval"));
    }

    let info = ProfileKernel::new(&gamma_of(model, best.x)?, design)?.expected_info(k, kind)?;
    let edge = 1e-6_f64.max(10.0 * search.tol);
    Ok(FitResult {
        beta_hat: best.x,
        se: if info > 0.0 { info.sqrt().recip() } else { f64::INFINITY },
        loglik_at_max: best.fx,
        evaluations,
        at_boundary: best.x - search.lo <= edge || search.hi - best.x <= edge,
    })
}
