//! Seeded Monte Carlo studies of the score, the information curves, the
//! deletion anomaly and the Haar moment formulas.
//!
//! Replicate `i` of an experiment with master seed `s` draws from
//! `derive_rng(s, i)`. Replicates run on the rayon pool, are collected in
//! index order and reduced serially, so results do not depend on the number
//! of worker threads.

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{build_sigma, gamma_of, Ar1Model, SigmaSpec};
use crate::error::{Error, Result};
use crate::haar::{product_and_cov_tr_quad, trace_moment_expectations};
use crate::likelihood::{
    efficiency_ii_vs_i, fit_beta, sequential_likelihood_terms, ModelKind, ProfileKernel, SearchConfig,
    DEGENERACY_GRID,
};
use crate::linalg::{select_columns, trace_product, Matrix};
use crate::projection::{DesignMatrix, SequentialMode};
use crate::sampling::{derive_rng, derive_seed, haar_columns, haar_orthogonal, GaussianSampler};
use crate::stats::{covariance_se, mean_report, variance_report, variance_se, z_difference, McReport, Z_LIMIT};

/// Largest fraction of replicates allowed to fail in the deletion study.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.05;

const BOOTSTRAP_RESAMPLES: usize = 500;

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::domain("at least two replicates are needed"));
    }
    Ok(())
}

/// Polynomial design with `p` columns on the model's grid, or none for p = 0.
pub fn polynomial_design(model: &Ar1Model, p: usize) -> Result<Option<DesignMatrix>> {
    if p == 0 {
        return Ok(None);
    }
    if p >= model.n() {
        return Err(Error::domain(format!("design with p = {p} leaves no residual contrasts at n = {}", model.n())));
    }
    DesignMatrix::polynomial(model.points(), p).map(Some)
}

fn par_replicates<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..reps as u64).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BartlettConfig {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub beta: f64,
    pub model: ModelKind,
    pub sigma: SigmaSpec,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BartlettReport {
    /// Mean score, target 0.
    pub mean: McReport,
    /// Score variance, target the Fisher information.
    pub variance: McReport,
    pub pass: bool,
}

fn check_sigma_for_model(model: ModelKind, sigma: &SigmaSpec) -> Result<()> {
    match (model, sigma) {
        (ModelKind::I, SigmaSpec::ScalarVar(_)) => Ok(()),
        (ModelKind::I, _) => Err(Error::domain("model I data need a scalar sigma")),
        (ModelKind::II, s) if s.is_diagonal() => Ok(()),
        (ModelKind::II, _) => Err(Error::domain("model II data need a scalar or diagonal sigma")),
        (ModelKind::III, _) => Ok(()),
    }
}

/// Score mean and variance of a profile likelihood at the true β.
pub fn bartlett_check(cfg: &BartlettConfig) -> Result<BartlettReport> {
    check_reps(cfg.reps)?;
    check_sigma_for_model(cfg.model, &cfg.sigma)?;
    let ar = Ar1Model::new(cfg.n)?;
    let design = polynomial_design(&ar, cfg.p)?;
    let bundle = gamma_of(&ar, cfg.beta)?;
    let kernel = ProfileKernel::new(&bundle, design.as_ref())?;
    let target = kernel.expected_info(cfg.k, cfg.model)?;
    let sampler = GaussianSampler::new(&bundle.gamma, &build_sigma(&cfg.sigma, cfg.k)?)?;

    let scores = par_replicates(cfg.reps, |i| {
        let y = sampler.sample(&mut derive_rng(cfg.seed, i));
        kernel.score(&y, cfg.model)
    })?;
    let mean = mean_report(&scores, Some(0.0), cfg.seed);
    let variance = variance_report(&scores, Some(target), cfg.seed);
    let pass = mean.pass && variance.pass;
    Ok(BartlettReport { mean, variance, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoRow {
    pub k: usize,
    pub formula_info: f64,
    pub mc_info: f64,
    pub mc_se: f64,
    pub z: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoCurve {
    pub rows: Vec<InfoRow>,
    pub pass: bool,
}

/// Fisher information against the Monte Carlo score variance for every k
/// with a defined formula (k ≤ n − p for model III, k ≤ n otherwise).
///
/// Data are drawn with Σ = I; replicate streams for k use the master seed
/// `derive_seed(seed, k)`.
pub fn info_curve(n: usize, p: usize, beta: f64, model: ModelKind, reps: usize, seed: u64) -> Result<InfoCurve> {
    if n < 2 {
        return Err(Error::domain("n must be at least 2"));
    }
    let k_max = if model == ModelKind::III { n - p.min(n) } else { n };
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let r = bartlett_check(&BartlettConfig {
            n,
            k,
            p,
            beta,
            model,
            sigma: SigmaSpec::ScalarVar(1.0),
            reps,
            seed: derive_seed(seed, k as u64),
        })?;
        rows.push(InfoRow {
            k,
            formula_info: r.variance.target.unwrap_or(f64::NAN),
            mc_info: r.variance.estimate,
            mc_se: r.variance.std_error,
            z: r.variance.z,
            pass: r.variance.pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(InfoCurve { rows, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeletionReport {
    pub n: usize,
    pub k_full: usize,
    pub k_sub: usize,
    pub beta: f64,
    pub reps: usize,
    pub seed: u64,
    pub used: usize,
    pub degenerate: usize,
    pub boundary_full: usize,
    pub boundary_sub: usize,
    pub var_full: f64,
    pub var_sub: f64,
    /// var(β̂_full) / var(β̂_sub).
    pub var_ratio: f64,
    pub var_ratio_se: f64,
    /// Mean squared error about the true β, full over subset.
    pub mse_ratio: f64,
    pub mse_ratio_se: f64,
    /// Information ratio I(k_sub) / I(k_full) from the model III formula.
    pub formula_ratio: f64,
}

fn var_and_mse_ratios(full: &[f64], sub: &[f64], beta: f64) -> (f64, f64) {
    let (vf, _) = variance_se(full);
    let (vs, _) = variance_se(sub);
    let mse = |xs: &[f64]| xs.iter().map(|x| (x - beta).powi(2)).sum::<f64>() / xs.len() as f64;
    (vf / vs, mse(full) / mse(sub))
}

/// Model III estimates from all `k_full` series against estimates from a
/// random subset of `k_sub` of the same series.
///
/// Replicates where either fit fails are dropped and counted; more than
/// [`MAX_DEGENERATE_FRACTION`] of them is an error. Standard errors of the
/// ratios come from a paired bootstrap over replicates.
pub fn deletion_experiment(
    n: usize,
    k_full: usize,
    k_sub: usize,
    beta: f64,
    reps: usize,
    seed: u64,
) -> Result<DeletionReport> {
    check_reps(reps)?;
    if !(k_full < n && k_sub >= 1 && k_sub <= k_full) {
        return Err(Error::domain(format!(
            "need 1 <= k_sub <= k_full < n, got k_sub = {k_sub}, k_full = {k_full}, n = {n}"
        )));
    }
    let ar = Ar1Model::new(n)?;
    let bundle = gamma_of(&ar, beta)?;
    let sampler = GaussianSampler::new(&bundle.gamma, &Matrix::identity(k_full, k_full))?;
    let search = SearchConfig::default();

    let fits = par_replicates(reps, |i| {
        let mut rng = derive_rng(seed, i);
        let y = sampler.sample(&mut rng);
        let mut cols = sample_indices(&mut rng, k_full, k_sub).into_vec();
        cols.sort_unstable();
        let ysub = select_columns(&y, &cols);
        let full = fit_beta(&ar, &y, ModelKind::III, None, search);
        let sub = fit_beta(&ar, &ysub, ModelKind::III, None, search);
        Ok(match (full, sub) {
            (Ok(f), Ok(s)) => Some((f, s)),
            _ => None,
        })
    })?;

    let degenerate = fits.iter().filter(|f| f.is_none()).count();
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * reps as f64 {
        return Err(Error::degenerate(format!(
            "{degenerate} of {reps} replicates gave no estimate"
        )));
    }
    let pairs: Vec<_> = fits.into_iter().flatten().collect();
    let full: Vec<f64> = pairs.iter().map(|(f, _)| f.beta_hat).collect();
    let sub: Vec<f64> = pairs.iter().map(|(_, s)| s.beta_hat).collect();
    let (var_full, _) = variance_se(&full);
    let (var_sub, _) = variance_se(&sub);
    let (var_ratio, mse_ratio) = var_and_mse_ratios(&full, &sub, beta);

    let used = pairs.len();
    let boot: Vec<(f64, f64)> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = derive_rng(derive_seed(seed, u64::MAX), b);
            let idx: Vec<usize> = (0..used).map(|_| rand::Rng::random_range(&mut rng, 0..used)).collect();
            let f: Vec<f64> = idx.iter().map(|&i| full[i]).collect();
            let s: Vec<f64> = idx.iter().map(|&i| sub[i]).collect();
            var_and_mse_ratios(&f, &s, beta)
        })
        .collect();
    let sd = |xs: Vec<f64>| variance_se(&xs).0.sqrt();

    let kernel = ProfileKernel::new(&bundle, None)?;
    let formula_ratio = kernel.expected_info(k_sub, ModelKind::III)? / kernel.expected_info(k_full, ModelKind::III)?;

    Ok(DeletionReport {
        n,
        k_full,
        k_sub,
        beta,
        reps,
        seed,
        used,
        degenerate,
        boundary_full: pairs.iter().filter(|(f, _)| f.at_boundary).count(),
        boundary_sub: pairs.iter().filter(|(_, s)| s.at_boundary).count(),
        var_full,
        var_sub,
        var_ratio,
        var_ratio_se: sd(boot.iter().map(|b| b.0).collect()),
        mse_ratio,
        mse_ratio_se: sd(boot.iter().map(|b| b.1).collect()),
        formula_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub n: usize,
    pub p: usize,
    pub beta_grid: Vec<f64>,
    /// k = n − p: spread of the model III likelihood over the grid.
    pub spread_square: f64,
    pub loglik_square: f64,
    pub pass: bool,
    /// k = n − p + 2, pseudo-determinant convention; reported only.
    pub spread_wide: f64,
    /// k = 1, for contrast.
    pub spread_single: f64,
}

fn grid_spread(kernels: &[ProfileKernel], y: &Matrix) -> Result<(f64, f64)> {
    let ls = kernels.iter().map(|k| k.loglik(y, ModelKind::III)).collect::<Result<Vec<_>>>()?;
    let lo = ls.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((hi - lo, ls[0]))
}

/// Spread of the model III likelihood over a β grid for one draw at
/// k = n − p, k = n − p + 2 and k = 1.
///
/// `sigma` is used for the k = n − p draw; the other two use Σ = I. Data are
/// drawn at β = 0.5.
pub fn degeneracy_check(n: usize, p: usize, beta_grid: &[f64], sigma: &SigmaSpec, seed: u64) -> Result<DegeneracyReport> {
    if beta_grid.len() < 2 {
        return Err(Error::domain("beta grid needs at least two points"));
    }
    let ar = Ar1Model::new(n)?;
    let design = polynomial_design(&ar, p)?;
    let m = n - p;
    let kernels = beta_grid
        .iter()
        .map(|&b| ProfileKernel::new(&gamma_of(&ar, b)?, design.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let gamma = gamma_of(&ar, 0.5)?.gamma;
    let draw = |s: &Matrix, idx: u64| -> Result<Matrix> {
        Ok(GaussianSampler::new(&gamma, s)?.sample(&mut derive_rng(seed, idx)))
    };

    let (spread_square, loglik_square) = grid_spread(&kernels, &draw(&build_sigma(sigma, m)?, 0)?)?;
    let wide = m + 2;
    let (spread_wide, _) = grid_spread(&kernels, &draw(&Matrix::identity(wide, wide), 1)?)?;
    let (spread_single, _) = grid_spread(&kernels, &draw(&Matrix::identity(1, 1), 2)?)?;
    Ok(DegeneracyReport {
        n,
        p,
        beta_grid: beta_grid.to_vec(),
        spread_square,
        loglik_square,
        pass: spread_square <= 1e-8 * (1.0 + loglik_square.abs()),
        spread_wide,
        spread_single,
    })
}

/// The default degeneracy grid.
pub fn default_beta_grid() -> Vec<f64> {
    DEGENERACY_GRID.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaIndependenceReport {
    pub a: McReport,
    pub b: McReport,
    pub z_diff: f64,
    pub pass: bool,
}

/// Model III score variance under two cross-series covariances, drawn from
/// independent streams `derive_seed(seed, 0)` and `derive_seed(seed, 1)`.
pub fn sigma_independence_check(
    n: usize,
    k: usize,
    beta: f64,
    sigma_a: &Matrix,
    sigma_b: &Matrix,
    reps: usize,
    seed: u64,
) -> Result<SigmaIndependenceReport> {
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
    }
    let run = |sigma: &Matrix, arm: u64| {
        bartlett_check(&BartlettConfig {
            n,
            k,
            p: 0,
            beta,
            model: ModelKind::III,
            sigma: SigmaSpec::full(sigma),
            reps,
            seed: derive_seed(seed, arm),
        })
    };
    let a = run(sigma_a, 0)?.variance;
    let b = run(sigma_b, 1)?.variance;
    let z_diff = z_difference(&a, &b);
    Ok(SigmaIndependenceReport { pass: z_diff.abs() <= Z_LIMIT, a, b, z_diff })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtRow {
    pub k: usize,
    pub mc_info: f64,
    pub mc_se: f64,
    /// Change from the previous row, with the SE of the paired difference.
    pub increment: f64,
    pub increment_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtCurve {
    pub n: usize,
    pub p: usize,
    pub beta: f64,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<UtRow>,
    /// The k = 1 row against the residual model II formula.
    pub first: McReport,
    pub pass: bool,
}

/// Score variance of the upper-triangular-subgroup likelihood for
/// k = 1..n − p, using the first k columns of the same draws for every k.
///
/// A row passes when it does not fall below the previous row by more than
/// three standard errors of the paired difference.
pub fn ut_info_curve(n: usize, p: usize, beta: f64, reps: usize, seed: u64) -> Result<UtCurve> {
    check_reps(reps)?;
    let ar = Ar1Model::new(n)?;
    let design = polynomial_design(&ar, p)?;
    let m = n - p;
    let bundle = gamma_of(&ar, beta)?;
    let sampler = GaussianSampler::new(&bundle.gamma, &Matrix::identity(m, m))?;

    let cumulative = par_replicates(reps, |i| {
        let y = sampler.sample(&mut derive_rng(seed, i));
        let terms = sequential_likelihood_terms(&bundle, &y, design.as_ref(), SequentialMode::UtFull)?;
        Ok(terms
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t.score;
                Some(*acc)
            })
            .collect::<Vec<f64>>())
    })?;
    let column = |k: usize| cumulative.iter().map(|c| c[k - 1]).collect::<Vec<f64>>();

    let target = ProfileKernel::new(&bundle, design.as_ref())?.expected_info(1, ModelKind::II)?;
    let first = variance_report(&column(1), Some(target), seed);
    let mut rows: Vec<UtRow> = Vec::with_capacity(m);
    for k in 1..=m {
        let s = column(k);
        let (mc_info, mc_se) = variance_se(&s);
        let (increment, increment_se) = if k == 1 {
            (mc_info, mc_se)
        } else {
            // paired difference of the two variance estimates
            let prev = column(k - 1);
            let cen = |xs: &[f64]| {
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                xs.iter().map(|x| (x - mean).powi(2)).collect::<Vec<f64>>()
            };
            let d: Vec<f64> = cen(&s).iter().zip(cen(&prev)).map(|(a, b)| a - b).collect();
            let (_, se) = crate::stats::mean_se(&d);
            (mc_info - rows[k - 2].mc_info, se)
        };
        let pass = increment >= -Z_LIMIT * increment_se;
        rows.push(UtRow { k, mc_info, mc_se, increment, increment_se, pass });
    }
    let pass = first.pass && rows.iter().all(|r| r.pass);
    Ok(UtCurve { n, p, beta, reps, seed, rows, first, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub k: u64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyTable {
    pub n: u64,
    pub rows: Vec<EfficiencyRow>,
    /// n/(n+2), the k → ∞ limit.
    pub limit: f64,
}

pub fn efficiency_table(n: u64, ks: &[u64]) -> Result<EfficiencyTable> {
    if n == 0 || ks.contains(&0) {
        return Err(Error::domain("n and k must be positive"));
    }
    let rows = ks.iter().map(|&k| EfficiencyRow { k, efficiency: efficiency_ii_vs_i(n, k) }).collect();
    Ok(EfficiencyTable { n, rows, limit: n as f64 / (n as f64 + 2.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMomentRow {
    pub statistic: &'static str,
    pub report: McReport,
}

/// Names of the four trace statistics, in report order.
pub const TRACE_STATISTICS: [&str; 4] = ["tr(H^2)", "tr(H)^2", "tr(H^4)", "tr(H^2)^2"];

/// Monte Carlo means of tr(H²), tr²(H), tr(H⁴) and tr²(H²) for Haar H.
pub fn haar_trace_moments(n: usize, reps: usize, seed: u64) -> Result<Vec<TraceMomentRow>> {
    check_reps(reps)?;
    let targets = trace_moment_expectations(n)?;
    let draws = par_replicates(reps, |i| {
        let h = haar_orthogonal(&mut derive_rng(seed, i), n);
        let h2 = &h * &h;
        let t2 = h2.trace();
        Ok([t2, h.trace().powi(2), trace_product(&h2, &h2), t2 * t2])
    })?;
    Ok((0..4)
        .map(|j| {
            let xs: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            TraceMomentRow { statistic: TRACE_STATISTICS[j], report: mean_report(&xs, Some(targets[j]), seed) }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrQuadReport {
    pub n: usize,
    pub k: usize,
    pub covariance: McReport,
    pub var_a: f64,
    pub var_b: f64,
    pub pass: bool,
}

/// Covariance of tr(Z'AZ) and tr(Z'BZ) for Z the first k columns of a Haar
/// matrix, against the closed form.
///
/// At k = n both statistics are constant and the covariance z-score is
/// meaningless, so the report passes when both variances are at most 1e-20.
pub fn tr_quad_covariance_check(a: &Matrix, b: &Matrix, k: usize, reps: usize, seed: u64) -> Result<TrQuadReport> {
    check_reps(reps)?;
    let n = a.nrows();
    let (_, target) = product_and_cov_tr_quad(a, b, k)?;
    let draws = par_replicates(reps, |i| {
        let z = haar_columns(&mut derive_rng(seed, i), n, k)?;
        let zt = z.transpose();
        Ok(((&zt * a * &z).trace(), (&zt * b * &z).trace()))
    })?;
    let xs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let ys: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let (c, se) = covariance_se(&xs, &ys);
    let covariance = McReport::new(c, se, Some(target), reps, seed);
    let (var_a, _) = variance_se(&xs);
    let (var_b, _) = variance_se(&ys);
    let pass = if k == n { var_a <= 1e-20 && var_b <= 1e-20 } else { covariance.pass };
    Ok(TrQuadReport { n, k, covariance, var_a, var_b, pass })
}
