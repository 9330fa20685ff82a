//! Monte Carlo summaries with standard errors and z-scores.
//!
//! Replicates are independent by construction, so standard errors come from
//! the replicate-level influence values: `x_i` for a mean, `(x_i - x̄)²` for a
//! variance and `(x_i - x̄)(y_i - ȳ)` for a covariance.

use serde::Serialize;

/// Default two-sided acceptance threshold on |z|.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub target: Option<f64>,
    pub z: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub pass: bool,
}

impl McReport {
    pub fn new(estimate: f64, std_error: f64, target: Option<f64>, reps: usize, seed: u64) -> Self {
        let (z, pass) = match target {
            None => (None, true),
            Some(t) if std_error > 0.0 => {
                let z = (estimate - t) / std_error;
                (Some(z), z.abs() <= Z_LIMIT)
            }
            // constant replicates: only exact agreement (up to rounding) passes
            Some(t) => (None, (estimate - t).abs() <= 1e-12 * (1.0 + t.abs())),
        };
        McReport { estimate, std_error, target, z, reps, seed, pass }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(xs);
    if r < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1) as f64;
    (m, (var / r as f64).sqrt())
}

/// Unbiased variance and its standard error.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len();
    if r < 2 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let (_, se) = mean_se(&sq);
    let var = sq.iter().sum::<f64>() / (r - 1) as f64;
    (var, se)
}

/// Unbiased covariance and its standard error.
pub fn covariance_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let r = xs.len();
    if r < 2 {
        return (f64::NAN, f64::NAN);
    }
    let (mx, my) = (mean(xs), mean(ys));
    let prod: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let (_, se) = mean_se(&prod);
    (prod.iter().sum::<f64>() / (r - 1) as f64, se)
}

pub fn mean_report(xs: &[f64], target: Option<f64>, seed: u64) -> McReport {
    let (m, se) = mean_se(xs);
    McReport::new(m, se, target, xs.len(), seed)
}

pub fn variance_report(xs: &[f64], target: Option<f64>, seed: u64) -> McReport {
    let (v, se) = variance_se(xs);
    McReport::new(v, se, target, xs.len(), seed)
}

pub fn covariance_report(xs: &[f64], ys: &[f64], target: Option<f64>, seed: u64) -> McReport {
    let (c, se) = covariance_se(xs, ys);
    McReport::new(c, se, target, xs.len(), seed)
}

/// z-score of the difference between two independent estimates.
pub fn z_difference(a: &McReport, b: &McReport) -> f64 {
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    if se == 0.0 {
        if a.estimate == b.estimate {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a.estimate - b.estimate) / se
    }
}
