//! Seeded generation of matrix-normal data and Haar orthogonal matrices.
//!
//! Replicate `i` of a run draws from its own ChaCha8 stream keyed by
//! `derive_seed(master, i)`, so serial and parallel runs see identical data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CholFactor, Matrix};

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replicate `index` of a run with master seed `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn derive_rng(master: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, index))
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    // fill column-major so the stream order is fixed
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Draws Y = L_Γ G L_Σ' so that cov(Y_ir, Y_js) = Γ_ij Σ_rs.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    gamma_chol: Matrix,
    sigma_chol_t: Matrix,
}

impl GaussianSampler {
    pub fn new(gamma: &Matrix, sigma: &Matrix) -> Result<Self> {
        let lg = CholFactor::new(gamma)
            .map_err(|m| Error::domain(format!("gamma not positive definite (leading minor {m})")))?;
        let ls = CholFactor::new(sigma)
            .map_err(|m| Error::domain(format!("sigma not positive definite (leading minor {m})")))?;
        Ok(GaussianSampler {
            gamma_chol: lg.l().clone(),
            sigma_chol_t: ls.l().transpose(),
        })
    }

    pub fn n(&self) -> usize {
        self.gamma_chol.nrows()
    }

    pub fn k(&self) -> usize {
        self.sigma_chol_t.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        let g = standard_normal_matrix(rng, self.n(), self.k());
        &self.gamma_chol * g * &self.sigma_chol_t
    }
}

/// One n×k draw with covariance Γ⊗Σ, reproducible from `seed`.
pub fn sample_gaussian(gamma: &Matrix, sigma: &Matrix, seed: u64) -> Result<Matrix> {
    let sampler = GaussianSampler::new(gamma, sigma)?;
    Ok(sampler.sample(&mut SimRng::seed_from_u64(seed)))
}

// QR of a Gaussian matrix with the columns of Q flipped so that diag(R) > 0.
fn sign_corrected_q(g: Matrix) -> Matrix {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed n×n orthogonal matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    assert!(n >= 1, "orthogonal group of order zero");
    sign_corrected_q(standard_normal_matrix(rng, n, n))
}

/// First k columns of a Haar orthogonal matrix.
pub fn haar_columns<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Result<Matrix> {
    if k > n {
        return Err(Error::domain(format!("cannot take {k} orthonormal columns in dimension {n}")));
    }
    if k == 0 {
        return Ok(Matrix::zeros(n, 0));
    }
    Ok(sign_corrected_q(standard_normal_matrix(rng, n, k)))
}

pub fn sample_haar_orthogonal(n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::domain("orthogonal group of order zero"));
    }
    Ok(haar_orthogonal(&mut SimRng::seed_from_u64(seed), n))
}

pub fn sample_haar_columns(n: usize, k: usize, seed: u64) -> Result<Matrix> {
    haar_columns(&mut SimRng::seed_from_u64(seed), n, k)
}
