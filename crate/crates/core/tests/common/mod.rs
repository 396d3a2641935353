//! Independent dense oracles and random instances shared by the integration
//! and acceptance tests. Nothing here calls into the fitting code.

#![allow(dead_code)]

use mpicsel::simulation::replication_rng;
use mpicsel::Dataset;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random well-posed instance: `n ≤ 50`, `k ≤ 5`, `p ≤ 8`, `n ≥ k + p + 3`.
pub fn random_instance(seed: u64, rep: u64) -> Dataset {
    let mut rng = replication_rng(seed, rep);
    let k = rng.random_range(1..=5);
    let p = rng.random_range(1..=8);
    let n = rng.random_range((k + p + 3)..=50);
    let x = gaussian(n, k, &mut rng);
    let theta = gaussian(k, p, &mut rng);
    let y = &x * theta + gaussian(n, p, &mut rng);
    Dataset::new(y, x).unwrap()
}

/// `max |a - b| / max(1, max |b|)`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

pub fn rel_err_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `log|I_n + X X'|` from a dense `n × n` LU.
pub fn dense_logdet_capacitance(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let m = DMatrix::identity(n, n) + x * x.transpose();
    m.lu().determinant().ln()
}

/// `tr(Σ⁻¹ Y'(I_n + X X')⁻¹ Y)` from dense `n × n` and `p × p` inverses.
pub fn dense_quadform(x: &DMatrix<f64>, y: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let m_inv = (DMatrix::identity(n, n) + x * x.transpose()).try_inverse().unwrap();
    let s_inv = sigma.clone().try_inverse().unwrap();
    (s_inv * y.transpose() * m_inv * y).trace()
}

/// Normal-equation MLEs: `Θ̂ = (X'X)⁻¹X'Y`, `Σ̂ = E'E / n`.
pub fn naive_mle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let gram_inv = (x.transpose() * x).try_inverse().unwrap();
    let theta = gram_inv * x.transpose() * y;
    let e = y - x * &theta;
    let sigma = e.transpose() * &e / x.nrows() as f64;
    (theta, sigma)
}

/// Minus twice the matrix-normal log-density of `Y` with mean `XΘ` and row
/// covariance `Σ`, written out term by term.
pub fn matrix_normal_neg2loglik(x: &DMatrix<f64>, y: &DMatrix<f64>, theta: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let (n, p) = y.shape();
    let e = y - x * theta;
    let s_inv = sigma.clone().try_inverse().unwrap();
    let det = sigma.clone().lu().determinant();
    let mut quad = 0.0;
    for i in 0..n {
        let r = e.row(i);
        quad += (r * &s_inv * r.transpose())[(0, 0)];
    }
    (n * p) as f64 * LN_2PI + n as f64 * det.ln() + quad
}

/// AR(1) correlation matrix `{ρ^|i-j|}`.
pub fn ar1_corr(rho: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// The symmetric inverse square root of `V`, from its eigendecomposition.
pub fn symmetric_inv_root(v: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(v.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}
