//! Closed-form fitting code against dense textbook computations.

mod common;

use common::*;
use mpicsel::regression::{logdet_capacitance, neg2loglik_at_mle, quadform_smoothed};
use mpicsel::{fit, ModelIndex};

#[test]
fn capacitance_and_woodbury_match_dense() {
    for rep in 0..100 {
        let data = random_instance(1, rep);
        let full = ModelIndex::prefix(data.k()).unwrap();
        let f = fit(&data, &full).unwrap();
        let lc = logdet_capacitance(&data, &full).unwrap();
        let qf = quadform_smoothed(&data, &full, &f).unwrap();
        assert!(rel_err_scalar(lc, dense_logdet_capacitance(data.x())) < 1e-8, "rep {rep}");
        assert!(
            rel_err_scalar(qf, dense_quadform(data.x(), data.y(), &f.sigma_hat)) < 1e-8,
            "rep {rep}"
        );
    }
}

#[test]
fn submodel_terms_match_dense() {
    let data = random_instance(2, 0);
    for k_j in 1..=data.k() {
        let m = ModelIndex::prefix(k_j).unwrap();
        let x_j = data.design_block(&m).unwrap();
        let f = fit(&data, &m).unwrap();
        assert!(rel_err_scalar(logdet_capacitance(&data, &m).unwrap(), dense_logdet_capacitance(&x_j)) < 1e-8);
        let dense = dense_quadform(&x_j, data.y(), &f.sigma_hat);
        assert!(rel_err_scalar(quadform_smoothed(&data, &m, &f).unwrap(), dense) < 1e-8);
    }
}

#[test]
fn mle_matches_normal_equations() {
    for rep in 0..100 {
        let data = random_instance(3, rep);
        let full = ModelIndex::prefix(data.k()).unwrap();
        let f = fit(&data, &full).unwrap();
        let (theta, sigma) = naive_mle(data.x(), data.y());
        assert!(rel_err(&f.theta_hat, &theta) < 1e-10, "rep {rep}");
        assert!(rel_err(&f.sigma_hat, &sigma) < 1e-10, "rep {rep}");
        let dens = matrix_normal_neg2loglik(data.x(), data.y(), &theta, &sigma);
        assert!(rel_err_scalar(f.neg2loglik, dens) < 1e-10, "rep {rep}");
    }
}

#[test]
fn closed_form_loglik_is_density_at_mle() {
    // At the MLE, tr(Σ̂⁻¹E'E) = np, so the density collapses to the closed form.
    let data = random_instance(4, 0);
    let f = fit(&data, &ModelIndex::prefix(1).unwrap()).unwrap();
    let dens = matrix_normal_neg2loglik(
        &data.design_block(&f.model).unwrap(),
        data.y(),
        &f.theta_hat,
        &f.sigma_hat,
    );
    assert!(rel_err_scalar(neg2loglik_at_mle(data.n(), data.p(), f.logdet_sigma), dens) < 1e-10);
}

#[test]
fn logdet_gram_matches_dense() {
    let data = random_instance(5, 0);
    let full = ModelIndex::prefix(data.k()).unwrap();
    let f = fit(&data, &full).unwrap();
    let dense = (data.x().transpose() * data.x()).lu().determinant().ln();
    assert!(rel_err_scalar(f.logdet_gram, dense) < 1e-10);
}
