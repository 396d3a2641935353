//! Estimate the AR(1) coefficient, whiten, select, and score the selected
//! model on held-out rows.
//!
//!     cargo run --example whiten_pipeline

use mpicsel::prewhiten::{gen_ar1_errors, whiten_select_many};
use mpicsel::simulation::{gen_design, replication_rng};
use mpicsel::{CandidateFamily, CriterionSpec, Dataset};
use nalgebra::DMatrix;

fn main() -> mpicsel::Result<()> {
    let (n, p, k) = (300, 4, 6);
    let mut rng = replication_rng(17, 0);
    let x = gen_design(n, k, &mut rng);
    // Columns 0..3 matter, the rest are noise.
    let theta = DMatrix::from_fn(3, p, |i, j| 1.0 + i as f64 - 0.3 * j as f64);
    let y = x.columns(0, 3) * theta + gen_ar1_errors(n, p, 0.5, &mut rng);
    let data = Dataset::new(y, x)?;

    let family = CandidateFamily::with_intercept(k);
    let results = whiten_select_many(&data, &family, &CriterionSpec::standard_set(), Some(240))?;
    for (spec, r) in CriterionSpec::standard_set().iter().zip(results) {
        let r = r?;
        println!(
            "{:<12} rho_hat {:.3}  selected {:<16} test MSE {:.4}",
            spec.label(),
            r.rho_hat,
            r.report.best.to_string(),
            r.prediction_error.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
