//! AR(1) pre-whitening of row-correlated data.
//!
//! With row covariance `V = {ρ^|i-j|}`, any `W` satisfying `W'W = V⁻¹` turns
//! the model into one with independent rows. The banded filter used here has
//! row 1 equal to `y_1` and row `t ≥ 2` equal to `(y_t - ρ y_{t-1}) / √(1-ρ²)`,
//! costing `O(n)` per column.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::criteria::CriterionSpec;
use crate::error::{Error, Result};
use crate::regression::{fit, Dataset, FitResult, ModelIndex};
use crate::selection::{select_many, CandidateFamily, SelectionReport};

/// Bound applied to the estimated autocorrelation.
pub const RHO_CLIP: f64 = 0.999;

/// Lag variance below this fraction of `||Y||²` counts as degenerate.
const DEGENERATE_TOL: f64 = 1e-12;

/// The banded whitening filter for a given `ρ` and series length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Whitener {
    rho: f64,
    n: usize,
}

impl Ar1Whitener {
    pub fn new(rho: f64, n: usize) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "AR(1) coefficient must lie in (-1, 1), got {rho}"
            )));
        }
        Ok(Self { rho, n })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `W m`, column by column.
    pub fn apply(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.n {
            return Err(Error::InvalidData(format!(
                "whitener built for {} rows applied to {} rows",
                self.n,
                m.nrows()
            )));
        }
        if self.rho == 0.0 {
            return Ok(m.clone());
        }
        let scale = (1.0 - self.rho * self.rho).sqrt();
        let mut out = m.clone();
        for (src, mut dst) in m.column_iter().zip(out.column_iter_mut()) {
            for t in 1..self.n {
                dst[t] = (src[t] - self.rho * src[t - 1]) / scale;
            }
        }
        Ok(out)
    }
}

/// Pooled lag-1 OLS coefficient of the full-model residuals, clipped to
/// `[-RHO_CLIP, RHO_CLIP]`.
pub fn estimate_rho(data: &Dataset) -> Result<f64> {
    let n = data.n();
    if n < 3 {
        return Err(Error::InvalidData(format!(
            "need at least 3 observations to estimate autocorrelation, got {n}"
        )));
    }
    let full = ModelIndex::prefix(data.k())?;
    let resid = residuals(data, &full)?;
    let (mut num, mut den) = (0.0, 0.0);
    for col in resid.column_iter() {
        for t in 1..n {
            num += col[t] * col[t - 1];
            den += col[t - 1] * col[t - 1];
        }
    }
    if !(den > DEGENERATE_TOL * data.y().norm_squared()) {
        return Err(Error::DegenerateResiduals(den));
    }
    Ok((num / den).clamp(-RHO_CLIP, RHO_CLIP))
}

fn residuals(data: &Dataset, model: &ModelIndex) -> Result<DMatrix<f64>> {
    // Residuals are needed even when the full model fits nearly exactly, so
    // this avoids `fit`, which rejects a singular residual covariance.
    let x = data.design_block(model)?;
    crate::regression::check_full_rank(&x, model)?;
    let qr = x.qr();
    let q = qr.q();
    Ok(data.y() - &q * q.tr_mul(data.y()))
}

/// `(W Y, W X)` for the banded AR(1) filter with coefficient `rho`.
pub fn whiten(data: &Dataset, rho: f64) -> Result<Dataset> {
    let w = Ar1Whitener::new(rho, data.n())?;
    Dataset::with_names(
        w.apply(data.y())?,
        w.apply(data.x())?,
        data.col_names().to_vec(),
    )
}

/// Outcome of selection on whitened data for one criterion.
#[derive(Debug, Clone)]
pub struct WhitenedSelection {
    pub rho_hat: f64,
    pub report: SelectionReport,
    /// Fit of the selected model on the whitened training rows.
    pub refit: FitResult,
    /// `||Y_test - X_test,ĵ Θ̂_ĵ||² / (n_test p)` when a split was requested.
    pub prediction_error: Option<f64>,
}

/// Estimates `ρ` on the training rows, whitens them, selects, and (if
/// `split_at` is given) evaluates the refitted model on rows `split_at..n`.
pub fn whiten_select(
    data: &Dataset,
    family: &CandidateFamily,
    spec: &CriterionSpec,
    split_at: Option<usize>,
) -> Result<WhitenedSelection> {
    whiten_select_many(data, family, std::slice::from_ref(spec), split_at)?
        .pop()
        .expect("one criterion in, one result out")
}

/// [`whiten_select`] for several criteria sharing one `ρ̂` and one set of
/// whitened fits.
pub fn whiten_select_many(
    data: &Dataset,
    family: &CandidateFamily,
    specs: &[CriterionSpec],
    split_at: Option<usize>,
) -> Result<Vec<Result<WhitenedSelection>>> {
    let n = data.n();
    let (train, test) = match split_at {
        None => (data.clone(), None),
        Some(s) => {
            if s < data.k() + 2 {
                return Err(Error::InvalidConfig(format!(
                    "split at row {s} leaves fewer than k + 2 = {} training rows",
                    data.k() + 2
                )));
            }
            if s >= n {
                return Err(Error::InvalidConfig(format!(
                    "split at row {s} leaves no test rows (n = {n})"
                )));
            }
            (data.rows(0, s)?, Some(data.rows(s, n - s)?))
        }
    };

    let rho_hat = estimate_rho(&train)?;
    let white = whiten(&train, rho_hat)?;
    let reports = select_many(&white, family, specs)?;

    Ok(reports
        .into_iter()
        .map(|r| {
            let report = r?;
            let refit = fit(&white, &report.best)?;
            let prediction_error = match &test {
                Some(t) => {
                    let err = t.y() - refit.predict(t.x())?;
                    Some(err.norm_squared() / (t.n() * t.p()) as f64)
                }
                None => None,
            };
            Ok(WhitenedSelection {
                rho_hat,
                report,
                refit,
                prediction_error,
            })
        })
        .collect())
}

/// `n × p` matrix whose columns are independent stationary AR(1) series with
/// unit innovation variance.
pub fn gen_ar1_errors<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, p);
    let start_sd = (1.0 - rho * rho).sqrt().recip();
    for j in 0..p {
        for t in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            e[(t, j)] = if t == 0 {
                z * start_sd
            } else {
                rho * e[(t - 1, j)] + z
            };
        }
    }
    e
}
