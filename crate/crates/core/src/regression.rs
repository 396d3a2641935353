//! Maximum-likelihood fits of the multivariate linear model `Y = X_j Θ_j + E`
//! and the log-determinant quantities the criteria consume.
//!
//! Every decomposition works on the `n × k_j` design block or on `k_j × k_j`
//! and `p × p` matrices; nothing here ever forms an `n × n` matrix.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative pivot tolerance of the column-pivoted QR rank check.
pub const RANK_TOL: f64 = 1e-10;

/// A Cholesky factorization of the residual covariance whose smallest squared
/// pivot falls below this fraction of the largest response second moment is
/// treated as singular. Residuals at that level are pure round-off of an exact
/// fit.
pub const SIGMA_PIVOT_FLOOR: f64 = 1e-24;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Response matrix `Y` (n × p) and design matrix `X` (n × k).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    col_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with design columns named `x0, x1, ...`.
    pub fn new(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        let names = (0..x.ncols()).map(|i| format!("x{i}")).collect();
        Self::with_names(y, x, names)
    }

    pub fn with_names(y: DMatrix<f64>, x: DMatrix<f64>, col_names: Vec<String>) -> Result<Self> {
        let (n, p) = y.shape();
        let k = x.ncols();
        if n == 0 || p == 0 || k == 0 {
            return Err(Error::InvalidData(format!(
                "empty matrices are not allowed (n={n}, p={p}, k={k})"
            )));
        }
        if x.nrows() != n {
            return Err(Error::InvalidData(format!(
                "Y has {n} rows but X has {} rows",
                x.nrows()
            )));
        }
        if n <= k {
            return Err(Error::InvalidData(format!(
                "need more observations than design columns (n={n}, k={k})"
            )));
        }
        if col_names.len() != k {
            return Err(Error::InvalidData(format!(
                "{} column names given for {k} design columns",
                col_names.len()
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite response at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite design value at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self { y, x, col_names })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// The `n × k_j` block of design columns selected by `model`.
    pub fn design_block(&self, model: &ModelIndex) -> Result<DMatrix<f64>> {
        model.check_within(self.k())?;
        Ok(self.x.select_columns(model.indices()))
    }

    /// Rows `range` of both matrices, keeping the column names.
    pub fn rows(&self, start: usize, len: usize) -> Result<Self> {
        Self::with_names(
            self.y.rows(start, len).into_owned(),
            self.x.rows(start, len).into_owned(),
            self.col_names.clone(),
        )
    }

    /// The same dataset with `Y` replaced.
    pub fn with_response(&self, y: DMatrix<f64>) -> Result<Self> {
        Self::with_names(y, self.x.clone(), self.col_names.clone())
    }
}

/// A candidate subset of design columns, stored sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelIndex(Vec<usize>);

impl ModelIndex {
    /// Sorts `indices`; rejects empty lists and repeated columns.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidModel("a model needs at least one column".into()));
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel(format!("column {} listed twice", w[0])));
        }
        Ok(Self(indices))
    }

    /// `{0, 1, ..., k_j - 1}`.
    pub fn prefix(k_j: usize) -> Result<Self> {
        Self::new((0..k_j).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn k_j(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, col: usize) -> bool {
        self.0.binary_search(&col).is_ok()
    }

    pub fn is_superset_of(&self, other: &ModelIndex) -> bool {
        other.0.iter().all(|c| self.contains(*c))
    }

    pub fn check_within(&self, k: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= k => Err(Error::InvalidModel(format!(
                "column {last} out of range for a design with {k} columns"
            ))),
            _ => Ok(()),
        }
    }

    /// Column names joined with `+`.
    pub fn label(&self, names: &[String]) -> String {
        self.0
            .iter()
            .map(|&i| names.get(i).cloned().unwrap_or_else(|| i.to_string()))
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for ModelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (pos, i) in self.0.iter().enumerate() {
            if pos > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// Canonical model order: fewer columns first, then lexicographic.
impl Ord for ModelIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for ModelIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// MLEs of one candidate model plus the cached scalars every criterion needs.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: ModelIndex,
    pub theta_hat: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub logdet_sigma: f64,
    pub logdet_gram: f64,
    pub neg2loglik: f64,
    pub n: usize,
    pub p: usize,
    pub k_j: usize,
    sigma_chol: Cholesky<f64, Dyn>,
}

impl FitResult {
    pub fn sigma_cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.sigma_chol
    }

    /// `X_j Θ̂_j` evaluated on an arbitrary design with the same columns.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.model.check_within(x.ncols())?;
        Ok(x.select_columns(self.model.indices()) * &self.theta_hat)
    }
}

/// Rejects `x_j` when a pivot of its column-pivoted QR is below
/// `RANK_TOL` times the largest pivot.
pub(crate) fn check_full_rank(x_j: &DMatrix<f64>, model: &ModelIndex) -> Result<()> {
    let r = x_j.clone().col_piv_qr().unpack_r();
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    if diag.len() < model.k_j() || largest == 0.0 || diag.iter().any(|&d| d < RANK_TOL * largest)
    {
        return Err(Error::RankDeficient(model.clone()));
    }
    Ok(())
}

/// Fits model `model` by maximum likelihood.
///
/// Θ̂ comes from a Householder QR of `X_j`; Σ̂ is formed from the explicit
/// residuals with divisor `n`.
pub fn fit(data: &Dataset, model: &ModelIndex) -> Result<FitResult> {
    let x_j = data.design_block(model)?;
    check_full_rank(&x_j, model)?;

    let (n, p, k_j) = (data.n(), data.p(), model.k_j());
    if n < k_j + p {
        return Err(Error::SigmaNotPD {
            model: model.clone(),
            reason: format!("n - k_j = {} is smaller than p = {p}", n - k_j),
        });
    }

    let qr = x_j.qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.tr_mul(data.y());
    let theta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(model.clone()))?;
    let logdet_gram = 2.0 * r.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>();

    let resid = data.y() - &q * &qty;
    let mut sigma_hat = resid.tr_mul(&resid) / n as f64;
    symmetrize(&mut sigma_hat);

    let sigma_chol = Cholesky::new(sigma_hat.clone()).ok_or_else(|| Error::SigmaNotPD {
        model: model.clone(),
        reason: "Cholesky factorization failed".into(),
    })?;
    let scale = data
        .y()
        .column_iter()
        .map(|c| c.norm_squared() / n as f64)
        .fold(0.0, f64::max);
    let l = sigma_chol.l_dirty();
    let min_pivot = (0..p).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > SIGMA_PIVOT_FLOOR * scale) {
        return Err(Error::SigmaNotPD {
            model: model.clone(),
            reason: format!("residual variance {min_pivot:e} is at round-off level"),
        });
    }
    let logdet_sigma = 2.0 * (0..p).map(|i| l[(i, i)].ln()).sum::<f64>();
    let neg2loglik = neg2loglik_at_mle(n, p, logdet_sigma);

    Ok(FitResult {
        model: model.clone(),
        theta_hat,
        sigma_hat,
        logdet_sigma,
        logdet_gram,
        neg2loglik,
        n,
        p,
        k_j,
        sigma_chol,
    })
}

/// `n log|Σ̂| + np(log 2π + 1)`: minus twice the matrix-normal log-density
/// evaluated at the MLEs.
pub fn neg2loglik_at_mle(n: usize, p: usize, logdet_sigma: f64) -> f64 {
    let (n, p) = (n as f64, p as f64);
    n * logdet_sigma + n * p * (LN_2PI + 1.0)
}

/// Quantities of the normal-prior marginal likelihood: `log|I + X_j'X_j|` and
/// `tr(Σ̂⁻¹ Y'(I + X_j X_j')⁻¹ Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedTerms {
    pub logdet_capacitance: f64,
    pub quadform: f64,
}

/// Computes both smoothed terms sharing one factorization of the
/// `k_j × k_j` capacitance matrix `I + X_j'X_j`.
pub fn smoothed_terms(data: &Dataset, fit: &FitResult) -> Result<SmoothedTerms> {
    let x_j = data.design_block(&fit.model)?;
    let cap = capacitance_cholesky(&x_j, &fit.model)?;
    let logdet_capacitance = cap.ln_determinant();

    // Y'(I + XX')⁻¹Y = Y'Y - B'(I + X'X)⁻¹B with B = X'Y (Woodbury).
    let b = x_j.tr_mul(data.y());
    let mut m = data.y().tr_mul(data.y()) - b.tr_mul(&cap.solve(&b));
    symmetrize(&mut m);
    let quadform = fit.sigma_chol.solve(&m).trace();

    Ok(SmoothedTerms {
        logdet_capacitance,
        quadform,
    })
}

/// `log|I_{k_j} + X_j'X_j|`, equal to `log|I_n + X_j X_j'|` by the matrix
/// determinant lemma.
pub fn logdet_capacitance(data: &Dataset, model: &ModelIndex) -> Result<f64> {
    let x_j = data.design_block(model)?;
    check_full_rank(&x_j, model)?;
    Ok(capacitance_cholesky(&x_j, model)?.ln_determinant())
}

/// `tr(Σ̂_j⁻¹ Y'(I_n + X_j X_j')⁻¹ Y)` via the Woodbury identity.
pub fn quadform_smoothed(data: &Dataset, model: &ModelIndex, fit: &FitResult) -> Result<f64> {
    if &fit.model != model || fit.n != data.n() || fit.p != data.p() {
        return Err(Error::InvalidModel(format!(
            "fit for {} does not belong to model {model}",
            fit.model
        )));
    }
    Ok(smoothed_terms(data, fit)?.quadform)
}

fn capacitance_cholesky(x_j: &DMatrix<f64>, model: &ModelIndex) -> Result<Cholesky<f64, Dyn>> {
    let mut cap = x_j.tr_mul(x_j);
    for i in 0..cap.nrows() {
        cap[(i, i)] += 1.0;
    }
    symmetrize(&mut cap);
    Cholesky::new(cap).ok_or_else(|| Error::RankDeficient(model.clone()))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn ones(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    #[test]
    fn model_index_is_canonical() {
        let a = ModelIndex::new(vec![3, 0, 2]).unwrap();
        let b = ModelIndex::new(vec![0, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices(), &[0, 2, 3]);
        assert_eq!(a.to_string(), "{0,2,3}");
        assert!(ModelIndex::new(vec![]).is_err());
        assert!(ModelIndex::new(vec![1, 1]).is_err());
    }

    #[test]
    fn model_order_is_size_then_lexicographic() {
        let mut v = [
            ModelIndex::new(vec![0, 2]).unwrap(),
            ModelIndex::new(vec![1]).unwrap(),
            ModelIndex::new(vec![0, 1]).unwrap(),
        ];
        v.sort();
        let shown: Vec<String> = v.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, ["{1}", "{0,1}", "{0,2}"]);
    }

    #[test]
    fn dataset_rejects_non_finite_and_short_data() {
        let y = dmatrix![1.0; f64::NAN; 2.0];
        let x = ones(3);
        assert!(matches!(Dataset::new(y, x), Err(Error::InvalidData(_))));
        let y = dmatrix![1.0; 2.0];
        let x = dmatrix![1.0, 0.0; 1.0, 1.0];
        assert!(Dataset::new(y, x).is_err());
    }

    #[test]
    fn intercept_only_fit_is_mean_and_mle_covariance() {
        let y = dmatrix![1.0, 2.0; 3.0, 1.0; 5.0, 0.0; 7.0, 5.0];
        let data = Dataset::new(y.clone(), ones(4)).unwrap();
        let f = fit(&data, &ModelIndex::prefix(1).unwrap()).unwrap();
        let mean = y.row_mean();
        assert_relative_eq!(f.theta_hat.row(0).into_owned(), mean, epsilon = 1e-12);
        let centered = DMatrix::from_fn(4, 2, |i, j| y[(i, j)] - mean[j]);
        let cov = centered.tr_mul(&centered) / 4.0;
        assert_relative_eq!(f.sigma_hat, cov, epsilon = 1e-12);
        assert_relative_eq!(
            f.neg2loglik,
            4.0 * f.logdet_sigma + 8.0 * (LN_2PI + 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn exact_fit_is_sigma_not_pd() {
        let x = dmatrix![1.0, 0.5; 1.0, -1.0; 1.0, 2.0; 1.0, 0.0; 1.0, 3.0];
        let theta = dmatrix![2.0; -1.5];
        let data = Dataset::new(&x * &theta, x).unwrap();
        let err = fit(&data, &ModelIndex::prefix(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SigmaNotPD { .. }), "{err}");
    }

    #[test]
    fn too_few_residual_degrees_of_freedom() {
        let x = dmatrix![1.0, 0.5; 1.0, -1.0; 1.0, 2.0; 1.0, 0.7];
        let y = DMatrix::from_fn(4, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let data = Dataset::new(y, x).unwrap();
        let err = fit(&data, &ModelIndex::prefix(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SigmaNotPD { .. }));
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let x = dmatrix![1.0, 1.0; 2.0, 2.0; 3.0, 3.0; 4.0, 4.0];
        let y = dmatrix![1.0; 0.0; 2.0; 1.0];
        let data = Dataset::new(y, x).unwrap();
        let m = ModelIndex::prefix(2).unwrap();
        assert_eq!(fit(&data, &m).unwrap_err(), Error::RankDeficient(m.clone()));
        assert!(matches!(
            logdet_capacitance(&data, &m),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn out_of_range_column_is_rejected() {
        let data = Dataset::new(dmatrix![1.0; 2.0; 4.0], ones(3)).unwrap();
        let m = ModelIndex::new(vec![1]).unwrap();
        assert!(matches!(fit(&data, &m), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn capacitance_of_orthonormal_design() {
        // Columns of a 4x2 orthonormal matrix: X'X = I, so |2I| = 4.
        let h = 0.5;
        let x = dmatrix![h, h; h, -h; h, h; h, -h];
        let data = Dataset::new(dmatrix![1.0; 2.0; 0.0; 1.0], x).unwrap();
        let v = logdet_capacitance(&data, &ModelIndex::prefix(2).unwrap()).unwrap();
        assert_relative_eq!(v, 2.0 * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn capacitance_of_ones_column() {
        let data = Dataset::new(dmatrix![1.0; 2.0; 0.0; 1.0], ones(4)).unwrap();
        let v = logdet_capacitance(&data, &ModelIndex::prefix(1).unwrap()).unwrap();
        assert_relative_eq!(v, 5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn quadform_without_correction_term() {
        // X'Y = 0 and Σ̂ = I: the Woodbury correction vanishes and the value
        // is tr(Y'Y) = n·p.
        let x = dmatrix![1.0; 1.0; 1.0; 1.0];
        let y = dmatrix![1.0, 1.0; -1.0, 1.0; 1.0, -1.0; -1.0, -1.0];
        let data = Dataset::new(y.clone(), x).unwrap();
        let m = ModelIndex::prefix(1).unwrap();
        let f = fit(&data, &m).unwrap();
        assert_relative_eq!(f.sigma_hat, DMatrix::identity(2, 2), epsilon = 1e-14);
        let q = quadform_smoothed(&data, &m, &f).unwrap();
        assert_relative_eq!(q, y.norm_squared(), epsilon = 1e-12);
    }

    #[test]
    fn quadform_rejects_foreign_fit() {
        let x = dmatrix![1.0, 0.0; 1.0, 1.0; 1.0, 2.0; 1.0, 4.0];
        let data = Dataset::new(dmatrix![1.0; 3.0; 2.0; 5.0], x).unwrap();
        let f = fit(&data, &ModelIndex::prefix(1).unwrap()).unwrap();
        assert!(quadform_smoothed(&data, &ModelIndex::prefix(2).unwrap(), &f).is_err());
    }
}
