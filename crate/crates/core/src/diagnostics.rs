//! Finite-sample checks of the consistency assumptions.
//!
//! Everything here is evidence on concrete instances or on a finite `(n, p)`
//! grid. A "satisfied" verdict means the trend along the grid agrees with the
//! limit condition; it does not establish the limit.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::criteria::{log_weight, WeightScheme};
use crate::error::{Error, Result};
use crate::regression::{check_full_rank, Dataset, ModelIndex};
use crate::selection::{enumerate, CandidateFamily};
use crate::simulation::TrueModel;

/// Eigenvalues below this fraction of the reference scale count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Models whose `|X_j'X_j / n|` falls below this are flagged.
pub const DESIGN_DET_FLOOR: f64 = 1e-8;

/// The noncentrality matrix of a candidate and its spectral summary.
#[derive(Debug, Clone)]
pub struct NoncentralityDiag {
    /// `L⁻¹ Θ*' X*'(I - P_j) X* Θ* L⁻ᵀ` with `L L' = Σ*`; congruent to the
    /// symmetric-root form and sharing its eigenvalues.
    pub matrix: DMatrix<f64>,
    /// Numeric rank.
    pub gamma_j: usize,
    /// Smallest nonzero eigenvalue (0 when `gamma_j == 0`).
    pub lambda_j: f64,
    /// `lambda_j / (n p)`.
    pub scaled: f64,
    /// Eigenvalues in decreasing order.
    pub eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl NoncentralityDiag {
    /// A `p × γ_j` factor `Γ_j` with `Γ_j Γ_j' = matrix` up to the discarded
    /// null eigenvalues.
    pub fn gamma_factor(&self) -> DMatrix<f64> {
        let p = self.matrix.nrows();
        DMatrix::from_fn(p, self.gamma_j, |i, c| {
            self.eigenvectors[(i, c)] * self.eigenvalues[c].max(0.0).sqrt()
        })
    }
}

/// Noncentrality of model `j` under the true model `tm` and design `x`.
pub fn noncentrality(x: &DMatrix<f64>, tm: &TrueModel, j: &ModelIndex) -> Result<NoncentralityDiag> {
    j.check_within(x.ncols())?;
    let x_j = x.select_columns(j.indices());
    check_full_rank(&x_j, j)?;
    let (n, p) = (x.nrows(), tm.p());

    let mean = tm.mean_response(x)?;
    let q = x_j.qr().q();
    let resid = &mean - &q * q.tr_mul(&mean);

    let chol = tm.sigma_cholesky();
    let z = chol
        .solve_lower_triangular(&resid.transpose())
        .ok_or_else(|| Error::InvalidConfig("Σ* factor is singular".into()))?;
    let mut matrix = &z * z.transpose();
    crate::regression::symmetrize(&mut matrix);

    // Scale reference: the same form without the projection.
    let z_full = chol
        .solve_lower_triangular(&mean.transpose())
        .ok_or_else(|| Error::InvalidConfig("Σ* factor is singular".into()))?;
    let reference = z_full.norm_squared();

    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);

    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
    let cutoff = RANK_TOL * lambda_max.max(reference);
    let gamma_j = eigenvalues.iter().filter(|&&v| v > cutoff).count();
    let lambda_j = if gamma_j > 0 {
        eigenvalues[gamma_j - 1]
    } else {
        0.0
    };

    Ok(NoncentralityDiag {
        matrix,
        gamma_j,
        lambda_j,
        scaled: lambda_j / (n * p) as f64,
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub model: ModelIndex,
    /// `log|X_j'X_j / n|`; `-inf` for exactly singular blocks.
    pub logdet: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub rows: Vec<DesignRow>,
    /// `λ_min(X'X / n)` over the full design.
    pub lambda_min: f64,
}

impl DesignReport {
    pub fn flagged(&self) -> impl Iterator<Item = &DesignRow> {
        self.rows.iter().filter(|r| r.flagged)
    }
}

/// Per-model `log|X_j'X_j / n|` and the global `λ_min(X'X / n)`.
pub fn check_design_assumption(data: &Dataset, family: &CandidateFamily) -> Result<DesignReport> {
    let n = data.n() as f64;
    let rows = enumerate(family, data.k())?
        .into_iter()
        .map(|model| {
            let x_j = data.design_block(&model)?;
            let r = x_j.qr().unpack_r();
            let logdet = r
                .diagonal()
                .iter()
                .map(|v| 2.0 * v.abs().ln() - n.ln())
                .sum::<f64>();
            Ok(DesignRow {
                flagged: !(logdet >= DESIGN_DET_FLOOR.ln()),
                model,
                logdet,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gram = data.x().tr_mul(data.x()) / n;
    let lambda_min = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(DesignReport { rows, lambda_min })
}

/// The weight conditions for consistency of the mixture criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `(n log p)⁻¹ log(w*/w_j) > -γ_j / 2` (underspecified, unbounded p).
    Hd1,
    /// `p⁻¹ log(w*/w_j) > -(k_j-k*)/2 · {c₀⁻¹log(1-c₀) + (2-c₀)(1-c₀)⁻²}`
    /// (overspecified, unbounded p).
    Hd2,
    /// `n⁻¹ log(w*/w_j) ≥ 0` (underspecified, bounded p).
    Ls1,
    /// `log(w*/w_j) → ∞` (overspecified, bounded p).
    Ls2,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Hd1, Condition::Hd2, Condition::Ls1, Condition::Ls2];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Hd1 => "HD-1'",
            Condition::Hd2 => "HD-2'",
            Condition::Ls1 => "LS-1'",
            Condition::Ls2 => "LS-2'",
        }
    }

    /// Whether the condition concerns a model with the given relation to the
    /// true model.
    pub fn applies_to(self, k_star: usize, k_j: usize, gamma_j: usize) -> bool {
        match self {
            Condition::Hd1 | Condition::Ls1 => gamma_j > 0,
            Condition::Hd2 | Condition::Ls2 => gamma_j == 0 && k_j > k_star,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    SatisfiedOnGrid,
    Violated,
    Indeterminate,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::SatisfiedOnGrid => "satisfied-on-grid",
            Verdict::Violated => "violated",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

/// One condition evaluated at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub condition: Condition,
    pub n: usize,
    pub p: usize,
    /// `log(w*/w_j)` at this grid point.
    pub log_weight_ratio: f64,
    /// Left-hand side of the condition.
    pub value: f64,
    /// Right-hand side (`+inf` for the divergence condition).
    pub threshold: f64,
    /// Pointwise comparison; for LS-2' whether the value grew since the
    /// previous grid point.
    pub holds: bool,
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    pub verdicts: Vec<(Condition, Verdict)>,
    /// `p / n` at the last grid point.
    pub c0: f64,
}

impl ConditionReport {
    pub fn verdict(&self, c: Condition) -> Verdict {
        self.verdicts
            .iter()
            .find(|(cc, _)| *cc == c)
            .map(|(_, v)| *v)
            .expect("every condition has a verdict")
    }

    pub fn rows_for(&self, c: Condition) -> impl Iterator<Item = &ConditionRow> {
        self.rows.iter().filter(move |r| r.condition == c)
    }
}

/// `c⁻¹ log(1 - c)`, continued by its limit `-1` at `c = 0`.
pub fn c0_log_term(c0: f64) -> f64 {
    if c0 == 0.0 {
        -1.0
    } else if (0.0..1.0).contains(&c0) {
        (-c0).ln_1p() / c0
    } else {
        f64::NAN
    }
}

/// Threshold of the HD-2' condition at limiting ratio `c0`.
pub fn hd2_threshold(k_star: usize, k_j: usize, c0: f64) -> f64 {
    let dk = k_j as f64 - k_star as f64;
    -0.5 * dk * (c0_log_term(c0) + (2.0 - c0) / ((1.0 - c0) * (1.0 - c0)))
}

/// Evaluates the four weight conditions along `grid`.
///
/// Data-dependent weights are evaluated at their limit where the
/// marginal-likelihood ratio vanishes.
pub fn check_weight_conditions(
    scheme: &WeightScheme,
    grid: &[(usize, usize)],
    k_star: usize,
    k_j: usize,
    gamma_j: usize,
) -> Result<ConditionReport> {
    scheme.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("weight-condition grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::InvalidConfig("grid must be nondecreasing in n".into()));
    }
    let (n_last, p_last) = *grid.last().expect("grid is nonempty");
    let c0 = p_last as f64 / n_last as f64;

    let ratios = grid
        .iter()
        .map(|&(n, p)| {
            let star = log_weight(scheme, n, p, k_star, None)?;
            let cand = log_weight(scheme, n, p, k_j, None)?;
            Ok(star.ln_w - cand.ln_w)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::with_capacity(grid.len() * 4);
    let mut verdicts = Vec::with_capacity(4);
    for cond in Condition::ALL {
        let applicable = cond.applies_to(k_star, k_j, gamma_j);
        let start = rows.len();
        for (i, (&(n, p), &lr)) in grid.iter().zip(&ratios).enumerate() {
            let (nf, pf) = (n as f64, p as f64);
            let (value, threshold) = match cond {
                Condition::Hd1 => {
                    let v = if p > 1 { lr / (nf * pf.ln()) } else { f64::NAN };
                    (v, -(gamma_j as f64) / 2.0)
                }
                Condition::Hd2 => (lr / pf, hd2_threshold(k_star, k_j, c0)),
                Condition::Ls1 => (lr / nf, 0.0),
                Condition::Ls2 => (lr, f64::INFINITY),
            };
            let holds = match cond {
                Condition::Hd1 | Condition::Hd2 => value > threshold,
                Condition::Ls1 => value >= 0.0,
                Condition::Ls2 => i == 0 || lr > ratios[i - 1],
            };
            rows.push(ConditionRow {
                condition: cond,
                n,
                p,
                log_weight_ratio: lr,
                value,
                threshold,
                holds,
                applicable,
            });
        }
        verdicts.push((cond, trend_verdict(cond, &rows[start..])));
    }
    Ok(ConditionReport { rows, verdicts, c0 })
}

fn trend_verdict(cond: Condition, rows: &[ConditionRow]) -> Verdict {
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Verdict::Indeterminate;
    }
    let tail = rows.last().expect("grid is nonempty");
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    match cond {
        Condition::Hd1 | Condition::Hd2 => {
            if tail.holds {
                Verdict::SatisfiedOnGrid
            } else if values.len() >= 2 && increasing {
                Verdict::Indeterminate
            } else {
                Verdict::Violated
            }
        }
        Condition::Ls1 => {
            let shrinking = values.windows(2).all(|w| w[1].abs() < w[0].abs());
            if tail.value >= 0.0 || (values.len() >= 2 && shrinking) {
                Verdict::SatisfiedOnGrid
            } else if values.len() < 2 {
                Verdict::Indeterminate
            } else {
                Verdict::Violated
            }
        }
        Condition::Ls2 => {
            if values.len() < 2 {
                Verdict::Indeterminate
            } else if increasing {
                Verdict::SatisfiedOnGrid
            } else {
                Verdict::Violated
            }
        }
    }
}
