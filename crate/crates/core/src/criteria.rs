//! Information criteria of the form `n log|Σ̂_j| + np(log 2π + 1) + m(j)`.
//!
//! Mixture weights and marginal-likelihood ratios are carried in log space
//! throughout. The ratio `f_π(Y|Σ̂_j) / f(Y|X_jΘ̂_j, Σ̂_j)` is routinely below
//! `exp(-700)` once `np` reaches a few thousand, so the two-term mixture
//! `(1 - w)·ratio + w` is always evaluated through a shifted log-sum-exp.

use std::fmt;

use crate::error::{Error, Result};
use crate::regression::{fit, smoothed_terms, Dataset, FitResult, ModelIndex};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Default exponent of the ratio-power weight.
pub const DEFAULT_EPSILON: f64 = 0.499;

/// Smooth part of the mixture prior on the regression coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorKind {
    /// Matrix normal `N(0, Σ ⊗ I)`.
    Normal,
    /// Scaled flat prior `|Σ|^{-k_j/2}`.
    Uniform,
    /// Drop the marginal-likelihood ratio entirely (its log-remainder is
    /// asymptotically negligible).
    Approx,
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Normal => "Normal",
            PriorKind::Uniform => "Uniform",
            PriorKind::Approx => "Approx",
        }
    }
}

/// First shape parameter of the Beta prior on `w_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Constant(f64),
    /// `α_j = p^{ε k_j}`.
    PowerP { epsilon: f64 },
}

/// How the mixture weight `w_j` of the point-mass component is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    /// `w_j = p^{εk_j} / (n^{εk_j} + p^{εk_j})`.
    RatioPower { epsilon: f64 },
    /// `w_j = n^{-εk_j}`.
    InversePower { epsilon: f64 },
    /// Posterior mean of `w_j ~ Beta(α_j, β_j)` with `β_j = n^{εk_j}`.
    BetaPosterior {
        alpha: AlphaSpec,
        beta_epsilon: f64,
        prior: PriorKind,
    },
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::RatioPower {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl WeightScheme {
    /// Beta-posterior weight with `α_j = p^{εk_j}` and `β_j = n^{εk_j}`.
    pub fn beta_posterior(epsilon: f64, prior: PriorKind) -> Self {
        WeightScheme::BetaPosterior {
            alpha: AlphaSpec::PowerP { epsilon },
            beta_epsilon: epsilon,
            prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            WeightScheme::RatioPower { epsilon } | WeightScheme::InversePower { epsilon } => {
                positive("epsilon", epsilon)
            }
            WeightScheme::BetaPosterior {
                alpha, beta_epsilon, ..
            } => {
                positive("beta epsilon", beta_epsilon)?;
                match alpha {
                    AlphaSpec::Constant(a) => positive("alpha", a),
                    AlphaSpec::PowerP { epsilon } => positive("alpha epsilon", epsilon),
                }
            }
        }
    }

    /// Whether evaluating the weight needs the fitted model.
    pub fn is_data_dependent(&self) -> bool {
        matches!(
            self,
            WeightScheme::BetaPosterior { prior, .. } if *prior != PriorKind::Approx
        )
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::RatioPower { epsilon } => write!(f, "ratio eps={epsilon}"),
            WeightScheme::InversePower { epsilon } => write!(f, "inverse eps={epsilon}"),
            WeightScheme::BetaPosterior {
                alpha,
                beta_epsilon,
                prior,
            } => {
                match alpha {
                    AlphaSpec::Constant(a) => write!(f, "beta-posterior alpha={a}")?,
                    AlphaSpec::PowerP { epsilon } => {
                        write!(f, "beta-posterior alpha=p^{epsilon}k")?
                    }
                }
                write!(f, " beta=n^{beta_epsilon}k prior={}", prior.name())
            }
        }
    }
}

/// `(log w, log(1 - w))`, both finite for every admissible `(n, p, k_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeight {
    pub ln_w: f64,
    pub ln_1m_w: f64,
}

impl LogWeight {
    pub fn w(&self) -> f64 {
        self.ln_w.exp()
    }
}

/// Tuning sequence of the GIC penalty coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GicBeta {
    /// `β = (log n) p^{-1/2}`.
    Auto,
    Fixed(f64),
}

/// The criterion used to score candidate models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriterionSpec {
    Aic,
    /// Exact (bias-corrected) AIC.
    Aicc,
    Bic,
    Gic { beta: GicBeta },
    Mpic { prior: PriorKind, weight: WeightScheme },
}

impl CriterionSpec {
    /// MPIC with the approximate bracket and the default ratio-power weight.
    pub fn mpic_default() -> Self {
        CriterionSpec::Mpic {
            prior: PriorKind::Approx,
            weight: WeightScheme::default(),
        }
    }

    pub fn gic_auto() -> Self {
        CriterionSpec::Gic { beta: GicBeta::Auto }
    }

    /// AIC, AICc, BIC, GIC(auto) and the default MPIC_Approx.
    pub fn standard_set() -> Vec<Self> {
        vec![
            CriterionSpec::Aic,
            CriterionSpec::Aicc,
            CriterionSpec::Bic,
            CriterionSpec::gic_auto(),
            CriterionSpec::mpic_default(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CriterionSpec::Gic {
                beta: GicBeta::Fixed(b),
            } if !b.is_finite() => Err(Error::InvalidConfig(format!(
                "GIC beta must be finite, got {b}"
            ))),
            CriterionSpec::Mpic { weight, .. } => weight.validate(),
            _ => Ok(()),
        }
    }

    /// Short label, with parameters appended only when they differ from the
    /// defaults.
    pub fn label(&self) -> String {
        match self {
            CriterionSpec::Aic => "AIC".into(),
            CriterionSpec::Aicc => "AICc".into(),
            CriterionSpec::Bic => "BIC".into(),
            CriterionSpec::Gic { beta: GicBeta::Auto } => "GIC".into(),
            CriterionSpec::Gic {
                beta: GicBeta::Fixed(b),
            } => format!("GIC(beta={b})"),
            CriterionSpec::Mpic { prior, weight } => {
                if *weight == WeightScheme::default() {
                    format!("MPIC_{}", prior.name())
                } else {
                    format!("MPIC_{}({weight})", prior.name())
                }
            }
        }
    }
}

impl fmt::Display for CriterionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A model's criterion value split into fit and penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub neg2loglik: f64,
    pub penalty: f64,
    /// Mixture weight (MPIC only).
    pub w_used: Option<f64>,
    /// `log{(1 - w)·ratio + w} - log w`; zero for MPIC_Approx, absent for
    /// the non-mixture criteria.
    pub mix_log_ratio: Option<f64>,
}

impl Score {
    fn new(neg2loglik: f64, penalty: f64) -> Self {
        Score {
            value: neg2loglik + penalty,
            neg2loglik,
            penalty,
            w_used: None,
            mix_log_ratio: None,
        }
    }
}

/// Number of free parameters `k_j p + p(p+1)/2`.
pub fn param_count(p: usize, k_j: usize) -> f64 {
    let (p, k) = (p as f64, k_j as f64);
    k * p + p * (p + 1.0) / 2.0
}

/// Exact-AIC bias `np(2k_j + p + 1) / (n - p - k_j - 1)`.
pub fn penalty_exact_aic(n: usize, p: usize, k_j: usize) -> Result<f64> {
    if n <= p + k_j + 1 {
        return Err(Error::DimensionGuard {
            n,
            p,
            k_j,
            requirement: "n > p + k_j + 1",
        });
    }
    let (nf, pf, kf) = (n as f64, p as f64, k_j as f64);
    Ok(nf * pf * (2.0 * kf + pf + 1.0) / (n - p - k_j - 1) as f64)
}

/// GIC coefficient `α = β - n log(1 - p/n) / p`.
pub fn gic_alpha(n: usize, p: usize, beta: GicBeta) -> Result<f64> {
    if p >= n || n < 2 {
        return Err(Error::DimensionGuard {
            n,
            p,
            k_j: 0,
            requirement: "p < n and n >= 2",
        });
    }
    let (nf, pf) = (n as f64, p as f64);
    let beta = match beta {
        GicBeta::Auto => nf.ln() / pf.sqrt(),
        GicBeta::Fixed(b) => b,
    };
    Ok(beta - nf * (-pf / nf).ln_1p() / pf)
}

/// Log of the mixture weight under `scheme`.
///
/// `log_ratio` is `log f_π(Y|Σ̂_j) - log f(Y|X_jΘ̂_j, Σ̂_j)`; only the
/// beta-posterior scheme with a non-approximate prior reads it, and treats
/// `None` as the limit where the ratio vanishes.
pub fn log_weight(
    scheme: &WeightScheme,
    n: usize,
    p: usize,
    k_j: usize,
    log_ratio: Option<f64>,
) -> Result<LogWeight> {
    scheme.validate()?;
    if n < 2 || p == 0 || k_j == 0 {
        return Err(Error::InvalidConfig(format!(
            "weights need n > 1, p >= 1, k_j >= 1 (got n={n}, p={p}, k_j={k_j})"
        )));
    }
    let (ln_n, ln_p, kf) = ((n as f64).ln(), (p as f64).ln(), k_j as f64);
    let lw = match *scheme {
        WeightScheme::RatioPower { epsilon } => {
            let a = epsilon * kf * ln_p;
            let b = epsilon * kf * ln_n;
            let denom = log_add_exp(a, b);
            LogWeight {
                ln_w: a - denom,
                ln_1m_w: b - denom,
            }
        }
        WeightScheme::InversePower { epsilon } => {
            let ln_w = -epsilon * kf * ln_n;
            LogWeight {
                ln_w,
                ln_1m_w: ln_1m_exp(ln_w),
            }
        }
        WeightScheme::BetaPosterior {
            alpha,
            beta_epsilon,
            ..
        } => {
            let ln_alpha = match alpha {
                AlphaSpec::Constant(a) => a.ln(),
                AlphaSpec::PowerP { epsilon } => epsilon * kf * ln_p,
            };
            let ln_beta = beta_epsilon * kf * ln_n;
            // w'' = α/(α+β+1) · (1 + 1/(β·ratio + α))
            let ln_d = match log_ratio {
                Some(a) => log_add_exp(ln_beta + a, ln_alpha),
                None => ln_alpha,
            };
            let ln_w =
                ln_alpha - log_add_exp(log_add_exp(ln_alpha, ln_beta), 0.0) + softplus(-ln_d);
            LogWeight {
                ln_w,
                ln_1m_w: ln_1m_exp(ln_w),
            }
        }
    };
    Ok(lw)
}

/// Mixture weight `w_j ∈ (0, 1)`.
///
/// The beta-posterior scheme with a normal or uniform prior evaluates the
/// marginal-likelihood ratio and therefore needs `fit` and `data`.
pub fn weight(
    scheme: &WeightScheme,
    n: usize,
    p: usize,
    k_j: usize,
    fit: Option<&FitResult>,
    data: Option<&Dataset>,
) -> Result<f64> {
    let ratio = match scheme {
        WeightScheme::BetaPosterior { prior, .. } if *prior != PriorKind::Approx => {
            match (fit, data) {
                (Some(f), Some(d)) => log_marginal_ratio(*prior, d, f)?,
                _ => return Err(Error::MissingFit),
            }
        }
        _ => None,
    };
    Ok(log_weight(scheme, n, p, k_j, ratio)?.w())
}

/// `log f_π(Y|Σ̂_j) - log f(Y|X_jΘ̂_j, Σ̂_j)` for the given smooth prior;
/// `None` for the approximate criterion.
pub fn log_marginal_ratio(
    prior: PriorKind,
    data: &Dataset,
    fit: &FitResult,
) -> Result<Option<f64>> {
    let (n, p, k) = (fit.n as f64, fit.p as f64, fit.k_j as f64);
    match prior {
        PriorKind::Approx => Ok(None),
        PriorKind::Normal => {
            let t = smoothed_terms(data, fit)?;
            Ok(Some(0.5 * (n * p - t.quadform) - 0.5 * p * t.logdet_capacitance))
        }
        PriorKind::Uniform => Ok(Some(0.5 * k * p * LN_2PI - 0.5 * p * fit.logdet_gram)),
    }
}

/// Fits `model` and scores it.
pub fn score(data: &Dataset, model: &ModelIndex, spec: &CriterionSpec) -> Result<Score> {
    let f = fit(data, model)?;
    score_fit(data, &f, spec)
}

/// Scores an existing fit of a model on `data`.
pub fn score_fit(data: &Dataset, fit: &FitResult, spec: &CriterionSpec) -> Result<Score> {
    spec.validate()?;
    let (n, p, k_j) = (fit.n, fit.p, fit.k_j);
    let q = param_count(p, k_j);
    let s = match *spec {
        CriterionSpec::Aic => Score::new(fit.neg2loglik, 2.0 * q),
        CriterionSpec::Aicc => Score::new(fit.neg2loglik, penalty_exact_aic(n, p, k_j)?),
        CriterionSpec::Bic => {
            if n < 2 {
                return Err(Error::DimensionGuard {
                    n,
                    p,
                    k_j,
                    requirement: "n >= 2",
                });
            }
            Score::new(fit.neg2loglik, (n as f64).ln() * q)
        }
        CriterionSpec::Gic { beta } => Score::new(fit.neg2loglik, gic_alpha(n, p, beta)? * q),
        CriterionSpec::Mpic { prior, weight } => {
            let bias = penalty_exact_aic(n, p, k_j)?;
            let ratio = log_marginal_ratio(prior, data, fit)?;
            let weight_ratio = match weight {
                WeightScheme::BetaPosterior { prior: wp, .. } if wp == prior => ratio,
                WeightScheme::BetaPosterior { prior: wp, .. } => log_marginal_ratio(wp, data, fit)?,
                _ => None,
            };
            let lw = log_weight(&weight, n, p, k_j, weight_ratio)?;
            // log{(1-w)e^A + w} = log w + log(1 + (1-w)/w · e^A)
            let mix = match ratio {
                Some(a) => softplus(a + lw.ln_1m_w - lw.ln_w),
                None => 0.0,
            };
            let mut s = Score::new(fit.neg2loglik, bias - 2.0 * (lw.ln_w + mix));
            s.w_used = Some(lw.w());
            s.mix_log_ratio = Some(mix);
            s
        }
    };
    Ok(s)
}

/// `log(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - e^x)` for `x < 0`.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}
