//! Monte Carlo harness for selection probability and efficiency experiments.
//!
//! Each replication draws its own RNG substream from `(seed, rep)` through
//! [`replication_seed`], and results are reduced in replication order, so a
//! run is reproducible for a given seed regardless of the worker count.

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, Open01, StandardNormal, StudentT};
use rayon::prelude::*;

use crate::criteria::{CriterionSpec, WeightScheme};
use crate::error::{Error, Result};
use crate::regression::{fit, Dataset, FitResult, ModelIndex};
use crate::selection::{enumerate, report_from_fits, CandidateFamily, Scorer};

/// Data-generating parameters: `Y = X_{j*} Θ* + E`, rows of `E` with
/// covariance `Σ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub j_star: ModelIndex,
    pub theta_star: DMatrix<f64>,
    pub sigma_star: DMatrix<f64>,
    sigma_chol: DMatrix<f64>,
}

impl TrueModel {
    pub fn new(j_star: ModelIndex, theta_star: DMatrix<f64>, sigma_star: DMatrix<f64>) -> Result<Self> {
        let p = sigma_star.nrows();
        if sigma_star.ncols() != p || theta_star.ncols() != p {
            return Err(Error::InvalidConfig(format!(
                "Θ* is {}x{} but Σ* is {}x{}",
                theta_star.nrows(),
                theta_star.ncols(),
                sigma_star.nrows(),
                sigma_star.ncols()
            )));
        }
        if theta_star.nrows() != j_star.k_j() {
            return Err(Error::InvalidConfig(format!(
                "Θ* has {} rows for a true model with {} columns",
                theta_star.nrows(),
                j_star.k_j()
            )));
        }
        let asym = (&sigma_star - sigma_star.transpose()).amax();
        if asym > 1e-12 * sigma_star.amax().max(1.0) {
            return Err(Error::InvalidConfig("Σ* is not symmetric".into()));
        }
        let sigma_chol = Cholesky::new(sigma_star.clone())
            .ok_or_else(|| Error::InvalidConfig("Σ* is not positive definite".into()))?
            .unpack();
        Ok(Self {
            j_star,
            theta_star,
            sigma_star,
            sigma_chol,
        })
    }

    pub fn p(&self) -> usize {
        self.sigma_star.nrows()
    }

    pub fn k_star(&self) -> usize {
        self.j_star.k_j()
    }

    /// Lower Cholesky factor `L` with `L L' = Σ*`.
    pub fn sigma_cholesky(&self) -> &DMatrix<f64> {
        &self.sigma_chol
    }

    /// The mean response `X_{j*} Θ*`.
    pub fn mean_response(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.j_star.check_within(x.ncols())?;
        Ok(x.select_columns(self.j_star.indices()) * &self.theta_star)
    }
}

/// `j* = {0,...,4}`, every column of Θ* equal to `(5,4,3,2,1)'`, and
/// `Σ* = 0.8 I + 0.2 11'`.
pub fn default_true_model(p: usize) -> Result<TrueModel> {
    if p == 0 {
        return Err(Error::InvalidConfig("p must be at least 1".into()));
    }
    let theta = DMatrix::from_fn(5, p, |i, _| (5 - i) as f64);
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.2 });
    TrueModel::new(ModelIndex::prefix(5)?, theta, sigma)
}

/// Distribution of the i.i.d. entries of `Δ` in `E = Δ L'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorDist {
    Gaussian,
    Laplace { scale: f64 },
    StudentT { df: f64 },
    ChiSq { df: f64, centered: bool },
    /// Standard normal, replaced by a standard Cauchy draw with probability
    /// `eps`.
    ContaminatedNormal { eps: f64 },
}

impl ErrorDist {
    pub const LAPLACE: ErrorDist = ErrorDist::Laplace { scale: 0.5 };
    pub const STUDENT_T: ErrorDist = ErrorDist::StudentT { df: 4.0 };
    pub const CHI_SQ: ErrorDist = ErrorDist::ChiSq {
        df: 2.0,
        centered: true,
    };
    pub const CONTAMINATED: ErrorDist = ErrorDist::ContaminatedNormal { eps: 0.05 };

    /// The four non-normal error laws of the robustness experiment.
    pub fn robustness_set() -> [ErrorDist; 4] {
        [
            Self::LAPLACE,
            Self::STUDENT_T,
            Self::CHI_SQ,
            Self::CONTAMINATED,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            ErrorDist::Gaussian => "gaussian".into(),
            ErrorDist::Laplace { scale } => format!("laplace({scale})"),
            ErrorDist::StudentT { df } => format!("t({df})"),
            ErrorDist::ChiSq { df, centered: true } => format!("chisq({df})-centered"),
            ErrorDist::ChiSq { df, centered: false } => format!("chisq({df})"),
            ErrorDist::ContaminatedNormal { eps } => format!("normal+cauchy({eps})"),
        }
    }

    fn sampler(&self) -> Result<Sampler> {
        let bad = |what: &str| Error::InvalidConfig(format!("invalid {what} for {}", self.name()));
        Ok(match *self {
            ErrorDist::Gaussian => Sampler::Normal,
            ErrorDist::Laplace { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(bad("scale"));
                }
                Sampler::Laplace(scale)
            }
            ErrorDist::StudentT { df } => {
                Sampler::StudentT(StudentT::new(df).map_err(|_| bad("degrees of freedom"))?)
            }
            ErrorDist::ChiSq { df, centered } => Sampler::ChiSq(
                ChiSquared::new(df).map_err(|_| bad("degrees of freedom"))?,
                if centered { df } else { 0.0 },
            ),
            ErrorDist::ContaminatedNormal { eps } => {
                if !(0.0..=1.0).contains(&eps) {
                    return Err(bad("contamination rate"));
                }
                Sampler::Contaminated(eps, Cauchy::new(0.0, 1.0).map_err(|_| bad("cauchy"))?)
            }
        })
    }
}

enum Sampler {
    Normal,
    Laplace(f64),
    StudentT(StudentT<f64>),
    ChiSq(ChiSquared<f64>, f64),
    Contaminated(f64, Cauchy<f64>),
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal => rng.sample(StandardNormal),
            Sampler::Laplace(b) => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -b * u.signum() * (-2.0 * u.abs()).ln_1p()
            }
            Sampler::StudentT(d) => d.sample(rng),
            Sampler::ChiSq(d, shift) => d.sample(rng) - shift,
            Sampler::Contaminated(eps, cauchy) => {
                if rng.random::<f64>() < *eps {
                    cauchy.sample(rng)
                } else {
                    rng.sample(StandardNormal)
                }
            }
        }
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep`: `splitmix64(seed ^ splitmix64(rep))`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(seed ^ splitmix64(rep))
}

/// The RNG substream of replication `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replication_seed(seed, rep))
}

/// Intercept column followed by `k - 1` columns of i.i.d. `U(-2, 2)` draws.
pub fn gen_design<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::from_element(n, k.max(1), 1.0);
    for j in 1..k {
        for i in 0..n {
            x[(i, j)] = rng.random_range(-2.0..2.0);
        }
    }
    x
}

/// `X_{j*} Θ* + Δ L'` with `Δ` i.i.d. from `dist` and `L L' = Σ*`.
pub fn gen_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    tm: &TrueModel,
    dist: &ErrorDist,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let mean = tm.mean_response(x)?;
    let sampler = dist.sampler()?;
    let (n, p) = mean.shape();
    let mut delta = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            delta[(i, j)] = sampler.draw(rng);
        }
    }
    Ok(mean + delta * tm.sigma_cholesky().transpose())
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub reps: usize,
    pub seed: u64,
    pub family: CandidateFamily,
    pub criteria: Vec<CriterionSpec>,
    pub error: ErrorDist,
    pub redraw_x_each_rep: bool,
    /// Defaults to [`default_true_model`] when absent.
    pub true_model: Option<TrueModel>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl SimConfig {
    /// Nested candidates `j_1, ..., j_10` over ten design columns, Gaussian
    /// errors and the standard criteria.
    pub fn nested(n: usize, p: usize, reps: usize, seed: u64) -> Self {
        SimConfig {
            n,
            p,
            k: 10,
            reps,
            seed,
            family: CandidateFamily::Nested { k_max: 10 },
            criteria: CriterionSpec::standard_set(),
            error: ErrorDist::Gaussian,
            redraw_x_each_rep: true,
            true_model: None,
            workers: None,
        }
    }

    /// All subsets of eight columns that keep the intercept.
    pub fn non_nested(n: usize, p: usize, reps: usize, seed: u64) -> Self {
        SimConfig {
            k: 8,
            family: CandidateFamily::with_intercept(8),
            ..Self::nested(n, p, reps, seed)
        }
    }

    pub fn with_criteria(mut self, criteria: Vec<CriterionSpec>) -> Self {
        self.criteria = criteria;
        self
    }

    pub fn with_error(mut self, error: ErrorDist) -> Self {
        self.error = error;
        self
    }

    pub fn true_model(&self) -> Result<TrueModel> {
        match &self.true_model {
            Some(tm) => Ok(tm.clone()),
            None => default_true_model(self.p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if self.n <= self.k {
            return Err(Error::InvalidConfig(format!(
                "n must exceed k (n={}, k={})",
                self.n, self.k
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        let tm = self.true_model()?;
        if tm.p() != self.p {
            return Err(Error::InvalidConfig(format!(
                "true model has p={} but the config has p={}",
                tm.p(),
                self.p
            )));
        }
        tm.j_star.check_within(self.k)?;
        for c in &self.criteria {
            c.validate()?;
        }
        Ok(())
    }
}

/// Aggregate result of one criterion over all replications.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub label: String,
    /// Replications in which the selected model equals `j*`.
    pub hits: usize,
    pub reps: usize,
    pub probability: f64,
    /// `mean L(ĵ) / mean L(j*)`; only computed by [`run_efficiency`].
    pub efficiency: Option<f64>,
    /// Replications in which `j*` itself could not be scored.
    pub true_model_skipped: usize,
    /// Replications in which no candidate could be scored.
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub config: SimConfig,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SimResult {
    pub fn outcome(&self, label: &str) -> Option<&CriterionOutcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }
}

/// Fraction of replications in which each configured criterion selects `j*`.
pub fn run_selection_probability(cfg: &SimConfig) -> Result<SimResult> {
    run_with(cfg, &cfg.criteria, false)
}

/// Selection probability plus the risk ratio `E[L(ĵ)] / E[L(j*)]` with
/// `L(j) = ||X_{j*}Θ* - X_jΘ̂_j||²_F`.
pub fn run_efficiency(cfg: &SimConfig) -> Result<SimResult> {
    run_with(cfg, &cfg.criteria, true)
}

#[derive(Debug, Clone, Copy, Default)]
struct RepOutcome {
    hit: bool,
    true_skipped: bool,
    failed: bool,
    loss: Option<f64>,
}

struct Replication {
    true_loss: Option<f64>,
    per_scorer: Vec<RepOutcome>,
}

/// Runs the experiment with arbitrary scorers; `cfg.criteria` is ignored.
pub fn run_with<S: Scorer>(cfg: &SimConfig, scorers: &[S], efficiency: bool) -> Result<SimResult> {
    cfg.validate()?;
    let tm = cfg.true_model()?;
    let models = enumerate(&cfg.family, cfg.k)?;
    let fixed_x = if cfg.redraw_x_each_rep {
        None
    } else {
        Some(gen_design(cfg.n, cfg.k, &mut replication_rng(cfg.seed, u64::MAX)))
    };

    let run_rep = |rep: usize| -> Result<Replication> {
        let mut rng = replication_rng(cfg.seed, rep as u64);
        let x = match &fixed_x {
            Some(x) => x.clone(),
            None => gen_design(cfg.n, cfg.k, &mut rng),
        };
        let y = gen_response(&x, &tm, &cfg.error, &mut rng)?;
        let data = Dataset::new(y, x)?;
        let fits: Vec<Result<FitResult>> = models.iter().map(|m| fit(&data, m)).collect();

        let (mean, true_loss) = if efficiency {
            let mean = tm.mean_response(data.x())?;
            let true_fit = match models.iter().position(|m| *m == tm.j_star) {
                Some(i) => fits[i].clone().ok(),
                None => fit(&data, &tm.j_star).ok(),
            };
            let loss = match &true_fit {
                Some(f) => Some(squared_loss(&mean, f, data.x())?),
                None => None,
            };
            (Some(mean), loss)
        } else {
            (None, None)
        };

        let mut per_scorer = Vec::with_capacity(scorers.len());
        for s in scorers {
            let out = match report_from_fits(&data, &models, &fits, s) {
                Ok(r) => {
                    let loss = match &mean {
                        Some(mean) => {
                            let i = models.binary_search(&r.best).expect("best is a candidate");
                            let f = fits[i].as_ref().expect("best model was fitted");
                            Some(squared_loss(mean, f, data.x())?)
                        }
                        None => None,
                    };
                    RepOutcome {
                        hit: r.best == tm.j_star,
                        true_skipped: r.scores.get(&tm.j_star).is_some_and(|s| s.is_err()),
                        failed: false,
                        loss,
                    }
                }
                Err(Error::NoScoreableModel) => RepOutcome {
                    true_skipped: true,
                    failed: true,
                    ..Default::default()
                },
                Err(e) => return Err(e),
            };
            per_scorer.push(out);
        }
        Ok(Replication {
            true_loss,
            per_scorer,
        })
    };

    let reps: Vec<Replication> = match cfg.workers {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| (0..cfg.reps).into_par_iter().map(run_rep).collect::<Result<_>>())?,
        None => (0..cfg.reps)
            .into_par_iter()
            .map(run_rep)
            .collect::<Result<_>>()?,
    };

    let outcomes = scorers
        .iter()
        .enumerate()
        .map(|(si, s)| {
            let mut o = CriterionOutcome {
                label: s.label(),
                hits: 0,
                reps: cfg.reps,
                probability: 0.0,
                efficiency: None,
                true_model_skipped: 0,
                failed: 0,
            };
            let (mut sel_loss, mut true_loss) = (0.0, 0.0);
            for r in &reps {
                let ro = r.per_scorer[si];
                o.hits += usize::from(ro.hit);
                o.true_model_skipped += usize::from(ro.true_skipped);
                o.failed += usize::from(ro.failed);
                if let (Some(a), Some(b)) = (ro.loss, r.true_loss) {
                    sel_loss += a;
                    true_loss += b;
                }
            }
            o.probability = o.hits as f64 / cfg.reps as f64;
            if efficiency && true_loss > 0.0 {
                o.efficiency = Some(sel_loss / true_loss);
            }
            o
        })
        .collect();

    Ok(SimResult {
        config: cfg.clone(),
        outcomes,
    })
}

fn squared_loss(mean: &DMatrix<f64>, f: &FitResult, x: &DMatrix<f64>) -> Result<f64> {
    Ok((mean - f.predict(x)?).norm_squared())
}

/// Exponents compared in the ε sweep.
pub const EPSILON_SWEEP: [f64; 8] = [10.0, 5.0, 2.5, 1.0, 0.5, 0.499, 0.25, 0.1];

/// MPIC_Approx with the ratio-power weight at each ε of [`EPSILON_SWEEP`].
pub fn epsilon_sweep_criteria() -> Vec<CriterionSpec> {
    EPSILON_SWEEP
        .iter()
        .map(|&epsilon| CriterionSpec::Mpic {
            prior: crate::criteria::PriorKind::Approx,
            weight: WeightScheme::RatioPower { epsilon },
        })
        .collect()
}
