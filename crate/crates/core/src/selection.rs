//! Exhaustive model selection over a candidate family.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::criteria::{score_fit, CriterionSpec, Score};
use crate::error::{Error, Result};
use crate::regression::{fit, Dataset, FitResult, ModelIndex};

/// Largest candidate family `enumerate` will produce.
pub const MAX_MODELS: u128 = 1 << 24;

/// Absolute tolerance below which two criterion values count as tied.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateFamily {
    /// `{0}, {0,1}, ..., {0,...,k_max-1}`.
    Nested { k_max: usize },
    /// Every subset of `free`, each unioned with `forced`.
    ForcedSubsets { forced: Vec<usize>, free: Vec<usize> },
    Explicit { models: Vec<ModelIndex> },
}

impl CandidateFamily {
    /// All subsets containing column 0, over `k` columns.
    pub fn with_intercept(k: usize) -> Self {
        CandidateFamily::ForcedSubsets {
            forced: vec![0],
            free: (1..k).collect(),
        }
    }
}

/// Lists the family's models in canonical order (size, then lexicographic),
/// without duplicates.
pub fn enumerate(family: &CandidateFamily, k: usize) -> Result<Vec<ModelIndex>> {
    let out_of_range = |c: usize| {
        Error::InvalidModel(format!("column {c} out of range for a design with {k} columns"))
    };
    let mut models = match family {
        CandidateFamily::Nested { k_max } => {
            if *k_max == 0 || *k_max > k {
                return Err(Error::InvalidModel(format!(
                    "nested family needs 1 <= k_max <= {k}, got {k_max}"
                )));
            }
            (1..=*k_max)
                .map(ModelIndex::prefix)
                .collect::<Result<Vec<_>>>()?
        }
        CandidateFamily::ForcedSubsets { forced, free } => {
            if let Some(&c) = forced.iter().chain(free).find(|&&c| c >= k) {
                return Err(out_of_range(c));
            }
            if let Some(c) = free.iter().find(|c| forced.contains(c)) {
                return Err(Error::InvalidModel(format!(
                    "column {c} is both forced and free"
                )));
            }
            let mut free = free.clone();
            free.sort_unstable();
            free.dedup();
            let count = 1u128 << free.len().min(127);
            if free.len() > 24 {
                return Err(Error::TooManyModels {
                    count,
                    limit: MAX_MODELS,
                });
            }
            let mut out = Vec::with_capacity(count as usize);
            for mask in 0u32..(1u32 << free.len()) {
                let mut cols = forced.clone();
                cols.extend(
                    free.iter()
                        .enumerate()
                        .filter(|(bit, _)| mask & (1 << bit) != 0)
                        .map(|(_, &c)| c),
                );
                if !cols.is_empty() {
                    out.push(ModelIndex::new(cols)?);
                }
            }
            out
        }
        CandidateFamily::Explicit { models } => {
            if models.len() as u128 > MAX_MODELS {
                return Err(Error::TooManyModels {
                    count: models.len() as u128,
                    limit: MAX_MODELS,
                });
            }
            for m in models {
                m.check_within(k)?;
            }
            models.clone()
        }
    };
    models.sort();
    models.dedup();
    if models.is_empty() {
        return Err(Error::InvalidModel("candidate family is empty".into()));
    }
    Ok(models)
}

/// Anything that can score a fitted candidate model.
pub trait Scorer: Sync {
    fn label(&self) -> String;
    fn score(&self, data: &Dataset, fit: &FitResult) -> Result<Score>;
}

impl Scorer for CriterionSpec {
    fn label(&self) -> String {
        CriterionSpec::label(self)
    }

    fn score(&self, data: &Dataset, fit: &FitResult) -> Result<Score> {
        score_fit(data, fit, self)
    }
}

/// Scores of every candidate and the minimizer.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    /// Each candidate's score, or the reason it was skipped.
    pub scores: BTreeMap<ModelIndex, std::result::Result<Score, Error>>,
    pub best: ModelIndex,
    /// Every model within `TIE_TOL` of the minimum, `best` included.
    pub ties: Vec<ModelIndex>,
    pub criterion: String,
}

impl SelectionReport {
    pub fn best_score(&self) -> &Score {
        self.scores[&self.best]
            .as_ref()
            .expect("best model always has a score")
    }

    pub fn skipped(&self) -> impl Iterator<Item = (&ModelIndex, &Error)> {
        self.scores
            .iter()
            .filter_map(|(m, s)| s.as_ref().err().map(|e| (m, e)))
    }

    /// Scored models sorted by criterion value (canonical order on ties).
    pub fn ranked(&self) -> Vec<(&ModelIndex, &Score)> {
        let mut v: Vec<_> = self
            .scores
            .iter()
            .filter_map(|(m, s)| s.as_ref().ok().map(|s| (m, s)))
            .collect();
        v.sort_by(|a, b| a.1.value.total_cmp(&b.1.value).then_with(|| a.0.cmp(b.0)));
        v
    }
}

/// Fits every candidate in parallel; results come back in the input order.
pub fn fit_all(data: &Dataset, models: &[ModelIndex]) -> Vec<Result<FitResult>> {
    models.par_iter().map(|m| fit(data, m)).collect()
}

/// Selects the model minimizing `spec` over `family`.
pub fn select(
    data: &Dataset,
    family: &CandidateFamily,
    spec: &CriterionSpec,
) -> Result<SelectionReport> {
    spec.validate()?;
    let models = enumerate(family, data.k())?;
    let fits = fit_all(data, &models);
    report_from_fits(data, &models, &fits, spec)
}

/// Runs several scorers over one family, fitting each candidate only once.
pub fn select_many<S: Scorer>(
    data: &Dataset,
    family: &CandidateFamily,
    scorers: &[S],
) -> Result<Vec<Result<SelectionReport>>> {
    let models = enumerate(family, data.k())?;
    let fits = fit_all(data, &models);
    Ok(scorers
        .iter()
        .map(|s| report_from_fits(data, &models, &fits, s))
        .collect())
}

/// Builds a report from precomputed fits (`fits[i]` belongs to `models[i]`).
pub fn report_from_fits<S: Scorer + ?Sized>(
    data: &Dataset,
    models: &[ModelIndex],
    fits: &[Result<FitResult>],
    scorer: &S,
) -> Result<SelectionReport> {
    let mut scores = BTreeMap::new();
    for (m, f) in models.iter().zip(fits) {
        let s = match f {
            Ok(f) => scorer.score(data, f).and_then(|s| {
                if s.value.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::InvalidData(format!(
                        "non-finite criterion value {} for {m}",
                        s.value
                    )))
                }
            }),
            Err(e) => Err(e.clone()),
        };
        scores.insert(m.clone(), s);
    }

    let min = scores
        .values()
        .filter_map(|s| s.as_ref().ok())
        .map(|s| s.value)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoScoreableModel);
    }
    let ties: Vec<ModelIndex> = scores
        .iter()
        .filter(|(_, s)| matches!(s, Ok(s) if s.value - min <= TIE_TOL))
        .map(|(m, _)| m.clone())
        .collect();
    Ok(SelectionReport {
        best: ties[0].clone(),
        ties,
        scores,
        criterion: scorer.label(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn ids(models: &[ModelIndex]) -> Vec<Vec<usize>> {
        models.iter().map(|m| m.indices().to_vec()).collect()
    }

    #[test]
    fn nested_enumeration() {
        let m = enumerate(&CandidateFamily::Nested { k_max: 3 }, 5).unwrap();
        assert_eq!(ids(&m), vec![vec![0], vec![0, 1], vec![0, 1, 2]]);
        assert!(enumerate(&CandidateFamily::Nested { k_max: 6 }, 5).is_err());
    }

    #[test]
    fn forced_subsets_enumeration() {
        let fam = CandidateFamily::ForcedSubsets {
            forced: vec![0],
            free: vec![1, 2],
        };
        let m = enumerate(&fam, 3).unwrap();
        assert_eq!(ids(&m), vec![vec![0], vec![0, 1], vec![0, 2], vec![0, 1, 2]]);

        let fam = CandidateFamily::ForcedSubsets {
            forced: vec![0],
            free: (1..8).collect(),
        };
        assert_eq!(enumerate(&fam, 8).unwrap().len(), 128);
    }

    #[test]
    fn forced_subsets_without_forced_skips_empty_model() {
        let fam = CandidateFamily::ForcedSubsets {
            forced: vec![],
            free: vec![0, 1],
        };
        assert_eq!(ids(&enumerate(&fam, 2).unwrap()), vec![vec![0], vec![1], vec![0, 1]]);
    }

    #[test]
    fn too_many_models() {
        let fam = CandidateFamily::ForcedSubsets {
            forced: vec![],
            free: (0..25).collect(),
        };
        assert!(matches!(
            enumerate(&fam, 30),
            Err(Error::TooManyModels { .. })
        ));
    }

    #[test]
    fn explicit_is_canonicalized() {
        let a = ModelIndex::new(vec![0, 2]).unwrap();
        let b = ModelIndex::new(vec![1]).unwrap();
        let fam = CandidateFamily::Explicit {
            models: vec![a.clone(), b.clone(), a.clone()],
        };
        assert_eq!(enumerate(&fam, 3).unwrap(), vec![b, a]);
    }

    #[test]
    fn duplicate_columns_tie_and_break_lexicographically() {
        let n = 12;
        let x = DMatrix::from_fn(n, 2, |i, _| (i as f64 * 0.7).sin() + 2.0);
        let y = DMatrix::from_fn(n, 1, |i, _| (i as f64 * 1.3).cos());
        let data = Dataset::new(y, x).unwrap();
        let fam = CandidateFamily::Explicit {
            models: vec![
                ModelIndex::new(vec![1]).unwrap(),
                ModelIndex::new(vec![0]).unwrap(),
            ],
        };
        let r = select(&data, &fam, &CriterionSpec::Aic).unwrap();
        assert_eq!(r.best.indices(), &[0]);
        assert_eq!(r.ties.len(), 2);
    }

    #[test]
    fn all_skipped_is_an_error() {
        // n = 6, p = 3: AICc is undefined for every k_j >= 2.
        let x = DMatrix::from_fn(6, 3, |i, j| ((i + 1) as f64).powi(j as i32));
        let y = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j * 5) % 7) as f64);
        let data = Dataset::new(y, x).unwrap();
        let fam = CandidateFamily::Explicit {
            models: vec![ModelIndex::prefix(2).unwrap(), ModelIndex::prefix(3).unwrap()],
        };
        assert_eq!(
            select(&data, &fam, &CriterionSpec::Aicc).unwrap_err(),
            Error::NoScoreableModel
        );
    }
}
