//! Command-line front end: `select`, `simulate`, `whiten-select` and
//! `diagnose`.
//!
//! Every setting can come from a flag or from a flat JSON file passed with
//! `--config`; flags win. All settings are parsed and validated before any
//! computation starts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 nothing
//! could be scored.

pub mod io;
pub mod plot;
pub mod settings;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::criteria::{CriterionSpec, GicBeta, PriorKind, WeightScheme, DEFAULT_EPSILON};
use crate::diagnostics::{check_design_assumption, check_weight_conditions, noncentrality, Condition};
use crate::error::Error;
use crate::prewhiten::whiten_select_many;
use crate::regression::{Dataset, ModelIndex};
use crate::selection::{enumerate, fit_all, report_from_fits, CandidateFamily, Scorer};
use crate::simulation::{
    default_true_model, epsilon_sweep_criteria, gen_design, gen_response, replication_rng,
    run_with, ErrorDist, SimConfig, SimResult,
};

use io::{csv_writer, finish, fmt_real, split_list, write_record, Table};
use plot::LinePlot;
use settings::Settings;

/// Environment variable capping the number of simulation workers.
pub const THREADS_ENV: &str = "MPICSEL_THREADS";

/// A failure with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            _ if e.is_data_error() => CliError::data(msg),
            Error::NoScoreableModel | Error::DimensionGuard { .. } => CliError::empty(msg),
            _ => CliError::config(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "mpicsel", version, about = "Information-criterion model selection for multivariate regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every candidate model of a CSV dataset.
    Select(SelectArgs),
    /// Monte Carlo selection-probability and efficiency experiments.
    Simulate(SimulateArgs),
    /// AR(1) pre-whitening followed by selection.
    WhitenSelect(WhitenArgs),
    /// Design and weight-condition diagnostics.
    Diagnose(DiagnoseArgs),
}

/// Flags shared by the commands that choose criteria.
#[derive(Args, Default)]
struct CriteriaFlags {
    /// Comma list of aic, aicc, bic, gic, mpic, mpic-approx, mpic-normal,
    /// mpic-uniform.
    #[arg(long)]
    criteria: Option<String>,
    /// Prior used by the plain `mpic` criterion: normal, uniform or approx.
    #[arg(long)]
    prior: Option<String>,
    /// Weight scheme: ratio, inverse or beta-posterior.
    #[arg(long)]
    weight: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// GIC tuning constant, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    gic_beta: Option<String>,
}

impl CriteriaFlags {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("criteria", self.criteria.clone()),
            ("prior", self.prior.clone()),
            ("weight", self.weight.clone()),
            ("epsilon", self.epsilon.clone()),
            ("gic-beta", self.gic_beta.clone()),
        ]
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    response_cols: Option<String>,
    /// Design columns; `1` adds an intercept unless a column is named `1`.
    #[arg(long)]
    predictor_cols: Option<String>,
    /// nested, nested:<k>, forced:<idx-list> or explicit:<file>.
    #[arg(long)]
    family: Option<String>,
    #[command(flatten)]
    crit: CriteriaFlags,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// prob, eff, robust or epsilon-sweep.
    #[arg(long)]
    mode: Option<String>,
    /// `n:p` pairs separated by `;`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    reps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// nested (ten columns) or forced (all subsets of eight columns that keep
    /// the intercept).
    #[arg(long)]
    family: Option<String>,
    #[command(flatten)]
    crit: CriteriaFlags,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct WhitenArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    response_cols: Option<String>,
    #[arg(long)]
    predictor_cols: Option<String>,
    /// Column giving the time order; rows are used as given when absent.
    #[arg(long)]
    time_col: Option<String>,
    /// First test row (0-based); no test evaluation when absent.
    #[arg(long, allow_hyphen_values = true)]
    split_index: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[command(flatten)]
    crit: CriteriaFlags,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    response_cols: Option<String>,
    #[arg(long)]
    predictor_cols: Option<String>,
    /// `n:p`: simulate a design and response from the default true model
    /// instead of reading `--data`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// `n:p` grid for the weight conditions.
    #[arg(long)]
    grid: Option<String>,
    /// Size of the true model used by the weight conditions.
    #[arg(long, allow_hyphen_values = true)]
    k_star: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::WhitenSelect(a) => cmd_whiten_select(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn cmd_select(a: SelectArgs) -> Result<(), CliError> {
    let mut flags = vec![
        ("data", a.data),
        ("response-cols", a.response_cols),
        ("predictor-cols", a.predictor_cols),
        ("family", a.family),
        ("out", a.out),
    ];
    flags.extend(a.crit.flags());
    let s = Settings::resolve(&flags, a.config.as_deref())?;

    let criteria = parse_criteria(&s)?;
    let family_spec = s.get("family").unwrap_or("nested").to_string();
    let out = s.get("out").map(PathBuf::from);
    let table = Table::read(Path::new(s.require("data")?))?;
    let data = table.dataset(s.require("response-cols")?, s.require("predictor-cols")?)?;
    let family = parse_family(&family_spec, data.k())?;

    let models = enumerate(&family, data.k())?;
    let fits = fit_all(&data, &models);
    let names = data.col_names().to_vec();

    let mut w = csv_writer(out.as_deref())?;
    write_record(
        &mut w,
        ["criterion", "model", "k_j", "neg2loglik", "penalty", "value", "selected", "skip_reason"],
    )?;
    let mut worst: Option<CliError> = None;
    let mut summary = Vec::new();
    for spec in &criteria {
        let label = spec.label();
        match report_from_fits(&data, &models, &fits, spec) {
            Ok(r) => {
                for (m, sc) in r.ranked() {
                    write_record(
                        &mut w,
                        [
                            label.clone(),
                            m.label(&names),
                            m.k_j().to_string(),
                            fmt_real(sc.neg2loglik),
                            fmt_real(sc.penalty),
                            fmt_real(sc.value),
                            u8::from(*m == r.best).to_string(),
                            String::new(),
                        ],
                    )?;
                }
                for (m, e) in r.skipped() {
                    write_skipped(&mut w, &label, m, &names, e)?;
                }
                summary.push(format!("{label}: {}", r.best.label(&names)));
            }
            Err(Error::NoScoreableModel) => {
                let reasons: Vec<Error> = models
                    .iter()
                    .zip(&fits)
                    .map(|(_, f)| match f {
                        Ok(f) => spec.score(&data, f).err().unwrap_or(Error::NoScoreableModel),
                        Err(e) => e.clone(),
                    })
                    .collect();
                for (m, e) in models.iter().zip(&reasons) {
                    write_skipped(&mut w, &label, m, &names, e)?;
                }
                let all_data = reasons.iter().all(Error::is_data_error);
                let err = if all_data {
                    CliError::data(format!("{label}: every candidate failed on the data ({})", reasons[0]))
                } else {
                    CliError::empty(format!("{label}: no candidate model could be scored"))
                };
                if worst.as_ref().is_none_or(|w| err.code < w.code) {
                    worst = Some(err);
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    finish(w)?;
    for line in summary {
        if out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    worst.map_or(Ok(()), Err)
}

fn write_skipped<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    label: &str,
    m: &ModelIndex,
    names: &[String],
    e: &Error,
) -> Result<(), CliError> {
    write_record(
        w,
        [
            label.to_string(),
            m.label(names),
            m.k_j().to_string(),
            String::new(),
            String::new(),
            String::new(),
            "0".into(),
            e.to_string(),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SimMode {
    Prob,
    Eff,
    Robust,
    EpsilonSweep,
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut flags = vec![
        ("mode", a.mode),
        ("grid", a.grid),
        ("reps", a.reps),
        ("seed", a.seed),
        ("family", a.family),
        ("out", a.out),
    ];
    flags.extend(a.crit.flags());
    let s = Settings::resolve(&flags, a.config.as_deref())?;

    let mode = match s.get("mode").unwrap_or("prob") {
        "prob" => SimMode::Prob,
        "eff" => SimMode::Eff,
        "robust" => SimMode::Robust,
        "epsilon-sweep" => SimMode::EpsilonSweep,
        other => {
            return Err(CliError::config(format!(
                "invalid value '{other}' for 'mode' (expected prob, eff, robust or epsilon-sweep)"
            )))
        }
    };
    let grid = parse_grid(s.require("grid")?)?;
    let reps: usize = s.parse_or("reps", 100)?;
    let seed: u64 = s.parse_or("seed", 1)?;
    let nested = match s.get("family").unwrap_or("nested") {
        "nested" => true,
        "forced" => false,
        other => {
            return Err(CliError::config(format!(
                "invalid value '{other}' for 'family' (expected nested or forced)"
            )))
        }
    };
    let criteria = if mode == SimMode::EpsilonSweep {
        if s.get("criteria").is_some() {
            return Err(CliError::config("'criteria' is fixed in epsilon-sweep mode"));
        }
        epsilon_sweep_criteria()
    } else {
        parse_criteria(&s)?
    };
    let workers = threads_from_env()?;
    let out = PathBuf::from(s.require("out")?);

    let errors: Vec<(String, ErrorDist)> = match mode {
        SimMode::Robust => ErrorDist::robustness_set()
            .into_iter()
            .map(|d| (format!("robust_{}", short_dist_name(&d)), d))
            .collect(),
        SimMode::Prob => vec![("prob".into(), ErrorDist::Gaussian)],
        SimMode::Eff => vec![("eff".into(), ErrorDist::Gaussian)],
        SimMode::EpsilonSweep => vec![("epsilon_sweep".into(), ErrorDist::Gaussian)],
    };

    let mut configs = Vec::new();
    for (stem, dist) in &errors {
        let cfgs = grid
            .iter()
            .map(|&(n, p)| {
                let base = if nested {
                    SimConfig::nested(n, p, reps, seed)
                } else {
                    SimConfig::non_nested(n, p, reps, seed)
                };
                let cfg = SimConfig {
                    workers,
                    ..base.with_criteria(criteria.clone()).with_error(*dist)
                };
                cfg.validate().map_err(|e| {
                    CliError::config(format!("'grid' point {n}:{p}: {e}"))
                })?;
                Ok(cfg)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        configs.push((stem.clone(), cfgs));
    }
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::config(format!("'out': cannot create {}: {e}", out.display())))?;

    let efficiency = mode == SimMode::Eff;
    for (stem, cfgs) in configs {
        let results = cfgs
            .iter()
            .map(|cfg| run_with(cfg, &cfg.criteria, efficiency).map_err(CliError::from))
            .collect::<Result<Vec<SimResult>, _>>()?;
        write_sim_csv(&out.join(format!("{stem}.csv")), &results, efficiency)?;
        let svg = sim_plot(&stem, &results, efficiency).render();
        let path = out.join(format!("{stem}.svg"));
        std::fs::write(&path, svg)
            .map_err(|e| CliError::config(format!("'out': cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn short_dist_name(d: &ErrorDist) -> &'static str {
    match d {
        ErrorDist::Gaussian => "gaussian",
        ErrorDist::Laplace { .. } => "laplace",
        ErrorDist::StudentT { .. } => "t",
        ErrorDist::ChiSq { .. } => "chisq",
        ErrorDist::ContaminatedNormal { .. } => "contaminated",
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::config(format!(
                "invalid value '{v}' for '{THREADS_ENV}' (expected a positive integer)"
            ))),
        },
        _ => Ok(None),
    }
}

fn write_sim_csv(path: &Path, results: &[SimResult], efficiency: bool) -> Result<(), CliError> {
    let mut w = csv_writer(Some(path))?;
    let mut header = vec!["n", "p", "criterion", "error", "probability"];
    if efficiency {
        header.push("efficiency");
    }
    header.extend(["reps", "seed", "true_model_skipped", "failed"]);
    write_record(&mut w, header)?;
    for r in results {
        for o in &r.outcomes {
            let mut row = vec![
                r.config.n.to_string(),
                r.config.p.to_string(),
                o.label.clone(),
                r.config.error.name(),
                fmt_real(o.probability),
            ];
            if efficiency {
                row.push(o.efficiency.map(fmt_real).unwrap_or_default());
            }
            row.extend([
                o.reps.to_string(),
                r.config.seed.to_string(),
                o.true_model_skipped.to_string(),
                o.failed.to_string(),
            ]);
            write_record(&mut w, row)?;
        }
    }
    finish(w)
}

fn sim_plot(stem: &str, results: &[SimResult], efficiency: bool) -> LinePlot {
    // Plot against n unless the grid holds n fixed.
    let by_n = results.windows(2).any(|w| w[0].config.n != w[1].config.n) || results.len() < 2;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in results {
        let x = if by_n { r.config.n } else { r.config.p } as f64;
        for o in &r.outcomes {
            let y = if efficiency {
                o.efficiency.unwrap_or(f64::NAN)
            } else {
                o.probability
            };
            match series.iter_mut().find(|(l, _)| *l == o.label) {
                Some((_, pts)) => pts.push((x, y)),
                None => series.push((o.label.clone(), vec![(x, y)])),
            }
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    LinePlot {
        title: stem.replace('_', " "),
        x_label: if by_n { "n" } else { "p" }.into(),
        y_label: if efficiency { "efficiency" } else { "selection probability" }.into(),
        y_range: (!efficiency).then_some((0.0, 1.0)),
        series,
    }
}

fn cmd_whiten_select(a: WhitenArgs) -> Result<(), CliError> {
    let mut flags = vec![
        ("data", a.data),
        ("response-cols", a.response_cols),
        ("predictor-cols", a.predictor_cols),
        ("time-col", a.time_col),
        ("split-index", a.split_index),
        ("family", a.family),
        ("out", a.out),
    ];
    flags.extend(a.crit.flags());
    let s = Settings::resolve(&flags, a.config.as_deref())?;

    let criteria = parse_criteria(&s)?;
    let split: Option<usize> = s.parse("split-index")?;
    let family_spec = s.get("family").unwrap_or("nested").to_string();
    let out = s.get("out").map(PathBuf::from);
    let mut table = Table::read(Path::new(s.require("data")?))?;
    if let Some(tc) = s.get("time-col") {
        let col = table.column_index("time-col", tc)?;
        table.sort_by_column(col)?;
    }
    let data = table.dataset(s.require("response-cols")?, s.require("predictor-cols")?)?;
    let family = parse_family(&family_spec, data.k())?;
    if let Some(sp) = split {
        if sp >= data.n() || sp < data.k() + 2 {
            return Err(CliError::config(format!(
                "invalid value '{sp}' for 'split-index': need {} <= split < n = {}",
                data.k() + 2,
                data.n()
            )));
        }
    }

    let results = whiten_select_many(&data, &family, &criteria, split)?;
    let names = data.col_names().to_vec();
    let mut w = csv_writer(out.as_deref())?;
    let mut header = vec!["criterion".to_string(), "rho_hat".to_string()];
    header.extend(names.iter().cloned());
    header.push("prediction_error".into());
    write_record(&mut w, &header)?;
    let mut worst: Option<CliError> = None;
    for (spec, r) in criteria.iter().zip(results) {
        match r {
            Ok(ws) => {
                let mut row = vec![spec.label(), fmt_real(ws.rho_hat)];
                row.extend((0..names.len()).map(|c| u8::from(ws.report.best.contains(c)).to_string()));
                row.push(ws.prediction_error.map(fmt_real).unwrap_or_default());
                write_record(&mut w, row)?;
            }
            Err(e) => {
                let err = CliError::from(e);
                eprintln!("error: {}: {err}", spec.label());
                if worst.as_ref().is_none_or(|w| err.code < w.code) {
                    worst = Some(err);
                }
            }
        }
    }
    finish(w)?;
    worst.map_or(Ok(()), Err)
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let flags = vec![
        ("data", a.data),
        ("response-cols", a.response_cols),
        ("predictor-cols", a.predictor_cols),
        ("synthetic", a.synthetic),
        ("seed", a.seed),
        ("family", a.family),
        ("prior", a.prior),
        ("weight", a.weight),
        ("epsilon", a.epsilon),
        ("grid", a.grid),
        ("k-star", a.k_star),
        ("out", a.out),
    ];
    let s = Settings::resolve(&flags, a.config.as_deref())?;

    let prior = parse_prior(s.get("prior").unwrap_or("approx"))?;
    let weight = parse_weight(&s, prior)?;
    let grid = parse_grid(s.get("grid").unwrap_or("100:10;200:20;400:40;800:80;1600:160"))?;
    let seed: u64 = s.parse_or("seed", 1)?;
    let k_star: usize = s.parse_or("k-star", 5)?;
    if k_star < 2 {
        return Err(CliError::config("'k-star' must be at least 2"));
    }
    let out = PathBuf::from(s.require("out")?);

    // The synthetic design also yields the true model, hence the
    // noncentrality table.
    let (data, true_model) = match (s.get("synthetic"), s.get("data")) {
        (Some(_), Some(_)) => {
            return Err(CliError::config("'synthetic' and 'data' are mutually exclusive"))
        }
        (Some(spec), None) => {
            let (n, p) = parse_pair("synthetic", spec)?;
            let tm = default_true_model(p)?;
            if k_star != tm.k_star() {
                return Err(CliError::config(format!(
                    "'k-star' must be {} for synthetic data",
                    tm.k_star()
                )));
            }
            let mut rng = replication_rng(seed, 0);
            let x = gen_design(n, 10, &mut rng);
            let y = gen_response(&x, &tm, &ErrorDist::Gaussian, &mut rng)?;
            (Dataset::new(y, x).map_err(|e| CliError::config(format!("'synthetic': {e}")))?, Some(tm))
        }
        (None, Some(path)) => {
            let table = Table::read(Path::new(path))?;
            let data = table.dataset(s.require("response-cols")?, s.require("predictor-cols")?)?;
            (data, None)
        }
        (None, None) => return Err(CliError::config("missing required setting 'data' (or 'synthetic')")),
    };
    let family = parse_family(s.get("family").unwrap_or("nested"), data.k())?;
    let names = data.col_names().to_vec();
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::config(format!("'out': cannot create {}: {e}", out.display())))?;

    let design = check_design_assumption(&data, &family)?;
    let mut w = csv_writer(Some(&out.join("design.csv")))?;
    write_record(&mut w, ["model", "k_j", "logdet", "flagged"])?;
    for r in &design.rows {
        write_record(
            &mut w,
            [
                r.model.label(&names),
                r.model.k_j().to_string(),
                fmt_real(r.logdet),
                u8::from(r.flagged).to_string(),
            ],
        )?;
    }
    finish(w)?;

    // Underspecified comparison: one column short of j*, noncentrality rank
    // taken from the synthetic design when available.
    let under_gamma = match &true_model {
        Some(tm) => {
            let j = ModelIndex::prefix(k_star - 1)?;
            noncentrality(data.x(), tm, &j)?.gamma_j
        }
        None => 1,
    };
    let comparisons = [(k_star - 1, under_gamma), (k_star + 1, 0)];
    let mut w = csv_writer(Some(&out.join("conditions.csv")))?;
    write_record(
        &mut w,
        ["condition", "k_star", "k_j", "gamma_j", "n", "p", "log_weight_ratio", "value", "threshold", "holds", "applicable"],
    )?;
    let mut verdicts = Vec::new();
    for (k_j, gamma) in comparisons {
        let rep = check_weight_conditions(&weight, &grid, k_star, k_j, gamma)?;
        for r in &rep.rows {
            write_record(
                &mut w,
                [
                    r.condition.name().to_string(),
                    k_star.to_string(),
                    k_j.to_string(),
                    gamma.to_string(),
                    r.n.to_string(),
                    r.p.to_string(),
                    fmt_real(r.log_weight_ratio),
                    fmt_real(r.value),
                    fmt_real(r.threshold),
                    u8::from(r.holds).to_string(),
                    u8::from(r.applicable).to_string(),
                ],
            )?;
        }
        for c in Condition::ALL {
            if c.applies_to(k_star, k_j, gamma) {
                verdicts.push((format!("{}(k_j={k_j})", c.name()), rep.verdict(c).name()));
            }
        }
    }
    finish(w)?;

    if let Some(tm) = &true_model {
        let mut w = csv_writer(Some(&out.join("noncentrality.csv")))?;
        write_record(&mut w, ["model", "k_j", "gamma_j", "lambda_j", "scaled"])?;
        for m in enumerate(&family, data.k())? {
            let d = noncentrality(data.x(), tm, &m)?;
            write_record(
                &mut w,
                [
                    m.label(&names),
                    m.k_j().to_string(),
                    d.gamma_j.to_string(),
                    fmt_real(d.lambda_j),
                    fmt_real(d.scaled),
                ],
            )?;
        }
        finish(w)?;
    }

    let mut w = csv_writer(Some(&out.join("summary.csv")))?;
    write_record(&mut w, ["key", "value"])?;
    write_record(&mut w, ["weight".to_string(), weight.to_string()])?;
    write_record(&mut w, ["lambda_min".to_string(), fmt_real(design.lambda_min)])?;
    write_record(&mut w, ["flagged_models".to_string(), design.flagged().count().to_string()])?;
    for (k, v) in &verdicts {
        write_record(&mut w, [k.as_str(), *v])?;
    }
    finish(w)?;

    for r in design.flagged() {
        println!("flagged: {} (log det {})", r.model.label(&names), r.logdet);
    }
    for (k, v) in &verdicts {
        println!("{k}: {v}");
    }
    Ok(())
}

fn parse_prior(s: &str) -> Result<PriorKind, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "normal" => Ok(PriorKind::Normal),
        "uniform" => Ok(PriorKind::Uniform),
        "approx" => Ok(PriorKind::Approx),
        _ => Err(CliError::config(format!(
            "invalid value '{s}' for 'prior' (expected normal, uniform or approx)"
        ))),
    }
}

fn parse_weight(s: &Settings, prior: PriorKind) -> Result<WeightScheme, CliError> {
    let epsilon: f64 = s.parse_or("epsilon", DEFAULT_EPSILON)?;
    let scheme = match s.get("weight").unwrap_or("ratio") {
        "ratio" => WeightScheme::RatioPower { epsilon },
        "inverse" => WeightScheme::InversePower { epsilon },
        "beta-posterior" => WeightScheme::beta_posterior(epsilon, prior),
        other => {
            return Err(CliError::config(format!(
                "invalid value '{other}' for 'weight' (expected ratio, inverse or beta-posterior)"
            )))
        }
    };
    scheme
        .validate()
        .map_err(|e| CliError::config(format!("'epsilon': {e}")))?;
    Ok(scheme)
}

/// The `criteria` list, with `prior`, `weight`, `epsilon` and `gic-beta`
/// applied. Defaults to AIC, AICc, BIC, GIC and MPIC_Approx.
fn parse_criteria(s: &Settings) -> Result<Vec<CriterionSpec>, CliError> {
    let default_prior = parse_prior(s.get("prior").unwrap_or("approx"))?;
    let beta = match s.get("gic-beta").map(str::trim) {
        None | Some("auto") => GicBeta::Auto,
        Some(v) => GicBeta::Fixed(s.parse::<f64>("gic-beta")?.filter(|b| b.is_finite()).ok_or_else(
            || CliError::config(format!("invalid value '{v}' for 'gic-beta'")),
        )?),
    };
    let list = s.get("criteria").unwrap_or("aic,aicc,bic,gic,mpic-approx");
    let tokens = split_list(list);
    if tokens.is_empty() {
        return Err(CliError::config("'criteria' is empty"));
    }
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let mpic = |prior| -> Result<CriterionSpec, CliError> {
            Ok(CriterionSpec::Mpic {
                prior,
                weight: parse_weight(s, prior)?,
            })
        };
        let spec = match tok.to_ascii_lowercase().as_str() {
            "aic" => CriterionSpec::Aic,
            "aicc" => CriterionSpec::Aicc,
            "bic" => CriterionSpec::Bic,
            "gic" => CriterionSpec::Gic { beta },
            "mpic" => mpic(default_prior)?,
            "mpic-approx" => mpic(PriorKind::Approx)?,
            "mpic-normal" => mpic(PriorKind::Normal)?,
            "mpic-uniform" => mpic(PriorKind::Uniform)?,
            _ => {
                return Err(CliError::config(format!(
                    "invalid value '{tok}' in 'criteria' (expected aic, aicc, bic, gic, mpic, \
                     mpic-approx, mpic-normal or mpic-uniform)"
                )))
            }
        };
        if !out.contains(&spec) {
            out.push(spec);
        }
    }
    Ok(out)
}

/// `nested`, `nested:<k>`, `forced:<idx-list>` (the remaining columns are
/// free) or `explicit:<file>` (one model per line, indices separated by
/// commas or spaces, `#` comments).
fn parse_family(spec: &str, k: usize) -> Result<CandidateFamily, CliError> {
    let bad = |why: String| CliError::config(format!("invalid value '{spec}' for 'family': {why}"));
    let parse_idx = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| bad(format!("'{t}' is not a column index")))
            .and_then(|i| {
                if i < k {
                    Ok(i)
                } else {
                    Err(bad(format!("column {i} out of range for {k} predictors")))
                }
            })
    };
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let family = match kind.trim() {
        "nested" if arg.is_empty() => CandidateFamily::Nested { k_max: k },
        "nested" => {
            let k_max: usize = arg.trim().parse().map_err(|_| bad("expected nested:<k>".into()))?;
            if k_max == 0 || k_max > k {
                return Err(bad(format!("k must lie in 1..={k}")));
            }
            CandidateFamily::Nested { k_max }
        }
        "forced" => {
            let forced = split_list(arg)
                .into_iter()
                .map(parse_idx)
                .collect::<Result<Vec<_>, _>>()?;
            let free = (0..k).filter(|c| !forced.contains(c)).collect();
            CandidateFamily::ForcedSubsets { forced, free }
        }
        "explicit" => {
            let text = std::fs::read_to_string(arg.trim())
                .map_err(|e| bad(format!("cannot read {}: {e}", arg.trim())))?;
            let mut models = Vec::new();
            for line in text.lines() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let idx = line
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(parse_idx)
                    .collect::<Result<Vec<_>, _>>()?;
                models.push(ModelIndex::new(idx).map_err(|e| bad(e.to_string()))?);
            }
            if models.is_empty() {
                return Err(bad("no models listed".into()));
            }
            CandidateFamily::Explicit { models }
        }
        _ => return Err(bad("expected nested, nested:<k>, forced:<idx-list> or explicit:<file>".into())),
    };
    enumerate(&family, k).map_err(|e| bad(e.to_string()))?;
    Ok(family)
}

fn parse_pair(key: &str, s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::config(format!("invalid value '{s}' for '{key}' (expected n:p)"));
    let (n, p) = s.trim().split_once(':').ok_or_else(bad)?;
    let n = n.trim().parse().map_err(|_| bad())?;
    let p = p.trim().parse().map_err(|_| bad())?;
    if p == 0 || n == 0 {
        return Err(bad());
    }
    Ok((n, p))
}

fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let grid = s
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_pair("grid", t))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(CliError::config("'grid' is empty"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_specs() {
        assert_eq!(parse_family("nested", 3).unwrap(), CandidateFamily::Nested { k_max: 3 });
        assert_eq!(parse_family("nested:2", 3).unwrap(), CandidateFamily::Nested { k_max: 2 });
        assert_eq!(
            parse_family("forced:0", 3).unwrap(),
            CandidateFamily::ForcedSubsets { forced: vec![0], free: vec![1, 2] }
        );
        let err = parse_family("forced:7", 3).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("'family'"));
        assert!(parse_family("lasso", 3).is_err());
    }

    #[test]
    fn grid_and_criteria() {
        assert_eq!(parse_grid("100:2; 200:4").unwrap(), vec![(100, 2), (200, 4)]);
        assert!(parse_grid("100").unwrap_err().message.contains("'grid'"));

        let s = Settings::resolve(
            &[
                ("criteria", Some("AIC,mpic,gic".into())),
                ("prior", Some("normal".into())),
                ("weight", None),
                ("epsilon", Some("1".into())),
                ("gic-beta", Some("2".into())),
            ],
            None,
        )
        .unwrap();
        let c = parse_criteria(&s).unwrap();
        assert_eq!(c[0], CriterionSpec::Aic);
        assert_eq!(
            c[1],
            CriterionSpec::Mpic {
                prior: PriorKind::Normal,
                weight: WeightScheme::RatioPower { epsilon: 1.0 }
            }
        );
        assert_eq!(c[2], CriterionSpec::Gic { beta: GicBeta::Fixed(2.0) });
    }

    #[test]
    fn bad_criterion_names_the_key() {
        let s = Settings::resolve(&[("criteria", Some("cp".into()))], None).unwrap();
        let err = parse_criteria(&s).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("'criteria'"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::DegenerateResiduals(0.0)).code, 3);
        assert_eq!(CliError::from(Error::NoScoreableModel).code, 4);
        assert_eq!(CliError::from(Error::InvalidConfig("x".into())).code, 2);
    }
}
