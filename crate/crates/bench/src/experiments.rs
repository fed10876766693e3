//! Replication drivers for the evaluation, learning and sales-regime
//! sweeps, plus dataset generation and external-CSV evaluation.
//!
//! Each replication draws its own environment (fresh surface weights) from a
//! stream seeded by `(seed, tag, n, shift index, rep)`, so results do not
//! depend on scheduling. Within a replication every demand mode and method
//! sees the same data, so demand-free methods repeat across modes.

use std::str::FromStr;

use pricing_core::demand::{blend_alpha, fit_tlearner, DemandModel};
use pricing_core::losses::{estimate_policy_value, record_losses, Estimator};
use pricing_core::policy::{
    optimize_policy, select_c_evaluation, select_c_optimization, target_policy_for_evaluation, DemandSource,
    GreedyPricePolicy, Policy,
};
use pricing_core::synthgen::{true_policy_value, Environment};
use pricing_core::Dataset;
use rayon::prelude::*;

use crate::config::{stream_rng, stream_seed, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::results::{aggregate, ResultRow};

const TAG_EVAL: u64 = 1;
const TAG_LEARN: u64 = 2;
const TAG_SALES_EVAL: u64 = 3;
const TAG_SALES_LEARN: u64 = 4;
pub const TAG_GEN: u64 = 5;

/// A method column: a fixed estimator, or the switching estimator with a
/// cross-validated weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Fixed(Estimator),
    Cmix,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Fixed(e) => e.to_string(),
            Method::Cmix => "cmix".into(),
        }
    }

    pub fn needs_demand(&self) -> bool {
        match self {
            Method::Fixed(e) => e.needs_demand(),
            Method::Cmix => true,
        }
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("cmix") {
            return Ok(Method::Cmix);
        }
        Ok(Method::Fixed(Estimator::from_str(s)?))
    }
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    if names.is_empty() {
        return Err(BenchError::Config("no estimators configured".into()));
    }
    names.iter().map(|s| s.parse()).collect()
}

/// Source of the plug-in demand for MV-type methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DemandMode {
    /// T-learner fitted on the logged data.
    Fitted,
    /// `α · truth + (1 − α) · 0.01`.
    Alpha(f64),
}

impl DemandMode {
    pub fn label(&self) -> String {
        match self {
            DemandMode::Fitted => "fitted".into(),
            DemandMode::Alpha(a) => a.to_string(),
        }
    }
}

pub fn demand_modes(cfg: &ExperimentConfig) -> Vec<DemandMode> {
    let mut modes: Vec<DemandMode> = cfg.alpha_grid.iter().map(|a| DemandMode::Alpha(*a)).collect();
    if cfg.fitted_demand {
        modes.push(DemandMode::Fitted);
    }
    modes
}

/// Columns shared by every row of one replication.
#[derive(Debug, Clone)]
struct RowContext {
    experiment: String,
    n: usize,
    shift: f64,
    rep: usize,
    seed: u64,
    hash: String,
}

impl RowContext {
    fn row(&self, method: &str, alpha: &str, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            experiment: self.experiment.clone(),
            method: method.into(),
            n: self.n,
            alpha: alpha.into(),
            shift: self.shift,
            rep: self.rep.to_string(),
            metric: metric.into(),
            value,
            stderr: None,
            seed: self.seed,
            config_hash: self.hash.clone(),
        }
    }
}

/// Demand model for one mode, built only when some method needs it.
fn build_demand<'a>(
    mode: DemandMode,
    env: &'a Environment,
    data: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn DemandModel + 'a>> {
    Ok(match mode {
        DemandMode::Fitted => Box::new(fit_tlearner(data, &cfg.logistic_config())?),
        DemandMode::Alpha(a) => Box::new(blend_alpha(env, a)?),
    })
}

fn demand_source<'a>(mode: DemandMode, model: &'a dyn DemandModel, cfg: &ExperimentConfig) -> DemandSource<'a> {
    match mode {
        DemandMode::Fitted => DemandSource::Fitted(cfg.logistic_config()),
        DemandMode::Alpha(_) => DemandSource::Fixed(model),
    }
}

/// One evaluation replication: squared error of each method's estimate of
/// the target policy's realized mean loss.
#[allow(clippy::too_many_arguments)]
fn eval_rep(
    cfg: &ExperimentConfig,
    experiment: &str,
    tag: u64,
    n: usize,
    shift_index: usize,
    shift: f64,
    rep: usize,
    methods: &[Method],
    modes: &[DemandMode],
) -> Result<Vec<ResultRow>> {
    let labels = [tag, n as u64, shift_index as u64, rep as u64];
    let seed = stream_seed(cfg.seed, &labels);
    let mut rng = stream_rng(cfg.seed, &labels);
    let env = Environment::sample(&cfg.gen_config(shift), &mut rng)?;
    let (xs, ys) = env.full_information(cfg.target_train_size, &mut rng);
    let target = target_policy_for_evaluation(&xs, &ys, &env.ladder, &cfg.logistic_config())?;
    let data = env.generate(n, &mut rng)?;
    let truth = true_policy_value(&data, &target)?;
    let ctx = RowContext {
        experiment: experiment.into(),
        n,
        shift,
        rep,
        seed,
        hash: cfg.hash(),
    };
    let mut rows = vec![ctx.row("truth", "", "policy_loss", truth)];
    let any_demand = methods.iter().any(Method::needs_demand);
    for mode in modes {
        let model = if any_demand {
            Some(build_demand(*mode, &env, &data, cfg)?)
        } else {
            None
        };
        let alpha = mode.label();
        for method in methods {
            let estimate = match method {
                Method::Fixed(e) => estimate_policy_value(&data, &target, *e, model.as_deref())?,
                Method::Cmix => {
                    let m = model.as_deref().expect("cmix needs demand");
                    let src = demand_source(*mode, m, cfg);
                    let c = select_c_evaluation(&data, &target, &src, &cfg.select_c_config(seed))?;
                    rows.push(ctx.row("cmix", &alpha, "chosen_c", c.value()));
                    estimate_policy_value(&data, &target, Estimator::Switching(c), Some(m))?
                }
            };
            rows.push(ctx.row(&method.name(), &alpha, "sq_error", (estimate - truth).powi(2)));
        }
    }
    Ok(rows)
}

/// One learning replication: expected reward of each trained policy on a
/// fresh test sample.
#[allow(clippy::too_many_arguments)]
fn learn_rep(
    cfg: &ExperimentConfig,
    experiment: &str,
    tag: u64,
    n: usize,
    shift_index: usize,
    shift: f64,
    rep: usize,
    methods: &[Method],
    modes: &[DemandMode],
) -> Result<Vec<ResultRow>> {
    let labels = [tag, n as u64, shift_index as u64, rep as u64];
    let seed = stream_seed(cfg.seed, &labels);
    let mut rng = stream_rng(cfg.seed, &labels);
    let env = Environment::sample(&cfg.gen_config(shift), &mut rng)?;
    let data = env.generate(n, &mut rng)?;
    let test: Vec<Vec<f64>> = (0..cfg.test_size).map(|_| env.sample_features(&mut rng)).collect();
    let train = cfg.train_config();
    let ctx = RowContext {
        experiment: experiment.into(),
        n,
        shift,
        rep,
        seed,
        hash: cfg.hash(),
    };
    let reward = |p: &dyn Policy| -> Result<f64> { Ok(-env.exact_policy_value(p, &test)?) };
    let oracle = GreedyPricePolicy {
        demand: &env,
        ladder: env.ladder.clone(),
    };
    let mut rows = vec![ctx.row("oracle", "", "reward", reward(&oracle)?)];
    let any_demand = methods.iter().any(Method::needs_demand);
    for mode in modes {
        let model = if any_demand {
            Some(build_demand(*mode, &env, &data, cfg)?)
        } else {
            None
        };
        let alpha = mode.label();
        for method in methods {
            let est = match method {
                Method::Fixed(e) => *e,
                Method::Cmix => {
                    let m = model.as_deref().expect("cmix needs demand");
                    let src = demand_source(*mode, m, cfg);
                    let c = select_c_optimization(&data, &src, &cfg.select_c_config(seed), &train)?;
                    rows.push(ctx.row("cmix", &alpha, "chosen_c", c.value()));
                    Estimator::Switching(c)
                }
            };
            let trained = optimize_policy(&data, est, model.as_deref(), &train)?;
            rows.push(ctx.row(&method.name(), &alpha, "reward", reward(&trained.policy)?));
        }
    }
    Ok(rows)
}

type RepFn = fn(&ExperimentConfig, &str, u64, usize, usize, f64, usize, &[Method], &[DemandMode]) -> Result<Vec<ResultRow>>;

#[allow(clippy::too_many_arguments)]
fn run_reps(
    cfg: &ExperimentConfig,
    experiment: &str,
    tag: u64,
    n: usize,
    shift_index: usize,
    shift: f64,
    reps: usize,
    methods: &[Method],
    modes: &[DemandMode],
    f: RepFn,
) -> Result<Vec<ResultRow>> {
    let per_rep: Vec<Result<Vec<ResultRow>>> = (0..reps)
        .into_par_iter()
        .map(|rep| f(cfg, experiment, tag, n, shift_index, shift, rep, methods, modes))
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    Ok(rows)
}

fn finish(mut rows: Vec<ResultRow>, cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let mut agg = aggregate(&rows, cfg.seed);
    let hash = cfg.hash();
    agg.iter_mut().for_each(|r| r.config_hash = hash.clone());
    rows.extend(agg);
    rows
}

/// Evaluation MSE over `n_grid × demand modes`.
pub fn eval_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let methods = parse_methods(&cfg.estimators)?;
    let modes = demand_modes(cfg);
    if modes.is_empty() && methods.iter().any(Method::needs_demand) {
        return Err(BenchError::Config("no demand mode: set alpha_grid or fitted_demand".into()));
    }
    let modes = if modes.is_empty() { vec![DemandMode::Fitted] } else { modes };
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        log::info!("eval-sweep n = {n}, {} reps", cfg.reps);
        rows.extend(run_reps(cfg, &cfg.experiment, TAG_EVAL, n, 0, cfg.shift, cfg.reps, &methods, &modes, eval_rep)?);
    }
    Ok(finish(rows, cfg))
}

/// Test reward of trained policies over `n_grid × demand modes`.
pub fn learn_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let methods = parse_methods(&cfg.estimators)?;
    let modes = demand_modes(cfg);
    if modes.is_empty() && methods.iter().any(Method::needs_demand) {
        return Err(BenchError::Config("no demand mode: set alpha_grid or fitted_demand".into()));
    }
    let modes = if modes.is_empty() { vec![DemandMode::Fitted] } else { modes };
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        log::info!("learn-sweep n = {n}, {} reps", cfg.reps);
        rows.extend(run_reps(cfg, &cfg.experiment, TAG_LEARN, n, 0, cfg.shift, cfg.reps, &methods, &modes, learn_rep)?);
    }
    Ok(finish(rows, cfg))
}

/// Evaluation and learning at each logit shift in `shift_grid`, sample
/// size `n`.
pub fn sales_regime(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let methods = parse_methods(&cfg.estimators)?;
    let modes = vec![DemandMode::Fitted];
    let eval_name = format!("{}-eval", cfg.experiment);
    let learn_name = format!("{}-learn", cfg.experiment);
    let mut rows = Vec::new();
    for (i, &shift) in cfg.shift_grid.iter().enumerate() {
        log::info!("sales-regime shift = {shift}");
        rows.extend(run_reps(cfg, &eval_name, TAG_SALES_EVAL, cfg.n, i, shift, cfg.reps, &methods, &modes, eval_rep)?);
        rows.extend(run_reps(
            cfg,
            &learn_name,
            TAG_SALES_LEARN,
            cfg.n,
            i,
            shift,
            cfg.learn_reps,
            &methods,
            &modes,
            learn_rep,
        )?);
    }
    Ok(finish(rows, cfg))
}

/// A synthetic logged dataset of `cfg.n` records at logit shift `cfg.shift`.
pub fn generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut rng = stream_rng(cfg.seed, &[TAG_GEN]);
    let env = Environment::sample(&cfg.gen_config(cfg.shift), &mut rng)?;
    Ok(env.generate(cfg.n, &mut rng)?)
}

/// Per-estimator estimate on an external dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvEstimate {
    pub method: String,
    /// Estimated expected profit per customer.
    pub value: f64,
    /// Standard error from the per-record loss spread.
    pub stderr: f64,
    /// Sample variance of the per-record losses.
    pub loss_variance: f64,
    pub chosen_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvReport {
    pub rows: usize,
    pub min_propensity: f64,
    pub estimates: Vec<CsvEstimate>,
}

/// Evaluates `policy` on a logged dataset with every configured estimator.
/// MV-type methods use a T-learner fitted on the same data; the switching
/// weight is chosen by cross-fitted variance.
pub fn evaluate_dataset(data: &Dataset, policy: &dyn Policy, cfg: &ExperimentConfig) -> Result<CsvReport> {
    let methods = parse_methods(&cfg.estimators)?;
    let model = if methods.iter().any(Method::needs_demand) {
        Some(fit_tlearner(data, &cfg.logistic_config())?)
    } else {
        None
    };
    let demand = model.as_ref().map(|m| m as &dyn DemandModel);
    let mut estimates = Vec::new();
    for method in &methods {
        let (est, chosen_c) = match method {
            Method::Fixed(e) => (*e, None),
            Method::Cmix => {
                let src = DemandSource::Fitted(cfg.logistic_config());
                let c = select_c_evaluation(data, policy, &src, &cfg.select_c_config(cfg.seed))?;
                (Estimator::Switching(c), Some(c.value()))
            }
        };
        let losses = record_losses(data, policy, est, demand)?;
        let s = crate::results::summarize(&losses);
        estimates.push(CsvEstimate {
            method: method.name(),
            value: -s.mean,
            stderr: s.stderr,
            loss_variance: s.stderr * s.stderr * s.count as f64,
            chosen_c,
        });
    }
    let min_propensity = data
        .propensities
        .iter()
        .flat_map(|p| p.as_slice().iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(CsvReport {
        rows: data.len(),
        min_propensity,
        estimates,
    })
}

pub fn csv_report_rows(report: &CsvReport, cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let ctx = RowContext {
        experiment: cfg.experiment.clone(),
        n: report.rows,
        shift: 0.0,
        rep: 0,
        seed: cfg.seed,
        hash: cfg.hash(),
    };
    let mut rows = vec![ctx.row("data", "", "min_propensity", report.min_propensity)];
    for e in &report.estimates {
        let alpha = if e.chosen_c.is_some() || e.method.starts_with("mv") || e.method.starts_with("dr") {
            "fitted"
        } else {
            ""
        };
        let mut r = ctx.row(&e.method, alpha, "policy_value", e.value);
        r.stderr = Some(e.stderr);
        rows.push(r);
        rows.push(ctx.row(&e.method, alpha, "loss_variance", e.loss_variance));
        if let Some(c) = e.chosen_c {
            rows.push(ctx.row(&e.method, alpha, "chosen_c", c));
        }
    }
    rows
}
