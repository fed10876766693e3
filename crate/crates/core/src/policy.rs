//! Pricing policies, empirical risk minimization against any corrupted loss,
//! and cross-validated choice of the switching weight.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::demand::{fit_multilabel, fit_tlearner, DemandModel, LogisticConfig, TLearner};
use crate::error::{Error, Result};
use crate::estimators::SwitchingWeight;
use crate::ladder::{Dataset, PolicyDist, PriceLadder};
use crate::losses::{losses_from_coefficients, record_coefficients, Estimator};

pub trait Policy: Send + Sync {
    fn ladder_size(&self) -> usize;
    fn probs(&self, x: &[f64]) -> Result<PolicyDist>;
}

/// Ignores the features.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPolicy {
    dist: PolicyDist,
}

impl FixedPolicy {
    pub fn new(dist: PolicyDist) -> Self {
        FixedPolicy { dist }
    }
}

impl Policy for FixedPolicy {
    fn ladder_size(&self) -> usize {
        self.dist.len()
    }

    fn probs(&self, _x: &[f64]) -> Result<PolicyDist> {
        Ok(self.dist.clone())
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax over per-price linear scores; `theta` is `m x (d+1)` row-major
/// with the bias last in each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSoftmaxPolicy {
    pub m: usize,
    pub d: usize,
    pub theta: Vec<f64>,
}

impl LinearSoftmaxPolicy {
    pub fn zeros(m: usize, d: usize) -> Self {
        LinearSoftmaxPolicy {
            m,
            d,
            theta: vec![0.0; m * (d + 1)],
        }
    }

    pub fn from_theta(m: usize, d: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != m * (d + 1) {
            return Err(Error::dims("LinearSoftmaxPolicy theta", m * (d + 1), theta.len()));
        }
        Ok(LinearSoftmaxPolicy { m, d, theta })
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let w = self.d + 1;
        (0..self.m)
            .map(|k| {
                let row = &self.theta[k * w..(k + 1) * w];
                row[self.d] + x.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Raw softmax probabilities (no simplex validation).
    pub fn raw_probs(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }
}

impl Policy for LinearSoftmaxPolicy {
    fn ladder_size(&self) -> usize {
        self.m
    }

    fn probs(&self, x: &[f64]) -> Result<PolicyDist> {
        if x.len() != self.d {
            return Err(Error::dims("policy features", self.d, x.len()));
        }
        PolicyDist::new(self.raw_probs(x))
    }
}

pub fn policy_probs(policy: &LinearSoftmaxPolicy, x: &[f64]) -> Result<PolicyDist> {
    policy.probs(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Standard deviation of the initial weights; 0 starts from uniform prices.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            max_iters: 2000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_scale: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// Mean policy loss `(1/n) Σ_i Σ_k π_k(x_i) b_ik` and its gradient in `theta`.
pub fn objective_and_gradient(
    policy: &LinearSoftmaxPolicy,
    features: &[&[f64]],
    coefs: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let (m, d) = (policy.m, policy.d);
    let w = d + 1;
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; m * w];
    for (x, b) in features.iter().zip(coefs) {
        let pi = policy.raw_probs(x);
        let mean: f64 = pi.iter().zip(b).map(|(p, c)| p * c).sum();
        loss += mean;
        for k in 0..m {
            let g = pi[k] * (b[k] - mean);
            if g == 0.0 {
                continue;
            }
            let row = &mut grad[k * w..(k + 1) * w];
            for (r, a) in row.iter_mut().zip(x.iter()) {
                *r += g * a;
            }
            row[d] += g;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: LinearSoftmaxPolicy,
    /// Training loss before each update, plus the final loss.
    pub trajectory: Vec<f64>,
}

const DESCENT_WINDOW: usize = 200;

/// Minimizes the mean corrupted loss given per-record coefficients.
pub fn optimize_from_coefficients(
    features: &[&[f64]],
    coefs: &[Vec<f64>],
    m: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = features[0].len();
    let mut policy = LinearSoftmaxPolicy::zeros(m, d);
    if cfg.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.init_scale)
            .map_err(|e| Error::InvalidArgument(format!("init scale: {e}")))?;
        policy.theta.iter_mut().for_each(|t| *t = normal.sample(&mut rng));
    }
    let mut adam = Adam::new(
        policy.theta.len(),
        AdamConfig {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        },
    );
    let mut trajectory = Vec::with_capacity(cfg.max_iters + 1);
    for it in 0..=cfg.max_iters {
        let (loss, grad) = objective_and_gradient(&policy, features, coefs);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("training loss {loss} at iteration {it}")));
        }
        if it >= DESCENT_WINDOW && loss > trajectory[it - DESCENT_WINDOW] + 1e-6 {
            log::warn!(
                "training loss rose from {} to {loss} over {DESCENT_WINDOW} iterations (iteration {it})",
                trajectory[it - DESCENT_WINDOW]
            );
        }
        trajectory.push(loss);
        if it < cfg.max_iters {
            adam.step(&mut policy.theta, &grad);
        }
    }
    Ok(TrainOutcome { policy, trajectory })
}

/// Empirical risk minimization of the chosen corrupted loss over linear
/// softmax policies.
pub fn optimize_policy(
    data: &Dataset,
    est: Estimator,
    demand: Option<&dyn DemandModel>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let coefs = record_coefficients(data, est, demand)?;
    let features: Vec<&[f64]> = data.records.iter().map(|r| r.features.as_slice()).collect();
    optimize_from_coefficients(&features, &coefs, data.m(), cfg)
}

/// Index of the largest `(p_j − C) ĝ_j`, ties going to the lower index.
pub fn greedy_rung(ladder: &PriceLadder, g: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, gj) in g.iter().enumerate() {
        let v = ladder.margin(j) * gj;
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    best
}

/// Deterministic policy offering the price with the highest predicted profit.
#[derive(Debug, Clone)]
pub struct GreedyPricePolicy<D> {
    pub demand: D,
    pub ladder: PriceLadder,
}

impl<D: DemandModel> Policy for GreedyPricePolicy<D> {
    fn ladder_size(&self) -> usize {
        self.ladder.len()
    }

    fn probs(&self, x: &[f64]) -> Result<PolicyDist> {
        let g = self.demand.sale_probs(x);
        PolicyDist::deterministic(greedy_rung(&self.ladder, &g), self.ladder.len())
    }
}

/// Target policy for evaluation experiments: a per-price logistic model
/// trained on customers whose outcome is known at every price, followed by
/// the greedy price choice.
pub fn target_policy_for_evaluation(
    features: &[Vec<f64>],
    labels: &[Vec<bool>],
    ladder: &PriceLadder,
    cfg: &LogisticConfig,
) -> Result<GreedyPricePolicy<TLearner>> {
    let demand = fit_multilabel(features, labels, ladder.len(), cfg)?;
    Ok(GreedyPricePolicy {
        demand,
        ladder: ladder.clone(),
    })
}

/// Where `R_MV`'s plug-in demand comes from during cross validation.
pub enum DemandSource<'a> {
    /// A model fixed in advance (e.g. a blended synthetic truth).
    Fixed(&'a dyn DemandModel),
    /// Refit a T-learner on each training fold.
    Fitted(LogisticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectCConfig {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SelectCConfig {
    fn default() -> Self {
        SelectCConfig {
            grid: default_c_grid(),
            folds: 5,
            seed: 0,
        }
    }
}

/// Ten evenly spaced values from 0 to 1.
pub fn default_c_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 9.0).collect()
}

fn validate_grid(grid: &[f64]) -> Result<Vec<SwitchingWeight>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty switching-weight grid".into()));
    }
    grid.iter().map(|c| SwitchingWeight::new(*c)).collect()
}

/// Shuffled fold assignment: `folds[i]` lists the held-out rows of fold `i`.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = k.clamp(1, n.max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % k].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

fn complement(n: usize, held: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    held.iter().for_each(|i| mask[*i] = false);
    (0..n).filter(|i| mask[*i]).collect()
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Out-of-fold per-record `(MV, Robust)` losses of `policy`.
pub fn cross_fitted_losses(
    data: &Dataset,
    policy: &dyn Policy,
    demand: &DemandSource<'_>,
    folds: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let robust = losses_from_coefficients(data, policy, &record_coefficients(data, Estimator::Robust, None)?)?;
    let mv = match demand {
        DemandSource::Fixed(model) => {
            let coefs = record_coefficients(data, Estimator::Mv, Some(*model))?;
            losses_from_coefficients(data, policy, &coefs)?
        }
        DemandSource::Fitted(cfg) => {
            let mut mv = vec![0.0; n];
            for held in fold_indices(n, folds, seed) {
                let train = data.subset(&complement(n, &held));
                let test = data.subset(&held);
                let model = fit_tlearner(&train, cfg)?;
                let coefs = record_coefficients(&test, Estimator::Mv, Some(&model))?;
                for (i, l) in held.iter().zip(losses_from_coefficients(&test, policy, &coefs)?) {
                    mv[*i] = l;
                }
            }
            mv
        }
    };
    Ok((mv, robust))
}

/// Evaluation mode: the grid value whose switching loss has the smallest
/// empirical variance across out-of-fold records. Ties go to the earlier
/// grid entry.
pub fn select_c_evaluation(
    data: &Dataset,
    policy: &dyn Policy,
    demand: &DemandSource<'_>,
    cfg: &SelectCConfig,
) -> Result<SwitchingWeight> {
    let grid = validate_grid(&cfg.grid)?;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let (mv, rob) = cross_fitted_losses(data, policy, demand, cfg.folds, cfg.seed)?;
    Ok(argmin_variance(&mv, &rob, &grid))
}

pub(crate) fn argmin_variance(mv: &[f64], rob: &[f64], grid: &[SwitchingWeight]) -> SwitchingWeight {
    let mut best = grid[0];
    let mut best_var = f64::INFINITY;
    let mut mixed = vec![0.0; mv.len()];
    for c in grid {
        let cv = c.value();
        for (out, (a, b)) in mixed.iter_mut().zip(mv.iter().zip(rob)) {
            *out = cv * a + (1.0 - cv) * b;
        }
        let v = population_variance(&mixed);
        if v < best_var {
            best = *c;
            best_var = v;
        }
    }
    best
}

/// Optimization mode: for each grid value, train on `K − 1` folds with the
/// switching loss and score the held-out fold with the demand-free robust
/// estimate; pick the value with the highest mean held-out reward.
pub fn select_c_optimization(
    data: &Dataset,
    demand: &DemandSource<'_>,
    cfg: &SelectCConfig,
    train: &TrainConfig,
) -> Result<SwitchingWeight> {
    let grid = validate_grid(&cfg.grid)?;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let m = data.m();
    let folds = fold_indices(n, cfg.folds, cfg.seed);
    // Fold-level pieces that do not depend on c.
    struct Fold {
        train: Dataset,
        mv: Vec<Vec<f64>>,
        rob: Vec<Vec<f64>>,
        test: Dataset,
        test_rob: Vec<Vec<f64>>,
    }
    let mut prepared = Vec::with_capacity(folds.len());
    for held in &folds {
        let tr = data.subset(&complement(n, held));
        let te = data.subset(held);
        if tr.is_empty() || te.is_empty() {
            continue;
        }
        let fitted;
        let model: &dyn DemandModel = match demand {
            DemandSource::Fixed(d) => *d,
            DemandSource::Fitted(c) => {
                fitted = fit_tlearner(&tr, c)?;
                &fitted
            }
        };
        prepared.push(Fold {
            mv: record_coefficients(&tr, Estimator::Mv, Some(model))?,
            rob: record_coefficients(&tr, Estimator::Robust, None)?,
            test_rob: record_coefficients(&te, Estimator::Robust, None)?,
            train: tr,
            test: te,
        });
    }
    if prepared.is_empty() {
        return Err(Error::InvalidArgument("too few records for cross validation".into()));
    }
    let mut best = grid[0];
    let mut best_loss = f64::INFINITY;
    for c in &grid {
        let cv = c.value();
        let mut total = 0.0;
        let mut count = 0usize;
        for fold in &prepared {
            let coefs: Vec<Vec<f64>> = fold
                .mv
                .iter()
                .zip(&fold.rob)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| cv * x + (1.0 - cv) * y).collect())
                .collect();
            let feats: Vec<&[f64]> = fold.train.records.iter().map(|r| r.features.as_slice()).collect();
            let trained = optimize_from_coefficients(&feats, &coefs, m, train)?;
            let losses = losses_from_coefficients(&fold.test, &trained.policy, &fold.test_rob)?;
            total += losses.iter().sum::<f64>();
            count += losses.len();
        }
        let mean = total / count as f64;
        if mean < best_loss {
            best = *c;
            best_loss = mean;
        }
    }
    Ok(best)
}
