//! Plug-in demand models: per-price sale probabilities `ĝ_j(x)` and the
//! outcome and valuation distributions derived from them.

use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::ladder::{Dataset, OutcomeDist, PriceLadder, Propensities, ValuationDist};

/// Predicted probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-4;

/// Sale probability of the uninformative model used when blending.
pub const NULL_DEMAND: f64 = 0.01;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Predicted sale probability at every ladder price.
pub trait DemandModel: Send + Sync {
    fn ladder_size(&self) -> usize;

    /// `ĝ_j(x)` for each rung, clamped.
    fn sale_probs(&self, x: &[f64]) -> Vec<f64>;
}

/// The same sale probabilities for every customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantDemand {
    probs: Vec<f64>,
}

impl ConstantDemand {
    pub fn new(probs: Vec<f64>) -> Self {
        ConstantDemand {
            probs: probs.into_iter().map(clamp_prob).collect(),
        }
    }
}

impl DemandModel for ConstantDemand {
    fn ladder_size(&self) -> usize {
        self.probs.len()
    }

    fn sale_probs(&self, _x: &[f64]) -> Vec<f64> {
        self.probs.clone()
    }
}

/// Logistic model `σ(w·x + b)`; the bias is the last weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticPredictor {
    pub weights: Vec<f64>,
}

impl LogisticPredictor {
    /// A predictor returning `p` (clamped) for every input of dimension `d`.
    pub fn constant(p: f64, d: usize) -> Self {
        let mut weights = vec![0.0; d + 1];
        weights[d] = logit(clamp_prob(p));
        LogisticPredictor { weights }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let d = self.feature_dim();
        debug_assert_eq!(x.len(), d);
        self.weights[d] + x.iter().zip(&self.weights[..d]).map(|(a, w)| a * w).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        clamp_prob(sigmoid(self.score(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    /// L2 penalty on the non-bias weights.
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the gradient's largest entry falls below this.
    pub grad_tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.05,
            l2: 1e-3,
            max_iters: 5000,
            grad_tol: 1e-6,
        }
    }
}

/// Mean log-loss (without the penalty) of `model` on `(xs, ys)`.
pub fn log_loss(model: &LogisticPredictor, xs: &[&[f64]], ys: &[bool]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let p = sigmoid(model.score(x)).clamp(1e-15, 1.0 - 1e-15);
            if *y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / xs.len() as f64
}

/// Fits one logistic regression by full-batch Adam on the penalized log-loss.
///
/// Constant labels (or an empty slice) give a constant predictor at the
/// clamped base rate, or at `fallback` when there is no data at all.
pub fn fit_logistic(
    xs: &[&[f64]],
    ys: &[bool],
    d: usize,
    fallback: f64,
    cfg: &LogisticConfig,
) -> Result<LogisticPredictor> {
    if xs.len() != ys.len() {
        return Err(Error::dims("fit_logistic", xs.len(), ys.len()));
    }
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::dims("fit_logistic features", d, x.len()));
    }
    let n = xs.len();
    if n == 0 {
        return Ok(LogisticPredictor::constant(fallback, d));
    }
    let positives = ys.iter().filter(|y| **y).count();
    if positives == 0 || positives == n {
        return Ok(LogisticPredictor::constant(positives as f64 / n as f64, d));
    }

    let mut w = vec![0.0; d + 1];
    w[d] = logit(positives as f64 / n as f64);
    let mut adam = Adam::new(
        d + 1,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut grad = vec![0.0; d + 1];
    for _ in 0..cfg.max_iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let z = w[d] + x.iter().zip(&w[..d]).map(|(a, b)| a * b).sum::<f64>();
            let r = sigmoid(z) - if *y { 1.0 } else { 0.0 };
            for (g, a) in grad[..d].iter_mut().zip(x.iter()) {
                *g += r * a;
            }
            grad[d] += r;
        }
        let inv = 1.0 / n as f64;
        for k in 0..d {
            grad[k] = grad[k] * inv + cfg.l2 * w[k];
        }
        grad[d] *= inv;
        if grad.iter().fold(0.0_f64, |a, g| a.max(g.abs())) < cfg.grad_tol {
            break;
        }
        adam.step(&mut w, &grad);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic weights diverged".into()));
    }
    Ok(LogisticPredictor { weights: w })
}

/// One logistic model per ladder price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TLearner {
    pub predictors: Vec<LogisticPredictor>,
}

impl DemandModel for TLearner {
    fn ladder_size(&self) -> usize {
        self.predictors.len()
    }

    fn sale_probs(&self, x: &[f64]) -> Vec<f64> {
        self.predictors.iter().map(|p| p.predict(x)).collect()
    }
}

/// Fits a T-learner on logged data: rung `j`'s model sees only the records
/// offered `p_j`. Rungs never offered fall back to the pooled sale rate.
pub fn fit_tlearner(data: &Dataset, cfg: &LogisticConfig) -> Result<TLearner> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = data.m();
    let d = data.feature_dim();
    let pooled = data.records.iter().filter(|r| r.sold).count() as f64 / data.len() as f64;
    let mut predictors = Vec::with_capacity(m);
    for j in 0..m {
        let (xs, ys): (Vec<&[f64]>, Vec<bool>) = data
            .records
            .iter()
            .filter(|r| r.rung() == j)
            .map(|r| (r.features.as_slice(), r.sold))
            .unzip();
        if xs.is_empty() {
            log::debug!("rung {} absent from training data; using pooled rate {pooled}", j + 1);
        }
        predictors.push(fit_logistic(&xs, &ys, d, pooled, cfg)?);
    }
    Ok(TLearner { predictors })
}

/// Fits one model per price when every customer's outcome is known at every
/// price (`labels[i][j] = Y_i(p_j)`).
pub fn fit_multilabel(features: &[Vec<f64>], labels: &[Vec<bool>], m: usize, cfg: &LogisticConfig) -> Result<TLearner> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != labels.len() {
        return Err(Error::dims("fit_multilabel", features.len(), labels.len()));
    }
    let d = features[0].len();
    let xs: Vec<&[f64]> = features.iter().map(|x| x.as_slice()).collect();
    let mut predictors = Vec::with_capacity(m);
    for j in 0..m {
        let ys = labels
            .iter()
            .map(|l| l.get(j).copied().ok_or(Error::dims("fit_multilabel labels", m, l.len())))
            .collect::<Result<Vec<bool>>>()?;
        predictors.push(fit_logistic(&xs, &ys, d, 0.5, cfg)?);
    }
    Ok(TLearner { predictors })
}

/// `α ĝ_true + (1 − α) · 0.01`.
#[derive(Debug, Clone)]
pub struct BlendedDemand<D> {
    inner: D,
    alpha: f64,
}

impl<D: DemandModel> BlendedDemand<D> {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub fn blend_alpha<D: DemandModel>(inner: D, alpha: f64) -> Result<BlendedDemand<D>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(BlendedDemand { inner, alpha })
}

impl<D: DemandModel> DemandModel for BlendedDemand<D> {
    fn ladder_size(&self) -> usize {
        self.inner.ladder_size()
    }

    fn sale_probs(&self, x: &[f64]) -> Vec<f64> {
        self.inner
            .sale_probs(x)
            .into_iter()
            .map(|p| clamp_prob(self.alpha * p + (1.0 - self.alpha) * NULL_DEMAND))
            .collect()
    }
}

impl<D: DemandModel + ?Sized> DemandModel for &D {
    fn ladder_size(&self) -> usize {
        (**self).ladder_size()
    }

    fn sale_probs(&self, x: &[f64]) -> Vec<f64> {
        (**self).sale_probs(x)
    }
}

/// Outcome distribution implied by sale probabilities `g` and propensities:
/// sale at `p_j` has mass `g_j π_0(p_j)`, no sale `(1 − g_j) π_0(p_j)`.
pub fn fy_hat(g: &[f64], pi0: &Propensities) -> Result<OutcomeDist> {
    let m = pi0.len();
    if g.len() != m {
        return Err(Error::dims("fy_hat", m, g.len()));
    }
    let mut f = vec![0.0; 2 * m];
    for j in 0..m {
        let gj = clamp_prob(g[j]);
        f[j] = gj * pi0[j];
        f[m + j] = (1.0 - gj) * pi0[j];
    }
    OutcomeDist::new(f, m)
}

/// Pool-adjacent-violators fit of a nonincreasing sequence (equal weights).
pub fn pav_decreasing(y: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count); merge while a later block's mean exceeds the
    // previous one.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 > s0 / c0 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// Valuation distribution and expected rung rewards `μ̂` from sale
/// probabilities read as survival probabilities `ℙ̂(V ≥ p_j)`.
pub fn fv_hat_and_mu(g: &[f64], ladder: &PriceLadder) -> Result<(ValuationDist, Vec<f64>)> {
    let m = ladder.len();
    if g.len() != m {
        return Err(Error::dims("fv_hat_and_mu", m, g.len()));
    }
    let s: Vec<f64> = pav_decreasing(g).into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let mut fv = Vec::with_capacity(m + 1);
    fv.push(1.0 - s[0]);
    for j in 0..m {
        let next = if j + 1 < m { s[j + 1] } else { 0.0 };
        fv.push((s[j] - next).max(0.0));
    }
    let total: f64 = fv.iter().sum();
    let fv: Vec<f64> = fv.into_iter().map(|p| p / total).collect();
    let mu = (0..m).map(|j| ladder.margin(j) * s[j]).collect();
    Ok((ValuationDist::new(fv, m)?, mu))
}
