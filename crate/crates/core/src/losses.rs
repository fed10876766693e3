//! Valuation-space losses, their corrupted-label counterparts `R'l_V`, and
//! dataset-level policy value estimates.
//!
//! Every corrupted loss is linear in the policy: for the observed outcome
//! `o`, `(R'l_V)_o = Σ_k π_k b_k` with `b_k = −(p_k − C) Σ_{v ≥ k} R[v][o]`.
//! The per-record coefficients `b` do not depend on `π`, so evaluation and
//! training both work from them.

use std::fmt;
use std::str::FromStr;

use crate::demand::{fy_hat, fv_hat_and_mu, DemandModel};
use crate::densemat::dot;
use crate::error::{Error, Result};
use crate::estimators::{
    r_cips, r_ips, r_mv, r_robust, EstimatorKind, ReweightMatrix, SwitchingWeight, OUTCOME_FLOOR,
};
use crate::ladder::{Dataset, OutcomeDist, PolicyDist, PriceLadder, Propensities};
use crate::policy::Policy;
use crate::transfer::TransferMatrix;

/// `l_V(π)`: loss (negative profit) for each valuation slot `0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationLossVector {
    values: Vec<f64>,
}

impl ValuationLossVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `R'l_V(π)`: corrupted loss for each of the `2m` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedLossVector {
    values: Vec<f64>,
}

impl CorruptedLossVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Loss charged when outcome `k` is observed.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }
}

pub fn valuation_loss_vector(pi: &PolicyDist, ladder: &PriceLadder) -> Result<ValuationLossVector> {
    let m = ladder.len();
    if pi.len() != m {
        return Err(Error::dims("valuation_loss_vector", m, pi.len()));
    }
    let mut values = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for j in 0..m {
        acc -= pi[j] * ladder.margin(j);
        values.push(acc);
    }
    Ok(ValuationLossVector { values })
}

pub fn corrupted_loss_vector(
    r: &ReweightMatrix,
    l: &ValuationLossVector,
) -> Result<CorruptedLossVector> {
    Ok(CorruptedLossVector {
        values: r.mat().tr_matvec(l.values())?,
    })
}

/// `l'R (diag f − f f') R'l`, computed as the centered second moment of the
/// corrupted loss so it cannot go negative.
pub fn conditional_variance(r: &ReweightMatrix, l: &ValuationLossVector, fy: &OutcomeDist) -> Result<f64> {
    let a = corrupted_loss_vector(r, l)?;
    if a.values.len() != fy.len() {
        return Err(Error::dims("conditional_variance", a.values.len(), fy.len()));
    }
    let mean = dot(fy.as_slice(), &a.values);
    Ok(fy
        .as_slice()
        .iter()
        .zip(&a.values)
        .map(|(f, x)| f * (x - mean) * (x - mean))
        .sum())
}

/// Expected corrupted loss `f_Ỹ' R'l_V`.
pub fn expected_corrupted_loss(r: &ReweightMatrix, l: &ValuationLossVector, fy: &OutcomeDist) -> Result<f64> {
    let a = corrupted_loss_vector(r, l)?;
    if a.values.len() != fy.len() {
        return Err(Error::dims("expected_corrupted_loss", a.values.len(), fy.len()));
    }
    Ok(dot(fy.as_slice(), &a.values))
}

/// Policy-linear coefficients `b` of the corrupted loss at outcome `o`.
pub fn policy_coefficients(ladder: &PriceLadder, r: &ReweightMatrix, o: usize) -> Result<Vec<f64>> {
    let m = ladder.len();
    if r.m() != m {
        return Err(Error::dims("policy_coefficients", m, r.m()));
    }
    if o >= 2 * m {
        return Err(Error::IndexOutOfRange { index: o, len: 2 * m });
    }
    let mat = r.mat();
    let mut b = vec![0.0; m];
    let mut tail = 0.0;
    for k in (0..m).rev() {
        tail += mat[(k + 1, o)];
        b[k] = -ladder.margin(k) * tail;
    }
    Ok(b)
}

/// An estimator together with any parameter it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Ips,
    Cips,
    Mv,
    Robust,
    Dr,
    Switching(SwitchingWeight),
}

impl Estimator {
    pub fn kind(self) -> EstimatorKind {
        match self {
            Estimator::Ips => EstimatorKind::Ips,
            Estimator::Cips => EstimatorKind::Cips,
            Estimator::Mv => EstimatorKind::Mv,
            Estimator::Robust => EstimatorKind::Robust,
            Estimator::Dr => EstimatorKind::Dr,
            Estimator::Switching(_) => EstimatorKind::Switching,
        }
    }

    pub fn needs_demand(self) -> bool {
        matches!(self, Estimator::Mv | Estimator::Dr | Estimator::Switching(_))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Switching(c) => write!(f, "switching:{}", c.value()),
            other => f.write_str(other.kind().name()),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    /// Accepts `ips`, `cips`, `mv`, `robust`, `dr`, and `switching:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "ips" => Estimator::Ips,
            "cips" => Estimator::Cips,
            "mv" => Estimator::Mv,
            "robust" => Estimator::Robust,
            "dr" => Estimator::Dr,
            other => match other.strip_prefix("switching:") {
                Some(c) => {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad switching weight in {s:?}")))?;
                    Estimator::Switching(SwitchingWeight::new(c)?)
                }
                None => return Err(Error::InvalidArgument(format!("unknown estimator {s:?}"))),
            },
        })
    }
}

fn demand_for(est: Estimator, demand: Option<&dyn DemandModel>) -> Result<Option<&dyn DemandModel>> {
    match (est.needs_demand(), demand) {
        (true, None) => Err(Error::MissingDemandModel(est.kind().name())),
        (_, d) => Ok(d),
    }
}

/// Reweighting matrix used for one record.
pub fn record_matrix(
    est: Estimator,
    pi0: &Propensities,
    x: &[f64],
    demand: Option<&dyn DemandModel>,
) -> Result<ReweightMatrix> {
    let demand = demand_for(est, demand)?;
    let t = TransferMatrix::build(pi0)?;
    let mv = |d: &dyn DemandModel| -> Result<ReweightMatrix> {
        let fy = fy_hat(&d.sale_probs(x), pi0)?.floored(OUTCOME_FLOOR);
        r_mv(&t, &fy)
    };
    match est {
        Estimator::Ips => r_ips(pi0),
        Estimator::Cips => r_cips(pi0),
        Estimator::Robust => r_robust(&t),
        Estimator::Mv | Estimator::Dr => mv(demand.expect("checked above")),
        Estimator::Switching(c) => {
            let a = mv(demand.expect("checked above"))?;
            crate::estimators::r_switching(&a, &r_robust(&t)?, c)
        }
    }
}

/// Policy-linear coefficients of every record's corrupted loss.
///
/// The DR estimator uses its own closed form (direct term plus a propensity
/// weighted residual), with `μ̂` taken from the repaired demand curve.
pub fn record_coefficients(
    data: &Dataset,
    est: Estimator,
    demand: Option<&dyn DemandModel>,
) -> Result<Vec<Vec<f64>>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let demand = demand_for(est, demand)?;
    let m = data.m();
    if let Some(d) = demand {
        if d.ladder_size() != m {
            return Err(Error::dims("demand model ladder", m, d.ladder_size()));
        }
    }
    data.records
        .iter()
        .zip(&data.propensities)
        .map(|(rec, pi0)| {
            if let (Estimator::Dr, Some(d)) = (est, demand) {
                pi0.check_overlap()?;
                let (_, mu) = fv_hat_and_mu(&d.sale_probs(&rec.features), &data.ladder)?;
                let j = rec.rung();
                let observed = if rec.sold { data.ladder.margin(j) } else { 0.0 };
                let mut b: Vec<f64> = mu.iter().map(|u| -u).collect();
                b[j] -= (observed - mu[j]) / pi0[j];
                return Ok(b);
            }
            let r = record_matrix(est, pi0, &rec.features, demand)?;
            policy_coefficients(&data.ladder, &r, rec.outcome(m)?)
        })
        .collect()
}

/// Per-record corrupted losses of `policy`.
pub fn losses_from_coefficients(data: &Dataset, policy: &dyn Policy, coefs: &[Vec<f64>]) -> Result<Vec<f64>> {
    if coefs.len() != data.len() {
        return Err(Error::dims("losses_from_coefficients", data.len(), coefs.len()));
    }
    data.records
        .iter()
        .zip(coefs)
        .map(|(rec, b)| {
            let pi = policy.probs(&rec.features)?;
            if pi.len() != b.len() {
                return Err(Error::dims("policy ladder", b.len(), pi.len()));
            }
            Ok(dot(pi.as_slice(), b))
        })
        .collect()
}

pub fn record_losses(
    data: &Dataset,
    policy: &dyn Policy,
    est: Estimator,
    demand: Option<&dyn DemandModel>,
) -> Result<Vec<f64>> {
    let coefs = record_coefficients(data, est, demand)?;
    losses_from_coefficients(data, policy, &coefs)
}

/// Mean corrupted loss (negative estimated profit per customer).
pub fn estimate_policy_value(
    data: &Dataset,
    policy: &dyn Policy,
    est: Estimator,
    demand: Option<&dyn DemandModel>,
) -> Result<f64> {
    let losses = record_losses(data, policy, est, demand)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
