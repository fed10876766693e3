//! Reweighting matrices `R` (shape `(m+1) x 2m`) for every estimator in the
//! family, plus residual checks for their defining conditions.
//!
//! Left inverses (`R T = I`) give unbiased losses for every policy. IPS and
//! CIPS only satisfy `T'R'l_V = l_V`, which is enough for unbiasedness of
//! the particular loss vector.

use serde::{Deserialize, Serialize};

use crate::densemat::{diag_from, Lu, Mat};
use crate::error::{Error, Result};
use crate::ladder::{OutcomeDist, PolicyDist, PriceLadder, Propensities, ValuationDist};
use crate::transfer::{difference_block, lower_block, upper_block, TransferMatrix};

/// Entries of `f̂_Ỹ` are clipped to this before building `R_MV` from a
/// fitted demand model.
pub const OUTCOME_FLOOR: f64 = 1e-4;

/// Tolerance for `R T = I` and the generalized-inverse condition.
pub const INVERSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mv,
    Robust,
    Ips,
    Cips,
    Dr,
    Switching,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mv => "mv",
            EstimatorKind::Robust => "robust",
            EstimatorKind::Ips => "ips",
            EstimatorKind::Cips => "cips",
            EstimatorKind::Dr => "dr",
            EstimatorKind::Switching => "switching",
        }
    }

    /// Whether the matrix is a true left inverse of `T`.
    pub fn is_left_inverse(self) -> bool {
        !matches!(self, EstimatorKind::Ips | EstimatorKind::Cips)
    }
}

#[derive(Debug, Clone)]
pub struct ReweightMatrix {
    mat: Mat,
    kind: EstimatorKind,
}

impl ReweightMatrix {
    pub fn new(mat: Mat, kind: EstimatorKind) -> Result<Self> {
        if mat.rows() < 2 || mat.cols() != 2 * (mat.rows() - 1) {
            return Err(Error::dims("ReweightMatrix", 2 * mat.rows().saturating_sub(1), mat.cols()));
        }
        Ok(ReweightMatrix { mat, kind })
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.mat.rows() - 1
    }
}

/// Mixing weight `c` of the switching estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SwitchingWeight(f64);

impl SwitchingWeight {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidArgument(format!("switching weight {c} outside [0, 1]")));
        }
        Ok(SwitchingWeight(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SwitchingWeight {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        SwitchingWeight::new(c)
    }
}

impl From<SwitchingWeight> for f64 {
    fn from(c: SwitchingWeight) -> f64 {
        c.0
    }
}

/// `(T' D⁻¹ T)⁻¹ T' D⁻¹` with `D = diag(weights)`. `weights` need not sum to 1.
fn weighted_left_inverse(t: &Mat, weights: &[f64]) -> Result<Mat> {
    if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::InvalidDistribution {
            what: "outcome distribution",
            reason: format!("entry {k} is {w}; every outcome needs positive mass"),
        });
    }
    // B = T' D⁻¹, then solve (B T) R = B.
    let mut b = t.transpose();
    for i in 0..b.rows() {
        for (k, w) in weights.iter().enumerate() {
            b[(i, k)] /= w;
        }
    }
    let normal = b.matmul(t)?;
    Lu::factor(&normal)?.solve(&b)
}

/// Minimum conditional-variance left inverse for the outcome distribution
/// `f_Ỹ`. Callers using a fitted `f̂_Ỹ` should floor it first with
/// [`OutcomeDist::floored`] and [`OUTCOME_FLOOR`].
pub fn r_mv(t: &TransferMatrix, fy: &OutcomeDist) -> Result<ReweightMatrix> {
    if fy.len() != 2 * t.m() {
        return Err(Error::dims("r_mv", 2 * t.m(), fy.len()));
    }
    let r = weighted_left_inverse(t.mat(), fy.as_slice())?;
    ReweightMatrix::new(r, EstimatorKind::Mv)
}

/// Minimax left inverse: the MV solution for the adversarial valuation
/// distribution putting half its mass on each extreme slot.
pub fn r_robust(t: &TransferMatrix) -> Result<ReweightMatrix> {
    let pi0 = t.propensities().as_slice();
    let weights: Vec<f64> = pi0.iter().chain(pi0).copied().collect();
    let r = weighted_left_inverse(t.mat(), &weights)?;
    ReweightMatrix::new(r, EstimatorKind::Robust)
}

/// The same matrix as [`r_robust`], via `(U'ΠU + L'ΠL)⁻¹ [U' L']`.
pub fn r_robust_blocks(pi0: &Propensities) -> Result<ReweightMatrix> {
    pi0.check_overlap()?;
    let m = pi0.len();
    let d = diag_from(pi0.as_slice());
    let u = upper_block(m);
    let l = lower_block(m);
    let normal = u
        .transpose()
        .matmul(&d.matmul(&u)?)?
        .add(&l.transpose().matmul(&d.matmul(&l)?)?)?;
    let mut rhs = Mat::zeros(m + 1, 2 * m);
    for v in 0..=m {
        for j in 0..m {
            rhs[(v, j)] = u[(j, v)];
            rhs[(v, m + j)] = l[(j, v)];
        }
    }
    ReweightMatrix::new(Lu::factor(&normal)?.solve(&rhs)?, EstimatorKind::Robust)
}

/// Inverse propensity scoring: a sale at rung `j` is charged the loss
/// increment `l_V[j+1] − l_V[j]` scaled by `1/π_0`; no-sale outcomes are free.
pub fn r_ips(pi0: &Propensities) -> Result<ReweightMatrix> {
    pi0.check_overlap()?;
    let m = pi0.len();
    let mut r = Mat::zeros(m + 1, 2 * m);
    for j in 0..m {
        r[(j, j)] = -1.0 / pi0[j];
        r[(j + 1, j)] = 1.0 / pi0[j];
    }
    ReweightMatrix::new(r, EstimatorKind::Ips)
}

/// Complementary IPS: reweights the no-sale outcomes instead. Every outcome
/// carries the baseline `l_V[m]` (the loss if everyone bought); a no-sale at
/// rung `j` adds back `(l_V[j] − l_V[j+1]) / π_0`.
pub fn r_cips(pi0: &Propensities) -> Result<ReweightMatrix> {
    pi0.check_overlap()?;
    let m = pi0.len();
    let mut r = Mat::zeros(m + 1, 2 * m);
    for k in 0..2 * m {
        r[(m, k)] = 1.0;
    }
    for j in 0..m {
        r[(j, m + j)] += 1.0 / pi0[j];
        r[(j + 1, m + j)] -= 1.0 / pi0[j];
    }
    ReweightMatrix::new(r, EstimatorKind::Cips)
}

/// `c R_MV + (1 − c) R_robust`.
pub fn r_switching(
    r_mv: &ReweightMatrix,
    r_rob: &ReweightMatrix,
    c: SwitchingWeight,
) -> Result<ReweightMatrix> {
    let c = c.value();
    let mat = r_mv.mat().scale(c).add(&r_rob.mat().scale(1.0 - c))?;
    ReweightMatrix::new(mat, EstimatorKind::Switching)
}

/// The three pieces of `R_MV = R_DM + R_IPS − R_DIPS` for the outcome
/// distribution `T f̂_V`.
#[derive(Debug, Clone)]
pub struct DrDecomposition {
    pub direct: Mat,
    pub ips: Mat,
    pub dips: Mat,
}

impl DrDecomposition {
    pub fn combined(&self) -> Result<Mat> {
        self.direct.add(&self.ips)?.sub(&self.dips)
    }
}

pub fn dr_decomposition(
    t: &TransferMatrix,
    fv_hat: &ValuationDist,
    pi0: &Propensities,
) -> Result<DrDecomposition> {
    let m = pi0.len();
    if t.m() != m {
        return Err(Error::dims("dr_decomposition", t.m(), m));
    }
    let fy = t.mat().matvec(fv_hat.as_slice())?;
    if let Some((k, p)) = fy.iter().enumerate().find(|(_, p)| **p <= OUTCOME_FLOOR) {
        return Err(Error::InvalidDistribution {
            what: "outcome distribution",
            reason: format!("entry {k} is {p}, at or below the floor {OUTCOME_FLOOR}"),
        });
    }
    let mut direct = Mat::zeros(m + 1, 2 * m);
    for v in 0..=m {
        for k in 0..2 * m {
            direct[(v, k)] = fv_hat[v];
        }
    }
    let ips = r_ips(pi0)?.mat().clone();
    let h = difference_block(m);
    let mut dips = Mat::zeros(m + 1, 2 * m);
    for j in 0..m {
        let w = fy[j] / (pi0[j] * pi0[j]);
        for v in 0..=m {
            dips[(v, j)] = h[(v, j)] * w;
            dips[(v, m + j)] = h[(v, j)] * w;
        }
    }
    Ok(DrDecomposition { direct, ips, dips })
}

/// Expected reward `μ̂_j = (p_j − C) ℙ̂(V ≥ p_j)` at each rung.
pub fn mu_hat(ladder: &PriceLadder, fv_hat: &ValuationDist) -> Result<Vec<f64>> {
    let m = ladder.len();
    if fv_hat.len() != m + 1 {
        return Err(Error::dims("mu_hat", m + 1, fv_hat.len()));
    }
    let mut tail = 0.0;
    let mut mu = vec![0.0; m];
    for j in (0..m).rev() {
        tail += fv_hat[j + 1];
        mu[j] = ladder.margin(j) * tail;
    }
    Ok(mu)
}

/// Doubly robust reward for one logged record offered 0-based rung `rung`.
pub fn dr_reward(
    ladder: &PriceLadder,
    policy: &PolicyDist,
    mu_hat: &[f64],
    pi0: &Propensities,
    rung: usize,
    sold: bool,
) -> Result<f64> {
    let m = ladder.len();
    for (ctx, len) in [("dr_reward policy", policy.len()), ("dr_reward mu", mu_hat.len()), ("dr_reward pi0", pi0.len())] {
        if len != m {
            return Err(Error::dims(ctx, m, len));
        }
    }
    if rung >= m {
        return Err(Error::IndexOutOfRange { index: rung, len: m });
    }
    pi0.check_overlap()?;
    let direct: f64 = mu_hat.iter().zip(policy.as_slice()).map(|(u, p)| u * p).sum();
    let observed = if sold { ladder.margin(rung) } else { 0.0 };
    Ok(direct + (observed - mu_hat[rung]) / pi0[rung] * policy[rung])
}

/// `‖R T − I‖_∞` (largest absolute entry).
pub fn left_inverse_residual(r: &ReweightMatrix, t: &TransferMatrix) -> Result<f64> {
    let rt = r.mat().matmul(t.mat())?;
    Ok(rt.sub(&Mat::identity(rt.rows()))?.max_abs())
}

/// `‖T'R'l − l‖_∞`.
pub fn generalized_inverse_residual(r: &ReweightMatrix, t: &TransferMatrix, l: &[f64]) -> Result<f64> {
    let a = r.mat().tr_matvec(l)?;
    let back = t.mat().tr_matvec(&a)?;
    Ok(back.iter().zip(l).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}
