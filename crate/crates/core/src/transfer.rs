//! The transfer matrix `T` mapping valuation distributions to observed
//! outcome distributions.
//!
//! Column `v` of `T` is the outcome distribution of a customer whose
//! valuation sits in slot `v`: offered rung `j` (0-based) with probability
//! `π_0(p_{j+1})`, they buy iff `v >= j + 1`. In the 1-based notation,
//! `T[i][j] = π_0(p_i)` when `j > i` for the sale rows `i <= m`, and
//! `T[i][j] = π_0(p_{i-m})` when `j <= i - m` for the no-sale rows.

use crate::densemat::Mat;
use crate::error::{Error, Result};
use crate::ladder::{OutcomeDist, Propensities, ValuationDist};

#[derive(Debug, Clone)]
pub struct TransferMatrix {
    mat: Mat,
    propensities: Propensities,
}

impl TransferMatrix {
    /// Builds `T` (shape `2m x (m+1)`) for one customer's logging policy.
    pub fn build(pi0: &Propensities) -> Result<Self> {
        pi0.check_overlap()?;
        let m = pi0.len();
        let mut t = Mat::zeros(2 * m, m + 1);
        for j in 0..m {
            for v in 0..=m {
                if v > j {
                    t[(j, v)] = pi0[j];
                } else {
                    t[(m + j, v)] = pi0[j];
                }
            }
        }
        Ok(TransferMatrix {
            mat: t,
            propensities: pi0.clone(),
        })
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn m(&self) -> usize {
        self.propensities.len()
    }

    pub fn propensities(&self) -> &Propensities {
        &self.propensities
    }

    /// `f_Ỹ = T f_V`.
    pub fn push_forward(&self, fv: &ValuationDist) -> Result<OutcomeDist> {
        if fv.len() != self.m() + 1 {
            return Err(Error::dims("push_forward", self.m() + 1, fv.len()));
        }
        let out = self.mat.matvec(fv.as_slice())?;
        // Column sums are exactly one, so the result is a distribution up to
        // rounding; renormalizing absorbs that rounding.
        let s: f64 = out.iter().sum();
        OutcomeDist::new(out.into_iter().map(|p| p / s).collect(), self.m())
    }

    /// Maximum deviation of any column sum from 1.
    pub fn column_sum_error(&self) -> f64 {
        (0..self.mat.cols())
            .map(|v| (self.mat.column(v).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `U` (`m x (m+1)`): `U[j][v] = 1` iff `v > j`, so the sale block of `T` is
/// `diag(π_0) U`.
pub fn upper_block(m: usize) -> Mat {
    let mut u = Mat::zeros(m, m + 1);
    for j in 0..m {
        for v in j + 1..=m {
            u[(j, v)] = 1.0;
        }
    }
    u
}

/// `L` (`m x (m+1)`): `L[j][v] = 1` iff `v <= j`; the no-sale block of `T`
/// is `diag(π_0) L`.
pub fn lower_block(m: usize) -> Mat {
    let mut l = Mat::zeros(m, m + 1);
    for j in 0..m {
        for v in 0..=j {
            l[(j, v)] = 1.0;
        }
    }
    l
}

/// First-difference matrix `H` (`(m+1) x m`) with `U H = I`, `L H = -I`.
pub fn difference_block(m: usize) -> Mat {
    let mut h = Mat::zeros(m + 1, m);
    for j in 0..m {
        h[(j, j)] = -1.0;
        h[(j + 1, j)] = 1.0;
    }
    h
}
