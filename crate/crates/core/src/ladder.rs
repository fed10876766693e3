//! Price ladder, probability vectors and observed records.
//!
//! Index conventions used throughout the crate:
//!
//! * Prices are stored 0-based; the price ladder rung `j` (0-based) is the
//!   price usually written `p_{j+1}`. [`ObservedRecord::price_index`] and the
//!   CSV schema use the 1-based rung number.
//! * Valuation vectors have `m + 1` slots. Slot 0 means "buys at no ladder
//!   price"; slot `j >= 1` means the valuation is `p_j`.
//! * Outcome vectors have `2m` slots: slot `j - 1` is "offered `p_j` and
//!   bought", slot `m + j - 1` is "offered `p_j` and did not buy".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Propensities below this floor are flagged by [`validate`].
pub const PROPENSITY_FLOOR: f64 = 1e-6;

/// Ordered discrete price grid with a per-unit cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLadder {
    prices: Vec<f64>,
    unit_cost: f64,
}

impl PriceLadder {
    pub fn new(prices: Vec<f64>, unit_cost: f64) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidLadder("ladder needs at least one price".into()));
        }
        if !unit_cost.is_finite() || unit_cost < 0.0 {
            return Err(Error::InvalidLadder(format!("unit cost {unit_cost} must be finite and >= 0")));
        }
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidLadder("prices must be finite and positive".into()));
        }
        if prices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLadder("prices must be strictly increasing".into()));
        }
        if prices.iter().any(|p| *p <= unit_cost) {
            log::warn!("price ladder has rungs at or below unit cost {unit_cost}");
        }
        Ok(PriceLadder { prices, unit_cost })
    }

    /// The ladder `{1, 2, ..., m}` with zero cost.
    pub fn integers(m: usize) -> Result<Self> {
        PriceLadder::new((1..=m).map(|p| p as f64).collect(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn unit_cost(&self) -> f64 {
        self.unit_cost
    }

    /// Price of 0-based rung `j`.
    pub fn price(&self, j: usize) -> f64 {
        self.prices[j]
    }

    /// `p_j - C` for 0-based rung `j`.
    pub fn margin(&self, j: usize) -> f64 {
        self.prices[j] - self.unit_cost
    }

    pub fn margins(&self) -> Vec<f64> {
        self.prices.iter().map(|p| p - self.unit_cost).collect()
    }
}

fn check_simplex(v: &[f64], len: usize, what: &'static str) -> Result<()> {
    if v.len() != len {
        return Err(Error::InvalidDistribution {
            what,
            reason: format!("expected length {len}, got {}", v.len()),
        });
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution {
            what,
            reason: format!("entry {bad} is negative or non-finite"),
        });
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InvalidDistribution {
            what,
            reason: format!("entries sum to {s}"),
        });
    }
    Ok(())
}

macro_rules! simplex_vector {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Validates that `probs` lies on the simplex of the given length.
            pub fn with_len(probs: Vec<f64>, len: usize) -> Result<Self> {
                check_simplex(&probs, len, $what)?;
                Ok($name(probs))
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

simplex_vector!(
    /// Logging distribution `π_0(·|x)` over the `m` ladder prices.
    Propensities,
    "propensities"
);
simplex_vector!(
    /// Distribution over the `m + 1` valuation slots.
    ValuationDist,
    "valuation distribution"
);
simplex_vector!(
    /// Distribution over the `2m` (price, sale) outcomes.
    OutcomeDist,
    "outcome distribution"
);
simplex_vector!(
    /// A randomized pricing decision `π(·|x)` over the ladder.
    PolicyDist,
    "policy distribution"
);

impl Propensities {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let m = probs.len();
        Self::with_len(probs, m)
    }

    pub fn uniform(m: usize) -> Self {
        Propensities(vec![1.0 / m as f64; m])
    }

    /// Errors unless every price has positive probability.
    pub fn check_overlap(&self) -> Result<()> {
        match self.0.iter().enumerate().find(|(_, p)| **p <= 0.0) {
            Some((j, p)) => Err(Error::OverlapViolated {
                price_index: j + 1,
                value: *p,
            }),
            None => Ok(()),
        }
    }
}

impl PolicyDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let m = probs.len();
        Self::with_len(probs, m)
    }

    /// Point mass on 0-based rung `j`.
    pub fn deterministic(j: usize, m: usize) -> Result<Self> {
        if j >= m {
            return Err(Error::IndexOutOfRange { index: j, len: m });
        }
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        Ok(PolicyDist(v))
    }
}

impl ValuationDist {
    /// `f_V` for a ladder with `m` prices (length `m + 1`).
    pub fn new(probs: Vec<f64>, m: usize) -> Result<Self> {
        Self::with_len(probs, m + 1)
    }

    /// Point mass on valuation slot `v` (0 = buys at no price).
    pub fn point(v: usize, m: usize) -> Result<Self> {
        if v > m {
            return Err(Error::IndexOutOfRange { index: v, len: m + 1 });
        }
        let mut p = vec![0.0; m + 1];
        p[v] = 1.0;
        Ok(ValuationDist(p))
    }

    pub fn ladder_size(&self) -> usize {
        self.0.len() - 1
    }
}

impl OutcomeDist {
    /// `f_Ỹ` for a ladder with `m` prices (length `2m`).
    pub fn new(probs: Vec<f64>, m: usize) -> Result<Self> {
        Self::with_len(probs, 2 * m)
    }

    pub fn ladder_size(&self) -> usize {
        self.0.len() / 2
    }

    /// Clips every entry to at least `floor` and renormalizes.
    pub fn floored(&self, floor: f64) -> OutcomeDist {
        let clipped: Vec<f64> = self.0.iter().map(|p| p.max(floor)).collect();
        let s: f64 = clipped.iter().sum();
        OutcomeDist(clipped.into_iter().map(|p| p / s).collect())
    }
}

/// Maps a 1-based price index and sale flag to the outcome slot.
pub fn outcome_index(price_index: usize, sold: bool, m: usize) -> Result<usize> {
    if price_index == 0 || price_index > m {
        return Err(Error::IndexOutOfRange {
            index: price_index,
            len: m,
        });
    }
    Ok(if sold {
        price_index - 1
    } else {
        m + price_index - 1
    })
}

/// One logged customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub features: Vec<f64>,
    /// 1-based ladder rung that was offered.
    pub price_index: usize,
    pub sold: bool,
    /// Valuation slot `0..=m`, known only for synthetic data.
    pub latent_valuation: Option<usize>,
}

impl ObservedRecord {
    /// 0-based rung that was offered.
    pub fn rung(&self) -> usize {
        self.price_index - 1
    }

    pub fn outcome(&self, m: usize) -> Result<usize> {
        outcome_index(self.price_index, self.sold, m)
    }
}

/// A logged dataset together with each record's logging propensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ladder: PriceLadder,
    pub records: Vec<ObservedRecord>,
    pub propensities: Vec<Propensities>,
}

impl Dataset {
    pub fn new(
        ladder: PriceLadder,
        records: Vec<ObservedRecord>,
        propensities: Vec<Propensities>,
    ) -> Result<Self> {
        if records.len() != propensities.len() {
            return Err(Error::dims("Dataset::new", records.len(), propensities.len()));
        }
        let m = ladder.len();
        for (row, (r, p)) in records.iter().zip(&propensities).enumerate() {
            if p.len() != m {
                return Err(Error::dims("Dataset::new propensities", m, p.len()));
            }
            if r.price_index == 0 || r.price_index > m {
                return Err(Error::Schema {
                    row,
                    column: "price_index".into(),
                    message: format!("{} outside 1..={m}", r.price_index),
                });
            }
            if let Some(v) = r.latent_valuation {
                if v > m {
                    return Err(Error::Schema {
                        row,
                        column: "valuation_index".into(),
                        message: format!("{v} outside 0..={m}"),
                    });
                }
            }
        }
        Ok(Dataset {
            ladder,
            records,
            propensities,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn m(&self) -> usize {
        self.ladder.len()
    }

    /// Feature dimension of the first record (0 for an empty dataset).
    pub fn feature_dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.features.len())
    }

    /// Records whose positions are listed in `idx`.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            ladder: self.ladder.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            propensities: idx.iter().map(|&i| self.propensities[i].clone()).collect(),
        }
    }
}

/// Findings of [`validate`]. Ignorability and consistency of potential
/// outcomes cannot be tested from logged data and are reported as assumed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// `(row, price_index, propensity)` where the logged price had
    /// propensity below [`PROPENSITY_FLOOR`].
    pub overlap_flags: Vec<(usize, usize, f64)>,
    /// Rows whose sale flag contradicts the latent valuation.
    pub consistency_flags: Vec<usize>,
    pub assumed: Vec<&'static str>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.overlap_flags.is_empty() && self.consistency_flags.is_empty()
    }
}

/// Overlap and monotone-response checks on a dataset.
pub fn validate(data: &Dataset) -> ValidationReport {
    let mut report = ValidationReport {
        assumed: vec!["ignorability", "consistency"],
        ..Default::default()
    };
    for (row, (rec, pi0)) in data.records.iter().zip(&data.propensities).enumerate() {
        let p = pi0[rec.rung()];
        if p < PROPENSITY_FLOOR {
            report.overlap_flags.push((row, rec.price_index, p));
        }
        if let Some(v) = rec.latent_valuation {
            if rec.sold != (rec.price_index <= v) {
                report.consistency_flags.push(row);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_index_examples() {
        assert_eq!(outcome_index(1, true, 4).unwrap(), 0);
        assert_eq!(outcome_index(4, false, 4).unwrap(), 7);
        assert_eq!(outcome_index(2, true, 2).unwrap(), 1);
        assert!(outcome_index(0, true, 2).is_err());
        assert!(outcome_index(3, false, 2).is_err());
    }

    #[test]
    fn outcome_index_is_bijective() {
        for m in 1..8 {
            let mut seen = vec![false; 2 * m];
            for j in 1..=m {
                for sold in [true, false] {
                    let k = outcome_index(j, sold, m).unwrap();
                    assert!(!seen[k]);
                    seen[k] = true;
                }
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn simplex_constructors_reject_bad_vectors() {
        assert!(Propensities::new(vec![0.5, 0.5]).is_ok());
        assert!(Propensities::new(vec![0.5, 0.6]).is_err());
        assert!(PolicyDist::new(vec![1.2, -0.2]).is_err());
        assert!(ValuationDist::new(vec![0.2, 0.8], 2).is_err());
        assert!(OutcomeDist::new(vec![0.25; 4], 2).is_ok());
        assert!(OutcomeDist::new(vec![f64::NAN, 1.0], 1).is_err());
        // within tolerance
        assert!(PolicyDist::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(PolicyDist::new(vec![0.5, 0.5 + 5e-9]).is_err());
    }

    #[test]
    fn ladder_validation() {
        assert!(PriceLadder::new(vec![], 0.0).is_err());
        assert!(PriceLadder::new(vec![2.0, 1.0], 0.0).is_err());
        assert!(PriceLadder::new(vec![1.0, 1.0], 0.0).is_err());
        assert!(PriceLadder::new(vec![1.0, 2.0], -1.0).is_err());
        let l = PriceLadder::new(vec![1.0, 2.0], 0.5).unwrap();
        assert_eq!(l.margins(), vec![0.5, 1.5]);
        // at-cost rungs only warn
        assert!(PriceLadder::new(vec![1.0, 2.0], 1.0).is_ok());
    }

    fn record(price_index: usize, sold: bool, v: Option<usize>) -> ObservedRecord {
        ObservedRecord {
            features: vec![0.0],
            price_index,
            sold,
            latent_valuation: v,
        }
    }

    #[test]
    fn validate_flags() {
        let ladder = PriceLadder::integers(3).unwrap();
        let uniform = Propensities::uniform(3);
        let clean = Dataset::new(
            ladder.clone(),
            vec![record(1, true, Some(2)), record(3, false, Some(2))],
            vec![uniform.clone(), uniform.clone()],
        )
        .unwrap();
        let r = validate(&clean);
        assert!(r.is_clean());
        assert_eq!(r.assumed, vec!["ignorability", "consistency"]);

        let zero = Propensities::new(vec![0.0, 0.5, 0.5]).unwrap();
        let bad = Dataset::new(
            ladder,
            vec![record(1, true, None), record(3, true, Some(1))],
            vec![zero, uniform],
        )
        .unwrap();
        let r = validate(&bad);
        assert_eq!(r.overlap_flags, vec![(0, 1, 0.0)]);
        assert_eq!(r.consistency_flags, vec![1]);
    }

    #[test]
    fn floored_outcome_is_simplex() {
        let f = OutcomeDist::new(vec![0.0, 0.5, 0.5, 0.0], 2).unwrap();
        let g = f.floored(1e-4);
        assert!(g.as_slice().iter().all(|p| *p >= 9e-5));
        assert!(OutcomeDist::new(g.into_inner(), 2).is_ok());
    }
}
