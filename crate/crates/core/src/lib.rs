//! Loss construction and off-policy estimators for pricing with a discrete
//! price ladder, where only a purchase indicator at the offered price is
//! observed.

pub mod adam;
pub mod csvio;
pub mod demand;
pub mod densemat;
pub mod error;
pub mod estimators;
pub mod ladder;
pub mod losses;
pub mod oracle;
pub mod policy;
pub mod synthgen;
pub mod transfer;

pub use densemat::Mat;
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, ReweightMatrix, SwitchingWeight};
pub use ladder::{
    Dataset, ObservedRecord, OutcomeDist, PolicyDist, PriceLadder, Propensities, ValuationDist,
};
pub use losses::Estimator;
pub use transfer::TransferMatrix;
