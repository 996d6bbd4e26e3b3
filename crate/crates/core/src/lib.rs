//! Random forests with design-based uncertainty quantification.
//!
//! The crate grows CART forests, estimates the covariance floor of a
//! deployed forest by refitting paired forests on synthetic outcomes drawn
//! from a fitted conditional law, and assembles prediction and confidence
//! intervals from it. A simulation harness under [`experiments`] checks the
//! variance identities the estimator rests on.

pub mod data;
pub mod dgm;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod intervals;
pub mod law;
pub mod pasr;
pub mod rng;
pub mod stats;

pub use data::{ColumnKind, Dataset, FeatureMatrix, OutcomeKind};
pub use error::{Error, Result};
pub use forest::{Forest, ForestConfig, Sampling, TrainingFrame, DEFAULT_MIN_LEAF};
pub use law::ConditionalLaw;
pub use rng::SeedPath;
