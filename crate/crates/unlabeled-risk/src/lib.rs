//! Margin-based risk estimation for linear classifiers from unlabeled
//! data, given the class prior distribution.
//!
//! The margins of a linear classifier, conditioned on the class, are
//! close to Gaussian in high dimension. With known non-uniform class
//! priors the two (or K) Gaussian components of the margin distribution
//! are identifiable from unlabeled data alone: [`mixture`] fits them by
//! fixed-weight EM, [`risk`] integrates margin losses against the fitted
//! densities to estimate the classifier's risk, [`asymptotics`]
//! quantifies the estimate's precision through the Fisher information
//! and the delta method, and [`train`] minimizes the unsupervised risk
//! estimate to train classifiers with no labels at all. [`data`]
//! generates calibrated synthetic problems and ingests dense/sparse
//! files; [`diagnostics`] checks the normality assumption empirically.

pub mod asymptotics;
pub mod core;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod mixture;
pub mod risk;
pub mod train;

mod numeric;

pub use crate::core::{ClassifierParams, LabelMarginals, MarginValues, Sample};
pub use crate::error::{Error, Result};
pub use crate::mixture::{FitConfig, MixtureFit};
pub use crate::risk::{LossSpec, RiskMethod, RiskReport};
