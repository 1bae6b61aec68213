//! Hierarchical Multinomial-Dirichlet estimation of conditional probability
//! tables, with classical baselines, MSE analysis tooling and a small
//! Bayesian-network layer for likelihood and classification experiments.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bayes_net;
pub mod cli;
pub mod count_model;
pub mod error;
pub mod estimators;
pub mod hier_posterior;
pub mod mse_lab;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod special;
pub mod tabular_data;

pub use error::{Error, Result};
