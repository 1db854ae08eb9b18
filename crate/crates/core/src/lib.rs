//! # masc
//!
//! Debiasing of many same-schema tabular datasets by borrowing real rows
//! between similar datasets.
//!
//! 1. Measure the pairwise distribution discrepancy of the datasets'
//!    features with the unbiased two-sample MMD ([`discrepancy`]).
//! 2. Map distances to a Gaussian affinity graph ([`affinity`]).
//! 3. Cluster the graph with unnormalized spectral clustering, choosing the
//!    number of clusters from the largest eigengap of the Laplacian
//!    ([`spectral`]).
//! 4. Inside each cluster, top up every under-represented protected group of
//!    a dataset with rows of that group taken from the other members
//!    ([`augmentation`]).
//!
//! Around the core procedure sit the fairness measures ([`fairness`]), the
//! competitor strategies ([`baselines`]), a logistic-regression evaluator
//! ([`evaluator`]) and a planted synthetic benchmark ([`benchmark`]).
//!
//! Only covariates enter the discrepancy: target labels are never used to
//! compare datasets.

pub mod affinity;
pub mod augmentation;
pub mod baselines;
pub mod benchmark;
pub mod cli;
pub mod data;
pub mod discrepancy;
pub mod error;
pub mod evaluator;
pub mod fairness;
pub mod io;
pub mod kmeans;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
