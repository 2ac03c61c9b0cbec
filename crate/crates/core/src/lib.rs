//! Federated data measurements for seller selection in data marketplaces.
//!
//! A buyer summarizes a small reference sample as a `k×d` query of principal
//! directions. Each seller projects its own embeddings through the query and
//! returns compact statistics, from which the buyer computes relevance
//! (L2, cosine, correlation, overlap) and diversity (volume, robust volume,
//! Vendi score, dispersion, difference) measurements without seeing raw rows.
//!
//! - [`kernel`]: linear algebra and statistics primitives
//! - [`dataset`]: synthetic embedding generation, partitioning, corruption, I/O
//! - [`measures`]: query construction, seller reports and the nine measurements
//! - [`protocol`]: TCP seller service, buyer client and decoy-query screening
//! - [`marketplace`]: multi-seller ranking and sweep experiments
//! - [`downstream`]: logistic regression, k-means and correlation studies

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod downstream;
pub mod error;
pub mod kernel;
pub mod marketplace;
pub mod measures;
mod par;
pub mod protocol;
pub mod seed;

pub use error::{Error, Result};
