//! Quotient-space synonymous keyword retrieval.
//!
//! A keyword repository is compressed into synonym clusters, each indexed
//! by one representative. Queries are matched against representatives with
//! an embedding ANN search, screened by a pair discriminant, and expanded
//! back to every keyword of the surviving clusters.

pub mod ann;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod harness;
pub mod quotient;
pub mod retrieve;
pub mod teacher;

pub use error::{Error, Result};
