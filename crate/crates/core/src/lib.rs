//! Retrieval-augmented repair of learner programs, with bug descriptions.
//!
//! The crate builds a database of repair pairs mined from submission
//! histories, indexes each pair by its embedding-space edit vector, and uses
//! the nearest repairs as references when prompting a model to fix a buggy
//! program and explain its bugs. Failed attempts steer the next retrieval.
//! Fixes are judged by running them against test suites, and explanations
//! are scored against ground truth with a model-backed matcher.

pub mod cli;
pub mod corpus;
pub mod descmetric;
pub mod diffing;
pub mod error;
pub mod generation;
pub mod judge;
pub mod modelgateway;
pub mod orchestrator;
pub mod retrieval;
pub mod sync;

pub use error::{Error, Result};
