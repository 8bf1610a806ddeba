//! Covariate adjustment set discovery from conditional independence tests.
//!
//! The discovery rules in [`rules`] only ever talk to a [`citest::CiBackend`],
//! so the same search runs against an exact d-separation oracle on a known
//! [`graph::Dag`] or against Fisher-z tests on a [`dataset::Dataset`].
//! [`sem`] simulates linear-Gaussian data and [`bench`] runs the full
//! generate, sample, discover, verify loop.

pub mod bench;
pub mod citest;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod format;
pub mod graph;
pub mod nodeset;
pub mod rules;
pub mod sem;

pub use citest::{CachedCi, CiBackend, CiQuery, CiVerdict, Decision, FisherZCi, OracleCi, ThresholdPolicy};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{Dag, PathWitness, TierKnowledge};
pub use nodeset::NodeSet;
pub use rules::{AdjustmentCertificate, Rule, SearchConfig};
