//! Conformal structured prediction over directed acyclic graphs.
//!
//! A structured prediction set is a small subset of DAG nodes standing in for
//! the (possibly much larger) set of leaf labels reachable from those nodes.
//! This crate calibrates the probability-mass threshold that such sets must
//! cover so that the true label is captured with a marginal or PAC coverage
//! guarantee, and computes minimum-size sets exactly for any given threshold.
//!
//! Module map:
//! - [`dag`]: immutable DAG model, per-leaf score vectors, leaf-coverage queries
//! - [`setopt`]: exact minimum-leaf-cover solver plus its brute-force oracle
//! - [`calibrate`]: statistical tests and the descending-threshold search
//! - [`domains`]: DAG family builders and synthetic score generators
//! - [`eval`]: metrics, exact coverage on enumerable domains, trial harness
//! - [`records`]: calibration/test record sets and their JSONL file format

pub mod calibrate;
pub mod dag;
pub mod domains;
pub mod eval;
pub mod records;
pub mod setopt;

pub use calibrate::{CalibrationOutcome, GuaranteeSpec, TauHat, ThresholdGrid};
pub use dag::{Dag, ScoreVector, StructuredSet, ValidationMode};
pub use records::{CalibrationRecord, RecordSet};
pub use setopt::{SolveRequest, SolveResult, TieBreak};
