//! Calibration/test records and their JSONL file format.
//!
//! One record per line: `{"probs": [...], "true_leaf": id?, "dag": {...}?}`.
//! The optional inline `dag` overrides the shared DAG for that record, which
//! is how per-example graph structures are represented.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{Dag, DagError, DagJson, ScoreVector, ValidationMode};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: DagError },
    #[error("record file is empty")]
    Empty,
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// One (score vector, true leaf) calibration pair. `true_leaf` is absent for
/// prediction-only inputs.
#[derive(Debug, Clone)]
pub struct CalibrationRecord {
    pub scores: ScoreVector,
    pub true_leaf: Option<u32>,
    /// Per-example DAG override; `None` means the shared DAG applies.
    pub dag: Option<Arc<Dag>>,
}

impl CalibrationRecord {
    pub fn new(scores: ScoreVector, true_leaf: Option<u32>) -> Self {
        CalibrationRecord {
            scores,
            true_leaf,
            dag: None,
        }
    }

    /// The DAG this record should be solved against.
    pub fn effective_dag<'a>(&'a self, shared: &'a Dag) -> &'a Dag {
        self.dag.as_deref().unwrap_or(shared)
    }
}

/// A shared DAG plus the records scored against it.
#[derive(Debug, Clone)]
pub struct RecordSet {
    pub dag: Arc<Dag>,
    pub records: Vec<CalibrationRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordJson {
    probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_leaf: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dag: Option<DagJson>,
}

/// Parses JSONL record text against `dag`, validating each score vector
/// under `mode`. Records with an inline `dag` are validated against it
/// instead.
pub fn parse_records(
    dag: &Arc<Dag>,
    text: &str,
    mode: ValidationMode,
) -> Result<RecordSet, RecordError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordJson = serde_json::from_str(line).map_err(|source| RecordError::Parse {
            line: line_no,
            source,
        })?;
        let own_dag = match raw.dag {
            Some(json) => Some(Arc::new(Dag::from_json(json).map_err(|source| {
                RecordError::Invalid {
                    line: line_no,
                    source,
                }
            })?)),
            None => None,
        };
        let target = own_dag.as_deref().unwrap_or(dag);
        let scores =
            ScoreVector::new(target, raw.probs, mode).map_err(|source| RecordError::Invalid {
                line: line_no,
                source,
            })?;
        records.push(CalibrationRecord {
            scores,
            true_leaf: raw.true_leaf,
            dag: own_dag,
        });
    }
    if records.is_empty() {
        return Err(RecordError::Empty);
    }
    Ok(RecordSet {
        dag: Arc::clone(dag),
        records,
    })
}

/// Serializes records to JSONL (inline DAGs included when present).
pub fn records_to_jsonl(records: &[CalibrationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let json = RecordJson {
            probs: r.scores.probs().to_vec(),
            true_leaf: r.true_leaf,
            dag: r.dag.as_deref().map(|d| d.to_json()),
        };
        out.push_str(&serde_json::to_string(&json).expect("record serialization"));
        out.push('\n');
    }
    out
}
