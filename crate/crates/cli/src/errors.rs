//! Error-to-exit-code mapping with stable single-line diagnostics.

use std::fmt;

use csp_core::calibrate::CalibError;
use csp_core::dag::DagError;
use csp_core::domains::DomainError;
use csp_core::eval::EvalError;
use csp_core::records::RecordError;
use csp_core::setopt::SolveError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SENTINEL_STRICT: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

/// A diagnosed failure: stable code token, exit code, one-line message.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub exit: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // single line: harnesses match on the code token
        let flat = self.message.replace('\n', " ");
        write!(f, "error: {} {}", self.code, flat)
    }
}

impl CliError {
    pub fn config(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            exit: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        CliError::config("io", format!("{context}: {err}"))
    }
}

fn dag_code(e: &DagError) -> &'static str {
    match e {
        DagError::CycleDetected => "cycle-detected",
        DagError::InvalidId(_) => "invalid-id",
        DagError::DuplicateEdge(_, _) => "duplicate-edge",
        DagError::EmptyDag => "empty-dag",
        DagError::MissingEdges => "missing-edges",
        DagError::IsLeaf(_) => "is-leaf",
        DagError::DagMismatch => "dag-mismatch",
        DagError::InvalidProbability { .. } => "invalid-probability",
        DagError::ProbSumOutOfRange { .. } => "prob-sum",
        DagError::WrongLeafCount { .. } => "wrong-leaf-count",
        DagError::LeafFieldMismatch => "leaf-field-mismatch",
        DagError::BadLabelKey(_) => "bad-label-key",
    }
}

impl From<DagError> for CliError {
    fn from(e: DagError) -> Self {
        CliError::config(dag_code(&e), e.to_string())
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        let code = match &e {
            DomainError::TooLarge(_) => "too-large",
            DomainError::InvalidDistribution(_) => "invalid-distribution",
            DomainError::UnknownGenerator(_) => "unknown-generator",
            DomainError::NotEnumerable(_) => "not-enumerable",
            DomainError::ParseError(_) => "parse",
            DomainError::BadSpec(_) => "bad-spec",
            DomainError::Dag(inner) => dag_code(inner),
        };
        CliError::config(code, e.to_string())
    }
}

impl From<RecordError> for CliError {
    fn from(e: RecordError) -> Self {
        let code = match &e {
            RecordError::Parse { .. } => "parse",
            RecordError::Invalid { .. } => "invalid-record",
            RecordError::Empty => "empty-records",
            RecordError::Dag(inner) => dag_code(inner),
        };
        CliError::config(code, e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match &e {
            SolveError::Infeasible { .. } => CliError {
                code: "infeasible",
                exit: EXIT_INFEASIBLE,
                message: e.to_string(),
            },
            SolveError::TooLarge { .. } => CliError::config("too-large", e.to_string()),
            SolveError::BadRequest(_) => CliError::config("bad-request", e.to_string()),
            SolveError::Dag(inner) => CliError::config(dag_code(inner), e.to_string()),
        }
    }
}

impl From<CalibError> for CliError {
    fn from(e: CalibError) -> Self {
        match e {
            CalibError::Solve(inner) => inner.into(),
            CalibError::Dag(inner) => inner.into(),
            other => {
                let code = match &other {
                    CalibError::MissingTrueLeaf { .. } => "missing-true-leaf",
                    CalibError::TrueLeafNotLeaf { .. } => "true-leaf-not-leaf",
                    CalibError::EmptyGrid => "empty-grid",
                    CalibError::EmptyCalibrationSet => "empty-calibration-set",
                    CalibError::DomainError(_) => "domain",
                    CalibError::InvalidGrid(_) => "invalid-grid",
                    CalibError::InvalidSpec(_) => "invalid-spec",
                    _ => "calibrate",
                };
                CliError::config(code, other.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Calib(inner) => inner.into(),
            EvalError::Domain(inner) => inner.into(),
            EvalError::Dag(inner) => inner.into(),
            EvalError::Solve(inner) => inner.into(),
            EvalError::UnknownFormat(f) => {
                CliError::config("unknown-format", format!("unknown report format: {f}"))
            }
            EvalError::ParseError(m) => CliError::config("parse", m),
        }
    }
}
