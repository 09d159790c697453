//! Threshold calibration: statistical tests for marginal and PAC coverage
//! and the sequential search over a descending threshold grid.
//!
//! The grid is walked from the largest threshold down; each candidate is
//! tested against the calibration set and the walk stops at the first
//! failure, returning the last passing threshold. When the very first
//! threshold fails there is nothing safe to return, so the outcome carries a
//! full-set sentinel: predict the entire label space, which trivially
//! preserves coverage.
//!
//! The marginal test passes iff `miss <= (n+1) * epsilon`. The PAC test
//! passes iff `miss` stays within the largest budget `l` whose binomial CDF
//! `F(l; n, epsilon)` is still below `delta`.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{Dag, DagError, LeafSet};
use crate::records::CalibrationRecord;
use crate::setopt::{self, SolveError, SolveRequest, TieBreak};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("record {index} has no true leaf")]
    MissingTrueLeaf { index: usize },
    #[error("record {index}: true leaf {id} is not a leaf of its dag")]
    TrueLeafNotLeaf { index: usize, id: u32 },
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("calibration set is empty")]
    EmptyCalibrationSet,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("grid must be strictly descending within [0, 1]: {0}")]
    InvalidGrid(String),
    #[error("invalid guarantee: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// Descending candidate thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, CalibError> {
        if values.is_empty() {
            return Err(CalibError::EmptyGrid);
        }
        for w in values.windows(2) {
            if w[0].is_nan() || w[1].is_nan() || w[0] <= w[1] {
                return Err(CalibError::InvalidGrid(format!(
                    "{} does not strictly decrease to {}",
                    w[0], w[1]
                )));
            }
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CalibError::InvalidGrid("value outside [0, 1]".into()));
        }
        Ok(ThresholdGrid { values })
    }

    /// Default grid: 0.999, 0.995, then 0.99 down to 0.50 in steps of 0.01.
    /// Dense where coverage is most sensitive.
    pub fn default_grid() -> Self {
        let mut values = vec![0.999, 0.995];
        values.extend((50..=99).rev().map(|k| k as f64 / 100.0));
        ThresholdGrid { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ThresholdGrid {
    type Error = String;
    fn try_from(values: Vec<f64>) -> Result<Self, String> {
        ThresholdGrid::new(values).map_err(|e| e.to_string())
    }
}

impl From<ThresholdGrid> for Vec<f64> {
    fn from(g: ThresholdGrid) -> Vec<f64> {
        g.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuaranteeKind {
    Marginal,
    Pac,
}

/// Coverage guarantee to calibrate for: marginal (error rate `epsilon` over
/// calibration draw and test point jointly) or PAC (error rate `epsilon`
/// with probability `1 - delta` over the calibration draw).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeSpec {
    pub kind: GuaranteeKind,
    pub epsilon: f64,
    pub delta: Option<f64>,
}

impl GuaranteeSpec {
    pub fn marginal(epsilon: f64) -> Result<Self, CalibError> {
        Self::validate(GuaranteeKind::Marginal, epsilon, None)
    }

    pub fn pac(epsilon: f64, delta: f64) -> Result<Self, CalibError> {
        Self::validate(GuaranteeKind::Pac, epsilon, Some(delta))
    }

    pub fn validate(
        kind: GuaranteeKind,
        epsilon: f64,
        delta: Option<f64>,
    ) -> Result<Self, CalibError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(CalibError::InvalidSpec(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        match (kind, delta) {
            (GuaranteeKind::Marginal, None) => {}
            (GuaranteeKind::Pac, Some(d)) if d > 0.0 && d < 1.0 => {}
            (GuaranteeKind::Pac, Some(d)) => {
                return Err(CalibError::InvalidSpec(format!(
                    "delta must lie in (0, 1), got {d}"
                )));
            }
            (GuaranteeKind::Marginal, Some(_)) => {
                return Err(CalibError::InvalidSpec(
                    "delta is only meaningful for the pac guarantee".into(),
                ));
            }
            (GuaranteeKind::Pac, None) => {
                return Err(CalibError::InvalidSpec(
                    "pac guarantee requires delta".into(),
                ));
            }
        }
        Ok(GuaranteeSpec {
            kind,
            epsilon,
            delta,
        })
    }

    /// Does a miss count pass this guarantee's statistical test?
    pub fn test(&self, miss: usize, n: usize) -> bool {
        match self.kind {
            GuaranteeKind::Marginal => marginal_test(miss, n, self.epsilon),
            GuaranteeKind::Pac => pac_test(miss, n, self.epsilon, self.delta.expect("validated")),
        }
    }
}

/// Marginal test: pass iff `miss <= (n+1) * epsilon`.
///
/// When `epsilon` is a short decimal (up to 9 digits), the comparison is done
/// in integers so that exactly-integral thresholds such as `100 * 0.1` are
/// not lost to floating point; otherwise a 1e-9 slack is applied.
pub fn marginal_test(miss: usize, n: usize, epsilon: f64) -> bool {
    let mut pow = 1.0f64;
    for d in 0..=9u32 {
        let scaled = epsilon * pow;
        let rounded = scaled.round();
        if (scaled - rounded).abs() <= 1e-6 {
            let k = rounded as u128;
            return (miss as u128) * 10u128.pow(d) <= (n as u128 + 1) * k;
        }
        pow *= 10.0;
    }
    (miss as f64) <= (n as f64 + 1.0) * epsilon + 1e-9
}

/// Binomial CDF `F(l; n, p)`, the probability that Binomial(n, p) <= l.
///
/// Computed by the multiplicative term recurrence in linear space (log-space
/// fallback when the first term underflows), summed left-to-right so the
/// result is monotone non-decreasing in `l`.
pub fn binomial_cdf(l: u64, n: u64, p: f64) -> Result<f64, CalibError> {
    if l > n {
        return Err(CalibError::DomainError(format!("l = {l} exceeds n = {n}")));
    }
    if n > i32::MAX as u64 {
        return Err(CalibError::DomainError(format!("n = {n} too large")));
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(CalibError::DomainError(format!("p = {p} outside [0, 1]")));
    }
    if p == 0.0 || l == n {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let ratio = p / q;
    let t0 = if (n as f64) * (-p).ln_1p() > -700.0 {
        q.powi(n as i32)
    } else {
        0.0
    };
    let sum = if t0 > 0.0 {
        let mut term = t0;
        let mut sum = term;
        for j in 0..l {
            term *= (n - j) as f64 / (j + 1) as f64 * ratio;
            sum += term;
        }
        sum
    } else {
        // Log-space per-term evaluation for extreme (n, p).
        let lnp = p.ln();
        let lnq = (-p).ln_1p();
        let mut ln_choose = 0.0;
        let mut sum = (n as f64 * lnq).exp();
        for j in 1..=l {
            ln_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
            sum += (ln_choose + j as f64 * lnp + (n - j) as f64 * lnq).exp();
        }
        sum
    };
    Ok(sum.clamp(0.0, 1.0))
}

/// Largest miss count `l` in `0..=n` with `F(l; n, epsilon) < delta`; `None`
/// when even zero misses fail the condition (the PAC test then rejects every
/// threshold).
pub fn pac_miss_budget(n: u64, epsilon: f64, delta: f64) -> Result<Option<u64>, CalibError> {
    if n < 1 {
        return Err(CalibError::DomainError("n must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(CalibError::DomainError(format!(
            "epsilon = {epsilon}, delta = {delta} must lie in (0, 1)"
        )));
    }
    let mut best = None;
    for l in 0..=n {
        if binomial_cdf(l, n, epsilon)? < delta {
            best = Some(l);
        } else {
            break;
        }
    }
    Ok(best)
}

/// PAC test: pass iff the miss count stays within [`pac_miss_budget`].
pub fn pac_test(miss: usize, n: usize, epsilon: f64, delta: f64) -> bool {
    match pac_miss_budget(n as u64, epsilon, delta) {
        Ok(Some(budget)) => miss as u64 <= budget,
        Ok(None) | Err(_) => false,
    }
}

/// Calibrated threshold: a grid value, or the full-label-set fallback when
/// the first grid value already failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauHat {
    Threshold(f64),
    FullSet,
}

impl TauHat {
    pub fn is_sentinel(&self) -> bool {
        matches!(self, TauHat::FullSet)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            TauHat::Threshold(v) => Some(*v),
            TauHat::FullSet => None,
        }
    }
}

/// Audit entry for one evaluated threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAudit {
    pub tau: f64,
    pub miss: usize,
    pub pass: bool,
}

/// Result of the sequential threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub tau_hat: TauHat,
    /// 1-based index of the last passing threshold; `None` when the first
    /// threshold failed.
    pub index_hat: Option<usize>,
    pub n: usize,
    /// One entry per evaluated threshold, in evaluation order. Thresholds
    /// after the first failure are never evaluated and never appear.
    pub per_threshold: Vec<ThresholdAudit>,
}

/// Flat serialization of [`CalibrationOutcome`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationOutcomeJson {
    pub tau_hat: Option<f64>,
    pub sentinel: bool,
    pub index_hat: Option<usize>,
    pub n: usize,
    pub per_threshold: Vec<ThresholdAudit>,
}

impl From<&CalibrationOutcome> for CalibrationOutcomeJson {
    fn from(o: &CalibrationOutcome) -> Self {
        CalibrationOutcomeJson {
            tau_hat: o.tau_hat.value(),
            sentinel: o.tau_hat.is_sentinel(),
            index_hat: o.index_hat,
            n: o.n,
            per_threshold: o.per_threshold.clone(),
        }
    }
}

impl TryFrom<CalibrationOutcomeJson> for CalibrationOutcome {
    type Error = CalibError;
    fn try_from(j: CalibrationOutcomeJson) -> Result<Self, CalibError> {
        let tau_hat = match (j.sentinel, j.tau_hat) {
            (true, None) => TauHat::FullSet,
            (false, Some(v)) => TauHat::Threshold(v),
            _ => {
                return Err(CalibError::InvalidSpec(
                    "sentinel flag inconsistent with tau_hat".into(),
                ))
            }
        };
        Ok(CalibrationOutcome {
            tau_hat,
            index_hat: j.index_hat,
            n: j.n,
            per_threshold: j.per_threshold,
        })
    }
}

/// Sequential early-stopping walk over the grid. `miss_at` is invoked once
/// per threshold, in grid order, and never again after its first failure.
pub fn run_threshold_search(
    grid: &ThresholdGrid,
    spec: &GuaranteeSpec,
    n: usize,
    mut miss_at: impl FnMut(f64) -> Result<usize, CalibError>,
) -> Result<CalibrationOutcome, CalibError> {
    if grid.is_empty() {
        return Err(CalibError::EmptyGrid);
    }
    if n == 0 {
        return Err(CalibError::EmptyCalibrationSet);
    }
    let mut per_threshold = Vec::new();
    let mut last_pass: Option<(usize, f64)> = None;
    for (i, &tau) in grid.values().iter().enumerate() {
        let miss = miss_at(tau)?;
        let pass = spec.test(miss, n);
        per_threshold.push(ThresholdAudit { tau, miss, pass });
        if pass {
            last_pass = Some((i + 1, tau));
        } else {
            break;
        }
    }
    Ok(CalibrationOutcome {
        tau_hat: match last_pass {
            Some((_, tau)) => TauHat::Threshold(tau),
            None => TauHat::FullSet,
        },
        index_hat: last_pass.map(|(i, _)| i),
        n,
        per_threshold,
    })
}

/// How calibration-time solves are configured.
#[derive(Debug, Clone, Copy)]
pub struct SolvePolicy {
    pub m: u32,
    pub tie_break: TieBreak,
    /// When a record's solve is infeasible the prediction falls back to the
    /// full label set (never a miss) unless this flag is set.
    pub infeasible_is_miss: bool,
}

impl SolvePolicy {
    pub fn new(m: u32) -> Self {
        SolvePolicy {
            m,
            tie_break: TieBreak::default(),
            infeasible_is_miss: false,
        }
    }
}

/// Outcome of one record-level solve, as needed by miss counting and
/// evaluation.
#[derive(Debug, Clone)]
pub enum RecordSolve {
    Covered {
        cover: LeafSet,
        sigma: u32,
        mass: f64,
    },
    Infeasible,
}

/// Memo of record-level solves keyed by (dag, scores, tau, m, tie-break).
/// Purely a cache of pure-function results; safe to share across threads.
#[derive(Default)]
pub struct SolveMemo {
    map: Mutex<HashMap<MemoKey, RecordSolve>>,
}

/// (dag structure, score content, tau bits, m, tie-break).
type MemoKey = (u64, u64, u64, u32, TieBreak);

impl SolveMemo {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(dag: &Dag, rec: &CalibrationRecord, tau: f64, policy: &SolvePolicy) -> MemoKey {
        (
            dag.structure_sig(),
            rec.scores.content_sig(),
            tau.to_bits(),
            policy.m,
            policy.tie_break,
        )
    }

    fn get(&self, key: &MemoKey) -> Option<RecordSolve> {
        self.map.lock().unwrap().get(key).cloned()
    }

    fn insert(&self, key: MemoKey, value: RecordSolve) {
        self.map.lock().unwrap().insert(key, value);
    }
}

/// Solves one record at `tau`, consulting and filling `memo`.
pub fn solve_record(
    shared_dag: &Dag,
    record: &CalibrationRecord,
    tau: f64,
    policy: &SolvePolicy,
    memo: Option<&SolveMemo>,
) -> Result<RecordSolve, CalibError> {
    let dag = record.effective_dag(shared_dag);
    let key = SolveMemo::key(dag, record, tau, policy);
    if let Some(memo) = memo {
        if let Some(hit) = memo.get(&key) {
            return Ok(hit);
        }
    }
    let mut req = SolveRequest::new(dag, &record.scores, tau, policy.m);
    req.tie_break = policy.tie_break;
    let outcome = match setopt::solve(&req) {
        Ok(res) => {
            let cover = dag.leaf_cover(&res.set.node_ids)?;
            RecordSolve::Covered {
                sigma: res.set.size as u32,
                mass: res.set.mass,
                cover,
            }
        }
        Err(SolveError::Infeasible { .. }) => RecordSolve::Infeasible,
        Err(e) => return Err(e.into()),
    };
    if let Some(memo) = memo {
        memo.insert(key, outcome.clone());
    }
    Ok(outcome)
}

fn record_miss(
    shared_dag: &Dag,
    record: &CalibrationRecord,
    index: usize,
    outcome: &RecordSolve,
    policy: &SolvePolicy,
) -> Result<bool, CalibError> {
    let id = record
        .true_leaf
        .ok_or(CalibError::MissingTrueLeaf { index })?;
    let dag = record.effective_dag(shared_dag);
    let leaf_index = dag
        .leaf_index_of(id)?
        .ok_or(CalibError::TrueLeafNotLeaf { index, id })?;
    Ok(match outcome {
        RecordSolve::Covered { cover, .. } => !cover.contains(leaf_index),
        RecordSolve::Infeasible => policy.infeasible_is_miss,
    })
}

/// Solves the distinct (dag, scores) pairs among `records` at `tau`, fanning
/// out across the current rayon pool, and leaves the results in `memo`.
pub fn prefetch_solves(
    dag: &Dag,
    records: &[CalibrationRecord],
    tau: f64,
    policy: &SolvePolicy,
    memo: &SolveMemo,
) -> Result<(), CalibError> {
    let mut unique: Vec<usize> = Vec::new();
    let mut seen: HashMap<MemoKey, ()> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        let key = SolveMemo::key(rec.effective_dag(dag), rec, tau, policy);
        if memo.get(&key).is_none() && seen.insert(key, ()).is_none() {
            unique.push(i);
        }
    }
    unique
        .par_iter()
        .map(|&i| solve_record(dag, &records[i], tau, policy, Some(memo)).map(|_| ()))
        .collect::<Result<Vec<()>, CalibError>>()?;
    Ok(())
}

/// Number of calibration records whose true leaf escapes the prediction set
/// solved at `tau`. Repeated score vectors are solved once.
pub fn miss_count_with(
    dag: &Dag,
    records: &[CalibrationRecord],
    tau: f64,
    policy: &SolvePolicy,
    memo: Option<&SolveMemo>,
) -> Result<usize, CalibError> {
    let local = SolveMemo::new();
    let memo = memo.unwrap_or(&local);
    prefetch_solves(dag, records, tau, policy, memo)?;
    let mut misses = 0;
    for (i, rec) in records.iter().enumerate() {
        let outcome = solve_record(dag, rec, tau, policy, Some(memo))?;
        if record_miss(dag, rec, i, &outcome, policy)? {
            misses += 1;
        }
    }
    Ok(misses)
}

/// [`miss_count_with`] under the default solve policy for `m`.
pub fn miss_count(
    dag: &Dag,
    records: &[CalibrationRecord],
    tau: f64,
    m: u32,
) -> Result<usize, CalibError> {
    miss_count_with(dag, records, tau, &SolvePolicy::new(m), None)
}

/// Walks the grid from its largest threshold down, testing each candidate
/// against the calibration set, and returns the last passing threshold (or
/// the full-set sentinel when the first candidate fails). Solves are
/// memoized across thresholds.
pub fn estimate_tau(
    dag: &Dag,
    records: &[CalibrationRecord],
    grid: &ThresholdGrid,
    spec: &GuaranteeSpec,
    policy: &SolvePolicy,
) -> Result<CalibrationOutcome, CalibError> {
    if records.is_empty() {
        return Err(CalibError::EmptyCalibrationSet);
    }
    let memo = SolveMemo::new();
    run_threshold_search(grid, spec, records.len(), |tau| {
        miss_count_with(dag, records, tau, policy, Some(&memo))
    })
}

/// Calibration config file: `{"guarantee": "marginal"|"pac", "epsilon": r,
/// "delta": r?, "m": int, "grid": [r,...]?, "infeasible_is_miss": bool?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub guarantee: GuaranteeKind,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub infeasible_is_miss: bool,
}

impl CalibrationConfig {
    pub fn guarantee_spec(&self) -> Result<GuaranteeSpec, CalibError> {
        GuaranteeSpec::validate(self.guarantee, self.epsilon, self.delta)
    }

    pub fn threshold_grid(&self) -> Result<ThresholdGrid, CalibError> {
        match &self.grid {
            Some(values) => ThresholdGrid::new(values.clone()),
            None => Ok(ThresholdGrid::default_grid()),
        }
    }

    pub fn solve_policy(&self) -> SolvePolicy {
        SolvePolicy {
            m: self.m,
            tie_break: TieBreak::default(),
            infeasible_is_miss: self.infeasible_is_miss,
        }
    }
}
