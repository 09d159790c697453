//! Metrics, exact coverage on enumerable domains, and the multi-seed
//! calibrate/evaluate trial protocol.
//!
//! The trial harness pairs a DAG with a finite-atom score generator. Because
//! the mixture is finite, the true coverage of any threshold is a weighted
//! sum over atoms of covered truth mass, computed exactly rather than
//! estimated from a test sample; Monte Carlo noise then enters only through
//! the calibration draws.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{
    self, CalibError, GuaranteeKind, GuaranteeSpec, RecordSolve, SolveMemo, SolvePolicy, TauHat,
    ThresholdGrid,
};
use crate::dag::{Dag, DagError, Fnv};
use crate::domains::{AtomSet, DomainError, GeneratorSpec};
use crate::records::CalibrationRecord;
use crate::setopt::{self, SolveError, SolveRequest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown report format: {0} (expected csv or json)")]
    UnknownFormat(String),
    #[error("report parse error: {0}")]
    ParseError(String),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Per-record evaluation outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerExample {
    pub miss: bool,
    pub size: usize,
}

/// Configuration echoed into a report so results are self-describing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfigEcho {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub m: Option<u32>,
    pub guarantee: Option<GuaranteeKind>,
    pub tau_hat: Option<f64>,
    pub sentinel: bool,
    pub n_cal: Option<usize>,
    pub n_test: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub coverage_rate: f64,
    pub avg_set_size: f64,
    pub per_example: Vec<PerExample>,
    pub config: EvalConfigEcho,
}

/// Evaluates test records at a calibrated threshold: per-record solve, miss
/// iff the true leaf escapes the covered set. The full-set sentinel (and,
/// by default, any infeasible solve) predicts the entire label space.
pub fn evaluate(
    dag: &Dag,
    records: &[CalibrationRecord],
    tau_hat: TauHat,
    policy: &SolvePolicy,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(CalibError::EmptyCalibrationSet.into());
    }
    let mut per_example = Vec::with_capacity(records.len());
    match tau_hat {
        TauHat::FullSet => {
            for rec in records {
                let leaves = rec.effective_dag(dag).leaf_count();
                per_example.push(PerExample {
                    miss: false,
                    size: leaves,
                });
            }
        }
        TauHat::Threshold(tau) => {
            let memo = SolveMemo::new();
            calibrate::prefetch_solves(dag, records, tau, policy, &memo)?;
            for (i, rec) in records.iter().enumerate() {
                let outcome = calibrate::solve_record(dag, rec, tau, policy, Some(&memo))?;
                let truth = rec
                    .true_leaf
                    .ok_or(CalibError::MissingTrueLeaf { index: i })?;
                let rec_dag = rec.effective_dag(dag);
                let leaf_index =
                    rec_dag
                        .leaf_index_of(truth)?
                        .ok_or(CalibError::TrueLeafNotLeaf {
                            index: i,
                            id: truth,
                        })?;
                per_example.push(match outcome {
                    RecordSolve::Covered { cover, sigma, .. } => PerExample {
                        miss: !cover.contains(leaf_index),
                        size: sigma as usize,
                    },
                    RecordSolve::Infeasible => PerExample {
                        miss: policy.infeasible_is_miss,
                        size: rec_dag.leaf_count(),
                    },
                });
            }
        }
    }
    let n = per_example.len();
    let misses = per_example.iter().filter(|e| e.miss).count();
    let total_size: usize = per_example.iter().map(|e| e.size).sum();
    Ok(EvalReport {
        coverage_rate: 1.0 - (misses as f64) / (n as f64),
        avg_set_size: (total_size as f64) / (n as f64),
        per_example,
        config: EvalConfigEcho {
            tau_hat: tau_hat.value(),
            sentinel: tau_hat.is_sentinel(),
            m: Some(policy.m),
            n_test: n,
            ..Default::default()
        },
    })
}

/// Precomputed solves for every (atom, grid threshold) pair, plus the exact
/// per-threshold coverage and expected size under the mixture.
pub struct AtomGrid {
    pub grid: ThresholdGrid,
    solves: Vec<Vec<RecordSolve>>,
    pub coverage_by_tau: Vec<f64>,
    pub size_by_tau: Vec<f64>,
    leaf_count: usize,
}

impl AtomGrid {
    /// Solves every atom at every grid threshold (in parallel) and
    /// aggregates exact coverage and expected size per threshold.
    pub fn build(
        dag: &Dag,
        atoms: &AtomSet,
        grid: &ThresholdGrid,
        policy: &SolvePolicy,
    ) -> Result<AtomGrid, EvalError> {
        let taus = grid.values();
        let pairs: Vec<(usize, usize)> = (0..atoms.atoms.len())
            .flat_map(|a| (0..taus.len()).map(move |t| (a, t)))
            .collect();
        let flat: Vec<RecordSolve> = pairs
            .par_iter()
            .map(|&(a, t)| -> Result<RecordSolve, EvalError> {
                let mut req = SolveRequest::new(dag, &atoms.atoms[a].scores, taus[t], policy.m);
                req.tie_break = policy.tie_break;
                match setopt::solve(&req) {
                    Ok(res) => {
                        let cover = dag.leaf_cover(&res.set.node_ids)?;
                        Ok(RecordSolve::Covered {
                            sigma: res.set.size as u32,
                            mass: res.set.mass,
                            cover,
                        })
                    }
                    Err(SolveError::Infeasible { .. }) => Ok(RecordSolve::Infeasible),
                    Err(e) => Err(e.into()),
                }
            })
            .collect::<Result<_, _>>()?;
        let mut solves: Vec<Vec<RecordSolve>> = Vec::with_capacity(atoms.atoms.len());
        let mut iter = flat.into_iter();
        for _ in 0..atoms.atoms.len() {
            solves.push(iter.by_ref().take(taus.len()).collect());
        }

        let leaf_count = dag.leaf_count();
        let mut coverage_by_tau = vec![0.0; taus.len()];
        let mut size_by_tau = vec![0.0; taus.len()];
        for (a, atom) in atoms.atoms.iter().enumerate() {
            for t in 0..taus.len() {
                let (cov, size) = match &solves[a][t] {
                    RecordSolve::Covered { cover, sigma, .. } => {
                        let mut mass = 0.0;
                        for li in cover.iter_ones() {
                            mass += atom.truth[li as usize];
                        }
                        (mass, *sigma as f64)
                    }
                    RecordSolve::Infeasible => {
                        let cov = if policy.infeasible_is_miss { 0.0 } else { 1.0 };
                        (cov, leaf_count as f64)
                    }
                };
                coverage_by_tau[t] += atom.weight * cov;
                size_by_tau[t] += atom.weight * size;
            }
        }
        Ok(AtomGrid {
            grid: grid.clone(),
            solves,
            coverage_by_tau,
            size_by_tau,
            leaf_count,
        })
    }

    pub fn solve_at(&self, atom: usize, tau_index: usize) -> &RecordSolve {
        &self.solves[atom][tau_index]
    }

    fn is_miss(
        &self,
        atom: usize,
        tau_index: usize,
        leaf_index: u32,
        policy: &SolvePolicy,
    ) -> bool {
        match &self.solves[atom][tau_index] {
            RecordSolve::Covered { cover, .. } => !cover.contains(leaf_index),
            RecordSolve::Infeasible => policy.infeasible_is_miss,
        }
    }

    fn coverage_of(&self, tau_hat: &TauHat, index_hat: Option<usize>) -> f64 {
        match tau_hat {
            TauHat::FullSet => 1.0,
            TauHat::Threshold(_) => {
                self.coverage_by_tau[index_hat.expect("threshold has an index") - 1]
            }
        }
    }

    fn size_of(&self, tau_hat: &TauHat, index_hat: Option<usize>) -> f64 {
        match tau_hat {
            TauHat::FullSet => self.leaf_count as f64,
            TauHat::Threshold(_) => {
                self.size_by_tau[index_hat.expect("threshold has an index") - 1]
            }
        }
    }
}

/// Exact probability that the true label lands inside the prediction set at
/// threshold `tau`, enumerated over the generator's atoms.
pub fn exact_coverage(
    dag: &Dag,
    generator: &GeneratorSpec,
    tau: f64,
    policy: &SolvePolicy,
) -> Result<f64, EvalError> {
    let atoms = generator.materialize_atoms(dag)?;
    exact_coverage_atoms(dag, &atoms, tau, policy)
}

/// [`exact_coverage`] over an explicit atom mixture.
pub fn exact_coverage_atoms(
    dag: &Dag,
    atoms: &AtomSet,
    tau: f64,
    policy: &SolvePolicy,
) -> Result<f64, EvalError> {
    let grid = ThresholdGrid::new(vec![tau])?;
    let ag = AtomGrid::build(dag, atoms, &grid, policy)?;
    Ok(ag.coverage_by_tau[0])
}

/// One calibrate-then-measure trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub tau_hat: TauHat,
    /// Exact coverage of the calibrated predictor (1.0 for the sentinel).
    pub coverage: f64,
    /// Exact expected prediction set size.
    pub avg_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub n_trials: usize,
    pub mean_coverage: f64,
    pub std_coverage: f64,
    pub mean_size: f64,
    pub std_size: f64,
    /// Fraction of trials whose exact coverage fell below `1 - epsilon`.
    pub violation_fraction: f64,
    pub sentinel_trials: usize,
}

/// Derives a child seed from a master seed and an index; the splittable
/// counter scheme that keeps trials independent of scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut h = Fnv::new();
    h.write_u64(master);
    h.write_u64(index);
    h.finish()
}

/// Runs `n_trials` independent trials: draw a fresh calibration sample from
/// the atom mixture, walk the threshold grid, then measure the calibrated
/// threshold's exact coverage and expected size.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    dag: &Dag,
    generator: &GeneratorSpec,
    guarantee: &GuaranteeSpec,
    policy: &SolvePolicy,
    grid: &ThresholdGrid,
    n_cal: usize,
    n_trials: usize,
    seed: u64,
) -> Result<(TrialSummary, Vec<TrialResult>), EvalError> {
    let atoms = generator.materialize_atoms(dag)?;
    let atom_grid = AtomGrid::build(dag, &atoms, grid, policy)?;
    run_trials_on_grid(&atoms, &atom_grid, guarantee, policy, n_cal, n_trials, seed)
}

/// Trial loop over a prebuilt [`AtomGrid`] (shared across sweep cells).
pub fn run_trials_on_grid(
    atoms: &AtomSet,
    atom_grid: &AtomGrid,
    guarantee: &GuaranteeSpec,
    policy: &SolvePolicy,
    n_cal: usize,
    n_trials: usize,
    seed: u64,
) -> Result<(TrialSummary, Vec<TrialResult>), EvalError> {
    if n_cal == 0 {
        return Err(CalibError::EmptyCalibrationSet.into());
    }
    let mut results = Vec::with_capacity(n_trials);
    for t in 0..n_trials {
        let trial_seed = derive_seed(seed, t as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let draws: Vec<(usize, u32)> = (0..n_cal)
            .map(|_| {
                let a = rng.gen_range(0..atoms.atoms.len());
                let leaf = sample_index(&atoms.atoms[a].truth, &mut rng);
                (a, leaf as u32)
            })
            .collect();
        let mut next_index = 0usize;
        let outcome = calibrate::run_threshold_search(&atom_grid.grid, guarantee, n_cal, |tau| {
            let idx = next_index;
            next_index += 1;
            debug_assert_eq!(atom_grid.grid.values()[idx], tau);
            Ok(draws
                .iter()
                .filter(|&&(a, leaf)| atom_grid.is_miss(a, idx, leaf, policy))
                .count())
        })?;
        results.push(TrialResult {
            seed: trial_seed,
            coverage: atom_grid.coverage_of(&outcome.tau_hat, outcome.index_hat),
            avg_size: atom_grid.size_of(&outcome.tau_hat, outcome.index_hat),
            tau_hat: outcome.tau_hat,
        });
    }
    Ok((summarize(&results, guarantee.epsilon), results))
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.gen_range(0.0..1.0) * total;
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

fn summarize(results: &[TrialResult], epsilon: f64) -> TrialSummary {
    let n = results.len();
    let mean = |f: fn(&TrialResult) -> f64| -> f64 {
        if n == 0 {
            return 0.0;
        }
        results.iter().map(f).sum::<f64>() / n as f64
    };
    let std = |f: fn(&TrialResult) -> f64, mu: f64| -> f64 {
        if n <= 1 {
            return 0.0;
        }
        let var = results.iter().map(|r| (f(r) - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    };
    let mean_coverage = mean(|r| r.coverage);
    let mean_size = mean(|r| r.avg_size);
    TrialSummary {
        n_trials: n,
        std_coverage: std(|r| r.coverage, mean_coverage),
        std_size: std(|r| r.avg_size, mean_size),
        mean_coverage,
        mean_size,
        violation_fraction: if n == 0 {
            0.0
        } else {
            results
                .iter()
                .filter(|r| r.coverage < 1.0 - epsilon)
                .count() as f64
                / n as f64
        },
        sentinel_trials: results.iter().filter(|r| r.tau_hat.is_sentinel()).count(),
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2]
}
fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}
fn default_ms() -> Vec<u32> {
    vec![1, 2, 4, 8]
}
fn default_trials() -> usize {
    500
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_ncal() -> usize {
    200
}
fn default_guarantees() -> Vec<GuaranteeKind> {
    vec![GuaranteeKind::Marginal]
}

/// Hyperparameter sweep configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_epsilons")]
    pub epsilon_list: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub delta_list: Vec<f64>,
    #[serde(default = "default_ms")]
    pub m_list: Vec<u32>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_ncal")]
    pub n_cal: usize,
    #[serde(default = "default_guarantees")]
    pub guarantees: Vec<GuaranteeKind>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            epsilon_list: default_epsilons(),
            delta_list: default_deltas(),
            m_list: default_ms(),
            n_trials: default_trials(),
            seeds: default_seeds(),
            n_cal: default_ncal(),
            guarantees: default_guarantees(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.epsilon_list.is_empty() || self.m_list.is_empty() || self.seeds.is_empty() {
            return Err(EvalError::ParseError(
                "epsilon_list, m_list, and seeds must be non-empty".into(),
            ));
        }
        if self.guarantees.contains(&GuaranteeKind::Pac) && self.delta_list.is_empty() {
            return Err(EvalError::ParseError(
                "pac sweep requires a non-empty delta_list".into(),
            ));
        }
        Ok(())
    }
}

/// One long-format output row: a single trial in a single sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub m: u32,
    pub guarantee: GuaranteeKind,
    pub tau_hat: TauHat,
    pub coverage_rate: f64,
    pub avg_set_size: f64,
    pub seed: u64,
}

/// Runs the full sweep grid, one [`ReportRow`] per trial, in a fixed
/// deterministic order. Atom grids are built once per `m` and shared across
/// cells.
pub fn run_sweep(
    dag: &Dag,
    generator: &GeneratorSpec,
    sweep: &SweepSpec,
    grid: &ThresholdGrid,
    base_policy: &SolvePolicy,
) -> Result<Vec<ReportRow>, EvalError> {
    sweep.validate()?;
    let atoms = generator.materialize_atoms(dag)?;
    let mut grids: HashMap<u32, Arc<AtomGrid>> = HashMap::new();
    for &m in &sweep.m_list {
        let policy = SolvePolicy { m, ..*base_policy };
        grids.insert(m, Arc::new(AtomGrid::build(dag, &atoms, grid, &policy)?));
    }
    let mut rows = Vec::new();
    for &master in &sweep.seeds {
        let mut cell_index = 0u64;
        for &kind in &sweep.guarantees {
            let deltas: Vec<Option<f64>> = match kind {
                GuaranteeKind::Marginal => vec![None],
                GuaranteeKind::Pac => sweep.delta_list.iter().map(|&d| Some(d)).collect(),
            };
            for &epsilon in &sweep.epsilon_list {
                for &delta in &deltas {
                    for &m in &sweep.m_list {
                        let guarantee = GuaranteeSpec::validate(kind, epsilon, delta)?;
                        let policy = SolvePolicy { m, ..*base_policy };
                        let cell_seed = derive_seed(master, cell_index);
                        cell_index += 1;
                        let (_, trials) = run_trials_on_grid(
                            &atoms,
                            &grids[&m],
                            &guarantee,
                            &policy,
                            sweep.n_cal,
                            sweep.n_trials,
                            cell_seed,
                        )?;
                        for trial in trials {
                            rows.push(ReportRow {
                                epsilon,
                                delta,
                                m,
                                guarantee: kind,
                                tau_hat: trial.tau_hat,
                                coverage_rate: trial.coverage,
                                avg_set_size: trial.avg_size,
                                seed: trial.seed,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

/// Floats in reports carry 17 significant digits so they round-trip exactly.
fn fmt_float(v: f64) -> String {
    format!("{:.16e}", v)
}

fn guarantee_token(kind: GuaranteeKind) -> &'static str {
    match kind {
        GuaranteeKind::Marginal => "marginal",
        GuaranteeKind::Pac => "pac",
    }
}

pub const REPORT_HEADER: &str = "epsilon,delta,m,guarantee,tau_hat,coverage_rate,avg_set_size,seed";

/// Serializes rows in the stable long format. CSV uses an empty `delta`
/// field for marginal rows and the token `full_set` for sentinel thresholds;
/// JSON uses `null` for both.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(REPORT_HEADER);
            out.push('\n');
            for r in rows {
                let delta = r.delta.map(fmt_float).unwrap_or_default();
                let tau = match r.tau_hat {
                    TauHat::Threshold(v) => fmt_float(v),
                    TauHat::FullSet => "full_set".to_string(),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    fmt_float(r.epsilon),
                    delta,
                    r.m,
                    guarantee_token(r.guarantee),
                    tau,
                    fmt_float(r.coverage_rate),
                    fmt_float(r.avg_set_size),
                    r.seed
                );
            }
            out
        }
        ReportFormat::Json => {
            let mut out = String::from("[");
            for (i, r) in rows.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let delta = r.delta.map(fmt_float).unwrap_or_else(|| "null".into());
                let tau = match r.tau_hat {
                    TauHat::Threshold(v) => fmt_float(v),
                    TauHat::FullSet => "null".to_string(),
                };
                let _ = write!(
                    out,
                    "{{\"epsilon\":{},\"delta\":{},\"m\":{},\"guarantee\":\"{}\",\"tau_hat\":{},\"coverage_rate\":{},\"avg_set_size\":{},\"seed\":{}}}",
                    fmt_float(r.epsilon),
                    delta,
                    r.m,
                    guarantee_token(r.guarantee),
                    tau,
                    fmt_float(r.coverage_rate),
                    fmt_float(r.avg_set_size),
                    r.seed
                );
            }
            out.push_str("]\n");
            out
        }
    }
}

/// Parses a CSV report back into rows (the round-trip counterpart of
/// [`emit_report`]).
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, EvalError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| EvalError::ParseError("empty report".into()))?;
    if header != REPORT_HEADER {
        return Err(EvalError::ParseError(format!(
            "unexpected header: {header}"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(EvalError::ParseError(format!(
                "line {}: expected 8 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_f64 = |s: &str| -> Result<f64, EvalError> {
            s.parse()
                .map_err(|_| EvalError::ParseError(format!("line {}: bad float {s}", i + 2)))
        };
        rows.push(ReportRow {
            epsilon: parse_f64(fields[0])?,
            delta: if fields[1].is_empty() {
                None
            } else {
                Some(parse_f64(fields[1])?)
            },
            m: fields[2]
                .parse()
                .map_err(|_| EvalError::ParseError(format!("line {}: bad m", i + 2)))?,
            guarantee: match fields[3] {
                "marginal" => GuaranteeKind::Marginal,
                "pac" => GuaranteeKind::Pac,
                other => {
                    return Err(EvalError::ParseError(format!(
                        "line {}: bad guarantee {other}",
                        i + 2
                    )))
                }
            },
            tau_hat: if fields[4] == "full_set" {
                TauHat::FullSet
            } else {
                TauHat::Threshold(parse_f64(fields[4])?)
            },
            coverage_rate: parse_f64(fields[5])?,
            avg_set_size: parse_f64(fields[6])?,
            seed: fields[7]
                .parse()
                .map_err(|_| EvalError::ParseError(format!("line {}: bad seed", i + 2)))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{ScoreVector, ValidationMode};

    fn tree6() -> (Dag, ScoreVector) {
        let dag = Dag::new(6, vec![(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)], None).unwrap();
        let scores = ScoreVector::new(&dag, vec![0.5, 0.2, 0.3], ValidationMode::Strict).unwrap();
        (dag, scores)
    }

    #[test]
    fn evaluate_sentinel_full_set() {
        let (dag, scores) = tree6();
        let records: Vec<CalibrationRecord> = (0..4)
            .map(|_| CalibrationRecord::new(scores.clone(), Some(3)))
            .collect();
        let report = evaluate(&dag, &records, TauHat::FullSet, &SolvePolicy::new(1)).unwrap();
        assert_eq!(report.coverage_rate, 1.0);
        assert_eq!(report.avg_set_size, 3.0);
        assert!(report.config.sentinel);
    }

    #[test]
    fn evaluate_zero_threshold() {
        let (dag, scores) = tree6();
        let records = vec![CalibrationRecord::new(scores, Some(3))];
        let report =
            evaluate(&dag, &records, TauHat::Threshold(0.0), &SolvePolicy::new(1)).unwrap();
        assert_eq!(report.coverage_rate, 0.0);
        assert_eq!(report.avg_set_size, 0.0);
    }

    #[test]
    fn evaluate_peaked_domain() {
        let dag = Dag::new(6, vec![(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)], None).unwrap();
        let scores = ScoreVector::new(&dag, vec![0.9, 0.1, 0.0], ValidationMode::Strict).unwrap();
        let records: Vec<CalibrationRecord> = (0..3)
            .map(|_| CalibrationRecord::new(scores.clone(), Some(3)))
            .collect();
        let report =
            evaluate(&dag, &records, TauHat::Threshold(0.5), &SolvePolicy::new(1)).unwrap();
        assert_eq!(report.coverage_rate, 1.0);
        assert_eq!(report.avg_set_size, 1.0);
    }

    #[test]
    fn evaluate_metrics_recompute_exactly() {
        let (dag, scores) = tree6();
        let records: Vec<CalibrationRecord> = [3u32, 4, 5, 3]
            .iter()
            .map(|&t| CalibrationRecord::new(scores.clone(), Some(t)))
            .collect();
        let report =
            evaluate(&dag, &records, TauHat::Threshold(0.5), &SolvePolicy::new(2)).unwrap();
        let misses = report.per_example.iter().filter(|e| e.miss).count();
        let sizes: usize = report.per_example.iter().map(|e| e.size).sum();
        assert_eq!(
            report.coverage_rate,
            1.0 - misses as f64 / report.per_example.len() as f64
        );
        assert_eq!(
            report.avg_set_size,
            sizes as f64 / report.per_example.len() as f64
        );
    }

    #[test]
    fn exact_coverage_hand_cases() {
        let (dag, scores) = tree6();
        let atoms = AtomSet::single(scores);
        let policy = SolvePolicy::new(1);
        assert_eq!(
            exact_coverage_atoms(&dag, &atoms, 0.0, &policy).unwrap(),
            0.0
        );
        // tau = 0.6, m = 1: optimum is node A covering {a1, a2}, truth mass 0.7
        let c = exact_coverage_atoms(&dag, &atoms, 0.6, &policy).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        // tau = 1 with full-support scores: root covers everything
        let c1 = exact_coverage_atoms(&dag, &atoms, 1.0, &policy).unwrap();
        assert!((c1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_coverage_requires_atoms() {
        let (dag, _) = tree6();
        let gen = GeneratorSpec {
            family: crate::domains::GeneratorFamily::TemperatureSoftmax { temperature: 1.0 },
            seed: 0,
            atoms: None,
            miscalibration: 0.0,
        };
        assert!(matches!(
            exact_coverage(&dag, &gen, 0.5, &SolvePolicy::new(1)),
            Err(EvalError::Domain(DomainError::NotEnumerable(_)))
        ));
    }

    #[test]
    fn trials_reproducible() {
        let dag = crate::domains::build_digit_tree(&crate::domains::DigitTreeSpec {
            positions: 1,
            alphabet: 10,
        })
        .unwrap();
        let gen = GeneratorSpec {
            family: crate::domains::GeneratorFamily::DirichletConcentrated {
                peak_concentration: 20.0,
                noise_concentration: 0.4,
            },
            seed: 3,
            atoms: Some(12),
            miscalibration: 0.0,
        };
        let guarantee = GuaranteeSpec::marginal(0.1).unwrap();
        let grid = ThresholdGrid::new(vec![0.95, 0.9, 0.8, 0.7, 0.6]).unwrap();
        let policy = SolvePolicy::new(2);
        let (s1, t1) = run_trials(&dag, &gen, &guarantee, &policy, &grid, 50, 8, 99).unwrap();
        let (s2, t2) = run_trials(&dag, &gen, &guarantee, &policy, &grid, 50, 8, 99).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(s1, s2);
        assert_eq!(s1.n_trials, 8);
    }

    #[test]
    fn report_round_trip() {
        let rows = vec![
            ReportRow {
                epsilon: 0.1,
                delta: None,
                m: 4,
                guarantee: GuaranteeKind::Marginal,
                tau_hat: TauHat::Threshold(0.87),
                coverage_rate: 0.9123456789012345,
                avg_set_size: 3.25,
                seed: 42,
            },
            ReportRow {
                epsilon: 0.05,
                delta: Some(0.01),
                m: 2,
                guarantee: GuaranteeKind::Pac,
                tau_hat: TauHat::FullSet,
                coverage_rate: 1.0,
                avg_set_size: 100.0,
                seed: 7,
            },
        ];
        let csv = emit_report(&rows, ReportFormat::Csv);
        let parsed = parse_report_csv(&csv).unwrap();
        assert_eq!(parsed, rows);
        let empty = emit_report(&[], ReportFormat::Csv);
        assert_eq!(empty.trim(), REPORT_HEADER);
        let json = emit_report(&rows, ReportFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value.as_array().unwrap().len(), 2);
        assert!(value[1]["tau_hat"].is_null());
    }

    #[test]
    fn unknown_format_rejected() {
        assert!(matches!(
            "yaml".parse::<ReportFormat>(),
            Err(EvalError::UnknownFormat(_))
        ));
    }
}
