//! Subcommand implementations: file wiring around the library calls.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use csp_core::calibrate::{
    estimate_tau, CalibrationConfig, CalibrationOutcomeJson, GuaranteeKind, SolvePolicy,
    ThresholdGrid,
};
use csp_core::dag::{Dag, ValidationMode};
use csp_core::domains::{
    build_digit_tree, build_interval_dag, parse_hierarchy, DigitTreeSpec, GeneratorSpec,
    IntervalDagSpec,
};
use csp_core::eval::{emit_report, evaluate, run_sweep, ReportFormat, SweepSpec};
use csp_core::records::{parse_records, RecordSet};
use csp_core::setopt::{solve, SolveRequest};
use csp_core::{StructuredSet, TauHat};

use crate::errors::{CliError, EXIT_SENTINEL_STRICT};
use crate::{BuildDagArgs, CalibrateArgs, DagKind, EvaluateArgs, PredictArgs, SweepArgs};

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| CliError::io(&path.display().to_string(), e))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_dag(path: &Path) -> Result<Dag, CliError> {
    let text = read_file(path)?;
    let json = serde_json::from_str(&text)
        .map_err(|e| CliError::config("parse", format!("{}: {e}", path.display())))?;
    Ok(Dag::from_json(json)?)
}

fn load_records(dag: &Arc<Dag>, path: &Path, lenient: bool) -> Result<RecordSet, CliError> {
    let mode = if lenient {
        ValidationMode::Lenient
    } else {
        ValidationMode::Strict
    };
    let text = read_file(path)?;
    Ok(parse_records(dag, &text, mode)?)
}

pub fn build_dag(args: BuildDagArgs) -> Result<(), CliError> {
    let dag = match args.kind {
        DagKind::DigitTree => {
            let k = args
                .k
                .ok_or_else(|| CliError::config("bad-spec", "digit-tree requires --k"))?;
            build_digit_tree(&DigitTreeSpec {
                positions: k,
                alphabet: args.alphabet,
            })?
        }
        DagKind::Interval => {
            let (lo, hi) = match (args.lo, args.hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => {
                    return Err(CliError::config(
                        "bad-spec",
                        "interval requires --lo and --hi",
                    ))
                }
            };
            build_interval_dag(&IntervalDagSpec { lo, hi })?
        }
        DagKind::FromFile => {
            let input = args
                .input
                .ok_or_else(|| CliError::config("bad-spec", "from-file requires --input"))?;
            parse_hierarchy(&read_file(&input)?)?
        }
    };
    let mut text = serde_json::to_string(&dag.to_json())
        .map_err(|e| CliError::config("serialize", e.to_string()))?;
    text.push('\n');
    write_output(&args.out, &text)
}

fn resolve_calibration(args: &CalibrateArgs) -> Result<CalibrationConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str::<CalibrationConfig>(&read_file(path)?)
            .map_err(|e| CliError::config("parse", format!("{}: {e}", path.display())))?,
        None => CalibrationConfig {
            guarantee: GuaranteeKind::Marginal,
            epsilon: 0.1,
            delta: None,
            m: 4,
            grid: None,
            infeasible_is_miss: false,
        },
    };
    if let Some(g) = &args.guarantee {
        cfg.guarantee = match g.as_str() {
            "marginal" => GuaranteeKind::Marginal,
            "pac" => GuaranteeKind::Pac,
            other => {
                return Err(CliError::config(
                    "invalid-spec",
                    format!("unknown guarantee: {other}"),
                ))
            }
        };
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(d) = args.delta {
        cfg.delta = Some(d);
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(grid) = &args.grid {
        cfg.grid = Some(grid.clone());
    }
    Ok(cfg)
}

pub fn calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let cfg = resolve_calibration(&args)?;
    let spec = cfg.guarantee_spec()?;
    let grid = cfg.threshold_grid()?;
    let policy = cfg.solve_policy();
    let dag = Arc::new(load_dag(&args.dag)?);
    let set = load_records(&dag, &args.records, args.lenient)?;
    log::debug!(
        "calibrating {} records over {} thresholds",
        set.records.len(),
        grid.len()
    );
    let outcome = estimate_tau(&dag, &set.records, &grid, &spec, &policy)?;
    let json = CalibrationOutcomeJson::from(&outcome);
    let mut text = serde_json::to_string_pretty(&json)
        .map_err(|e| CliError::config("serialize", e.to_string()))?;
    text.push('\n');
    write_output(&args.out, &text)?;
    if args.strict && outcome.tau_hat.is_sentinel() {
        return Err(CliError {
            code: "sentinel",
            exit: EXIT_SENTINEL_STRICT,
            message: "no grid threshold passed; calibration fell back to the full label set".into(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictLine<'a> {
    nodes: &'a [u32],
    labels: Vec<Option<&'a str>>,
    covered_leaves: &'a [u32],
    mass: f64,
    size: usize,
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let dag = Arc::new(load_dag(&args.dag)?);
    let set = load_records(&dag, &args.records, args.lenient)?;
    let mut out = String::new();
    for record in &set.records {
        let rec_dag = record.effective_dag(&dag);
        let res = solve(&SolveRequest::new(
            rec_dag,
            &record.scores,
            args.tau,
            args.m,
        ))?;
        out.push_str(&render_set(rec_dag, &res.set)?);
        out.push('\n');
    }
    write_output(&args.out, &out)
}

fn render_set(dag: &Dag, set: &StructuredSet) -> Result<String, CliError> {
    let labels = set.node_ids.iter().map(|&id| dag.label(id)).collect();
    let line = PredictLine {
        nodes: &set.node_ids,
        labels,
        covered_leaves: &set.covered_leaves,
        mass: set.mass,
        size: set.size,
    };
    serde_json::to_string(&line).map_err(|e| CliError::config("serialize", e.to_string()))
}

pub fn evaluate_cmd(args: EvaluateArgs) -> Result<(), CliError> {
    let tau_hat = match (args.tau, &args.calibration) {
        (Some(tau), None) => TauHat::Threshold(tau),
        (None, Some(path)) => {
            let json: CalibrationOutcomeJson = serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::config("parse", format!("{}: {e}", path.display())))?;
            let outcome = csp_core::calibrate::CalibrationOutcome::try_from(json)?;
            outcome.tau_hat
        }
        _ => {
            return Err(CliError::config(
                "bad-spec",
                "provide exactly one of --tau or --calibration",
            ))
        }
    };
    let dag = Arc::new(load_dag(&args.dag)?);
    let set = load_records(&dag, &args.records, args.lenient)?;
    let policy = SolvePolicy::new(args.m);
    let report = evaluate(&dag, &set.records, tau_hat, &policy)?;
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::config("serialize", e.to_string()))?;
    text.push('\n');
    write_output(&args.out, &text)
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let format: ReportFormat = args.format.parse().map_err(CliError::from)?;
    let dag = load_dag(&args.dag)?;
    let generator = GeneratorSpec::from_json_str(&read_file(&args.generator)?)?;
    let mut sweep_spec = match &args.config {
        Some(path) => serde_json::from_str::<SweepSpec>(&read_file(path)?)
            .map_err(|e| CliError::config("parse", format!("{}: {e}", path.display())))?,
        None => SweepSpec::default(),
    };
    if let Some(seed) = args.seed {
        sweep_spec.seeds = vec![seed];
    }
    if let Some(n) = args.n_trials {
        sweep_spec.n_trials = n;
    }
    let grid = ThresholdGrid::default_grid();
    let rows = run_sweep(&dag, &generator, &sweep_spec, &grid, &SolvePolicy::new(4))?;
    log::debug!("sweep produced {} rows", rows.len());
    write_output(&args.out, &emit_report(&rows, format))
}
