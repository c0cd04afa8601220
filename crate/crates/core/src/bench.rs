//! Solver comparison harness: vanilla PCA against every robust solver on
//! one dataset or on a seeded family of synthetic datasets.

use serde::{Deserialize, Serialize};

use crate::datagen::{synth_subspace, SynthSpec};
use crate::error::Result;
use crate::eval::{evaluate, EvalReport};
use crate::linalg::{DataMatrix, Projection};
use crate::objectives::NormSpec;
use crate::parallel::{map_jobs, Execution};
use crate::solvers::{fit, vanilla_pca, FitResult, SolverConfig, Variant};

/// Where each repeat's data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Repeat `r` uses `seed + r`; angles are measured against `W_true`.
    Synthetic(SynthSpec),
    /// A fixed dataset; angles are measured against vanilla PCA.
    Fixed(DataMatrix),
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub source: DataSource,
    pub k: usize,
    pub norms: Vec<NormSpec>,
    pub variants: Vec<Variant>,
    pub repeats: usize,
    /// Shared settings; `variant` is overridden per run.
    pub config: SolverConfig,
}

/// Convergence trace of one run, in the same layout as a `fit` trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub solver: String,
    pub norm: String,
    pub p: Option<f64>,
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub monotone_violations: usize,
    pub wall_time_ms: f64,
}

impl TraceRecord {
    pub fn new(solver: &str, spec: NormSpec, fit: &FitResult) -> Self {
        Self {
            solver: solver.to_string(),
            norm: spec.name().to_string(),
            p: spec.p(),
            objective: fit.objective_trace.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            monotone_violations: fit.monotone_violations,
            wall_time_ms: fit.wall_time_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeat: usize,
    pub seed: Option<u64>,
    pub solver: String,
    pub norm: String,
    pub p: Option<f64>,
    /// `"w_true"` or `"vanilla"`.
    pub reference: String,
    pub final_objective: f64,
    pub converged: bool,
    #[serde(flatten)]
    pub eval: EvalReport,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub report: BenchReport,
    pub trace: TraceRecord,
}

#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: Option<u64>,
    /// Vanilla PCA first, then every (norm, variant) pair in plan order.
    pub runs: Vec<RunRecord>,
}

pub const VANILLA: &str = "vanilla";

fn record(
    repeat: usize,
    seed: Option<u64>,
    reference: (&str, &Projection),
    x: &DataMatrix,
    solver: &str,
    spec: NormSpec,
    fit: &FitResult,
) -> Result<RunRecord> {
    let mut eval = evaluate(x, &fit.projection, Some(reference.1), spec)?;
    eval.iterations = fit.iterations;
    eval.wall_time_ms = fit.wall_time_ms;
    Ok(RunRecord {
        report: BenchReport {
            repeat,
            seed,
            solver: solver.to_string(),
            norm: spec.name().to_string(),
            p: spec.p(),
            reference: reference.0.to_string(),
            final_objective: fit.final_objective(),
            converged: fit.converged,
            eval,
        },
        trace: TraceRecord::new(solver, spec, fit),
    })
}

fn run_repeat(plan: &BenchPlan, repeat: usize) -> Result<RepeatOutcome> {
    let (x, seed, w_true) = match &plan.source {
        DataSource::Synthetic(spec) => {
            let seed = spec.seed.wrapping_add(repeat as u64);
            let data = synth_subspace(&SynthSpec { seed, ..*spec })?;
            (data.data, Some(seed), Some(data.w_true))
        }
        DataSource::Fixed(x) => (x.clone(), None, None),
    };
    let vanilla = fit(&x, plan.k, NormSpec::FroSquared, &plan.config)?;
    let reference = match &w_true {
        Some(w) => ("w_true", w.clone()),
        None => (VANILLA, vanilla_pca(&x, plan.k)?),
    };
    let reference = (reference.0, &reference.1);

    let mut runs = vec![record(repeat, seed, reference, &x, VANILLA, NormSpec::FroSquared, &vanilla)?];
    for &spec in &plan.norms {
        if spec == NormSpec::FroSquared {
            continue;
        }
        for &variant in &plan.variants {
            let cfg = SolverConfig { variant, ..plan.config };
            let result = fit(&x, plan.k, spec, &cfg)?;
            runs.push(record(repeat, seed, reference, &x, variant.name(), spec, &result)?);
        }
    }
    Ok(RepeatOutcome { repeat, seed, runs })
}

/// Run every repeat. Repeats are independent, so `exec` only changes
/// wall-clock time, never the numbers.
pub fn run_bench(plan: &BenchPlan, exec: Execution) -> Result<Vec<RepeatOutcome>> {
    map_jobs(plan.repeats, exec, |r| run_repeat(plan, r)).into_iter().collect()
}

/// One line of the summary table, averaged over repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: String,
    pub norm: String,
    pub p: Option<f64>,
    pub final_objective: f64,
    pub iterations: f64,
    pub wall_time_ms: f64,
    pub max_angle_rad: f64,
}

pub const SUMMARY_HEADER: &str = "solver,norm,p,final_objective,iterations,wall_time_ms,max_angle_rad";

pub fn summarize(outcomes: &[RepeatOutcome]) -> Vec<SummaryRow> {
    let Some(first) = outcomes.first() else { return Vec::new() };
    let count = outcomes.len() as f64;
    (0..first.runs.len())
        .map(|idx| {
            let head = &first.runs[idx].report;
            let mut row = SummaryRow {
                solver: head.solver.clone(),
                norm: head.norm.clone(),
                p: head.p,
                final_objective: 0.0,
                iterations: 0.0,
                wall_time_ms: 0.0,
                max_angle_rad: 0.0,
            };
            for o in outcomes {
                let r = &o.runs[idx].report;
                row.final_objective += r.final_objective / count;
                row.iterations += r.eval.iterations as f64 / count;
                row.wall_time_ms += r.eval.wall_time_ms / count;
                row.max_angle_rad += r.eval.max_angle_rad.unwrap_or(0.0) / count;
            }
            row
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let p = r.p.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.solver, r.norm, p, r.final_objective, r.iterations, r.wall_time_ms, r.max_angle_rad
        ));
    }
    out
}

/// How often a robust solver beat vanilla PCA on max principal angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub solver: String,
    pub norm: String,
    pub p: Option<f64>,
    pub wins: usize,
    pub repeats: usize,
    pub fraction: f64,
}

pub fn robustness(outcomes: &[RepeatOutcome]) -> Vec<RobustnessRow> {
    let Some(first) = outcomes.first() else { return Vec::new() };
    let angle = |o: &RepeatOutcome, i: usize| o.runs[i].report.eval.max_angle_rad.unwrap_or(0.0);
    (1..first.runs.len())
        .map(|idx| {
            let head = &first.runs[idx].report;
            let wins = outcomes.iter().filter(|o| angle(o, idx) < angle(o, 0)).count();
            RobustnessRow {
                solver: head.solver.clone(),
                norm: head.norm.clone(),
                p: head.p,
                wins,
                repeats: outcomes.len(),
                fraction: wins as f64 / outcomes.len() as f64,
            }
        })
        .collect()
}
