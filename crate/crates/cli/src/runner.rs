//! Experiment orchestration: fan (optimizer × repetition) runs out in
//! parallel, then write one CSV per run and a single JSON summary from the
//! collecting thread.
//!
//! CSV schema (n = problem dimension):
//! `k,f,grad_norm,step_min,step_max,step_mean,delta_norm,adaptive_fraction,x_0,...,x_{n-1}`
//! with every float serialized at 17 significant digits so identical
//! config+seed reproduce byte-identical files.

use crate::config::{ExperimentConfig, RunPlan, ValidatedExperiment};
use crate::HarnessError;
use optlab_core::analysis::{self, AnalysisConstants, CaseId, TrajectoryRecord};
use optlab_core::optim::EstimatorKind;
use optlab_core::parallel::par_map;
use optlab_core::run::{simulate, RunResult, RunSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct ExperimentSummary {
    pub problem: ProblemInfo,
    pub seed: u64,
    pub steps: u64,
    pub record_every: u64,
    pub repeats: u64,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Serialize)]
pub struct ProblemInfo {
    pub name: String,
    pub dim: usize,
    pub x0: Vec<f64>,
    pub f_star: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub optimizer_index: usize,
    pub estimator: String,
    pub label: String,
    pub repeat: u64,
    pub csv_file: String,
    pub final_f: f64,
    pub best_f: f64,
    pub best_step: u64,
    pub final_x: Vec<f64>,
    pub diverged: bool,
    pub clip_infeasible: bool,
    /// (step, adaptive fraction) pairs, subsampled to at most 256 points.
    pub adaptive_fraction_timeline: Vec<(u64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    /// "exact" when μ/L/G come from problem metadata, otherwise labels the
    /// estimate origin.
    pub constants_source: String,
    pub grad_bound: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub monotonicity: MonotonicitySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_not_applicable: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct MonotonicitySummary {
    pub case: Option<String>,
    pub passes: bool,
    pub eta_bound: f64,
    pub k_threshold: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RateSummary {
    pub case: String,
    pub k0: u64,
    pub contraction_factor: f64,
    pub monotone_after_k0: bool,
    pub bound_violations: usize,
    pub worst_margin: f64,
}

/// Execute every (optimizer × repetition) run of the experiment, write the
/// trajectory CSVs and `summary.json` into `out_dir`, and return the summary.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentSummary, HarnessError> {
    let experiment = cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir.display().to_string()))?;

    struct Task {
        plan: RunPlan,
        repeat: u64,
    }
    let mut tasks = Vec::new();
    for plan in &experiment.plans {
        for repeat in 0..experiment.repeats {
            tasks.push(Task { plan: plan.clone(), repeat });
        }
    }

    let exp = &experiment;
    let results: Vec<(RunPlan, u64, Result<RunResult, HarnessError>)> = par_map(tasks, |task| {
        let outcome = execute_task(exp, &task.plan, task.repeat);
        (task.plan, task.repeat, outcome)
    });

    let mut runs = Vec::with_capacity(results.len());
    for (plan, repeat, outcome) in results {
        let result = outcome?;
        let csv_file = format!("opt{}_{}_rep{}.csv", plan.optimizer_index, plan.label, repeat);
        write_trajectory_csv(&out_dir.join(&csv_file), &result.records, experiment.problem.dim())?;
        runs.push(build_report(&experiment, &plan, repeat, csv_file, &result));
    }

    let summary = ExperimentSummary {
        problem: ProblemInfo {
            name: experiment.problem.name().to_string(),
            dim: experiment.problem.dim(),
            x0: experiment.x0.clone(),
            f_star: experiment.problem.f_star(),
        },
        seed: experiment.seed,
        steps: experiment.steps,
        record_every: experiment.record_every,
        repeats: experiment.repeats,
        runs,
    };
    let summary_path = out_dir.join("summary.json");
    let mut file = std::fs::File::create(&summary_path)
        .map_err(HarnessError::io(summary_path.display().to_string()))?;
    serde_json::to_writer_pretty(&mut file, &summary)
        .map_err(|e| HarnessError::Config(format!("summary serialization failed: {e}")))?;
    writeln!(file).map_err(HarnessError::io(summary_path.display().to_string()))?;
    Ok(summary)
}

fn execute_task(
    experiment: &ValidatedExperiment,
    plan: &RunPlan,
    repeat: u64,
) -> Result<RunResult, HarnessError> {
    let mut scaling = plan
        .scaling
        .build()
        .map_err(|e| HarnessError::Config(format!("scaling: {e}")))?;
    // common random numbers across optimizers within a repetition
    let mut rng = ChaCha8Rng::seed_from_u64(experiment.seed.wrapping_add(repeat));
    let settings = RunSettings { steps: experiment.steps, record_every: experiment.record_every };
    simulate(
        &experiment.problem,
        &experiment.x0,
        &plan.config,
        &mut scaling,
        &experiment.noise,
        &settings,
        plan.boost.as_ref(),
        &mut rng,
    )
    .map_err(HarnessError::from)
}

fn build_report(
    experiment: &ValidatedExperiment,
    plan: &RunPlan,
    repeat: u64,
    csv_file: String,
    result: &RunResult,
) -> RunReport {
    let stride = (result.records.len() / 256).max(1);
    let mut timeline: Vec<(u64, f64)> = result
        .records
        .iter()
        .step_by(stride)
        .map(|r| (r.k, r.adaptive_fraction))
        .collect();
    if let Some(last) = result.records.last() {
        if timeline.last().map(|t| t.0) != Some(last.k) {
            timeline.push((last.k, last.adaptive_fraction));
        }
    }
    RunReport {
        optimizer_index: plan.optimizer_index,
        estimator: plan.config.estimator.name().to_string(),
        label: plan.label.clone(),
        repeat,
        csv_file,
        final_f: result.final_f,
        best_f: result.best_f,
        best_step: result.best_step,
        final_x: result.state.x.clone(),
        diverged: result.diverged,
        clip_infeasible: result.clip_infeasible,
        adaptive_fraction_timeline: timeline,
        analysis: analysis_report(experiment, plan, result),
    }
}

/// Proposition checking is attached when the problem carries PL constants and
/// the optimizer matches the analyzed setting (β₁ = 0, ε-driven estimator).
fn analysis_report(
    experiment: &ValidatedExperiment,
    plan: &RunPlan,
    result: &RunResult,
) -> Option<AnalysisReport> {
    let pl = experiment.problem.pl_constants()?;
    let estimator = plan.config.estimator;
    if !matches!(estimator, EstimatorKind::EAdam | EstimatorKind::AdaBelief | EstimatorKind::AdamL)
        || plan.config.beta1 != 0.0
    {
        return None;
    }
    let mut constants = AnalysisConstants::noise_free(
        experiment.problem.grad_bound(),
        pl.lipschitz,
        pl.mu,
        experiment.problem.dim(),
    )
    .with_sigma(experiment.noise.sigma)
    .with_f_star(experiment.problem.f_star().unwrap_or(0.0));
    if let Ok(v) = analysis::v_min(&result.first_gradient, plan.config.beta2, experiment.steps) {
        constants = constants.with_v_min(v);
    }
    if estimator == EstimatorKind::AdamL {
        constants = constants.with_loss_extremes(result.ell_min, result.ell_max);
    }

    let mono =
        analysis::check_monotonicity_conditions(estimator, &constants, &plan.config, experiment.steps)
            .ok()?;
    let mut rate = None;
    let mut rate_not_applicable = None;
    let mut reasons = Vec::new();
    for case in [CaseId::I, CaseId::II] {
        match analysis::smallest_admissible_k0(estimator, case, &constants, &plan.config) {
            Ok(k0) if k0 < experiment.steps => {
                if !result.records.iter().any(|r| r.k == k0) {
                    reasons.push(format!("case {case}: no record at k0 = {k0} (record_every)"));
                    continue;
                }
                match analysis::verify_trajectory(
                    &result.records,
                    &constants,
                    &plan.config,
                    estimator,
                    k0,
                ) {
                    Ok(verdict) => {
                        let rc =
                            analysis::rate_constants(estimator, &constants, &plan.config, k0)
                                .expect("verified trajectory implies valid constants");
                        rate = Some(RateSummary {
                            case: case.to_string(),
                            k0,
                            contraction_factor: rc.factor,
                            monotone_after_k0: verdict.monotone_after_k0,
                            bound_violations: verdict.bound_violations,
                            worst_margin: verdict.worst_margin,
                        });
                        break;
                    }
                    Err(e) => reasons.push(format!("case {case}: {e}")),
                }
            }
            Ok(k0) => reasons.push(format!("case {case}: k0 = {k0} beyond the run horizon")),
            Err(e) => reasons.push(format!("case {case}: {e}")),
        }
    }
    if rate.is_none() {
        rate_not_applicable = Some(reasons.join("; "));
    }
    Some(AnalysisReport {
        constants_source: if pl.estimated { "regional-estimate".into() } else { "exact".into() },
        grad_bound: constants.grad_bound,
        lipschitz: constants.lipschitz,
        mu: constants.mu,
        monotonicity: MonotonicitySummary {
            case: mono.case.map(|c| c.to_string()),
            passes: mono.passes,
            eta_bound: mono.eta_bound,
            k_threshold: mono.k_threshold,
            first_violation: mono.first_violation,
        },
        rate,
        rate_not_applicable,
    })
}

pub fn csv_header(dim: usize) -> String {
    let mut header =
        String::from("k,f,grad_norm,step_min,step_max,step_mean,delta_norm,adaptive_fraction");
    for i in 0..dim {
        header.push_str(&format!(",x_{i}"));
    }
    header
}

fn push_float(line: &mut String, v: f64) {
    line.push_str(&format!(",{v:.16e}"));
}

pub fn write_trajectory_csv(
    path: &Path,
    records: &[TrajectoryRecord],
    dim: usize,
) -> Result<(), HarnessError> {
    let mut out = String::with_capacity(records.len() * 200 + 128);
    out.push_str(&csv_header(dim));
    out.push('\n');
    for rec in records {
        out.push_str(&rec.k.to_string());
        for v in [
            rec.f,
            rec.grad_norm,
            rec.step_min,
            rec.step_max,
            rec.step_mean,
            rec.delta_norm,
            rec.adaptive_fraction,
        ] {
            push_float(&mut out, v);
        }
        for &xi in &rec.x {
            push_float(&mut out, xi);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(HarnessError::io(path.display().to_string()))
}
