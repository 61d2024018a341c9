//! Mode classification of a logged trajectory: rebuild the gradient, first
//! moment and loss-scaling histories from a CSV trace plus its experiment
//! config, then evaluate the per-coordinate mode sums.
//!
//! The reconstruction assumes exact gradients (the gradient at each logged
//! iterate), so traces from noisy runs are classified approximately. The
//! trace must have been recorded with `record_every = 1`.

use crate::config::ExperimentConfig;
use crate::runner::csv_header;
use crate::HarnessError;
use optlab_core::analysis::{classify_modes, ModeReport};
use std::path::Path;

pub struct TraceAnalysis {
    pub report: ModeReport,
    pub label: String,
    pub dim: usize,
}

pub fn analyze_trace(
    trace_path: &Path,
    cfg: &ExperimentConfig,
    optimizer_index: usize,
    ratio: f64,
) -> Result<TraceAnalysis, HarnessError> {
    let experiment = cfg.validate()?;
    let plan = experiment.plans.get(optimizer_index).ok_or_else(|| {
        HarnessError::Config(format!(
            "optimizer index {optimizer_index} out of range ({} configured)",
            experiment.plans.len()
        ))
    })?;
    let problem = &experiment.problem;
    let n = problem.dim();

    let text = std::fs::read_to_string(trace_path)
        .map_err(HarnessError::io(trace_path.display().to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != csv_header(n) {
        return Err(HarnessError::Config(format!(
            "trace header does not match the {n}-dimensional schema: {header}"
        )));
    }

    let mut iterates: Vec<Vec<f64>> = vec![experiment.x0.clone()];
    let mut expected_k = 1u64;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 + n {
            return Err(HarnessError::Config(format!(
                "trace line {}: expected {} fields, got {}",
                lineno + 2,
                8 + n,
                fields.len()
            )));
        }
        let k: u64 = fields[0]
            .parse()
            .map_err(|e| HarnessError::Config(format!("trace line {}: bad k: {e}", lineno + 2)))?;
        if k != expected_k {
            return Err(HarnessError::Config(format!(
                "trace must be contiguous from k = 1 (record_every = 1); found k = {k}, expected {expected_k}"
            )));
        }
        expected_k += 1;
        let mut x = Vec::with_capacity(n);
        for field in &fields[8..] {
            let v: f64 = field.parse().map_err(|e| {
                HarnessError::Config(format!("trace line {}: bad coordinate: {e}", lineno + 2))
            })?;
            x.push(v);
        }
        iterates.push(x);
    }
    if iterates.len() < 2 {
        return Err(HarnessError::Config("trace contains no steps".into()));
    }

    // gradients are consumed at x⁽⁰⁾ … x⁽ᴷ⁻¹⁾
    let consumed = iterates.len() - 1;
    let mut scaling = plan
        .scaling
        .build()
        .map_err(|e| HarnessError::Config(format!("scaling: {e}")))?;
    let mut grads = Vec::with_capacity(consumed);
    let mut ms = Vec::with_capacity(consumed);
    let mut ells = Vec::with_capacity(consumed);
    let mut m = vec![0.0; n];
    for x in iterates.iter().take(consumed) {
        let (f, g) = problem.eval_grad(x);
        let ell = scaling
            .ell(f)
            .map_err(|e| HarnessError::Config(format!("scaling replay: {e}")))?;
        scaling
            .observe(f)
            .map_err(|e| HarnessError::Config(format!("scaling replay: {e}")))?;
        for i in 0..n {
            m[i] = plan.config.beta1 * m[i] + (1.0 - plan.config.beta1) * g[i];
        }
        grads.push(g);
        ms.push(m.clone());
        ells.push(ell);
    }

    let report = classify_modes(&grads, &ms, &ells, &plan.config, ratio)
        .map_err(|e| HarnessError::Config(format!("classification: {e}")))?;
    Ok(TraceAnalysis { report, label: plan.label.clone(), dim: n })
}
