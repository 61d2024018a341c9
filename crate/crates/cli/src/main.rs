use clap::{Parser, Subcommand};
use optlab_cli::config::{self, ExperimentConfig, NoiseConfig, OptimizerSpec, ProblemSpec, ScalingSpec};
use optlab_cli::{runner, trace, verify, HarnessError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical-optimization laboratory for the adaptive gradient family.
///
/// Exit codes: 0 on success, 1 when a verification suite fails, 2 on
/// configuration errors. The environment variable OPTLAB_SEED overrides the
/// seed from configs and flags.
#[derive(Parser)]
#[command(name = "optlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir; default "out").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-off run of a single optimizer on a named problem.
    Bench {
        /// Problem name: camel3 | rosenbrock | pl_quadratic.
        #[arg(long)]
        problem: String,
        /// Estimator: adam | eadam | adabelief | adaml | sgd_momentum.
        #[arg(long)]
        optimizer: String,
        /// Starting point as a comma-separated list, e.g. "0,-4".
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Spectrum for pl_quadratic, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        spectrum: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trajectory CSV and summary into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        record_every: u64,
    },
    /// Run a verification suite: oracle | gradcheck | propositions | modes | scaling.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify the per-coordinate updating modes of a logged trajectory.
    Modes {
        /// Trajectory CSV produced by `run` or `bench` with record_every = 1.
        #[arg(long)]
        trace: PathBuf,
        /// Experiment config the trace was produced from.
        #[arg(long)]
        config: PathBuf,
        /// Which optimizer entry of the config the trace belongs to.
        #[arg(long, default_value_t = 0)]
        optimizer_index: usize,
        /// Transition ratio band (1.0 recovers the strict dichotomy).
        #[arg(long, default_value_t = optlab_core::analysis::DEFAULT_TRANSITION_RATIO)]
        ratio: f64,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn env_seed() -> Result<Option<u64>, HarnessError> {
    match std::env::var("OPTLAB_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|e| HarnessError::Config(format!("OPTLAB_SEED: {e}"))),
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config: path, out } => {
            let mut cfg = config::load_config(&path)?;
            if let Some(seed) = env_seed()? {
                cfg.seed = seed;
            }
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let summary = runner::run_experiment(&cfg, &out_dir)?;
            println!(
                "{} run(s) on {} for {} steps -> {}",
                summary.runs.len(),
                summary.problem.name,
                summary.steps,
                out_dir.display()
            );
            for run in &summary.runs {
                println!(
                    "  [{}] {} rep {}: final f {:.6e}, best f {:.6e} at k = {}{}",
                    run.optimizer_index,
                    run.label,
                    run.repeat,
                    run.final_f,
                    run.best_f,
                    run.best_step,
                    if run.diverged { " (diverged)" } else { "" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            problem,
            optimizer,
            x0,
            steps,
            eta,
            gamma,
            phi,
            beta1,
            beta2,
            epsilon,
            spectrum,
            seed,
            out,
            record_every,
        } => {
            let x0 = parse_list(&x0).map_err(|e| HarnessError::Config(format!("--x0: {e}")))?;
            let spectrum = match spectrum {
                Some(s) => Some(
                    parse_list(&s).map_err(|e| HarnessError::Config(format!("--spectrum: {e}")))?,
                ),
                None => None,
            };
            let mut spec = OptimizerSpec {
                kind: optimizer,
                label: None,
                beta1: beta1.unwrap_or(0.9),
                beta2: beta2.unwrap_or(0.999),
                eta: eta.unwrap_or(1e-3),
                epsilon: epsilon.unwrap_or(1e-4),
                gamma: gamma.unwrap_or(1.0),
                phi: phi.unwrap_or(1.0),
                decay_schedule: Vec::new(),
                scaling: ScalingSpec::default(),
                boost: None,
            };
            if spec.kind == "sgd_momentum" || spec.kind == "sgd" {
                spec.eta = eta.unwrap_or(1e-4);
            }
            let cfg = ExperimentConfig {
                problem: ProblemSpec {
                    name: problem,
                    x0,
                    spectrum,
                    x_star: None,
                    noise: NoiseConfig::None,
                },
                optimizers: vec![spec],
                steps,
                record_every,
                seed: env_seed()?.or(seed).unwrap_or(0),
                repeats: 1,
                output_dir: None,
            };
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out"));
            let summary = runner::run_experiment(&cfg, &out_dir)?;
            let run = &summary.runs[0];
            println!(
                "{} on {}: final f {:.6e}, best f {:.6e} at k = {}{}",
                run.label,
                summary.problem.name,
                run.final_f,
                run.best_f,
                run.best_step,
                if run.diverged { " (diverged)" } else { "" }
            );
            println!("trajectory: {}", out_dir.join(&run.csv_file).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, seed } => {
            let suite: verify::Suite = suite.parse().map_err(HarnessError::Config)?;
            let outcome = verify::run_suite(suite, seed);
            println!("suite `{}`:", outcome.suite);
            for check in &outcome.checks {
                println!(
                    "  [{}] {} — {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            println!(
                "{} passed, {} failed",
                outcome.passed_count(),
                outcome.failed_count()
            );
            if outcome.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Modes { trace: trace_path, config: config_path, optimizer_index, ratio } => {
            let cfg = config::load_config(&config_path)?;
            let analysis = trace::analyze_trace(&trace_path, &cfg, optimizer_index, ratio)?;
            let report = &analysis.report;
            println!(
                "{}: modes over {} consumed gradients (ratio {ratio}):",
                analysis.label,
                report.k + 1
            );
            for i in 0..analysis.dim {
                println!(
                    "  x_{i}: {:?} (adaptive sum {:.6e}, non-adaptive sum {:.6e})",
                    report.modes[i], report.adaptive_sum[i], report.nonadaptive_sum[i]
                );
            }
            println!("adaptive fraction: {:.4}", report.adaptive_fraction);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| part.trim().parse::<f64>().map_err(|e| format!("`{part}`: {e}")))
        .collect()
}
