//! Single-run driver: one optimizer, one problem, one RNG.
//!
//! Each run owns its optimizer state, scaling state and RNG, so batches of
//! runs parallelize trivially. The driver logs a [`TrajectoryRecord`] at the
//! configured stride (always including the final step), tracks the best
//! objective value seen, and flags divergence instead of erroring so partial
//! trajectories survive.

use crate::analysis::{ModeAccumulator, TrajectoryRecord, DEFAULT_TRANSITION_RATIO};
use crate::optim::{
    effective_stepsize, step, EstimatorKind, GradientSample, OptimError, OptimizerConfig,
    OptimizerState,
};
use crate::problems::{NoiseSpec, Problem};
use crate::scaling::{ScalingError, ScalingState};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error("steps must be >= 1")]
    ZeroSteps,
    #[error("record_every must be >= 1")]
    ZeroStride,
    #[error("x0 has {got} coordinates but the problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("starting point gives a non-finite objective or gradient")]
    BadStart,
}

/// One-shot stepsize boost triggered the first time f drops below a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostTrigger {
    pub when_f_below: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub steps: u64,
    pub record_every: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<TrajectoryRecord>,
    pub state: OptimizerState,
    pub final_f: f64,
    pub best_f: f64,
    pub best_step: u64,
    pub diverged: bool,
    pub clip_infeasible: bool,
    /// Extremes of the scaling values fed to the optimizer (AdamL only;
    /// [1, 1] otherwise).
    pub ell_min: f64,
    pub ell_max: f64,
    /// Exact gradient at the starting point.
    pub first_gradient: Vec<f64>,
}

/// Drive one optimizer from `x0` for `settings.steps` iterations.
#[allow(clippy::too_many_arguments)]
pub fn simulate<R: Rng>(
    problem: &Problem,
    x0: &[f64],
    config: &OptimizerConfig,
    scaling: &mut ScalingState,
    noise: &NoiseSpec,
    settings: &RunSettings,
    boost: Option<&BoostTrigger>,
    rng: &mut R,
) -> Result<RunResult, RunError> {
    if settings.steps == 0 {
        return Err(RunError::ZeroSteps);
    }
    if settings.record_every == 0 {
        return Err(RunError::ZeroStride);
    }
    if x0.len() != problem.dim() {
        return Err(RunError::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }

    let is_adaml = config.estimator == EstimatorKind::AdamL;
    let mut mode_acc = ModeAccumulator::new(config, problem.dim()).ok();
    let mut state = OptimizerState::new(x0.to_vec(), config);

    let (mut f_cur, mut g_cur) = problem.eval_grad(&state.x);
    if !f_cur.is_finite() || g_cur.iter().any(|v| !v.is_finite()) {
        return Err(RunError::BadStart);
    }
    let first_gradient = g_cur.clone();
    let mut best_f = f_cur;
    let mut best_step = 0u64;
    let mut diverged = false;
    let mut clip_infeasible = false;
    let mut boost_applied = false;
    let mut ell_min = f64::INFINITY;
    let mut ell_max = f64::NEG_INFINITY;
    let mut records = Vec::new();

    for _ in 0..settings.steps {
        if let Some(trigger) = boost {
            if !boost_applied && f_cur < trigger.when_f_below {
                state.eta *= trigger.factor;
                boost_applied = true;
            }
        }
        let mut g = g_cur.clone();
        let stochastic = noise.perturb(&mut g, rng);
        if stochastic && g_cur.iter().any(|v| v.abs() > noise.clip_bound) {
            clip_infeasible = true;
        }
        let sample = GradientSample { g, f_value: f_cur, is_stochastic: stochastic };

        let ell = if is_adaml {
            let value = scaling.ell(f_cur)?;
            scaling.observe(f_cur)?;
            ell_min = ell_min.min(value);
            ell_max = ell_max.max(value);
            value
        } else {
            1.0
        };

        state = step(state, &sample, ell, config)?;
        if let Some(acc) = mode_acc.as_mut() {
            acc.absorb(&sample.g, &state.m, ell, config);
        }

        let (f_next, g_next) = problem.eval_grad(&state.x);
        if !f_next.is_finite() || g_next.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        if f_next < best_f {
            best_f = f_next;
            best_step = state.k;
        }
        if state.k.is_multiple_of(settings.record_every) || state.k == settings.steps {
            records.push(make_record(&state, config, f_next, &g_next, mode_acc.as_ref()));
        }
        f_cur = f_next;
        g_cur = g_next;
    }

    if !is_adaml || !ell_min.is_finite() {
        ell_min = 1.0;
        ell_max = 1.0;
    }
    Ok(RunResult {
        records,
        final_f: f_cur,
        best_f,
        best_step,
        diverged,
        clip_infeasible,
        ell_min,
        ell_max,
        first_gradient,
        state,
    })
}

fn make_record(
    state: &OptimizerState,
    config: &OptimizerConfig,
    f: f64,
    grad: &[f64],
    mode_acc: Option<&ModeAccumulator>,
) -> TrajectoryRecord {
    let report = effective_stepsize(state, config).expect("state has been stepped");
    let n = state.dim() as f64;
    let step_min = report.stepsize.iter().cloned().fold(f64::INFINITY, f64::min);
    let step_max = report.stepsize.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let step_mean = report.stepsize.iter().sum::<f64>() / n;
    let delta_norm = report.delta.iter().map(|d| d * d).sum::<f64>().sqrt();
    let adaptive_fraction = match config.estimator {
        EstimatorKind::Adam => 1.0,
        EstimatorKind::SgdMomentum => 0.0,
        _ => mode_acc
            .map(|acc| acc.report(DEFAULT_TRANSITION_RATIO).adaptive_fraction)
            .unwrap_or(0.0),
    };
    TrajectoryRecord {
        k: state.k,
        f,
        grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        step_min,
        step_max,
        step_mean,
        delta_norm,
        adaptive_fraction,
        x: state.x.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(steps: u64) -> RunSettings {
        RunSettings { steps, record_every: 1 }
    }

    #[test]
    fn rejects_zero_steps_and_bad_dimensions() {
        let problem = Problem::camel3();
        let config = OptimizerConfig::new(EstimatorKind::Adam);
        let mut scaling = ScalingState::identity(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = simulate(
            &problem,
            &[0.0, -4.0],
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &settings(0),
            None,
            &mut rng,
        );
        assert!(matches!(err, Err(RunError::ZeroSteps)));
        let err = simulate(
            &problem,
            &[0.0],
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &settings(10),
            None,
            &mut rng,
        );
        assert!(matches!(err, Err(RunError::DimensionMismatch { .. })));
    }

    #[test]
    fn records_include_the_final_step_and_increase_strictly() {
        let problem = Problem::camel3();
        let config = OptimizerConfig::new(EstimatorKind::Adam);
        let mut scaling = ScalingState::identity(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let result = simulate(
            &problem,
            &[0.0, -4.0],
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &RunSettings { steps: 103, record_every: 10 },
            None,
            &mut rng,
        )
        .unwrap();
        let ks: Vec<u64> = result.records.iter().map(|r| r.k).collect();
        assert_eq!(ks.last(), Some(&103));
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert!(result.records.iter().all(|r| r.f.is_finite()
            && r.grad_norm.is_finite()
            && r.step_min.is_finite()
            && r.delta_norm.is_finite()));
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_trajectories() {
        let problem = Problem::pl_quadratic(&[1.0, 20.0], &[0.0, 0.0]).unwrap();
        let noise = NoiseSpec {
            kind: crate::problems::NoiseKind::UniformBounded,
            sigma: 0.5,
            clip_bound: 100.0,
        };
        let run = || {
            let config = OptimizerConfig::new(EstimatorKind::EAdam);
            let mut scaling = ScalingState::identity(0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            simulate(
                &problem,
                &[1.5, -1.0],
                &config,
                &mut scaling,
                &noise,
                &settings(500),
                None,
                &mut rng,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.f.to_bits(), rb.f.to_bits());
            for (xa, xb) in ra.x.iter().zip(&rb.x) {
                assert_eq!(xa.to_bits(), xb.to_bits());
            }
        }
    }

    #[test]
    fn sgd_momentum_boost_fires_once() {
        let problem = Problem::pl_quadratic(&[1.0], &[0.0]).unwrap();
        let mut config = OptimizerConfig::new(EstimatorKind::SgdMomentum);
        config.eta = 1e-2;
        let mut scaling = ScalingState::identity(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let boost = BoostTrigger { when_f_below: 1.0, factor: 10.0 };
        let result = simulate(
            &problem,
            &[2.0],
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &settings(400),
            Some(&boost),
            &mut rng,
        )
        .unwrap();
        // boosted once: eta settles at 1e-1, not 1e0 or higher
        assert!((result.state.eta - 1e-1).abs() < 1e-15);
        assert!(!result.diverged);
    }

    #[test]
    fn sgd_momentum_stays_finite_on_rosenbrock_with_small_eta() {
        let problem = Problem::rosenbrock();
        let mut config = OptimizerConfig::new(EstimatorKind::SgdMomentum);
        config.eta = 1e-4;
        let mut scaling = ScalingState::identity(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let result = simulate(
            &problem,
            &[-4.0, -4.0],
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &RunSettings { steps: 8000, record_every: 100 },
            None,
            &mut rng,
        )
        .unwrap();
        assert!(!result.diverged);
        assert!(result.final_f.is_finite());
    }

    #[test]
    fn adaml_tracks_loss_extremes() {
        let problem = Problem::pl_quadratic(&[2.0], &[0.0]).unwrap();
        let config = OptimizerConfig::new(EstimatorKind::AdamL);
        let mut scaling = ScalingState::identity(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let result = simulate(
            &problem,
            &[1.0],
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &settings(200),
            None,
            &mut rng,
        )
        .unwrap();
        assert!(result.ell_max <= 1.0 + 1e-12);
        assert!(result.ell_min < result.ell_max);
        assert!(result.ell_min > 0.0);
    }
}
