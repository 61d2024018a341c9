//! Benchmark-protocol runs: the fixed hyperparameter setting used across the
//! camel/Rosenbrock comparisons (β₁ = 0.9, β₂ = 0.999, η = 1e-3, ε = 1e-4;
//! AdamL with γ = φ = 1 and ℓ = f; SGD-momentum with η = 1e-4, optionally
//! boosted ×10 once f drops below 1).

use optlab_core::optim::{EstimatorKind, OptimizerConfig};
use optlab_core::problems::{NoiseSpec, Problem};
use optlab_core::run::{simulate, BoostTrigger, RunResult, RunSettings};
use optlab_core::scaling::ScalingState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn protocol_config(estimator: EstimatorKind) -> OptimizerConfig {
    let mut config = OptimizerConfig::new(estimator);
    if estimator == EstimatorKind::SgdMomentum {
        config.eta = 1e-4;
    }
    config
}

/// Run one optimizer under the benchmark protocol with exact gradients.
pub fn protocol_run(
    problem: &Problem,
    estimator: EstimatorKind,
    x0: &[f64],
    steps: u64,
    boost: Option<BoostTrigger>,
) -> RunResult {
    let config = protocol_config(estimator);
    let mut scaling = ScalingState::identity(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    simulate(
        problem,
        x0,
        &config,
        &mut scaling,
        &NoiseSpec::none(),
        &RunSettings { steps, record_every: steps },
        boost.as_ref(),
        &mut rng,
    )
    .expect("protocol run")
}
