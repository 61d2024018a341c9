//! Verification suites behind `optlab verify --suite <name>`.
//!
//! Each suite runs a set of named checks and reports per-check pass/fail;
//! the acceptance tests drive the same functions directly.

use optlab_core::analysis::{
    self, classify_modes, AnalysisConstants, CaseId, CoordinateMode, ModeAccumulator,
};
use optlab_core::optim::{
    closed_form_second_moment, second_moment_update, EstimatorKind, OptimizerConfig,
};
use optlab_core::parallel::par_map;
use optlab_core::problems::{NoiseKind, NoiseSpec, Problem};
use optlab_core::run::{simulate, RunSettings};
use optlab_core::scaling::{phi_from_train_error, ScalingState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Gradcheck,
    Propositions,
    Modes,
    Scaling,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Suite::Oracle),
            "gradcheck" => Ok(Suite::Gradcheck),
            "propositions" => Ok(Suite::Propositions),
            "modes" => Ok(Suite::Modes),
            "scaling" => Ok(Suite::Scaling),
            other => Err(format!(
                "unknown suite `{other}` (expected oracle|gradcheck|propositions|modes|scaling)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteOutcome {
    pub fn passed_count(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed_count(&self) -> usize {
        self.checks.len() - self.passed_count()
    }

    pub fn all_passed(&self) -> bool {
        self.failed_count() == 0
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteOutcome {
    match suite {
        Suite::Oracle => oracle_suite(seed),
        Suite::Gradcheck => gradcheck_suite(seed),
        Suite::Propositions => propositions_suite(seed),
        Suite::Modes => modes_suite(seed),
        Suite::Scaling => scaling_suite(seed),
    }
}

// ---------------------------------------------------------------------------
// oracle: recursive second moments vs the closed-form sums, plus the
// stochastic-oracle statistics
// ---------------------------------------------------------------------------

/// Worst relative error between the recursion and the closed-form oracle over
/// seeded random histories.
pub fn oracle_equivalence_error(
    estimator: EstimatorKind,
    histories: u64,
    steps: usize,
    dim: usize,
    seed: u64,
) -> f64 {
    let errors = par_map((0..histories).collect::<Vec<u64>>(), |h| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(h));
        let config = OptimizerConfig::new(estimator);
        let mut grads = Vec::with_capacity(steps);
        let mut ells = Vec::with_capacity(steps);
        let mut m = vec![0.0; dim];
        let mut sm = vec![0.0; dim];
        let mut m_hist = Vec::with_capacity(steps);
        for _ in 0..steps {
            let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let ell = rng.gen_range(0.1..5.0);
            for i in 0..dim {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            }
            sm = second_moment_update(&sm, &g, &m, ell, &config).unwrap();
            grads.push(g);
            m_hist.push(m.clone());
            ells.push(ell);
        }
        let oracle = closed_form_second_moment(&grads, &m_hist, &ells, &config).unwrap();
        oracle
            .iter()
            .zip(&sm)
            .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
            .fold(0.0, f64::max)
    });
    errors.into_iter().fold(0.0, f64::max)
}

pub struct NoiseStats {
    pub max_mean_error: f64,
    pub mean_tolerance: f64,
    pub max_variance_rel_error: f64,
    pub bound_violations: u64,
    pub draws: u64,
}

/// Monte-Carlo statistics of the stochastic gradient oracle at a fixed point:
/// per-coordinate mean vs the exact gradient, per-coordinate variance vs
/// σ²/n, and the sup-norm bound on every draw. Deterministic via fixed
/// chunking regardless of thread count.
pub fn noise_statistics(kind: NoiseKind, sigma: f64, seed: u64) -> NoiseStats {
    const DRAWS: u64 = 1_000_000;
    const CHUNKS: u64 = 100;
    let problem = Problem::camel3();
    let x = [1.0, -2.0];
    let exact = problem.grad(&x);
    let n = exact.len();
    // room for the noise so the symmetric clamp never bites
    let clip = exact.iter().fold(0.0f64, |acc, g| acc.max(g.abs())) + 4.0 * sigma;
    let noise = NoiseSpec { kind, sigma, clip_bound: clip };

    struct Chunk {
        sum: Vec<f64>,
        sum_sq: Vec<f64>,
        violations: u64,
    }
    let chunks = par_map((0..CHUNKS).collect::<Vec<u64>>(), |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + c));
        let mut chunk = Chunk { sum: vec![0.0; n], sum_sq: vec![0.0; n], violations: 0 };
        for _ in 0..(DRAWS / CHUNKS) {
            let sample = problem.stochastic_gradient(&x, &noise, &mut rng);
            for (i, (&gi, &ei)) in sample.g.iter().zip(&exact).enumerate() {
                let noise_part = gi - ei;
                chunk.sum[i] += noise_part;
                chunk.sum_sq[i] += noise_part * noise_part;
                if gi.abs() > clip {
                    chunk.violations += 1;
                }
            }
        }
        chunk
    });
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut violations = 0;
    for c in &chunks {
        for i in 0..n {
            sum[i] += c.sum[i];
            sum_sq[i] += c.sum_sq[i];
        }
        violations += c.violations;
    }
    let draws = DRAWS as f64;
    let target_var = sigma * sigma / n as f64;
    let mut max_mean_error = 0.0f64;
    let mut max_var_rel = 0.0f64;
    for i in 0..n {
        let mean = sum[i] / draws;
        let var = sum_sq[i] / draws - mean * mean;
        max_mean_error = max_mean_error.max(mean.abs());
        max_var_rel = max_var_rel.max((var - target_var).abs() / target_var);
    }
    NoiseStats {
        max_mean_error,
        mean_tolerance: 5.0 * sigma / draws.sqrt(),
        max_variance_rel_error: max_var_rel,
        bound_violations: violations,
        draws: DRAWS,
    }
}

fn oracle_suite(seed: u64) -> SuiteOutcome {
    let start = std::time::Instant::now();
    let mut checks = Vec::new();
    for estimator in [
        EstimatorKind::Adam,
        EstimatorKind::EAdam,
        EstimatorKind::AdaBelief,
        EstimatorKind::AdamL,
    ] {
        let err = oracle_equivalence_error(estimator, 20, 1000, 8, seed);
        checks.push(Check::new(
            format!("recursion vs closed form: {}", estimator.name()),
            err <= 1e-10,
            format!("20 histories x 1000 steps, worst rel err {err:.3e} (tol 1e-10)"),
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    checks.push(Check::new(
        "oracle equivalence runtime",
        elapsed < 5.0,
        format!("{elapsed:.2}s (limit 5s)"),
    ));
    let stats = noise_statistics(NoiseKind::UniformBounded, 0.8, seed);
    checks.push(Check::new(
        "noise oracle: unbiased mean",
        stats.max_mean_error <= stats.mean_tolerance,
        format!(
            "worst per-coordinate mean error {:.3e} (tol 5σ/√N = {:.3e})",
            stats.max_mean_error, stats.mean_tolerance
        ),
    ));
    checks.push(Check::new(
        "noise oracle: variance within 2% of σ²/n",
        stats.max_variance_rel_error <= 0.02,
        format!("worst rel deviation {:.3e}", stats.max_variance_rel_error),
    ));
    checks.push(Check::new(
        "noise oracle: sup-norm bound on every draw",
        stats.bound_violations == 0,
        format!("{} violations over {} draws", stats.bound_violations, stats.draws),
    ));
    SuiteOutcome { suite: "oracle".into(), checks }
}

// ---------------------------------------------------------------------------
// gradcheck: analytic vs central finite differences
// ---------------------------------------------------------------------------

/// Worst vector-relative deviation between analytic and central-difference
/// gradients over `points` random points in the domain box.
pub fn gradcheck_error(problem: &Problem, points: usize, h: f64, seed: u64) -> f64 {
    let (lo, hi) = problem.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> =
            lo.iter().zip(hi).map(|(&a, &b)| rng.gen_range(a..b)).collect();
        let analytic = problem.grad(&x);
        let fd = problem.finite_diff_gradient(&x, h);
        let diff = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-6);
        worst = worst.max(diff / scale);
    }
    worst
}

pub fn gradcheck_problems() -> Vec<Problem> {
    vec![
        Problem::camel3(),
        Problem::rosenbrock(),
        Problem::pl_quadratic(&[0.2, 2610.0], &[0.0, 0.0]).unwrap(),
    ]
}

fn gradcheck_suite(seed: u64) -> SuiteOutcome {
    let mut checks = Vec::new();
    for problem in gradcheck_problems() {
        let err = gradcheck_error(&problem, 100, 1e-6, seed);
        checks.push(Check::new(
            format!("analytic vs finite differences: {}", problem.name()),
            err < 1e-6,
            format!("100 points, worst rel err {err:.3e} (tol 1e-6)"),
        ));
    }
    SuiteOutcome { suite: "gradcheck".into(), checks }
}

// ---------------------------------------------------------------------------
// propositions: threshold arithmetic and the monotonicity/rate campaigns
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CampaignOutcome {
    pub instances: usize,
    pub monotone_failures: usize,
    pub bound_violations: usize,
    pub worst_margin: f64,
}

/// Random PL-quadratic campaign for one estimator under case (i) of its
/// monotonicity/rate propositions: μ in 0.1..1, L in 1..100, n ∈ {2,10},
/// β₁ = 0, ε chosen to make the sum condition reachable, η at 0.999× the
/// admissible bound, 2000 steps with exact gradients.
pub fn proposition_campaign(
    estimator: EstimatorKind,
    instances: usize,
    seed: u64,
) -> CampaignOutcome {
    const STEPS: u64 = 2000;
    let results = par_map((0..instances as u64).collect::<Vec<u64>>(), |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7919 * i));
        let n = if i % 2 == 0 { 2 } else { 10 };
        let mu = rng.gen_range(0.1..1.0);
        let lipschitz: f64 = rng.gen_range(1.0f64..100.0).max(mu);
        let mut spectrum = vec![mu, lipschitz];
        for _ in 2..n {
            spectrum.push(rng.gen_range(mu..lipschitz));
        }
        let center = vec![0.0; n];
        let problem = Problem::pl_quadratic(&spectrum, &center).unwrap();
        let x0: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();

        let mut config = OptimizerConfig::new(estimator);
        config.beta1 = 0.0;
        config.epsilon = match estimator {
            EstimatorKind::AdaBelief => 1.0,
            // make 4G/√(γε) equal the geometric sum at k = 400
            _ => {
                let target = analysis::geometric_sum(config.beta2, 400);
                (4.0 * problem.grad_bound() / target).powi(2) / config.gamma
            }
        };
        let constants = AnalysisConstants::noise_free(
            problem.grad_bound(),
            lipschitz,
            mu,
            n,
        );
        let k0 = analysis::smallest_admissible_k0(estimator, CaseId::I, &constants, &config)
            .expect("case (i) admissible by construction");
        config.eta =
            analysis::admissible_eta(estimator, CaseId::I, &constants, &config, k0).unwrap()
                * 0.999;

        // ℓ = f + 1 keeps AdamL in the ℓ_min >= 1 regime
        let mut scaling = if estimator == EstimatorKind::AdamL {
            ScalingState::identity(-1.0)
        } else {
            ScalingState::identity(0.0)
        };
        let mut run_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
        let result = simulate(
            &problem,
            &x0,
            &config,
            &mut scaling,
            &NoiseSpec::none(),
            &RunSettings { steps: STEPS, record_every: 1 },
            None,
            &mut run_rng,
        )
        .expect("campaign run");
        let constants = if estimator == EstimatorKind::AdamL {
            constants.with_loss_extremes(result.ell_min, result.ell_max)
        } else {
            constants
        };
        analysis::verify_trajectory(&result.records, &constants, &config, estimator, k0)
            .expect("conditions hold by construction")
    });
    let mut outcome = CampaignOutcome {
        instances,
        monotone_failures: 0,
        bound_violations: 0,
        worst_margin: f64::INFINITY,
    };
    for verdict in results {
        if !verdict.monotone_after_k0 {
            outcome.monotone_failures += 1;
        }
        outcome.bound_violations += verdict.bound_violations;
        outcome.worst_margin = outcome.worst_margin.min(verdict.worst_margin);
    }
    outcome
}

fn propositions_suite(seed: u64) -> SuiteOutcome {
    let mut checks = Vec::new();
    let k65 = analysis::smallest_k_reaching_sum(0.999, 2.0 / 0.001f64.sqrt());
    checks.push(Check::new(
        "warm-up threshold Σβ₂ʲ >= 2/√(1−β₂) at β₂ = 0.999",
        k65 == Some(65),
        format!("smallest k = {k65:?} (expected 65)"),
    ));
    let k43 = analysis::smallest_k_reaching_sum(0.999, 4.0 / (3.0 * 0.001f64.sqrt()));
    checks.push(Check::new(
        "warm-up threshold Σβ₂ʲ >= 4/(3√(1−β₂)) at β₂ = 0.999",
        k43 == Some(43),
        format!("smallest k = {k43:?} (expected 43)"),
    ));
    for estimator in [EstimatorKind::EAdam, EstimatorKind::AdaBelief, EstimatorKind::AdamL] {
        let outcome = proposition_campaign(estimator, 50, seed);
        checks.push(Check::new(
            format!("monotonicity + rate bound campaign: {}", estimator.name()),
            outcome.monotone_failures == 0 && outcome.bound_violations == 0,
            format!(
                "{} instances, {} monotonicity failures, {} bound violations, worst margin {:.3e}",
                outcome.instances,
                outcome.monotone_failures,
                outcome.bound_violations,
                outcome.worst_margin
            ),
        ));
    }
    SuiteOutcome { suite: "propositions".into(), checks }
}

// ---------------------------------------------------------------------------
// modes
// ---------------------------------------------------------------------------

fn modes_suite(seed: u64) -> SuiteOutcome {
    let mut checks = Vec::new();
    let mut config = OptimizerConfig::new(EstimatorKind::EAdam);
    config.beta1 = 0.0;

    let zeros = vec![vec![0.0, 0.0]; 10];
    let report = classify_modes(&zeros, &zeros, &[1.0; 10], &config, 1.05).unwrap();
    checks.push(Check::new(
        "zero gradients are non-adaptive",
        report.modes.iter().all(|m| *m == CoordinateMode::NonAdaptive),
        format!("adaptive fraction {}", report.adaptive_fraction),
    ));

    let big = vec![vec![10.0]; 101];
    let report = classify_modes(&big, &big, &vec![1.0; 101], &config, 1.05).unwrap();
    checks.push(Check::new(
        "large persistent gradients are adaptive",
        report.modes[0] == CoordinateMode::Adaptive,
        format!(
            "adaptive sum {:.4}, non-adaptive sum {:.4}",
            report.adaptive_sum[0], report.nonadaptive_sum[0]
        ),
    ));

    let mut belief_cfg = OptimizerConfig::new(EstimatorKind::AdaBelief);
    belief_cfg.beta1 = 0.0;
    let grads: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64).sin() * 6.0]).collect();
    let report = classify_modes(&grads, &grads, &vec![1.0; 60], &belief_cfg, 1.05).unwrap();
    checks.push(Check::new(
        "belief term vanishes at β₁ = 0",
        report.modes.iter().all(|m| *m == CoordinateMode::NonAdaptive),
        "squared-difference sums are identically zero".to_string(),
    ));

    // recursive accumulator vs direct sums on random histories
    let mut worst_rel = 0.0f64;
    let mut agree = true;
    for estimator in [EstimatorKind::EAdam, EstimatorKind::AdaBelief, EstimatorKind::AdamL] {
        let mut cfg = OptimizerConfig::new(estimator);
        cfg.beta1 = 0.7;
        cfg.phi = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = ModeAccumulator::new(&cfg, 3).unwrap();
        let mut m = vec![0.0; 3];
        let (mut grads, mut ms, mut ells) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..200 {
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ell = rng.gen_range(0.2..2.0);
            for i in 0..3 {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            }
            acc.absorb(&g, &m, ell, &cfg);
            grads.push(g);
            ms.push(m.clone());
            ells.push(ell);
        }
        let direct = classify_modes(&grads, &ms, &ells, &cfg, 1.05).unwrap();
        let recursive = acc.report(1.05);
        agree &= direct.modes == recursive.modes;
        for i in 0..3 {
            worst_rel = worst_rel.max(
                (direct.adaptive_sum[i] - recursive.adaptive_sum[i]).abs()
                    / direct.adaptive_sum[i].max(1e-300),
            );
        }
    }
    checks.push(Check::new(
        "recursive accumulator matches direct sums",
        agree && worst_rel < 1e-10,
        format!("worst rel deviation {worst_rel:.3e}"),
    ));

    let mixed: Vec<Vec<f64>> = (0..80).map(|i| vec![9.0, 0.01 * (i as f64).cos()]).collect();
    let report = classify_modes(&mixed, &mixed, &vec![1.0; 80], &config, 1.0).unwrap();
    checks.push(Check::new(
        "unit ratio yields the strict dichotomy",
        report.modes.iter().all(|m| *m != CoordinateMode::Transitional)
            && report.modes[0] == CoordinateMode::Adaptive
            && report.modes[1] == CoordinateMode::NonAdaptive,
        format!("modes {:?}", report.modes),
    ));

    SuiteOutcome { suite: "modes".into(), checks }
}

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

/// The synthetic-stream check: one warm-up epoch of values in 2..9, then an
/// epoch of values inside the observed range.
pub fn scaling_stream_check(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ScalingState::auto_epoch_lstm(100).unwrap();
    let stream: Vec<f64> = (0..100).map(|_| rng.gen_range(2.0..9.0)).collect();
    let mut warmup_unit = true;
    for &f in &stream {
        if state.ell(f).unwrap() != 1.0 {
            warmup_unit = false;
        }
        state.observe(f).unwrap();
    }
    checks.push(Check::new(
        "warm-up epoch emits unit scaling",
        warmup_unit,
        "100 observations in epoch 0",
    ));
    let true_min = stream.iter().cloned().fold(f64::INFINITY, f64::min);
    let true_max = stream.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "recorded extrema equal the stream extrema",
        state.f_min == true_min && state.f_max == true_max,
        format!("f_min {:.4} f_max {:.4}", state.f_min, state.f_max),
    ));
    let mut in_unit_interval = true;
    for _ in 0..100 {
        let f = rng.gen_range(true_min..true_max);
        let ell = state.ell(f).unwrap();
        if !(ell > 0.0 && ell <= 1.0) {
            in_unit_interval = false;
        }
        state.observe(f).unwrap();
    }
    checks.push(Check::new(
        "post-warm-up scaling stays in (0,1] for in-range values",
        in_unit_interval,
        "100 epoch-1 observations",
    ));
    checks
}

fn scaling_suite(seed: u64) -> SuiteOutcome {
    let mut checks = scaling_stream_check(seed);

    let phi_ok = phi_from_train_error(1.0).unwrap() == 4.0
        && phi_from_train_error(0.1).unwrap() == 4.0
        && (phi_from_train_error(10.0).unwrap() - 5.0).abs() < 1e-12
        && phi_from_train_error(0.0).is_err();
    checks.push(Check::new(
        "training-error φ schedule",
        phi_ok,
        "max{4, 4 + log10(e_train)} with domain error at e <= 0",
    ));

    let mut wgan = ScalingState::auto_epoch_wgan(2).unwrap();
    wgan.observe(0.34).unwrap();
    wgan.observe(0.60).unwrap();
    let ell = wgan.ell(0.44).unwrap();
    checks.push(Check::new(
        "wgan range snaps to a power of ten",
        (wgan.f_scale - 0.1).abs() < 1e-15 && (ell - 1.0).abs() < 1e-12,
        format!("f_scale {} ell(0.44) {}", wgan.f_scale, ell),
    ));

    let mut frozen = ScalingState::auto_epoch_lstm(2).unwrap();
    for f in [5.0, 9.0, 100.0, -3.0] {
        frozen.observe(f).unwrap();
    }
    checks.push(Check::new(
        "statistics freeze after the warm-up epoch",
        frozen.f_min == 5.0 && frozen.f_max == 9.0,
        format!("f_min {} f_max {}", frozen.f_min, frozen.f_max),
    ));

    let identity = ScalingState::identity(0.0);
    let known = ScalingState::known_range(0.0, 6.0).unwrap();
    let mut monotone = true;
    for pair in [(0.5, 0.7), (1.0, 1.5), (3.0, 5.9)] {
        monotone &= identity.ell(pair.0).unwrap() < identity.ell(pair.1).unwrap();
        monotone &= known.ell(pair.0).unwrap() < known.ell(pair.1).unwrap();
    }
    checks.push(Check::new(
        "scaling is strictly increasing in f",
        monotone,
        "identity and known-range modes",
    ));

    SuiteOutcome { suite: "scaling".into(), checks }
}
