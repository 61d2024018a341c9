//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them). The tolerances and
//! protocols are pinned here, not configurable.
//!
//! Criteria 2 and 4 encode reference trajectory outcomes that a faithful
//! implementation of the documented update rules does not reproduce (the
//! trajectories here match independent reference implementations of the same
//! rules); those tests assert the criteria verbatim and fail with the
//! measured values.

use optlab_cli::protocol::protocol_run;
use optlab_cli::verify::{
    gradcheck_error, gradcheck_problems, noise_statistics, oracle_equivalence_error,
    proposition_campaign, scaling_stream_check,
};
use optlab_core::analysis::smallest_k_reaching_sum;
use optlab_core::optim::EstimatorKind;
use optlab_core::problems::{NoiseKind, NoiseSpec, Problem};
use optlab_core::run::BoostTrigger;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const ADAPTIVE_FAMILY: [EstimatorKind; 4] = [
    EstimatorKind::Adam,
    EstimatorKind::EAdam,
    EstimatorKind::AdaBelief,
    EstimatorKind::AdamL,
];

fn report(criterion: &str, passed: bool, detail: &str) {
    println!("ACCEPT {criterion}: {} — {detail}", if passed { "PASS" } else { "FAIL" });
}

#[test]
fn acceptance_01_oracle_equivalence() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for estimator in ADAPTIVE_FAMILY {
        worst = worst.max(oracle_equivalence_error(estimator, 20, 1000, 8, 41));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-10 && elapsed < 5.0;
    let detail = format!(
        "4 estimators x 20 seeds x 1000 steps (n=8): worst rel err {worst:.3e} (tol 1e-10), {elapsed:.2}s (limit 5s)"
    );
    report("1 oracle-equivalence", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_02_camel_selectivity() {
    let start = Instant::now();
    let problem = Problem::camel3();
    let x0 = [0.0, -4.0];
    let mut finals = Vec::new();
    for estimator in ADAPTIVE_FAMILY {
        let run = protocol_run(&problem, estimator, &x0, 4000, None);
        finals.push((estimator, run.final_f));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut parts = Vec::new();
    let mut passed = true;
    for (estimator, final_f) in &finals {
        let ok = match estimator {
            EstimatorKind::AdamL => *final_f < 1e-2,
            _ => (0.25..=0.35).contains(final_f),
        };
        passed &= ok;
        parts.push(format!(
            "{} {:.4e} [{}]",
            estimator.name(),
            final_f,
            if ok { "ok" } else { "out of band" }
        ));
    }
    passed &= elapsed < 1.0;
    let detail = format!(
        "final f after 4000 steps from [0,-4]: {} ({elapsed:.2}s, limit 1s); required: adaml < 1e-2, others in [0.25,0.35]; \
         these trajectories match independent reference implementations of the same update rules",
        parts.join(", ")
    );
    report("2 camel-selectivity", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_03_adam_eadam_proximity() {
    let problem = Problem::camel3();
    let x0 = [0.0, -4.0];
    let adam = protocol_run(&problem, EstimatorKind::Adam, &x0, 4000, None);
    let eadam = protocol_run(&problem, EstimatorKind::EAdam, &x0, 4000, None);
    let sup: f64 = adam
        .state
        .x
        .iter()
        .zip(&eadam.state.x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let passed = sup <= 1e-2;
    let detail = format!("final-iterate sup-norm distance {sup:.3e} (tol 1e-2)");
    report("3 adam-eadam-proximity", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_04_rosenbrock_ordering() {
    let start = Instant::now();
    let problem = Problem::rosenbrock();
    let x0 = [-4.0, -4.0];
    let steps = 8000;
    let adaml = protocol_run(&problem, EstimatorKind::AdamL, &x0, steps, None).final_f;
    let others: Vec<(EstimatorKind, f64)> =
        [EstimatorKind::Adam, EstimatorKind::EAdam, EstimatorKind::AdaBelief]
            .into_iter()
            .map(|e| (e, protocol_run(&problem, e, &x0, steps, None).final_f))
            .collect();
    let min_other = others.iter().map(|(_, f)| *f).fold(f64::INFINITY, f64::min);
    let sgd_const = protocol_run(&problem, EstimatorKind::SgdMomentum, &x0, steps, None).final_f;
    let boost = BoostTrigger { when_f_below: 1.0, factor: 10.0 };
    let sgd_boosted =
        protocol_run(&problem, EstimatorKind::SgdMomentum, &x0, steps, Some(boost)).final_f;
    let elapsed = start.elapsed().as_secs_f64();

    let adaml_leads = adaml <= min_other;
    let sgd_trails = sgd_const > adaml;
    let boost_ratio = sgd_boosted / adaml;
    let boost_comparable = (0.1..=10.0).contains(&boost_ratio);
    let timely = elapsed < 2.0;
    let passed = adaml_leads && sgd_trails && boost_comparable && timely;
    let detail = format!(
        "adaml {adaml:.3e} vs min(adaptive) {min_other:.3e} [{}]; sgd const {sgd_const:.3e} > adaml [{}]; \
         boosted sgd {sgd_boosted:.3e}, ratio to adaml {boost_ratio:.3e} within [0.1,10] [{}] \
         (f first crosses the 1.0 boost threshold after the 8000-step horizon, so the boost cannot fire); {elapsed:.2}s (limit 2s)",
        if adaml_leads { "ok" } else { "violated" },
        if sgd_trails { "ok" } else { "violated" },
        if boost_comparable { "ok" } else { "violated" },
    );
    report("4 rosenbrock-ordering", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_05_monotonicity_properties() {
    let mut passed = true;
    let mut parts = Vec::new();
    for estimator in [EstimatorKind::EAdam, EstimatorKind::AdaBelief, EstimatorKind::AdamL] {
        let outcome = proposition_campaign(estimator, 50, 1234);
        passed &= outcome.monotone_failures == 0;
        parts.push(format!(
            "{}: {}/{} instances monotone after k0",
            estimator.name(),
            outcome.instances - outcome.monotone_failures,
            outcome.instances
        ));
    }
    let detail = format!("2000 steps, sigma = 0, randomized spectra: {}", parts.join("; "));
    report("5 monotonicity", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_06_linear_rate_bounds() {
    let mut passed = true;
    let mut parts = Vec::new();
    for estimator in [EstimatorKind::EAdam, EstimatorKind::AdaBelief, EstimatorKind::AdamL] {
        // rate_constants inside the campaign asserts 0 < 2muC < 1 for every
        // passing configuration; any violation would panic the run
        let outcome = proposition_campaign(estimator, 50, 987);
        passed &= outcome.bound_violations == 0;
        parts.push(format!(
            "{}: {} bound violations, worst margin {:.3e}",
            estimator.name(),
            outcome.bound_violations,
            outcome.worst_margin
        ));
    }
    let detail = format!("gap <= (1-2muC)^(k-k0) * gap(k0) at every step: {}", parts.join("; "));
    report("6 linear-rate-bounds", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_07_threshold_arithmetic() {
    let eadam = smallest_k_reaching_sum(0.999, 2.0 / 0.001f64.sqrt());
    let belief = smallest_k_reaching_sum(0.999, 4.0 / (3.0 * 0.001f64.sqrt()));
    let passed = eadam == Some(65) && belief == Some(43);
    let detail =
        format!("smallest admissible k at beta2 = 0.999: {eadam:?} (expect 65), {belief:?} (expect 43)");
    report("7 threshold-arithmetic", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_08_gradient_checks() {
    let mut passed = true;
    let mut parts = Vec::new();
    for problem in gradcheck_problems() {
        let err = gradcheck_error(&problem, 100, 1e-6, 5150);
        passed &= err < 1e-6;
        parts.push(format!("{} {err:.3e}", problem.name()));
    }
    let detail = format!("100 random points per problem, h = 1e-6, worst rel err: {}", parts.join(", "));
    report("8 gradient-checks", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_09_stochastic_oracle_statistics() {
    let stats = noise_statistics(NoiseKind::UniformBounded, 0.8, 777);
    let mean_ok = stats.max_mean_error <= stats.mean_tolerance;
    let var_ok = stats.max_variance_rel_error <= 0.02;
    let bound_ok = stats.bound_violations == 0;

    // bound holds exactly even when the clip is tight enough to truncate
    let problem = Problem::pl_quadratic(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
    let tight = NoiseSpec { kind: NoiseKind::ClippedGaussian, sigma: 2.0, clip_bound: 3.3 };
    let mut rng = ChaCha8Rng::seed_from_u64(778);
    let mut tight_ok = true;
    for _ in 0..200_000 {
        let s = problem.stochastic_gradient(&[1.0, 1.0], &tight, &mut rng);
        tight_ok &= s.g.iter().all(|v| v.abs() <= tight.clip_bound);
    }

    let passed = mean_ok && var_ok && bound_ok && tight_ok;
    let detail = format!(
        "{} draws: worst mean err {:.3e} (tol {:.3e}), worst variance rel dev {:.3e} (tol 2e-2), \
         {} bound violations; tight-clip bound holds [{}]",
        stats.draws,
        stats.max_mean_error,
        stats.mean_tolerance,
        stats.max_variance_rel_error,
        stats.bound_violations,
        if tight_ok { "ok" } else { "violated" }
    );
    report("9 stochastic-oracle-statistics", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn acceptance_10_scaling_subsystem() {
    let checks = scaling_stream_check(31);
    let passed = checks.iter().all(|c| c.passed);
    let detail = checks
        .iter()
        .map(|c| format!("{} [{}]", c.name, if c.passed { "ok" } else { "violated" }))
        .collect::<Vec<_>>()
        .join("; ");
    report("10 scaling-subsystem", passed, &detail);
    assert!(passed, "{detail}");
}
