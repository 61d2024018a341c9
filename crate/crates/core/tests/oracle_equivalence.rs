//! Recursive second-moment updates against the explicit-sum oracle, plus the
//! structural invariants of the update rules.

use optlab_core::optim::{
    closed_form_second_moment, effective_stepsize, second_moment_update, EstimatorKind,
    GradientSample, OptimizerConfig, OptimizerState,
};
use proptest::prelude::*;

const ESTIMATORS: [EstimatorKind; 4] = [
    EstimatorKind::Adam,
    EstimatorKind::EAdam,
    EstimatorKind::AdaBelief,
    EstimatorKind::AdamL,
];

/// Replay a gradient history through the recursion, collecting the first
/// moments and the second-moment trace.
fn replay(
    config: &OptimizerConfig,
    grads: &[Vec<f64>],
    ells: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = grads[0].len();
    let mut m = vec![0.0; n];
    let mut sm = vec![0.0; n];
    let mut m_hist = Vec::with_capacity(grads.len());
    let mut sm_trace = Vec::with_capacity(grads.len());
    for (g, &ell) in grads.iter().zip(ells) {
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
        }
        sm = second_moment_update(&sm, g, &m, ell, config).unwrap();
        m_hist.push(m.clone());
        sm_trace.push(sm.clone());
    }
    (m_hist, sm_trace)
}

fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

fn history_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..5, 1usize..120).prop_flat_map(|(n, len)| {
        (
            proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, n), len),
            proptest::collection::vec(0.05f64..3.0, len),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_closed_form_oracle((grads, ells) in history_strategy()) {
        for estimator in ESTIMATORS {
            let mut config = OptimizerConfig::new(estimator);
            config.phi = 2.0;
            config.gamma = 0.5;
            let (m_hist, sm_trace) = replay(&config, &grads, &ells);
            // final step plus a sampled prefix
            let checkpoints = [grads.len() - 1, grads.len() / 2, 0];
            for &k in checkpoints.iter() {
                let oracle = closed_form_second_moment(
                    &grads[..=k],
                    &m_hist[..=k],
                    &ells[..=k],
                    &config,
                )
                .unwrap();
                let rel = max_rel_error(&oracle, &sm_trace[k]);
                prop_assert!(rel < 1e-10, "{} k={k}: rel error {rel}", estimator.name());
            }
        }
    }

    #[test]
    fn epsilon_terms_lower_bound_the_buffers((grads, ells) in history_strategy()) {
        let b2 = 0.999f64;
        for estimator in [EstimatorKind::EAdam, EstimatorKind::AdaBelief, EstimatorKind::AdamL] {
            let config = OptimizerConfig::new(estimator);
            let (_, sm_trace) = replay(&config, &grads, &ells);
            for (idx, sm) in sm_trace.iter().enumerate() {
                let floor = if estimator == EstimatorKind::AdamL {
                    // ε Σ β₂^{k−j} ℓ⁽ʲ⁾ over the consumed prefix
                    config.epsilon
                        * ells[..=idx]
                            .iter()
                            .enumerate()
                            .map(|(j, &ell)| b2.powi((idx - j) as i32) * ell)
                            .sum::<f64>()
                } else {
                    config.epsilon * (0..=idx).map(|j| b2.powi(j as i32)).sum::<f64>()
                };
                for &v in sm {
                    prop_assert!(
                        v >= floor * (1.0 - 1e-12),
                        "{}: buffer {v} below ε floor {floor}",
                        estimator.name()
                    );
                }
            }
        }
    }

    #[test]
    fn bias_corrected_adam_moment_recovers_constant_gradients(
        c in prop_oneof![-10.0f64..-0.01, 0.01f64..10.0],
        k in 1usize..500,
    ) {
        let config = OptimizerConfig::new(EstimatorKind::Adam);
        let grads = vec![vec![c]; k];
        let ells = vec![1.0; k];
        let (_, sm_trace) = replay(&config, &grads, &ells);
        let v_hat = sm_trace[k - 1][0] / (1.0 - config.beta2.powi(k as i32));
        prop_assert!(((v_hat - c * c) / (c * c)).abs() < 1e-12);
    }

    #[test]
    fn adaml_with_unit_loss_tracks_eadam_bit_exactly((grads, _) in history_strategy()) {
        let eadam = OptimizerConfig::new(EstimatorKind::EAdam);
        let adaml = OptimizerConfig::new(EstimatorKind::AdamL);
        let ells = vec![1.0; grads.len()];
        let (_, eadam_trace) = replay(&eadam, &grads, &ells);
        let (_, adaml_trace) = replay(&adaml, &grads, &ells);
        for (ye, wl) in eadam_trace.iter().zip(&adaml_trace) {
            prop_assert_eq!(ye, wl);
        }
        // the two stepsize rules differ only through EAdam's +ε term
        let k = grads.len() as u64;
        let n = grads[0].len();
        let state_of = |sm: &Vec<f64>, cfg: &OptimizerConfig| OptimizerState {
            x: vec![0.0; n],
            m: vec![0.0; n],
            second_moment: sm.clone(),
            momentum: Vec::new(),
            k,
            eta: cfg.eta,
        };
        let last = eadam_trace.last().unwrap();
        let lr_e = effective_stepsize(&state_of(last, &eadam), &eadam).unwrap().stepsize;
        let lr_l = effective_stepsize(&state_of(last, &adaml), &adaml).unwrap().stepsize;
        let bias2 = 1.0 - eadam.beta2.powi(k as i32);
        for i in 0..n {
            let corrected = (last[i] / bias2).sqrt();
            let predicted_gap = eadam.eta * eadam.epsilon / (corrected * (corrected + eadam.epsilon));
            let gap = lr_l[i] - lr_e[i];
            prop_assert!(gap >= 0.0);
            // the gap is a small difference of two stepsizes, so ulp noise on
            // them is magnified here
            prop_assert!((gap - predicted_gap).abs() <= 1e-9 * predicted_gap + 1e-18);
        }
    }
}

#[test]
fn adaml_loss_scaling_shifts_the_two_terms_in_opposite_directions() {
    let config = OptimizerConfig::new(EstimatorKind::AdamL);
    let g = 2.0f64;
    let adaptive = |ell: f64, phi: f64| (1.0 - config.beta2) * g * g / (config.gamma * ell.powf(phi));
    let nonadaptive = |ell: f64| config.epsilon * ell;
    // adaptive term strictly decreasing in ℓ, non-adaptive strictly increasing
    let mut prev_a = f64::INFINITY;
    let mut prev_n = 0.0;
    for ell in [0.1, 0.5, 1.0, 2.0, 10.0] {
        let a = adaptive(ell, 1.0);
        let na = nonadaptive(ell);
        assert!(a < prev_a);
        assert!(na > prev_n);
        prev_a = a;
        prev_n = na;
    }
    // for ℓ ∈ (0,1), raising φ raises the adaptive term
    for ell in [0.1, 0.5, 0.9] {
        assert!(adaptive(ell, 2.0) > adaptive(ell, 1.0));
        assert!(adaptive(ell, 4.0) > adaptive(ell, 2.0));
    }
}

#[test]
fn twenty_seeded_histories_match_within_1e10_under_five_seconds() {
    use rand::{Rng, SeedableRng};
    let start = std::time::Instant::now();
    let n = 8;
    let steps = 1000;
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grads: Vec<Vec<f64>> =
            (0..steps).map(|_| (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
        let ells: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.1..5.0)).collect();
        for estimator in ESTIMATORS {
            let config = OptimizerConfig::new(estimator);
            let (m_hist, sm_trace) = replay(&config, &grads, &ells);
            let oracle = closed_form_second_moment(&grads, &m_hist, &ells, &config).unwrap();
            let rel = max_rel_error(&oracle, sm_trace.last().unwrap());
            assert!(rel < 1e-10, "{} seed {seed}: rel {rel}", estimator.name());
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn zero_gradient_sample_leaves_every_estimator_at_rest() {
    for estimator in ESTIMATORS {
        let config = OptimizerConfig::new(estimator);
        let mut state = OptimizerState::new(vec![0.7, -0.2], &config);
        let sample = GradientSample::exact(vec![0.0, 0.0], 3.0);
        for _ in 0..5 {
            state = optlab_core::optim::step(state, &sample, 2.0, &config).unwrap();
        }
        assert_eq!(state.x, vec![0.7, -0.2]);
    }
}
