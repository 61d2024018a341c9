//! Shared update template for the adaptive gradient family.
//!
//! All estimators follow the same loop: update the first moment, update an
//! estimator-specific second-moment buffer, then move the iterate by the
//! bias-corrected first moment scaled with a per-coordinate stepsize. They
//! differ only in the second-moment rule and in how the stepsize is formed
//! from it:
//!
//! * Adam:      v' = β₂ v + (1−β₂) g²,             η' = η / (√(v'/(1−β₂ᵏ)) + ε)
//! * EAdam:     y' = β₂ y + (1−β₂) g² + ε,         η' = η / (√(y'/(1−β₂ᵏ)) + ε)
//! * AdaBelief: s' = β₂ s + (1−β₂) (g−m')² + ε,    η' = η / (√(s'/(1−β₂ᵏ)) + ε)
//! * AdamL:     w' = β₂ w + (1−β₂) g²/(γ ℓ^φ) + εℓ, η' = η √((1−β₂ᵏ)/w')
//!
//! where ℓ > 0 is the loss-scaling value supplied per step (see
//! [`crate::scaling`]). SGD with momentum keeps a raw momentum buffer
//! b' = β₁ b + g and moves by η b' with no bias correction.

use thiserror::Error;

/// Floor applied to AdamL second-moment coordinates before taking the square
/// root; the stepsize rule divides by √w with no additive ε, so a coordinate
/// can collapse to zero when ℓ → 0 and g = 0.
pub const SECOND_MOMENT_FLOOR: f64 = 1e-30;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("loss scaling value must be positive, got {0}")]
    NonPositiveLoss(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("state has not been stepped yet (k = 0)")]
    NotStepped,
    #[error("operation not defined for estimator {0}")]
    UnsupportedEstimator(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Adam,
    EAdam,
    AdaBelief,
    AdamL,
    SgdMomentum,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Adam => "adam",
            EstimatorKind::EAdam => "eadam",
            EstimatorKind::AdaBelief => "adabelief",
            EstimatorKind::AdamL => "adaml",
            EstimatorKind::SgdMomentum => "sgd_momentum",
        }
    }

    /// Estimators with a second-moment buffer (everything except SGD).
    pub fn has_second_moment(self) -> bool {
        self != EstimatorKind::SgdMomentum
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = OptimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(EstimatorKind::Adam),
            "eadam" => Ok(EstimatorKind::EAdam),
            "adabelief" => Ok(EstimatorKind::AdaBelief),
            "adaml" => Ok(EstimatorKind::AdamL),
            "sgd_momentum" | "sgd" => Ok(EstimatorKind::SgdMomentum),
            other => Err(OptimError::InvalidConfig(format!(
                "unknown estimator kind `{other}`"
            ))),
        }
    }
}

/// Scalar hyperparameters shared by the whole family. `gamma` and `phi`
/// only matter for AdamL; `decay_schedule` entries are (step index, factor)
/// pairs with strictly increasing indices and factors in (0, 1], applied
/// multiplicatively to the current base stepsize at the start of the step
/// whose index matches.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub estimator: EstimatorKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub phi: f64,
    pub decay_schedule: Vec<(u64, f64)>,
}

impl OptimizerConfig {
    /// Benchmark-protocol defaults: β₁ = 0.9, β₂ = 0.999, η = 1e-3, ε = 1e-4,
    /// γ = φ = 1, no decay schedule.
    pub fn new(estimator: EstimatorKind) -> Self {
        OptimizerConfig {
            estimator,
            beta1: 0.9,
            beta2: 0.999,
            eta: 1e-3,
            epsilon: 1e-4,
            gamma: 1.0,
            phi: 1.0,
            decay_schedule: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let err = |msg: String| Err(OptimError::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.beta1) || !self.beta1.is_finite() {
            return err(format!("beta1 must lie in [0,1), got {}", self.beta1));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return err(format!("beta2 must lie in (0,1), got {}", self.beta2));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return err(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return err(format!("phi must be positive, got {}", self.phi));
        }
        let mut prev = 0u64;
        for (i, &(idx, factor)) in self.decay_schedule.iter().enumerate() {
            if idx == 0 || (i > 0 && idx <= prev) {
                return err(format!(
                    "decay_schedule[{i}]: step indices must be >= 1 and strictly increasing"
                ));
            }
            if !(factor > 0.0 && factor <= 1.0) {
                return err(format!(
                    "decay_schedule[{i}]: factor must lie in (0,1], got {factor}"
                ));
            }
            prev = idx;
        }
        Ok(())
    }
}

/// One gradient observation: the (possibly noisy) gradient and the objective
/// value at the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub g: Vec<f64>,
    pub f_value: f64,
    pub is_stochastic: bool,
}

impl GradientSample {
    pub fn exact(g: Vec<f64>, f_value: f64) -> Self {
        GradientSample { g, f_value, is_stochastic: false }
    }

    pub fn is_finite(&self) -> bool {
        self.f_value.is_finite() && self.g.iter().all(|v| v.is_finite())
    }
}

/// Full state of one running optimizer. Plain value: move it between threads,
/// never share it mutably. `eta` is the current base stepsize after any decay
/// factors or value-conditional boosts; `second_moment` holds v, y, s or w
/// depending on the estimator and stays zero-length for SGD-momentum, whose
/// buffer lives in `momentum`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub momentum: Vec<f64>,
    pub k: u64,
    pub eta: f64,
}

impl OptimizerState {
    pub fn new(x0: Vec<f64>, config: &OptimizerConfig) -> Self {
        let n = x0.len();
        OptimizerState {
            x: x0,
            m: vec![0.0; n],
            second_moment: if config.estimator.has_second_moment() { vec![0.0; n] } else { Vec::new() },
            momentum: if config.estimator == EstimatorKind::SgdMomentum { vec![0.0; n] } else { Vec::new() },
            k: 0,
            eta: config.eta,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Per-coordinate stepsize actually used at the most recent step, together
/// with the updating magnitude Δ = |η ⊙ m| it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct StepsizeReport {
    pub stepsize: Vec<f64>,
    pub delta: Vec<f64>,
}

fn check_lengths(expected: usize, got: usize) -> Result<(), OptimError> {
    if expected == got {
        Ok(())
    } else {
        Err(OptimError::LengthMismatch { expected, got })
    }
}

/// Second-moment update rule, elementwise. `m_new` is the already-updated
/// first moment (AdaBelief squares g − m'); `ell` is only read by AdamL.
pub fn second_moment_update(
    prev: &[f64],
    g: &[f64],
    m_new: &[f64],
    ell: f64,
    config: &OptimizerConfig,
) -> Result<Vec<f64>, OptimError> {
    check_lengths(prev.len(), g.len())?;
    check_lengths(prev.len(), m_new.len())?;
    let b2 = config.beta2;
    let eps = config.epsilon;
    let out = match config.estimator {
        EstimatorKind::Adam => prev
            .iter()
            .zip(g)
            .map(|(&p, &gi)| b2 * p + (1.0 - b2) * gi * gi)
            .collect(),
        EstimatorKind::EAdam => prev
            .iter()
            .zip(g)
            .map(|(&p, &gi)| b2 * p + (1.0 - b2) * gi * gi + eps)
            .collect(),
        EstimatorKind::AdaBelief => prev
            .iter()
            .zip(g.iter().zip(m_new))
            .map(|(&p, (&gi, &mi))| {
                let d = gi - mi;
                b2 * p + (1.0 - b2) * d * d + eps
            })
            .collect(),
        EstimatorKind::AdamL => {
            if !(ell > 0.0) {
                return Err(OptimError::NonPositiveLoss(ell));
            }
            let denom = config.gamma * ell.powf(config.phi);
            prev.iter()
                .zip(g)
                .map(|(&p, &gi)| b2 * p + (1.0 - b2) * gi * gi / denom + eps * ell)
                .collect()
        }
        EstimatorKind::SgdMomentum => {
            return Err(OptimError::UnsupportedEstimator("sgd_momentum"));
        }
    };
    Ok(out)
}

/// One iteration of the shared template. Takes the state by value and returns
/// the successor; `ell` is ignored unless the estimator is AdamL.
pub fn step(
    state: OptimizerState,
    sample: &GradientSample,
    ell: f64,
    config: &OptimizerConfig,
) -> Result<OptimizerState, OptimError> {
    if config.estimator == EstimatorKind::SgdMomentum {
        return sgd_momentum_step(state, sample, config);
    }
    let mut state = state;
    check_lengths(state.x.len(), sample.g.len())?;
    if !sample.is_finite() {
        return Err(OptimError::NonFinite("gradient sample"));
    }
    let k1 = state.k + 1;
    apply_decay(&mut state.eta, k1, config);

    let b1 = config.beta1;
    for (mi, &gi) in state.m.iter_mut().zip(&sample.g) {
        *mi = b1 * *mi + (1.0 - b1) * gi;
    }
    state.second_moment = second_moment_update(&state.second_moment, &sample.g, &state.m, ell, config)?;

    let bias1 = 1.0 - b1.powi(k1 as i32);
    let bias2 = 1.0 - config.beta2.powi(k1 as i32);
    match config.estimator {
        EstimatorKind::AdamL => {
            for i in 0..state.x.len() {
                let w = state.second_moment[i].max(SECOND_MOMENT_FLOOR);
                let lr = state.eta * (bias2 / w).sqrt();
                state.x[i] -= lr * state.m[i] / bias1;
            }
        }
        _ => {
            for i in 0..state.x.len() {
                let lr = state.eta / ((state.second_moment[i] / bias2).sqrt() + config.epsilon);
                state.x[i] -= lr * state.m[i] / bias1;
            }
        }
    }
    state.k = k1;
    Ok(state)
}

/// SGD with a raw momentum buffer: b' = β₁ b + g, x' = x − η b'.
pub fn sgd_momentum_step(
    state: OptimizerState,
    sample: &GradientSample,
    config: &OptimizerConfig,
) -> Result<OptimizerState, OptimError> {
    if config.estimator != EstimatorKind::SgdMomentum {
        return Err(OptimError::UnsupportedEstimator(config.estimator.name()));
    }
    let mut state = state;
    check_lengths(state.x.len(), sample.g.len())?;
    if !sample.is_finite() {
        return Err(OptimError::NonFinite("gradient sample"));
    }
    let k1 = state.k + 1;
    apply_decay(&mut state.eta, k1, config);
    for i in 0..state.x.len() {
        state.momentum[i] = config.beta1 * state.momentum[i] + sample.g[i];
        state.x[i] -= state.eta * state.momentum[i];
    }
    state.k = k1;
    Ok(state)
}

fn apply_decay(eta: &mut f64, step_index: u64, config: &OptimizerConfig) {
    for &(idx, factor) in &config.decay_schedule {
        if idx == step_index {
            *eta *= factor;
        }
    }
}

/// Per-coordinate stepsize used at the most recent step, recomputed from the
/// post-step buffers, plus the diagnostic updating magnitude Δ = |η ⊙ m|.
pub fn effective_stepsize(
    state: &OptimizerState,
    config: &OptimizerConfig,
) -> Result<StepsizeReport, OptimError> {
    if state.k == 0 {
        return Err(OptimError::NotStepped);
    }
    let n = state.x.len();
    let stepsize: Vec<f64> = match config.estimator {
        EstimatorKind::SgdMomentum => vec![state.eta; n],
        EstimatorKind::AdamL => {
            let bias2 = 1.0 - config.beta2.powi(state.k as i32);
            state
                .second_moment
                .iter()
                .map(|&w| state.eta * (bias2 / w.max(SECOND_MOMENT_FLOOR)).sqrt())
                .collect()
        }
        _ => {
            let bias2 = 1.0 - config.beta2.powi(state.k as i32);
            state
                .second_moment
                .iter()
                .map(|&v| state.eta / ((v / bias2).sqrt() + config.epsilon))
                .collect()
        }
    };
    let moment = if config.estimator == EstimatorKind::SgdMomentum { &state.momentum } else { &state.m };
    let delta = stepsize
        .iter()
        .zip(moment)
        .map(|(&lr, &mi)| (lr * mi).abs())
        .collect();
    Ok(StepsizeReport { stepsize, delta })
}

/// Second moment after consuming the whole history, evaluated as an explicit
/// sum rather than by running the recursion; this is the independent oracle
/// the recursive updates are tested against.
///
/// With k+1 history entries (indices 0..=k) the returned buffer corresponds
/// to the state after k+1 recursive updates:
///
/// * Adam:      (1−β₂) Σⱼ β₂^{k−j} (g⁽ʲ⁾)²
/// * EAdam:     … + ε Σⱼ β₂^j
/// * AdaBelief: (1−β₂) Σⱼ β₂^{k−j} (g⁽ʲ⁾ − m⁽ʲ⁺¹⁾)² + ε Σⱼ β₂^j
/// * AdamL:     (1−β₂) Σⱼ β₂^{k−j} (g⁽ʲ⁾)²/(γ (ℓ⁽ʲ⁾)^φ) + ε Σⱼ β₂^{k−j} ℓ⁽ʲ⁾
///
/// `m_history[j]` must hold the first moment after consuming `g[j]`.
pub fn closed_form_second_moment(
    gradient_history: &[Vec<f64>],
    m_history: &[Vec<f64>],
    ell_history: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>, OptimError> {
    if gradient_history.is_empty() {
        return Err(OptimError::InvalidConfig("empty gradient history".into()));
    }
    check_lengths(gradient_history.len(), m_history.len())?;
    check_lengths(gradient_history.len(), ell_history.len())?;
    let n = gradient_history[0].len();
    for g in gradient_history.iter().chain(m_history.iter()) {
        check_lengths(n, g.len())?;
    }
    let k = gradient_history.len() - 1;
    let b2 = config.beta2;
    let eps = config.epsilon;
    let mut out = vec![0.0; n];
    match config.estimator {
        EstimatorKind::Adam | EstimatorKind::EAdam => {
            for (j, g) in gradient_history.iter().enumerate() {
                let weight = (1.0 - b2) * b2.powi((k - j) as i32);
                for i in 0..n {
                    out[i] += weight * g[i] * g[i];
                }
            }
            if config.estimator == EstimatorKind::EAdam {
                let eps_sum: f64 = (0..=k).map(|j| b2.powi(j as i32)).sum();
                for v in &mut out {
                    *v += eps * eps_sum;
                }
            }
        }
        EstimatorKind::AdaBelief => {
            for j in 0..=k {
                let weight = (1.0 - b2) * b2.powi((k - j) as i32);
                for i in 0..n {
                    let d = gradient_history[j][i] - m_history[j][i];
                    out[i] += weight * d * d;
                }
            }
            let eps_sum: f64 = (0..=k).map(|j| b2.powi(j as i32)).sum();
            for v in &mut out {
                *v += eps * eps_sum;
            }
        }
        EstimatorKind::AdamL => {
            for j in 0..=k {
                let ell = ell_history[j];
                if !(ell > 0.0) {
                    return Err(OptimError::NonPositiveLoss(ell));
                }
                let decay = b2.powi((k - j) as i32);
                let denom = config.gamma * ell.powf(config.phi);
                for i in 0..n {
                    let g = gradient_history[j][i];
                    out[i] += (1.0 - b2) * decay * g * g / denom;
                }
            }
            let mut loss_sum = 0.0;
            for (j, &ell) in ell_history.iter().enumerate() {
                loss_sum += b2.powi((k - j) as i32) * ell;
            }
            for v in &mut out {
                *v += eps * loss_sum;
            }
        }
        EstimatorKind::SgdMomentum => {
            return Err(OptimError::UnsupportedEstimator("sgd_momentum"));
        }
    }
    Ok(out)
}
