//! Mode classification and convergence-guarantee checking.
//!
//! The estimators with an ε-driven term in their second moment (EAdam,
//! AdaBelief, AdamL) split per coordinate into two regimes: a non-adaptive
//! one where the accumulated ε term dominates (SGD-like behavior) and an
//! adaptive one where the gradient term dominates (Adam-like behavior).
//! [`classify_modes`] evaluates the two competing sums directly from the
//! histories; [`ModeAccumulator`] maintains the same sums recursively for
//! per-step logging.
//!
//! The rest of the module turns the sufficient conditions for monotonicity
//! and linear convergence under the PL inequality into numeric checkers:
//! [`check_monotonicity_conditions`] reports which condition set (case (i)
//! or (ii)) a configuration satisfies, [`rate_constants`] / [`rate_bound`]
//! evaluate the predicted contraction (1 − 2μC)^{k−k₀} with its σ and σ²
//! offsets, and [`verify_trajectory`] replays a logged run against those
//! predictions.

use crate::optim::{EstimatorKind, OptimizerConfig};
use thiserror::Error;

/// Ratio band for the transitional mode: a coordinate is only called
/// Adaptive/NonAdaptive when one sum exceeds the other by this factor.
/// Setting it to 1 recovers the strict dichotomy (ties become Transitional).
pub const DEFAULT_TRANSITION_RATIO: f64 = 1.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("operation not defined for estimator {0}")]
    UnsupportedEstimator(&'static str),
    #[error("initial gradient coordinate {0} is zero; the second-moment lower bound needs g⁰ᵢ ≠ 0")]
    ZeroInitialGradient(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("v_min is required for case (ii) but was not provided")]
    MissingVMin,
    #[error("conditions not met: {0}")]
    ConditionsNotMet(String),
    #[error("contraction factor 1 − 2μC = {0} falls outside (0,1)")]
    ContractionInvalid(f64),
    #[error("history lengths are inconsistent")]
    HistoryMismatch,
    #[error("no trajectory record at anchor step {0}")]
    MissingAnchor(u64),
}

/// Σ_{j=0}^{k} β₂^j.
pub fn geometric_sum(beta2: f64, k: u64) -> f64 {
    (1.0 - pow_u(beta2, k + 1)) / (1.0 - beta2)
}

fn pow_u(base: f64, exp: u64) -> f64 {
    if exp <= i32::MAX as u64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp as f64)
    }
}

/// Smallest k with Σ_{j=0}^{k} β₂^j ≥ target, or None when the series limit
/// 1/(1−β₂) never reaches it.
pub fn smallest_k_reaching_sum(beta2: f64, target: f64) -> Option<u64> {
    if target <= 1.0 {
        return Some(0);
    }
    let remainder = 1.0 - target * (1.0 - beta2);
    if remainder <= 0.0 {
        return None;
    }
    let guess = (remainder.ln() / beta2.ln() - 1.0).ceil().max(0.0) as u64;
    let mut k = guess;
    while geometric_sum(beta2, k) < target {
        k += 1;
    }
    while k > 0 && geometric_sum(beta2, k - 1) >= target {
        k -= 1;
    }
    Some(k)
}

/// Smallest integer k₀ ≥ 1 strictly exceeding log_{β₂}(arg). Errors when
/// arg ≤ 0, in which case no finite k₀ satisfies the condition.
pub fn smallest_k0_exceeding_log_threshold(beta2: f64, arg: f64) -> Result<u64, AnalysisError> {
    if !(arg > 0.0) {
        return Err(AnalysisError::ConditionsNotMet(format!(
            "log threshold argument {arg} is not positive; the warm-up condition is unsatisfiable"
        )));
    }
    let threshold = arg.ln() / beta2.ln();
    let k0 = (threshold.floor() + 1.0).max(1.0);
    Ok(k0 as u64)
}

/// Lower bound (1−β₂) β₂^{k−1} minᵢ (g⁰ᵢ)² on the non-zero entries of the
/// raw second moment over the first k steps. Every coordinate of the initial
/// gradient must be non-zero.
pub fn v_min(g0: &[f64], beta2: f64, k: u64) -> Result<f64, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::InvalidArgument("v_min requires k >= 1".into()));
    }
    let mut min_sq = f64::INFINITY;
    for (i, &g) in g0.iter().enumerate() {
        if g == 0.0 {
            return Err(AnalysisError::ZeroInitialGradient(i));
        }
        min_sq = min_sq.min(g * g);
    }
    Ok((1.0 - beta2) * pow_u(beta2, k - 1) * min_sq)
}

// ---------------------------------------------------------------------------
// Mode classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinateMode {
    Adaptive,
    NonAdaptive,
    Transitional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    /// Highest history index the sums run over.
    pub k: u64,
    pub modes: Vec<CoordinateMode>,
    pub adaptive_fraction: f64,
    pub adaptive_sum: Vec<f64>,
    pub nonadaptive_sum: Vec<f64>,
}

fn classify_sums(adaptive: &[f64], nonadaptive: &[f64], ratio: f64, k: u64) -> ModeReport {
    let modes: Vec<CoordinateMode> = adaptive
        .iter()
        .zip(nonadaptive)
        .map(|(&a, &na)| {
            if a > ratio * na {
                CoordinateMode::Adaptive
            } else if na > ratio * a {
                CoordinateMode::NonAdaptive
            } else {
                CoordinateMode::Transitional
            }
        })
        .collect();
    let adaptive_count = modes.iter().filter(|m| **m == CoordinateMode::Adaptive).count();
    ModeReport {
        k,
        adaptive_fraction: adaptive_count as f64 / modes.len().max(1) as f64,
        modes,
        adaptive_sum: adaptive.to_vec(),
        nonadaptive_sum: nonadaptive.to_vec(),
    }
}

/// Direct evaluation of the per-coordinate adaptive and non-adaptive sums
/// over a gradient history, classifying each coordinate with the given ratio
/// band. `m_history[j]` is the first moment after consuming `g[j]`; the loss
/// history is only read for AdamL.
pub fn classify_modes(
    gradient_history: &[Vec<f64>],
    m_history: &[Vec<f64>],
    ell_history: &[f64],
    config: &OptimizerConfig,
    ratio: f64,
) -> Result<ModeReport, AnalysisError> {
    if !(ratio >= 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "transition ratio must be >= 1, got {ratio}"
        )));
    }
    if gradient_history.is_empty()
        || gradient_history.len() != m_history.len()
        || gradient_history.len() != ell_history.len()
    {
        return Err(AnalysisError::HistoryMismatch);
    }
    let n = gradient_history[0].len();
    let k = gradient_history.len() - 1;
    let b2 = config.beta2;
    let eps = config.epsilon;
    let mut adaptive = vec![0.0; n];
    let mut nonadaptive = vec![0.0; n];
    match config.estimator {
        EstimatorKind::EAdam | EstimatorKind::AdaBelief => {
            for j in 0..=k {
                if gradient_history[j].len() != n || m_history[j].len() != n {
                    return Err(AnalysisError::HistoryMismatch);
                }
                let weight = (1.0 - b2) * pow_u(b2, (k - j) as u64);
                for i in 0..n {
                    let base = if config.estimator == EstimatorKind::EAdam {
                        gradient_history[j][i]
                    } else {
                        gradient_history[j][i] - m_history[j][i]
                    };
                    adaptive[i] += weight * base * base;
                }
            }
            let eps_sum: f64 = eps * geometric_sum(b2, k as u64);
            nonadaptive.iter_mut().for_each(|v| *v = eps_sum);
        }
        EstimatorKind::AdamL => {
            for j in 0..=k {
                if gradient_history[j].len() != n {
                    return Err(AnalysisError::HistoryMismatch);
                }
                let ell = ell_history[j];
                if !(ell > 0.0) {
                    return Err(AnalysisError::InvalidArgument(format!(
                        "loss history entry {j} must be positive, got {ell}"
                    )));
                }
                let decay = pow_u(b2, (k - j) as u64);
                let denom = config.gamma * ell.powf(config.phi);
                for i in 0..n {
                    let g = gradient_history[j][i];
                    adaptive[i] += (1.0 - b2) * decay * g * g / denom;
                }
                for v in nonadaptive.iter_mut() {
                    *v += eps * decay * ell;
                }
            }
        }
        EstimatorKind::Adam => return Err(AnalysisError::UnsupportedEstimator("adam")),
        EstimatorKind::SgdMomentum => {
            return Err(AnalysisError::UnsupportedEstimator("sgd_momentum"))
        }
    }
    Ok(classify_sums(&adaptive, &nonadaptive, ratio, k as u64))
}

/// Recursive counterpart of [`classify_modes`] for per-step logging: absorb
/// each consumed gradient as the run progresses and ask for a report at any
/// point. Agrees with the direct sums to floating-point accuracy.
#[derive(Debug, Clone)]
pub struct ModeAccumulator {
    adaptive: Vec<f64>,
    nonadaptive: Vec<f64>,
    consumed: u64,
    estimator: EstimatorKind,
}

impl ModeAccumulator {
    pub fn new(config: &OptimizerConfig, dim: usize) -> Result<Self, AnalysisError> {
        match config.estimator {
            EstimatorKind::EAdam | EstimatorKind::AdaBelief | EstimatorKind::AdamL => {
                Ok(ModeAccumulator {
                    adaptive: vec![0.0; dim],
                    nonadaptive: vec![0.0; dim],
                    consumed: 0,
                    estimator: config.estimator,
                })
            }
            other => Err(AnalysisError::UnsupportedEstimator(other.name())),
        }
    }

    pub fn absorb(&mut self, g: &[f64], m_new: &[f64], ell: f64, config: &OptimizerConfig) {
        let b2 = config.beta2;
        let eps = config.epsilon;
        match self.estimator {
            EstimatorKind::EAdam => {
                for (i, &gi) in g.iter().enumerate() {
                    self.adaptive[i] = b2 * self.adaptive[i] + (1.0 - b2) * gi * gi;
                    self.nonadaptive[i] = b2 * self.nonadaptive[i] + eps;
                }
            }
            EstimatorKind::AdaBelief => {
                for (i, (&gi, &mi)) in g.iter().zip(m_new).enumerate() {
                    let d = gi - mi;
                    self.adaptive[i] = b2 * self.adaptive[i] + (1.0 - b2) * d * d;
                    self.nonadaptive[i] = b2 * self.nonadaptive[i] + eps;
                }
            }
            EstimatorKind::AdamL => {
                let denom = config.gamma * ell.powf(config.phi);
                for (i, &gi) in g.iter().enumerate() {
                    self.adaptive[i] = b2 * self.adaptive[i] + (1.0 - b2) * gi * gi / denom;
                    self.nonadaptive[i] = b2 * self.nonadaptive[i] + eps * ell;
                }
            }
            _ => unreachable!(),
        }
        self.consumed += 1;
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn report(&self, ratio: f64) -> ModeReport {
        classify_sums(&self.adaptive, &self.nonadaptive, ratio, self.consumed.saturating_sub(1))
    }
}

// ---------------------------------------------------------------------------
// Proposition checkers
// ---------------------------------------------------------------------------

/// Problem- and run-level constants feeding the sufficient conditions.
/// `v_min` should be evaluated at the run horizon (its smallest value);
/// the loss extremes are the observed extremes of ℓ and are read only for
/// AdamL, where the current ℓ is conservatively replaced by `ell_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConstants {
    pub grad_bound: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dim: usize,
    pub f_star: f64,
    pub v_min: Option<f64>,
    pub ell_min: f64,
    pub ell_max: f64,
}

impl AnalysisConstants {
    pub fn noise_free(grad_bound: f64, lipschitz: f64, mu: f64, dim: usize) -> Self {
        AnalysisConstants {
            grad_bound,
            lipschitz,
            mu,
            sigma: 0.0,
            dim,
            f_star: 0.0,
            v_min: None,
            ell_min: 1.0,
            ell_max: 1.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = f_star;
        self
    }

    pub fn with_v_min(mut self, v: f64) -> Self {
        self.v_min = Some(v);
        self
    }

    pub fn with_loss_extremes(mut self, ell_min: f64, ell_max: f64) -> Self {
        self.ell_min = ell_min;
        self.ell_max = ell_max;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    I,
    II,
}

impl std::fmt::Display for CaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseId::I => write!(f, "(i)"),
            CaseId::II => write!(f, "(ii)"),
        }
    }
}

/// One condition set of a monotonicity/rate proposition, reduced to numbers.
struct CaseDef {
    id: CaseId,
    scalar_violation: Option<String>,
    sum_req_monotone: f64,
    sum_req_rate: f64,
    /// η ≤ scale·√S(k) when set …
    eta_scale_sqrt_sum: Option<f64>,
    /// … otherwise η ≤ this fixed bound.
    eta_fixed: Option<f64>,
    /// Stated μ-dependent η bound of the rate proposition.
    mu_eta_stated: f64,
    /// The (sometimes weaker, sometimes stronger) bound the proof actually
    /// uses; reported in violation messages when only it holds.
    mu_eta_proof: f64,
    k0_log_arg: f64,
}

impl CaseDef {
    fn eta_bound_at(&self, beta2: f64, k: u64) -> f64 {
        match (self.eta_scale_sqrt_sum, self.eta_fixed) {
            (Some(scale), _) => scale * geometric_sum(beta2, k).sqrt(),
            (None, Some(fixed)) => fixed,
            _ => f64::INFINITY,
        }
    }
}

fn case_defs(
    estimator: EstimatorKind,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
) -> Result<Vec<CaseDef>, AnalysisError> {
    let g = constants.grad_bound;
    let l = constants.lipschitz;
    let mu = constants.mu;
    let b2 = config.beta2;
    let eps = config.epsilon;
    let gamma = config.gamma;
    let sqrt_b2 = b2.sqrt();
    let mut cases = Vec::new();
    match estimator {
        EstimatorKind::EAdam => {
            cases.push(CaseDef {
                id: CaseId::I,
                scalar_violation: None,
                sum_req_monotone: (4.0 * g / eps.sqrt()).max(2.0 / (1.0 - b2).sqrt()),
                sum_req_rate: 4.0 * g / eps.sqrt(),
                eta_scale_sqrt_sum: Some(eps.sqrt() / (2.0 * l)),
                eta_fixed: None,
                mu_eta_stated: sqrt_b2 * g / mu,
                mu_eta_proof: sqrt_b2 * g / mu,
                k0_log_arg: 1.0 - 2.0 * (1.0 - b2).sqrt(),
            });
            if let Some(v) = constants.v_min {
                cases.push(CaseDef {
                    id: CaseId::II,
                    scalar_violation: (v <= 4.0 * eps)
                        .then(|| format!("case (ii) needs v_min > 4ε ({v} <= {})", 4.0 * eps)),
                    sum_req_monotone: (4.0 * g / v.sqrt()).max(4.0 * eps / ((1.0 - b2) * v)),
                    sum_req_rate: 4.0 * g / v.sqrt(),
                    eta_scale_sqrt_sum: None,
                    eta_fixed: Some(v.sqrt() / (2.0 * l)),
                    mu_eta_stated: sqrt_b2 * g / mu,
                    mu_eta_proof: sqrt_b2 * (g + eps / (1.0 - b2)) / mu,
                    k0_log_arg: 1.0 - 4.0 * eps / v,
                });
            }
        }
        EstimatorKind::AdaBelief => {
            let threshold = 4.0 / (3.0 * (1.0 - b2).sqrt());
            cases.push(CaseDef {
                id: CaseId::I,
                scalar_violation: None,
                sum_req_monotone: threshold,
                sum_req_rate: threshold,
                eta_scale_sqrt_sum: Some(eps.sqrt() / (2.0 * l)),
                eta_fixed: None,
                mu_eta_stated: 4.0 * sqrt_b2 * g / (3.0 * mu),
                mu_eta_proof: 4.0 * sqrt_b2 * g / (3.0 * mu),
                k0_log_arg: 1.0 - 4.0 * (1.0 - b2).sqrt() / 3.0,
            });
        }
        EstimatorKind::AdamL => {
            cases.push(CaseDef {
                id: CaseId::I,
                scalar_violation: (constants.ell_min < 1.0).then(|| {
                    format!("case (i) needs ell_min >= 1 (observed {})", constants.ell_min)
                }),
                sum_req_monotone: (4.0 * g / (gamma * eps).sqrt()).max(2.0 / (1.0 - b2).sqrt()),
                sum_req_rate: 4.0 * g / (gamma * eps).sqrt(),
                eta_scale_sqrt_sum: Some(eps.sqrt() / (2.0 * l)),
                eta_fixed: None,
                mu_eta_stated: sqrt_b2 * g / (gamma.sqrt() * mu),
                mu_eta_proof: sqrt_b2 * g / (gamma.sqrt() * mu),
                k0_log_arg: 1.0 - 2.0 * (1.0 - b2).sqrt(),
            });
            if let Some(v) = constants.v_min {
                let ell_k = constants.ell_max;
                let mut scalar_violation = None;
                if constants.ell_max >= 1.0 {
                    scalar_violation =
                        Some(format!("case (ii) needs ell_max < 1 (observed {})", constants.ell_max));
                } else if v <= 4.0 * eps * gamma * ell_k {
                    scalar_violation = Some(format!(
                        "case (ii) needs v_min > 4εγℓ ({v} <= {})",
                        4.0 * eps * gamma * ell_k
                    ));
                }
                cases.push(CaseDef {
                    id: CaseId::II,
                    scalar_violation,
                    sum_req_monotone: (4.0 * g / v.sqrt())
                        .max(4.0 * eps * gamma * ell_k / ((1.0 - b2) * v)),
                    sum_req_rate: 4.0 * g / v.sqrt(),
                    eta_scale_sqrt_sum: None,
                    eta_fixed: Some(v.sqrt() / (2.0 * l * gamma.sqrt())),
                    mu_eta_stated: sqrt_b2
                        * (g / (gamma * constants.ell_min.powf(config.phi))).sqrt()
                        / mu,
                    mu_eta_proof: sqrt_b2 * g
                        * (1.0 / (gamma * constants.ell_min.powf(config.phi))).sqrt()
                        / mu,
                    k0_log_arg: 1.0 - 4.0 * eps * gamma * ell_k / v,
                });
            }
        }
        EstimatorKind::Adam => return Err(AnalysisError::UnsupportedEstimator("adam")),
        EstimatorKind::SgdMomentum => {
            return Err(AnalysisError::UnsupportedEstimator("sgd_momentum"))
        }
    }
    Ok(cases)
}

/// σ and σ² coefficients of the per-step monotonicity bound, evaluated at
/// step count k (the sums inside them run to k−1).
fn sigma_coeffs(
    estimator: EstimatorKind,
    case: CaseId,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    k: u64,
) -> (f64, f64) {
    let g = constants.grad_bound;
    let l = constants.lipschitz;
    let n = constants.dim as f64;
    let b2 = config.beta2;
    let eps = config.epsilon;
    let eta = config.eta;
    let gamma = config.gamma;
    let s_prev = geometric_sum(b2, k - 1);
    match (estimator, case) {
        (EstimatorKind::EAdam, CaseId::I) => (
            (n / (b2 * eps)).sqrt() * eta * g / s_prev,
            eta / (eps * s_prev) * (l * eta / 2.0 + g * ((1.0 - b2) / b2).sqrt()),
        ),
        (EstimatorKind::EAdam, CaseId::II) => {
            let v = constants.v_min.expect("case (ii) requires v_min");
            (
                (n * eps / b2).sqrt() * eta * g / v,
                eta / v * (l * eta / 2.0 + g * ((1.0 - b2) / b2).sqrt()),
            )
        }
        (EstimatorKind::AdaBelief, _) => (
            n.sqrt() * eta * g / (b2.sqrt() * s_prev),
            l * eta * eta / (2.0 * eps * s_prev),
        ),
        (EstimatorKind::AdamL, CaseId::I) => (
            (n / (b2 * eps)).sqrt() * eta * g / s_prev,
            eta / (eps * s_prev) * (l * eta / 2.0 + (g / gamma.sqrt()) * ((1.0 - b2) / b2).sqrt()),
        ),
        (EstimatorKind::AdamL, CaseId::II) => {
            let v = constants.v_min.expect("case (ii) requires v_min");
            let ell_k = constants.ell_max;
            (
                (n * eps * gamma * ell_k / b2).sqrt() * eta * g / v,
                eta / v * (l * eta * gamma / 2.0 + g * ((1.0 - b2) / b2).sqrt()),
            )
        }
        _ => unreachable!(),
    }
}

/// Contraction constant C of the linear-rate bound, evaluated at k₀.
fn contraction_constant(
    estimator: EstimatorKind,
    case: CaseId,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    k0: u64,
) -> f64 {
    let g = constants.grad_bound;
    let b2 = config.beta2;
    let eps = config.epsilon;
    let eta = config.eta;
    let gamma = config.gamma;
    let eps_term = (eps / (1.0 - b2)).sqrt();
    let bias = 1.0 - pow_u(b2, k0 + 1);
    let s_k0 = geometric_sum(b2, k0);
    match (estimator, case) {
        (EstimatorKind::EAdam, CaseId::I) => {
            (0.5 - 1.0 / (bias * s_k0).sqrt()) * eta / (b2.sqrt() * (g + eps_term))
        }
        (EstimatorKind::EAdam, CaseId::II) => {
            let v = constants.v_min.expect("case (ii) requires v_min");
            (0.5 - (eps / (v * bias)).sqrt()) * eta / (b2.sqrt() * (g + eps_term))
        }
        (EstimatorKind::AdaBelief, _) => {
            (0.75 - 1.0 / ((1.0 - b2).sqrt() * s_k0)) * eta / (b2.sqrt() * (2.0 * g + eps_term))
        }
        (EstimatorKind::AdamL, CaseId::I) => {
            let denom = g / gamma.sqrt() + (eps * constants.ell_max / (1.0 - b2)).sqrt();
            (0.5 - 1.0 / (bias * s_k0).sqrt()) * eta / (b2.sqrt() * denom)
        }
        (EstimatorKind::AdamL, CaseId::II) => {
            let v = constants.v_min.expect("case (ii) requires v_min");
            let ell_k = constants.ell_max;
            let denom = g * (1.0 / (gamma * constants.ell_min.powf(config.phi))).sqrt() + eps_term;
            (0.5 - (eps * gamma * ell_k / (v * bias)).sqrt()) * eta / (b2.sqrt() * denom)
        }
        _ => unreachable!(),
    }
}

/// k₀→∞ limit of the contraction constant; the comparison quantity used when
/// ranking predicted rates across estimators.
pub fn rate_constant_supremum(
    estimator: EstimatorKind,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
) -> Result<f64, AnalysisError> {
    let g = constants.grad_bound;
    let b2 = config.beta2;
    let eps_term = (config.epsilon / (1.0 - b2)).sqrt();
    let eta = config.eta;
    match estimator {
        EstimatorKind::EAdam => Ok(0.5 * eta / (b2.sqrt() * (g + eps_term))),
        EstimatorKind::AdaBelief => Ok(0.75 * eta / (b2.sqrt() * (2.0 * g + eps_term))),
        EstimatorKind::AdamL => {
            let denom = g / config.gamma.sqrt()
                + (config.epsilon * constants.ell_max / (1.0 - b2)).sqrt();
            Ok(0.5 * eta / (b2.sqrt() * denom))
        }
        other => Err(AnalysisError::UnsupportedEstimator(other.name())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Condition set that passed, or None when neither does.
    pub case: Option<CaseId>,
    pub passes: bool,
    /// Binding η bound of the reported case at the given k.
    pub eta_bound: f64,
    /// Smallest k whose geometric sum meets the reported case's requirement.
    pub k_threshold: Option<u64>,
    /// σ coefficient of the per-step bound.
    pub sigma_coeff: f64,
    /// σ² coefficient of the per-step bound.
    pub sigma_sq_coeff: f64,
    pub first_violation: Option<String>,
}

/// Evaluate the monotonicity conditions at step count k and report which case
/// passes. When no case passes, the numbers refer to case (i) and
/// `first_violation` names the first inequality that failed.
pub fn check_monotonicity_conditions(
    estimator: EstimatorKind,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    k: u64,
) -> Result<MonotonicityReport, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::InvalidArgument("conditions are evaluated at k >= 1".into()));
    }
    let cases = case_defs(estimator, constants, config)?;
    let b2 = config.beta2;
    let s_k = geometric_sum(b2, k);
    let mut first_violation: Option<String> = None;
    for case in &cases {
        let mut violation = case.scalar_violation.clone();
        if violation.is_none() && s_k < case.sum_req_monotone {
            violation = Some(format!(
                "case {} needs Σβ₂ʲ >= {:.6} but Σ = {:.6} at k = {k}",
                case.id, case.sum_req_monotone, s_k
            ));
        }
        let eta_bound = case.eta_bound_at(b2, k);
        if violation.is_none() && config.eta > eta_bound {
            violation = Some(format!(
                "case {} needs η <= {:.3e} but η = {:.3e}",
                case.id, eta_bound, config.eta
            ));
        }
        match violation {
            None => {
                let (c1, c2) = sigma_coeffs(estimator, case.id, constants, config, k);
                return Ok(MonotonicityReport {
                    case: Some(case.id),
                    passes: true,
                    eta_bound,
                    k_threshold: smallest_k_reaching_sum(b2, case.sum_req_monotone),
                    sigma_coeff: c1,
                    sigma_sq_coeff: c2,
                    first_violation: None,
                });
            }
            Some(v) => {
                if first_violation.is_none() {
                    first_violation = Some(v);
                }
            }
        }
    }
    let fallback = &cases[0];
    let (c1, c2) = sigma_coeffs(estimator, fallback.id, constants, config, k);
    Ok(MonotonicityReport {
        case: None,
        passes: false,
        eta_bound: fallback.eta_bound_at(b2, k),
        k_threshold: smallest_k_reaching_sum(b2, fallback.sum_req_monotone),
        sigma_coeff: c1,
        sigma_sq_coeff: c2,
        first_violation,
    })
}

/// Everything needed to evaluate the linear-rate bound from step k₀ onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub case: CaseId,
    /// Contraction constant C.
    pub contraction: f64,
    /// Per-step factor 1 − 2μC, verified to lie in (0,1).
    pub factor: f64,
    pub sigma_coeff: f64,
    pub sigma_sq_coeff: f64,
    pub k0: u64,
}

impl RateConstants {
    /// σ-dependent additive offset of the bound.
    pub fn noise_offset(&self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        let two_mu_c = 1.0 - self.factor;
        self.sigma_coeff / two_mu_c * sigma + self.sigma_sq_coeff / two_mu_c * sigma * sigma
    }

    /// Predicted upper bound on f(x⁽ᵏ⁾) − f* given the gap at k₀.
    pub fn bound_at(&self, k: u64, f_gap_at_k0: f64, sigma: f64) -> f64 {
        let exp = k - self.k0;
        let decay = if exp <= i32::MAX as u64 {
            self.factor.powi(exp as i32)
        } else {
            self.factor.powf(exp as f64)
        };
        decay * f_gap_at_k0 + self.noise_offset(sigma)
    }
}

/// Check the linear-rate conditions at warm-up step k₀ and return the bound's
/// constants. Errors carry the first violated inequality; the contraction
/// factor is verified to lie in (0,1).
pub fn rate_constants(
    estimator: EstimatorKind,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    k0: u64,
) -> Result<RateConstants, AnalysisError> {
    if k0 == 0 {
        return Err(AnalysisError::InvalidArgument("k0 must be >= 1".into()));
    }
    let cases = case_defs(estimator, constants, config)?;
    let b2 = config.beta2;
    let s_k0 = geometric_sum(b2, k0);
    let mut case_violations: Vec<String> = Vec::new();
    for case in &cases {
        let mut violation = case.scalar_violation.clone();
        if violation.is_none() && s_k0 < case.sum_req_rate {
            violation = Some(format!(
                "case {} needs Σβ₂ʲ >= {:.6} but Σ = {:.6} at k₀ = {k0}",
                case.id, case.sum_req_rate, s_k0
            ));
        }
        if violation.is_none() {
            let eta_bound = case.eta_bound_at(b2, k0).min(case.mu_eta_stated);
            if config.eta > eta_bound {
                let mut msg = format!(
                    "case {} needs η <= {:.3e} but η = {:.3e}",
                    case.id, eta_bound, config.eta
                );
                if config.eta <= case.eta_bound_at(b2, k0).min(case.mu_eta_proof) {
                    msg.push_str(" (the proof-step variant of the μ bound would admit it)");
                }
                violation = Some(msg);
            }
        }
        if violation.is_none() {
            match smallest_k0_exceeding_log_threshold(b2, case.k0_log_arg) {
                Ok(k0_min) if k0 >= k0_min => {}
                Ok(k0_min) => {
                    violation = Some(format!(
                        "case {} needs k₀ >= {k0_min} (log threshold), got {k0}",
                        case.id
                    ));
                }
                Err(e) => violation = Some(e.to_string()),
            }
        }
        match violation {
            None => {
                let c = contraction_constant(estimator, case.id, constants, config, k0);
                let factor = 1.0 - 2.0 * constants.mu * c;
                if !(factor > 0.0 && factor < 1.0) {
                    return Err(AnalysisError::ContractionInvalid(factor));
                }
                let (c1, c2) = sigma_coeffs(estimator, case.id, constants, config, k0);
                return Ok(RateConstants {
                    case: case.id,
                    contraction: c,
                    factor,
                    sigma_coeff: c1,
                    sigma_sq_coeff: c2,
                    k0,
                });
            }
            Some(v) => case_violations.push(v),
        }
    }
    if case_violations.is_empty() {
        case_violations.push("no applicable case".into());
    }
    Err(AnalysisError::ConditionsNotMet(case_violations.join("; ")))
}

/// Predicted upper bound on f(x⁽ᵏ⁾) − f* at step k ≥ k₀.
pub fn rate_bound(
    estimator: EstimatorKind,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    k0: u64,
    k: u64,
    f_gap_at_k0: f64,
) -> Result<f64, AnalysisError> {
    if k < k0 {
        return Err(AnalysisError::InvalidArgument(format!("k = {k} must be >= k0 = {k0}")));
    }
    let rc = rate_constants(estimator, constants, config, k0)?;
    Ok(rc.bound_at(k, f_gap_at_k0, constants.sigma))
}

/// Smallest k₀ at which the rate proposition's sum and warm-up conditions can
/// hold for the given case.
pub fn smallest_admissible_k0(
    estimator: EstimatorKind,
    case: CaseId,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
) -> Result<u64, AnalysisError> {
    let cases = case_defs(estimator, constants, config)?;
    let def = cases
        .iter()
        .find(|c| c.id == case)
        .ok_or(AnalysisError::MissingVMin)?;
    if let Some(v) = &def.scalar_violation {
        return Err(AnalysisError::ConditionsNotMet(v.clone()));
    }
    let k_sum = smallest_k_reaching_sum(config.beta2, def.sum_req_rate).ok_or_else(|| {
        AnalysisError::ConditionsNotMet(format!(
            "Σβ₂ʲ can never reach {:.6} (limit {:.6})",
            def.sum_req_rate,
            1.0 / (1.0 - config.beta2)
        ))
    })?;
    let k_log = smallest_k0_exceeding_log_threshold(config.beta2, def.k0_log_arg)?;
    Ok(k_sum.max(k_log).max(1))
}

/// Maximum admissible η of the rate proposition for the given case at k₀.
pub fn admissible_eta(
    estimator: EstimatorKind,
    case: CaseId,
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    k0: u64,
) -> Result<f64, AnalysisError> {
    let cases = case_defs(estimator, constants, config)?;
    let def = cases
        .iter()
        .find(|c| c.id == case)
        .ok_or(AnalysisError::MissingVMin)?;
    Ok(def.eta_bound_at(config.beta2, k0).min(def.mu_eta_stated))
}

// ---------------------------------------------------------------------------
// Trajectory verification
// ---------------------------------------------------------------------------

/// One log row of an optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub k: u64,
    pub f: f64,
    pub grad_norm: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub step_mean: f64,
    pub delta_norm: f64,
    pub adaptive_fraction: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryVerdict {
    pub monotone_after_k0: bool,
    pub bound_violations: usize,
    /// Minimum of (bound − gap) over the checked steps; negative means the
    /// worst violation overshoots the bound by that much.
    pub worst_margin: f64,
}

/// Replay a logged run against the rate proposition: from the record at k₀,
/// check f non-increasing (meaningful at σ = 0) and the gap against the
/// predicted bound at every later record. Refuses to judge a run whose
/// configuration fails the rate preconditions.
pub fn verify_trajectory(
    records: &[TrajectoryRecord],
    constants: &AnalysisConstants,
    config: &OptimizerConfig,
    estimator: EstimatorKind,
    k0: u64,
) -> Result<TrajectoryVerdict, AnalysisError> {
    let rc = rate_constants(estimator, constants, config, k0)?;
    let anchor = records
        .iter()
        .find(|r| r.k == k0)
        .ok_or(AnalysisError::MissingAnchor(k0))?;
    let gap0 = (anchor.f - constants.f_star).max(0.0);
    let mut monotone = true;
    let mut violations = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut prev_f: Option<f64> = None;
    for rec in records.iter().filter(|r| r.k >= k0) {
        if let Some(pf) = prev_f {
            let tol = 1e-12 * pf.abs().max(1.0);
            if rec.f > pf + tol {
                monotone = false;
            }
        }
        prev_f = Some(rec.f);
        if rec.k > k0 {
            let bound = rc.bound_at(rec.k, gap0, constants.sigma);
            let gap = (rec.f - constants.f_star).max(0.0);
            let margin = bound - gap;
            worst_margin = worst_margin.min(margin);
            if gap > bound * (1.0 + 1e-9) + 1e-15 {
                violations += 1;
            }
        }
    }
    Ok(TrajectoryVerdict { monotone_after_k0: monotone, bound_violations: violations, worst_margin })
}
