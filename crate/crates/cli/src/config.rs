//! Experiment configuration: a single JSON document describing one problem
//! and a list of optimizers to run on it.
//!
//! ```json
//! {
//!   "problem": {"name": "camel3", "x0": [0.0, -4.0]},
//!   "optimizers": [
//!     {"kind": "adaml", "scaling": {"mode": "identity", "f_star": 0.0}},
//!     {"kind": "adam"}
//!   ],
//!   "steps": 4000,
//!   "seed": 42
//! }
//! ```
//!
//! Unset optimizer fields take the benchmark-protocol defaults (β₁ = 0.9,
//! β₂ = 0.999, η = 1e-3, ε = 1e-4, γ = φ = 1). Semantic validation reports
//! the offending field path.

use crate::HarnessError;
use optlab_core::optim::{EstimatorKind, OptimizerConfig};
use optlab_core::problems::{NoiseKind, NoiseSpec, Problem};
use optlab_core::run::BoostTrigger;
use optlab_core::scaling::ScalingState;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn default_one() -> u64 {
    1
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eta() -> f64 {
    1e-3
}
fn default_epsilon() -> f64 {
    1e-4
}
fn default_unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub optimizers: Vec<OptimizerSpec>,
    pub steps: u64,
    #[serde(default = "default_one")]
    pub record_every: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub repeats: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseConfig {
    #[default]
    None,
    UniformBounded {
        sigma: f64,
        clip_g: f64,
    },
    ClippedGaussian {
        sigma: f64,
        clip_g: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_unit")]
    pub gamma: f64,
    #[serde(default = "default_unit")]
    pub phi: f64,
    #[serde(default)]
    pub decay_schedule: Vec<(u64, f64)>,
    #[serde(default)]
    pub scaling: ScalingSpec,
    #[serde(default)]
    pub boost: Option<BoostSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScalingSpec {
    Identity {
        #[serde(default)]
        f_star: f64,
    },
    KnownRange {
        f_min: f64,
        f_max: f64,
    },
    AutoEpochLstm {
        iters_per_epoch: u64,
        #[serde(default)]
        continuous_refresh: bool,
    },
    AutoEpochWgan {
        iters_per_epoch: u64,
        #[serde(default)]
        continuous_refresh: bool,
    },
}

impl Default for ScalingSpec {
    fn default() -> Self {
        ScalingSpec::Identity { f_star: 0.0 }
    }
}

impl ScalingSpec {
    pub fn build(&self) -> Result<ScalingState, String> {
        match *self {
            ScalingSpec::Identity { f_star } => Ok(ScalingState::identity(f_star)),
            ScalingSpec::KnownRange { f_min, f_max } => {
                ScalingState::known_range(f_min, f_max).map_err(|e| e.to_string())
            }
            ScalingSpec::AutoEpochLstm { iters_per_epoch, continuous_refresh } => {
                ScalingState::auto_epoch_lstm(iters_per_epoch)
                    .map(|s| s.with_continuous_refresh(continuous_refresh))
                    .map_err(|e| e.to_string())
            }
            ScalingSpec::AutoEpochWgan { iters_per_epoch, continuous_refresh } => {
                ScalingState::auto_epoch_wgan(iters_per_epoch)
                    .map(|s| s.with_continuous_refresh(continuous_refresh))
                    .map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostSpec {
    pub when_f_below: f64,
    pub factor: f64,
}

/// One optimizer entry, resolved to core types.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub optimizer_index: usize,
    pub label: String,
    pub config: OptimizerConfig,
    pub scaling: ScalingSpec,
    pub boost: Option<BoostTrigger>,
}

/// Fully validated experiment, ready to execute.
#[derive(Debug, Clone)]
pub struct ValidatedExperiment {
    pub problem: Problem,
    pub x0: Vec<f64>,
    pub noise: NoiseSpec,
    pub plans: Vec<RunPlan>,
    pub steps: u64,
    pub record_every: u64,
    pub seed: u64,
    pub repeats: u64,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(HarnessError::io(path.display().to_string()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| HarnessError::Config(format!("config schema error at {}: {}", e.path(), e.inner())))
}

fn invalid(path: impl std::fmt::Display, message: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("config error at {path}: {message}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<ValidatedExperiment, HarnessError> {
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats", "must be at least 1"));
        }
        if self.optimizers.is_empty() {
            return Err(invalid("optimizers", "at least one optimizer is required"));
        }

        let problem = Problem::by_name(
            &self.problem.name,
            self.problem.spectrum.as_deref(),
            self.problem.x_star.as_deref(),
        )
        .map_err(|e| invalid("problem", e))?;
        if self.problem.x0.len() != problem.dim() {
            return Err(invalid(
                "problem.x0",
                format!("expected {} coordinates, got {}", problem.dim(), self.problem.x0.len()),
            ));
        }

        let noise = match self.problem.noise {
            NoiseConfig::None => NoiseSpec::none(),
            NoiseConfig::UniformBounded { sigma, clip_g } => {
                validate_noise(sigma, clip_g)?;
                NoiseSpec { kind: NoiseKind::UniformBounded, sigma, clip_bound: clip_g }
            }
            NoiseConfig::ClippedGaussian { sigma, clip_g } => {
                validate_noise(sigma, clip_g)?;
                NoiseSpec { kind: NoiseKind::ClippedGaussian, sigma, clip_bound: clip_g }
            }
        };

        let mut plans = Vec::with_capacity(self.optimizers.len());
        for (i, spec) in self.optimizers.iter().enumerate() {
            let path = format!("optimizers[{i}]");
            let estimator: EstimatorKind =
                spec.kind.parse().map_err(|e| invalid(&path, format!("{e}")))?;
            let config = OptimizerConfig {
                estimator,
                beta1: spec.beta1,
                beta2: spec.beta2,
                eta: spec.eta,
                epsilon: spec.epsilon,
                gamma: spec.gamma,
                phi: spec.phi,
                decay_schedule: spec.decay_schedule.clone(),
            };
            config.validate().map_err(|e| invalid(&path, e))?;
            spec.scaling
                .build()
                .map_err(|e| invalid(format!("{path}.scaling"), e))?;
            let boost = match &spec.boost {
                Some(b) => {
                    if !(b.factor > 0.0 && b.factor.is_finite()) || !b.when_f_below.is_finite() {
                        return Err(invalid(
                            format!("{path}.boost"),
                            "factor must be positive and when_f_below finite",
                        ));
                    }
                    Some(BoostTrigger { when_f_below: b.when_f_below, factor: b.factor })
                }
                None => None,
            };
            plans.push(RunPlan {
                optimizer_index: i,
                label: spec
                    .label
                    .clone()
                    .unwrap_or_else(|| estimator.name().to_string()),
                config,
                scaling: spec.scaling.clone(),
                boost,
            });
        }

        Ok(ValidatedExperiment {
            problem,
            x0: self.problem.x0.clone(),
            noise,
            plans,
            steps: self.steps,
            record_every: self.record_every,
            seed: self.seed,
            repeats: self.repeats,
        })
    }
}

fn validate_noise(sigma: f64, clip_g: f64) -> Result<(), HarnessError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid("problem.noise.sigma", "must be finite and >= 0"));
    }
    if !(clip_g > 0.0) {
        return Err(invalid("problem.noise.clip_g", "must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(steps: u64) -> String {
        format!(
            r#"{{
                "problem": {{"name": "camel3", "x0": [0.0, -4.0]}},
                "optimizers": [{{"kind": "adam"}}],
                "steps": {steps}
            }}"#
        )
    }

    #[test]
    fn minimal_config_round_trips_with_defaults() {
        let cfg = parse_config(&minimal(100)).unwrap();
        let v = cfg.validate().unwrap();
        assert_eq!(v.plans.len(), 1);
        assert_eq!(v.plans[0].config.beta1, 0.9);
        assert_eq!(v.plans[0].config.epsilon, 1e-4);
        assert_eq!(v.record_every, 1);
        assert_eq!(v.repeats, 1);
    }

    #[test]
    fn zero_steps_is_rejected_with_the_field_path() {
        let err = parse_config(&minimal(0)).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("steps"));
    }

    #[test]
    fn schema_errors_carry_the_json_path() {
        let bad = r#"{"problem": {"name": "camel3", "x0": [0, -4]},
                      "optimizers": [{"kind": "adam", "beta1": "fast"}],
                      "steps": 10}"#;
        let err = parse_config(bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("optimizers[0].beta1"), "{msg}");
    }

    #[test]
    fn bad_dimension_and_unknown_estimator_are_flagged() {
        let cfg = parse_config(
            r#"{"problem": {"name": "camel3", "x0": [1.0]},
                "optimizers": [{"kind": "adam"}], "steps": 5}"#,
        )
        .unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("problem.x0"));

        let cfg = parse_config(
            r#"{"problem": {"name": "camel3", "x0": [0.0, -4.0]},
                "optimizers": [{"kind": "madam"}], "steps": 5}"#,
        )
        .unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("optimizers[0]"));
    }

    #[test]
    fn known_range_scaling_is_validated() {
        let cfg = parse_config(
            r#"{"problem": {"name": "camel3", "x0": [0.0, -4.0]},
                "optimizers": [{"kind": "adaml",
                                "scaling": {"mode": "known_range", "f_min": 2.0, "f_max": 1.0}}],
                "steps": 5}"#,
        )
        .unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("optimizers[0].scaling"), "{msg}");
    }

    #[test]
    fn pl_quadratic_requires_a_spectrum() {
        let cfg = parse_config(
            r#"{"problem": {"name": "pl_quadratic", "x0": [1.0]},
                "optimizers": [{"kind": "adam"}], "steps": 5}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
