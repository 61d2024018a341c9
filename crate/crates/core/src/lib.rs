//! Numerical-optimization laboratory for adaptive gradient methods.
//!
//! The crate bundles four pieces that are usually scattered across scripts:
//!
//! * [`optim`] — a shared update template with pluggable second-moment
//!   estimators (Adam, EAdam, AdaBelief, AdamL) plus SGD with momentum, and
//!   closed-form second-moment oracles for equivalence testing.
//! * [`scaling`] — the loss-scaling function used by AdamL, including the
//!   epoch-based auto-estimation of the loss range.
//! * [`problems`] — benchmark objectives with analytic gradients, known
//!   optima metadata, and a bounded-noise stochastic gradient oracle.
//! * [`analysis`] — mode classification, sufficient-condition checkers and
//!   linear-rate bound evaluation for the convergence guarantees, plus
//!   trajectory verification against those bounds.
//!
//! [`run`] drives a single optimizer run over a problem; batches of runs are
//! data-parallel and go through [`parallel::par_map`], which uses rayon when
//! the `parallel` feature (default) is enabled and falls back to a sequential
//! loop otherwise.

// negated float comparisons like !(x > 0.0) reject NaN; x <= 0.0 would not
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod optim;
pub mod parallel;
pub mod problems;
pub mod run;
pub mod scaling;

pub use optim::{
    closed_form_second_moment, effective_stepsize, second_moment_update, sgd_momentum_step, step,
    EstimatorKind, GradientSample, OptimizerConfig, OptimizerState, StepsizeReport,
};
pub use problems::{NoiseKind, NoiseSpec, Problem};
pub use scaling::{phi_from_train_error, ScalingMode, ScalingState};
