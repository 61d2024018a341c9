//! Loss scaling for AdamL.
//!
//! The scaling value ℓ modulates AdamL's second moment: the gradient term is
//! divided by γ ℓ^φ and the ε term is multiplied by ℓ, so ℓ should shrink as
//! the objective approaches its optimum. Four strategies are provided:
//!
//! * `Identity` — ℓ = f − f_star (f_star defaults to 0, giving ℓ = f).
//! * `KnownRange` — ℓ = (f − f_min)/(f_max − f_min) with a user-supplied
//!   range, e.g. extremes recorded from an earlier run.
//! * `AutoEpochLstm` — emit ℓ = 1 for the whole first epoch while recording
//!   the running extremes of the observed values, then ℓ = f / f_max.
//! * `AutoEpochWgan` — same warm-up epoch, then ℓ = (f − f_min)/f_scale with
//!   f_scale = 10^⌊log₁₀(f_max − f_min)⌋.
//!
//! Outputs are floored at [`LOSS_FLOOR`] so downstream divisions stay finite;
//! values above the learned range are deliberately not clamped from above.

use thiserror::Error;

/// Lower clamp on every emitted ℓ.
pub const LOSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ScalingError {
    #[error("known-range scaling requires f_max > f_min (got f_min={f_min}, f_max={f_max})")]
    DegenerateRange { f_min: f64, f_max: f64 },
    #[error("iters_per_epoch must be at least 1")]
    ZeroEpochLength,
    #[error("non-finite objective value {0}")]
    NonFinite(f64),
    #[error("training error must be positive, got {0}")]
    NonPositiveTrainError(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    Identity,
    KnownRange,
    AutoEpochLstm,
    AutoEpochWgan,
}

/// Scaling-function state. One per optimizer run; moved, never shared.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingState {
    pub mode: ScalingMode,
    pub f_star: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub f_scale: f64,
    pub epoch_index: u64,
    pub iters_per_epoch: u64,
    pub continuous_refresh: bool,
    observed_in_epoch: u64,
    pending_min: f64,
    pending_max: f64,
    seen_any: bool,
}

impl ScalingState {
    fn base(mode: ScalingMode) -> Self {
        ScalingState {
            mode,
            f_star: 0.0,
            f_min: 0.0,
            f_max: 0.0,
            f_scale: 1.0,
            epoch_index: 0,
            iters_per_epoch: 1,
            continuous_refresh: false,
            observed_in_epoch: 0,
            pending_min: 0.0,
            pending_max: 0.0,
            seen_any: false,
        }
    }

    /// ℓ = f − f_star.
    pub fn identity(f_star: f64) -> Self {
        ScalingState { f_star, ..Self::base(ScalingMode::Identity) }
    }

    /// ℓ = (f − f_min)/(f_max − f_min) with a declared range.
    pub fn known_range(f_min: f64, f_max: f64) -> Result<Self, ScalingError> {
        if !(f_max > f_min) {
            return Err(ScalingError::DegenerateRange { f_min, f_max });
        }
        Ok(ScalingState { f_min, f_max, ..Self::base(ScalingMode::KnownRange) })
    }

    pub fn auto_epoch_lstm(iters_per_epoch: u64) -> Result<Self, ScalingError> {
        if iters_per_epoch == 0 {
            return Err(ScalingError::ZeroEpochLength);
        }
        Ok(ScalingState { iters_per_epoch, ..Self::base(ScalingMode::AutoEpochLstm) })
    }

    pub fn auto_epoch_wgan(iters_per_epoch: u64) -> Result<Self, ScalingError> {
        if iters_per_epoch == 0 {
            return Err(ScalingError::ZeroEpochLength);
        }
        Ok(ScalingState { iters_per_epoch, ..Self::base(ScalingMode::AutoEpochWgan) })
    }

    /// Re-commit the observed extremes at the end of every epoch instead of
    /// freezing them after the warm-up epoch.
    pub fn with_continuous_refresh(mut self, on: bool) -> Self {
        self.continuous_refresh = on;
        self
    }

    fn is_auto(&self) -> bool {
        matches!(self.mode, ScalingMode::AutoEpochLstm | ScalingMode::AutoEpochWgan)
    }

    /// Scaling value for the given objective value. Pure; does not advance
    /// the epoch bookkeeping.
    pub fn ell(&self, f_value: f64) -> Result<f64, ScalingError> {
        if !f_value.is_finite() {
            return Err(ScalingError::NonFinite(f_value));
        }
        let raw = match self.mode {
            ScalingMode::Identity => f_value - self.f_star,
            ScalingMode::KnownRange => {
                if !(self.f_max > self.f_min) {
                    return Err(ScalingError::DegenerateRange {
                        f_min: self.f_min,
                        f_max: self.f_max,
                    });
                }
                (f_value - self.f_min) / (self.f_max - self.f_min)
            }
            ScalingMode::AutoEpochLstm => {
                if self.epoch_index == 0 {
                    return Ok(1.0);
                }
                f_value / self.f_max.max(LOSS_FLOOR)
            }
            ScalingMode::AutoEpochWgan => {
                if self.epoch_index == 0 {
                    return Ok(1.0);
                }
                (f_value - self.f_min) / self.f_scale
            }
        };
        Ok(raw.max(LOSS_FLOOR))
    }

    /// Feed one observed objective value into the epoch statistics. No-op for
    /// the non-auto modes. During the warm-up epoch the extremes update
    /// immediately; afterwards they are frozen unless continuous refresh is
    /// on, in which case the running extremes are committed at each epoch
    /// boundary.
    pub fn observe(&mut self, f_value: f64) -> Result<(), ScalingError> {
        if !f_value.is_finite() {
            return Err(ScalingError::NonFinite(f_value));
        }
        if !self.is_auto() {
            return Ok(());
        }
        if !self.seen_any {
            self.f_min = f_value;
            self.f_max = f_value;
            self.pending_min = f_value;
            self.pending_max = f_value;
            self.seen_any = true;
        } else {
            self.pending_min = self.pending_min.min(f_value);
            self.pending_max = self.pending_max.max(f_value);
            if self.epoch_index == 0 {
                self.f_min = self.f_min.min(f_value);
                self.f_max = self.f_max.max(f_value);
            }
        }
        self.observed_in_epoch += 1;
        if self.observed_in_epoch == self.iters_per_epoch {
            self.observed_in_epoch = 0;
            self.epoch_index += 1;
            if self.epoch_index == 1 || self.continuous_refresh {
                self.f_min = self.pending_min;
                self.f_max = self.pending_max;
                self.refresh_scale();
            }
        }
        Ok(())
    }

    fn refresh_scale(&mut self) {
        let range = (self.f_max - self.f_min).max(LOSS_FLOOR);
        self.f_scale = 10f64.powf(range.log10().floor());
    }
}

/// φ schedule driven by the training error in percent:
/// φ = max{4, 4 + log₁₀(e_train)}.
pub fn phi_from_train_error(e_train_percent: f64) -> Result<f64, ScalingError> {
    if !(e_train_percent > 0.0) || !e_train_percent.is_finite() {
        return Err(ScalingError::NonPositiveTrainError(e_train_percent));
    }
    Ok(4f64.max(4.0 + e_train_percent.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_range_midpoint() {
        let state = ScalingState::known_range(0.0, 6.0).unwrap();
        assert_eq!(state.ell(3.0).unwrap(), 0.5);
    }

    #[test]
    fn known_range_rejects_degenerate_range() {
        assert!(ScalingState::known_range(1.0, 1.0).is_err());
        assert!(ScalingState::known_range(2.0, 1.0).is_err());
    }

    #[test]
    fn identity_floors_at_the_optimum() {
        let state = ScalingState::identity(2.5);
        assert_eq!(state.ell(2.5).unwrap(), LOSS_FLOOR);
        assert_eq!(state.ell(2.0).unwrap(), LOSS_FLOOR);
        assert!((state.ell(3.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wgan_scale_snaps_to_power_of_ten() {
        let mut state = ScalingState::auto_epoch_wgan(3).unwrap();
        for f in [0.34, 0.60, 0.5] {
            state.observe(f).unwrap();
        }
        assert_eq!(state.epoch_index, 1);
        assert_eq!(state.f_min, 0.34);
        assert_eq!(state.f_max, 0.60);
        assert!((state.f_scale - 0.1).abs() < 1e-15);
        assert!((state.ell(0.44).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn warmup_epoch_emits_unit_scaling_and_records_extrema() {
        let mut state = ScalingState::auto_epoch_lstm(3).unwrap();
        for f in [5.0, 2.0, 9.0] {
            assert_eq!(state.ell(f).unwrap(), 1.0);
            state.observe(f).unwrap();
        }
        assert_eq!(state.f_min, 2.0);
        assert_eq!(state.f_max, 9.0);
        assert_eq!(state.epoch_index, 1);
        assert!((state.ell(4.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_observation_initializes_both_extrema() {
        let mut state = ScalingState::auto_epoch_lstm(1).unwrap();
        state.observe(7.0).unwrap();
        assert_eq!(state.f_min, 7.0);
        assert_eq!(state.f_max, 7.0);
    }

    #[test]
    fn frozen_statistics_ignore_later_observations() {
        let mut state = ScalingState::auto_epoch_lstm(2).unwrap();
        state.observe(5.0).unwrap();
        state.observe(9.0).unwrap();
        for f in [12.0, 1.0, 30.0, 0.5] {
            state.observe(f).unwrap();
        }
        assert_eq!(state.f_min, 5.0);
        assert_eq!(state.f_max, 9.0);
    }

    #[test]
    fn continuous_refresh_commits_at_epoch_boundary() {
        let mut state = ScalingState::auto_epoch_lstm(2).unwrap().with_continuous_refresh(true);
        state.observe(5.0).unwrap();
        state.observe(9.0).unwrap();
        state.observe(12.0).unwrap();
        // still inside epoch 1, not committed yet
        assert_eq!(state.f_max, 9.0);
        state.observe(6.0).unwrap();
        assert_eq!(state.epoch_index, 2);
        assert_eq!(state.f_max, 12.0);
        assert_eq!(state.f_min, 5.0);
    }

    #[test]
    fn observe_rejects_non_finite_values() {
        let mut state = ScalingState::auto_epoch_lstm(2).unwrap();
        assert!(state.observe(f64::INFINITY).is_err());
    }

    #[test]
    fn phi_schedule_examples() {
        assert_eq!(phi_from_train_error(1.0).unwrap(), 4.0);
        assert_eq!(phi_from_train_error(0.1).unwrap(), 4.0);
        assert!((phi_from_train_error(10.0).unwrap() - 5.0).abs() < 1e-15);
        assert!(phi_from_train_error(0.0).is_err());
        assert!(phi_from_train_error(-2.0).is_err());
    }

    #[test]
    fn ell_is_monotone_in_f_above_the_floor() {
        let states = [
            ScalingState::identity(0.0),
            ScalingState::known_range(0.0, 6.0).unwrap(),
        ];
        for state in states {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..100 {
                let f = 0.1 * i as f64;
                let ell = state.ell(f).unwrap();
                assert!(ell > prev, "mode {:?} not strictly increasing", state.mode);
                prev = ell;
            }
        }
    }
}
