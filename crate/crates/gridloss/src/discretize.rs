//! Hard, soft, and no discretization of confidence scores, plus the
//! quasi-probabilistic event counting built on them.
//!
//! Hard thresholding is exact but non-differentiable and therefore
//! gradient-blocked; soft discretization approximates it with a steep
//! sigmoid S(c * (p - cutoff)); "none" feeds the raw scores through for a
//! probabilistic reading.

use crate::autodiff::Val;
use crate::error::{GridError, Result};
use crate::tensor::GridTensor;
use serde::{Deserialize, Serialize};

/// Which soft transform a categorical measure applies.
///
/// `Centered` is the sigmoid-around-a-cutoff recipe S(c * (p - cutoff));
/// `RawSigmoid` applies S(p) directly with no cutoff and no steepness
/// constant. Both forms are in circulation; callers pick explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftForm {
    #[default]
    Centered,
    RawSigmoid,
}

/// Tri-state treatment of confidence scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DiscretizationMode {
    Hard { cutoff: f64 },
    Soft { cutoff: f64, c: f64 },
    None,
}

impl DiscretizationMode {
    /// Defaults: cutoff 0.5, c = 1.
    pub fn soft_default() -> Self {
        DiscretizationMode::Soft { cutoff: 0.5, c: 1.0 }
    }

    pub fn hard_default() -> Self {
        DiscretizationMode::Hard { cutoff: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DiscretizationMode::Hard { cutoff } => {
                if !(0.0 < cutoff && cutoff < 1.0) {
                    return Err(GridError::InvalidConfig(format!(
                        "cutoff {cutoff} must lie strictly inside (0, 1)"
                    )));
                }
            }
            DiscretizationMode::Soft { cutoff, c } => {
                if !(0.0 < cutoff && cutoff < 1.0) {
                    return Err(GridError::InvalidConfig(format!(
                        "cutoff {cutoff} must lie strictly inside (0, 1)"
                    )));
                }
                if !(c.is_finite() && c > 0.0) {
                    return Err(GridError::InvalidConfig(format!(
                        "sigmoid steepness c = {c} must be finite and positive"
                    )));
                }
            }
            DiscretizationMode::None => {}
        }
        Ok(())
    }

    pub fn is_hard(&self) -> bool {
        matches!(self, DiscretizationMode::Hard { .. })
    }

    /// Apply the mode to a recorded tensor. Hard mode records a
    /// gradient-blocked node.
    pub fn apply(&self, p: &Val, form: SoftForm) -> Val {
        match (*self, form) {
            (DiscretizationMode::Hard { cutoff }, _) => p.hard_discretize(cutoff),
            (DiscretizationMode::Soft { cutoff, c }, SoftForm::Centered) => {
                p.add_scalar(-cutoff).mul_scalar(c).sigmoid()
            }
            (DiscretizationMode::Soft { .. }, SoftForm::RawSigmoid) => p.sigmoid(),
            (DiscretizationMode::None, _) => p.clone(),
        }
    }

    /// Pure (value-level) counterpart of [`DiscretizationMode::apply`].
    pub fn apply_tensor(&self, p: &GridTensor, form: SoftForm) -> GridTensor {
        match (*self, form) {
            (DiscretizationMode::Hard { cutoff }, _) => hard_discretize(p, cutoff),
            (DiscretizationMode::Soft { cutoff, c }, SoftForm::Centered) => {
                soft_discretize(p, cutoff, c)
            }
            (DiscretizationMode::Soft { .. }, SoftForm::RawSigmoid) => p.sigmoid(),
            (DiscretizationMode::None, _) => p.clone(),
        }
    }
}

/// 1.0 where p > cutoff (strict), else 0.0.
pub fn hard_discretize(p: &GridTensor, cutoff: f64) -> GridTensor {
    p.greater_scalar(cutoff)
}

/// S(c * (p - cutoff)) elementwise; differentiable everywhere.
pub fn soft_discretize(p: &GridTensor, cutoff: f64, c: f64) -> GridTensor {
    p.add_scalar(-cutoff).mul_scalar(c).sigmoid()
}

/// Sum of the mode-transformed scores: an exact count under Hard, an
/// approximation under Soft, the quasi-probabilistic sum under None.
pub fn soft_count(p: &GridTensor, mode: DiscretizationMode) -> Result<f64> {
    mode.validate()?;
    if matches!(mode, DiscretizationMode::None) {
        if let Some((i, v)) = p
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| **v < 0.0 || **v > 1.0)
        {
            return Err(GridError::OutOfRange(format!(
                "element {i} = {v} outside [0, 1] for probabilistic counting"
            )));
        }
    }
    Ok(mode.apply_tensor(p, SoftForm::Centered).reduce_sum_all())
}
