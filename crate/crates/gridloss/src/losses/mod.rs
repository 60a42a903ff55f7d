//! Loss functions and verification metrics, plus the serializable
//! [`LossSpec`] description used by the CLI and training configs.

pub mod categorical;
pub mod regression;
pub mod spatial;
mod spec;

pub use spec::{LossSpec, ModeSpec};

use crate::autodiff::Val;
use crate::error::Result;
use std::sync::Arc;

/// A configured loss: maps (y_true, y_pred) recorded on one tape to a
/// scalar value on the same tape.
pub type LossFn = Arc<dyn Fn(&Val, &Val) -> Result<Val> + Send + Sync>;
