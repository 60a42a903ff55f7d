//! Loss functions and verification metrics for gridded spatial forecasts,
//! with reverse-mode automatic differentiation, a finite-difference
//! gradient checker, and a small training harness that demonstrates the
//! semantics losses acquire inside a training loop.
//!
//! The building blocks:
//!
//! - [`tensor`]: immutable 4-D `(batch, rows, cols, channels)` grids and
//!   their pointwise / pooling / convolution operations, plus GRD1 and CSV
//!   file I/O.
//! - [`autodiff`]: a recording tape; losses are written once as functions
//!   of [`autodiff::Val`] and serve evaluation and gradients alike.
//! - [`discretize`]: hard (gradient-blocked), soft-sigmoid, and pass-through
//!   treatment of confidence scores.
//! - [`losses`]: pointwise regression losses, count-based categorical
//!   measures (CSI, IOU, Dice, Tversky), and neighborhood measures
//!   (fractions skill score, SSIM), all buildable by name via
//!   [`losses::LossSpec`].
//! - [`physics`]: the constrained radiative-flux loss.
//! - [`train`]: plain-gradient-descent harness with multi-phase loss
//!   schedules, L2 disentangling, and reporting-mode semantics.

pub mod autodiff;
pub mod discretize;
pub mod error;
pub mod losses;
pub mod physics;
pub mod tensor;
pub mod train;

pub use error::{GridError, Result};
pub use tensor::{GridTensor, Shape};
