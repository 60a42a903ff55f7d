//! Toy training harness demonstrating loss-function semantics end to end:
//! batch-averaged gradients, silent auto-mean reduction (with a warning
//! flag), stateless vs stateful loss reporting, L2 regularization added to
//! the loss but disentangled in the report, and multi-phase loss switching
//! without parameter reset.

use crate::autodiff::{Tape, Val};
use crate::error::{GridError, Result};
use crate::losses::LossSpec;
use crate::tensor::{gaussian_kernel, GridTensor, Padding, Shape};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-pixel affine map y^ = w * x + b with optional fixed Gaussian input
/// smoothing. Parameters live as (1, rows, cols, 1) grids and broadcast
/// over the batch, so the parameter count stays small enough for exhaustive
/// finite-difference checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub weights: GridTensor,
    pub bias: GridTensor,
    pub smooth_input: bool,
}

impl ToyModel {
    /// Zero-initialized model.
    pub fn zeros(rows: usize, cols: usize, smooth_input: bool) -> Result<Self> {
        let shape = Shape::new(1, rows, cols, 1)?;
        Ok(ToyModel {
            weights: GridTensor::zeros(shape),
            bias: GridTensor::zeros(shape),
            smooth_input,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn smoothed(&self, x: &GridTensor) -> Result<GridTensor> {
        if self.smooth_input {
            x.conv2d(&gaussian_kernel(1), Padding::Same)
        } else {
            Ok(x.clone())
        }
    }

    /// Record a forward pass on `tape`; returns (prediction, w, b) with the
    /// parameters registered for backward.
    pub fn forward(&self, tape: &Tape, x: &GridTensor) -> Result<(Val, Val, Val)> {
        let s = x.shape();
        if (s.rows, s.cols, s.channels) != (self.weights.shape().rows, self.weights.shape().cols, 1)
        {
            return Err(GridError::ShapeMismatch {
                context: "ToyModel::forward".into(),
                left: self.weights.shape().to_string(),
                right: s.to_string(),
            });
        }
        let x_in = tape.constant(self.smoothed(x)?);
        let w = tape.parameter(self.weights.clone());
        let b = tape.parameter(self.bias.clone());
        let pred = w
            .broadcast_batch(s.batch)?
            .mul(&x_in)?
            .add(&b.broadcast_batch(s.batch)?)?;
        Ok((pred, w, b))
    }

    /// Pure prediction without a tape.
    pub fn predict(&self, x: &GridTensor) -> Result<GridTensor> {
        let s = x.shape();
        let w = self.weights.broadcast_batch(s.batch)?;
        let b = self.bias.broadcast_batch(s.batch)?;
        self.smoothed(x)?.mul(&w)?.add(&b)
    }
}

/// How the per-epoch loss is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reporting {
    /// Loss value from the last batch of the epoch.
    Stateless,
    /// Arithmetic mean over the epoch's batches (the framework default).
    #[default]
    Stateful,
}

/// One training phase: a loss and how many epochs to run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub loss: LossSpec,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub l2_lambda: f64,
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub loss_reporting: Reporting,
}

impl TrainConfig {
    pub fn validate(&self, dataset_size: usize) -> Result<()> {
        if self.phases.is_empty() {
            return Err(GridError::InvalidConfig("phases must be non-empty".into()));
        }
        if self.batch_size == 0 || self.batch_size > dataset_size {
            return Err(GridError::InvalidConfig(format!(
                "batch_size {} must be in 1..={dataset_size}",
                self.batch_size
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(GridError::InvalidConfig(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(GridError::InvalidConfig(format!(
                "l2_lambda {} must be finite and >= 0",
                self.l2_lambda
            )));
        }
        Ok(())
    }
}

/// One epoch of the training report; serialized as a JSON line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub phase: usize,
    /// Set on the first epoch of each phase: the optimizer-state /
    /// recompilation boundary.
    pub phase_start: bool,
    pub loss_name: String,
    /// Loss plus L2 penalty, aggregated per the reporting mode.
    pub combined_loss: f64,
    pub l2_penalty: f64,
    /// combined_loss - l2_penalty: the loss itself, tracked separately so
    /// regularization never contaminates the metric.
    pub pure_loss: f64,
    pub metrics: BTreeMap<String, f64>,
    /// True when a non-scalar loss output was silently mean-reduced.
    pub auto_mean_applied: bool,
}

/// Scalar-or-mean reduction with an explicit notice flag: returns the value
/// unchanged for scalar input, otherwise the global mean plus `true`.
pub fn auto_mean_reduce(loss_output: &GridTensor) -> (f64, bool) {
    if loss_output.shape().is_scalar() {
        (loss_output.data()[0], false)
    } else {
        (loss_output.reduce_mean_all(), true)
    }
}

fn batch_slice(t: &GridTensor, start: usize, len: usize) -> GridTensor {
    let s = t.shape();
    let per = s.rows * s.cols * s.channels;
    let data = t.data()[start * per..(start + len) * per].to_vec();
    GridTensor::new_unchecked(
        Shape::new(len, s.rows, s.cols, s.channels).expect("non-empty slice"),
        data,
    )
    .expect("slice of valid tensor")
}

/// Count of event pixels the prediction misses: truth > 0.5 while the
/// prediction stays at or below 0.5.
pub fn miss_count(y_true: &GridTensor, y_pred: &GridTensor) -> Result<f64> {
    if y_true.shape() != y_pred.shape() {
        return Err(GridError::ShapeMismatch {
            context: "miss_count".into(),
            left: y_true.shape().to_string(),
            right: y_pred.shape().to_string(),
        });
    }
    Ok(y_true
        .data()
        .iter()
        .zip(y_pred.data())
        .filter(|(t, p)| **t > 0.5 && **p <= 0.5)
        .count() as f64)
}

fn eval_metric(name: &str, y_true: &GridTensor, y_pred: &GridTensor) -> Result<f64> {
    if name == "miss_count" {
        return miss_count(y_true, y_pred);
    }
    let f = LossSpec::parse(name)?.build()?;
    let tape = Tape::new();
    let t = tape.constant(y_true.clone());
    let p = tape.constant(y_pred.clone());
    f(&t, &p)?.mean_all().scalar_value()
}

/// Plain-gradient-descent training loop over the phase schedule.
///
/// Per batch: forward over the whole batch, auto-mean the loss, add the L2
/// penalty lambda * sum(w^2) (weights only), backward, update
/// w <- w - lr * grad. Because every loss is a batch mean, the parameter
/// gradient is the average of per-sample gradients. Phases run back to back
/// without parameter reset.
pub fn train(
    mut model: ToyModel,
    x: &GridTensor,
    y: &GridTensor,
    cfg: &TrainConfig,
) -> Result<(ToyModel, Vec<EpochReport>)> {
    let n = x.shape().batch;
    if y.shape().batch != n {
        return Err(GridError::ShapeMismatch {
            context: "train data".into(),
            left: x.shape().to_string(),
            right: y.shape().to_string(),
        });
    }
    cfg.validate(n)?;

    let mut reports = Vec::new();
    let mut epoch = 0usize;
    for (phase_idx, phase) in cfg.phases.iter().enumerate() {
        let loss_fn = phase.loss.build()?;
        for phase_epoch in 0..phase.epochs {
            epoch += 1;
            let mut batch_pure = Vec::new();
            let mut batch_penalty = Vec::new();
            let mut metric_sums: BTreeMap<String, f64> = BTreeMap::new();
            let mut auto_mean_applied = false;

            let mut start = 0usize;
            let mut batch_idx = 0usize;
            while start < n {
                let len = cfg.batch_size.min(n - start);
                let xb = batch_slice(x, start, len);
                let yb = batch_slice(y, start, len);

                let tape = Tape::new();
                let (pred, w, _b) = model.forward(&tape, &xb)?;
                let yv = tape.constant(yb.clone());
                let raw = loss_fn(&yv, &pred)?;
                let loss_val = if raw.shape().is_scalar() {
                    raw
                } else {
                    auto_mean_applied = true;
                    raw.mean_all()
                };
                if let Some(op) = tape.blocked_ops().first() {
                    return Err(GridError::GradientBlockedLoss((*op).to_string()));
                }
                let pure = loss_val.scalar_value()?;
                if !pure.is_finite() {
                    return Err(GridError::DivergenceDetected {
                        epoch,
                        batch: batch_idx,
                    });
                }
                let penalty_val = w.square().sum_all().mul_scalar(cfg.l2_lambda);
                let penalty = penalty_val.scalar_value()?;
                let combined = loss_val.add(&penalty_val)?;

                let grads = tape.backward(&combined)?;
                let gw = grads.get(&w).expect("weight gradient").clone();
                let pred_value = pred.value();

                model.weights = model
                    .weights
                    .sub(&gw.mul_scalar(cfg.learning_rate))?;
                let gb = grads.get(&_b).expect("bias gradient").clone();
                model.bias = model.bias.sub(&gb.mul_scalar(cfg.learning_rate))?;

                for m in &cfg.metrics {
                    let v = eval_metric(m, &yb, &pred_value)?;
                    *metric_sums.entry(m.clone()).or_insert(0.0) += v;
                }
                batch_pure.push(pure);
                batch_penalty.push(penalty);
                start += len;
                batch_idx += 1;
            }

            let batches = batch_pure.len() as f64;
            let (pure_loss, l2_penalty) = match cfg.loss_reporting {
                Reporting::Stateless => (
                    *batch_pure.last().expect("at least one batch"),
                    *batch_penalty.last().expect("at least one batch"),
                ),
                Reporting::Stateful => (
                    batch_pure.iter().sum::<f64>() / batches,
                    batch_penalty.iter().sum::<f64>() / batches,
                ),
            };
            let metrics = metric_sums
                .into_iter()
                .map(|(k, v)| (k, v / batches))
                .collect();
            reports.push(EpochReport {
                epoch,
                phase: phase_idx,
                phase_start: phase_epoch == 0,
                loss_name: phase.loss.name.clone(),
                combined_loss: pure_loss + l2_penalty,
                l2_penalty,
                pure_loss,
                metrics,
                auto_mean_applied,
            });
        }
    }
    Ok((model, reports))
}

/// Synthetic convection-like dataset: sparse unit blobs on zero background.
/// The input is the target scaled by one half, so the per-pixel affine
/// model can solve it exactly at w = 2, b = 0.
pub fn synthetic_blob_data(
    samples: usize,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<(GridTensor, GridTensor)> {
    let shape = Shape::new(samples, rows, cols, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; samples * rows * cols];
    for s in 0..samples {
        let blobs = rng.gen_range(2..=4);
        for _ in 0..blobs {
            let r = rng.gen_range(0..rows);
            let c = rng.gen_range(0..cols);
            y[(s * rows + r) * cols + c] = 1.0;
        }
    }
    let x: Vec<f64> = y.iter().map(|v| v * 0.5).collect();
    Ok((GridTensor::new(shape, x)?, GridTensor::new(shape, y)?))
}

/// The two-phase demo: MSE first, then MSE plus the extra penalty for
/// misses, with miss-count tracking across both phases.
pub fn run_two_phase_demo(seed: u64) -> Result<(ToyModel, Vec<EpochReport>)> {
    let (x, y) = synthetic_blob_data(8, 8, 8, seed)?;
    let model = ToyModel::zeros(8, 8, false)?;
    let cfg = TrainConfig {
        batch_size: 4,
        learning_rate: 32.0,
        l2_lambda: 0.0,
        phases: vec![
            Phase {
                loss: LossSpec::named("mse"),
                epochs: 5,
            },
            Phase {
                loss: LossSpec::named("mse_fewer_misses"),
                epochs: 10,
            },
        ],
        metrics: vec!["mse".to_string(), "miss_count".to_string()],
        loss_reporting: Reporting::Stateful,
    };
    train(model, &x, &y, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param_setup() -> (ToyModel, GridTensor, GridTensor) {
        // 1-pixel grids: y^ = w * x + b with x = 1, y = 2
        let model = ToyModel::zeros(1, 1, false).unwrap();
        let x = GridTensor::ones(Shape::new(1, 1, 1, 1).unwrap());
        let y = GridTensor::filled(Shape::new(1, 1, 1, 1).unwrap(), 2.0).unwrap();
        (model, x, y)
    }

    fn mse_cfg(lr: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 1,
            learning_rate: lr,
            l2_lambda: 0.0,
            phases: vec![Phase {
                loss: LossSpec::named("mse"),
                epochs,
            }],
            metrics: vec![],
            loss_reporting: Reporting::Stateful,
        }
    }

    #[test]
    fn closed_form_single_step() {
        // grad of (w - 2)^2 at w = 0 is -4; w <- 0 + 0.1 * 4 = 0.4
        let (model, x, y) = one_param_setup();
        let (model, reports) = train(model, &x, &y, &mse_cfg(0.1, 1)).unwrap();
        assert!((model.weights.data()[0] - 0.4).abs() < 1e-12);
        assert_eq!(reports.len(), 1);
        assert!((reports[0].pure_loss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let (model, x, y) = one_param_setup();
        let (model, reports) = train(model, &x, &y, &mse_cfg(0.0, 3)).unwrap();
        assert_eq!(model.weights.data()[0], 0.0);
        let losses: Vec<f64> = reports.iter().map(|r| r.pure_loss).collect();
        assert!(losses.iter().all(|l| (*l - losses[0]).abs() < 1e-12));
    }

    #[test]
    fn l2_penalty_is_disentangled() {
        let (model, x, y) = one_param_setup();
        let mut cfg = mse_cfg(0.05, 4);
        cfg.l2_lambda = 0.3;
        let (_, reports) = train(model, &x, &y, &cfg).unwrap();
        for r in &reports {
            assert!((r.combined_loss - r.l2_penalty - r.pure_loss).abs() < 1e-12);
        }
        // penalty becomes nonzero once w moves off the origin
        assert!(reports.last().unwrap().l2_penalty > 0.0);
    }

    #[test]
    fn stateless_vs_stateful_reporting() {
        // two samples with different targets -> unequal batch losses
        let model = ToyModel::zeros(1, 1, false).unwrap();
        let x = GridTensor::ones(Shape::new(2, 1, 1, 1).unwrap());
        let y = GridTensor::new(Shape::new(2, 1, 1, 1).unwrap(), vec![1.0, 3.0]).unwrap();
        let mut cfg = mse_cfg(0.0, 1);
        cfg.batch_size = 1;
        cfg.loss_reporting = Reporting::Stateless;
        let (_, stateless) = train(model.clone(), &x, &y, &cfg).unwrap();
        cfg.loss_reporting = Reporting::Stateful;
        let (_, stateful) = train(model, &x, &y, &cfg).unwrap();
        // batch losses are 1 and 9 with lr = 0
        assert!((stateless[0].pure_loss - 9.0).abs() < 1e-12);
        assert!((stateful[0].pure_loss - 5.0).abs() < 1e-12);
    }

    #[test]
    fn batch_gradient_is_mean_of_per_sample_gradients() {
        // full-batch step equals lr * mean of individual-sample gradients
        let model = ToyModel::zeros(1, 1, false).unwrap();
        let x = GridTensor::new(Shape::new(2, 1, 1, 1).unwrap(), vec![1.0, 2.0]).unwrap();
        let y = GridTensor::new(Shape::new(2, 1, 1, 1).unwrap(), vec![2.0, 6.0]).unwrap();
        let mut cfg = mse_cfg(0.1, 1);
        cfg.batch_size = 2;
        let (full, _) = train(model.clone(), &x, &y, &cfg).unwrap();

        // per-sample gradients of (w*x - y)^2 at w = b = 0:
        // d/dw = 2(wx - y)x -> -4 and -24; mean -14
        assert!((full.weights.data()[0] - 0.1 * 14.0).abs() < 1e-12);
    }

    #[test]
    fn hard_loss_is_rejected() {
        let model = ToyModel::zeros(1, 2, false).unwrap();
        let x = GridTensor::ones(Shape::new(1, 1, 2, 1).unwrap());
        let y = GridTensor::new(Shape::new(1, 1, 2, 1).unwrap(), vec![1.0, 0.0]).unwrap();
        let cfg = TrainConfig {
            batch_size: 1,
            learning_rate: 0.1,
            l2_lambda: 0.0,
            phases: vec![Phase {
                loss: LossSpec::parse("csi:mode=hard").unwrap(),
                epochs: 1,
            }],
            metrics: vec![],
            loss_reporting: Reporting::Stateful,
        };
        assert!(matches!(
            train(model, &x, &y, &cfg),
            Err(GridError::GradientBlockedLoss(_))
        ));
    }

    #[test]
    fn divergence_is_detected() {
        let (model, x, y) = one_param_setup();
        let cfg = mse_cfg(1e8, 50);
        assert!(matches!(
            train(model, &x, &y, &cfg),
            Err(GridError::DivergenceDetected { .. })
        ));
    }

    #[test]
    fn phases_share_parameters() {
        let (model, x, y) = one_param_setup();
        let cfg = TrainConfig {
            batch_size: 1,
            learning_rate: 0.1,
            l2_lambda: 0.0,
            phases: vec![
                Phase {
                    loss: LossSpec::named("mse"),
                    epochs: 1,
                },
                Phase {
                    loss: LossSpec::named("mse_fewer_misses"),
                    epochs: 1,
                },
            ],
            metrics: vec![],
            loss_reporting: Reporting::Stateful,
        };
        let (_, reports) = train(model, &x, &y, &cfg).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports[0].phase_start && reports[1].phase_start);
        // phase 2 starts from the trained w = 0.4, not from zero:
        // mse part of its loss is (0.4 - 2)^2 = 2.56 < 4
        assert!(reports[1].pure_loss < 4.0);
    }

    #[test]
    fn auto_mean_flag_set_for_tensor_losses() {
        let (v, flagged) = auto_mean_reduce(
            &GridTensor::filled(Shape::new(1, 2, 2, 1).unwrap(), 3.0).unwrap(),
        );
        assert_eq!(v, 3.0);
        assert!(flagged);
        let (v, flagged) = auto_mean_reduce(&GridTensor::scalar(7.0).unwrap());
        assert_eq!(v, 7.0);
        assert!(!flagged);
    }

    #[test]
    fn two_phase_demo_runs_and_tracks_misses() {
        let (_, reports) = run_two_phase_demo(42).unwrap();
        assert_eq!(reports.len(), 15);
        let boundary = reports.iter().position(|r| r.phase == 1).unwrap();
        assert!(reports[boundary].phase_start);
        // miss count is non-increasing across phase 2 on this separable set
        let misses: Vec<f64> = reports[boundary..]
            .iter()
            .map(|r| r.metrics["miss_count"])
            .collect();
        for w in misses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "misses increased: {misses:?}");
        }
        assert_eq!(*misses.last().unwrap(), 0.0);
    }

    #[test]
    fn smoothing_layer_preserves_constant_fields() {
        let model = ToyModel {
            weights: GridTensor::ones(Shape::new(1, 7, 7, 1).unwrap()),
            bias: GridTensor::zeros(Shape::new(1, 7, 7, 1).unwrap()),
            smooth_input: true,
        };
        let x = GridTensor::filled(Shape::new(1, 7, 7, 1).unwrap(), 2.0).unwrap();
        let out = model.predict(&x).unwrap();
        // interior of a constant field is preserved up to the kernel sum
        let kernel_sum: f64 = crate::tensor::GAUSSIAN_SMOOTHER_5X5
            .iter()
            .flatten()
            .sum();
        let center = out.get(0, 3, 3, 0);
        assert!((center - 2.0 * kernel_sum).abs() < 1e-9);
    }
}
