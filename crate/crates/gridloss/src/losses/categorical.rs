//! Count-based categorical measures usable as losses or metrics:
//! CSI, IOU, Dice, and Tversky, in single-class and all-class forms.
//!
//! Counts generalize to real-valued confidence scores: under soft or no
//! discretization, `a` is the sum of scores over positive truth pixels,
//! `b` the sum over negative pixels, and `c` the sum of inverted scores
//! over positive pixels. All measures are positively oriented in [0, 1];
//! the loss form is 1 - value. Hard discretization is gradient-blocked and
//! therefore forbidden in loss form.

use crate::autodiff::Val;
use crate::discretize::{DiscretizationMode, SoftForm};
use crate::error::{GridError, Result};
use crate::tensor::{Axis, AxisSet, GridTensor, ReduceKind};

/// Denominator guard matching the usual backend epsilon.
pub const EPSILON: f64 = 1e-7;

/// Which class a single-class measure targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassSelector {
    pub which_class: usize,
    pub num_classes: usize,
}

impl ClassSelector {
    pub fn new(which_class: usize, num_classes: usize) -> Result<Self> {
        if num_classes == 0 || which_class >= num_classes {
            return Err(GridError::ClassOutOfRange {
                index: which_class,
                num_classes,
            });
        }
        Ok(ClassSelector {
            which_class,
            num_classes,
        })
    }
}

/// Shared configuration for the categorical measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoricalConfig {
    /// Return 1 - value instead of the positively oriented value.
    pub use_as_loss: bool,
    pub discretization: DiscretizationMode,
    pub soft_form: SoftForm,
    /// Tversky false-positive weight.
    pub alpha: f64,
    /// Tversky false-negative weight.
    pub beta: f64,
}

impl Default for CategoricalConfig {
    fn default() -> Self {
        CategoricalConfig {
            use_as_loss: false,
            discretization: DiscretizationMode::None,
            soft_form: SoftForm::Centered,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl CategoricalConfig {
    pub fn validate(&self) -> Result<()> {
        self.discretization.validate()?;
        if self.use_as_loss && self.discretization.is_hard() {
            return Err(GridError::HardModeAsLoss);
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(GridError::InvalidConfig(format!(
                "tversky weights must be >= 0, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

fn check_binary_truth(y_true: &Val) -> Result<()> {
    let v = y_true.value();
    if let Some((i, x)) = v
        .data()
        .iter()
        .enumerate()
        .find(|(_, x)| **x != 0.0 && **x != 1.0)
    {
        return Err(GridError::NonBinaryTruth(i, *x));
    }
    Ok(())
}

fn check_same_shape(y_true: &Val, y_pred: &Val) -> Result<()> {
    if y_true.shape() != y_pred.shape() {
        return Err(GridError::ShapeMismatch {
            context: "categorical measure".into(),
            left: y_true.shape().to_string(),
            right: y_pred.shape().to_string(),
        });
    }
    Ok(())
}

fn orient(value: Val, use_as_loss: bool) -> Val {
    if use_as_loss {
        value.mul_scalar(-1.0).add_scalar(1.0)
    } else {
        value
    }
}

/// Critical success index a / (a + b + c) over the whole batch, with
/// a, b, c the (quasi-probabilistic) true-positive, false-positive, and
/// false-negative sums.
pub fn csi(y_true: &Val, y_pred: &Val, cfg: &CategoricalConfig) -> Result<Val> {
    cfg.validate()?;
    check_same_shape(y_true, y_pred)?;
    check_binary_truth(y_true)?;
    let p = cfg.discretization.apply(y_pred, cfg.soft_form);
    let ones = y_true.ones_like();
    let not_t = ones.sub(y_true)?;
    let not_p = ones.sub(&p)?;
    let a = y_true.mul(&p)?.sum_all();
    let b = not_t.mul(&p)?.sum_all();
    let c = y_true.mul(&not_p)?.sum_all();
    let denom = a.add(&b)?.add(&c)?.add_scalar(EPSILON);
    Ok(orient(a.div(&denom)?, cfg.use_as_loss))
}

fn class_counts(
    y_true: &Val,
    y_pred_t: &Val,
    sel: &ClassSelector,
) -> Result<(Val, Val, Val)> {
    let spatial = AxisSet::new(&[Axis::Rows, Axis::Cols]).expect("static axes");
    let t_k = y_true.slice_channel(sel.which_class)?;
    let p_k = y_pred_t.slice_channel(sel.which_class)?;
    let ones = t_k.ones_like();
    let inter = t_k.mul(&p_k)?.reduce(spatial, ReduceKind::Sum);
    let false_pos = ones
        .sub(&t_k)?
        .mul(&p_k)?
        .reduce(spatial, ReduceKind::Sum);
    let false_neg = t_k
        .mul(&ones.sub(&p_k)?)?
        .reduce(spatial, ReduceKind::Sum);
    Ok((inter, false_pos, false_neg))
}

fn prepare(
    y_true: &Val,
    y_pred: &Val,
    sel: &ClassSelector,
    cfg: &CategoricalConfig,
) -> Result<Val> {
    cfg.validate()?;
    check_same_shape(y_true, y_pred)?;
    if y_true.shape().channels != sel.num_classes {
        return Err(GridError::ShapeMismatch {
            context: "class channels".into(),
            left: format!("{} channels", y_true.shape().channels),
            right: format!("{} classes", sel.num_classes),
        });
    }
    ClassSelector::new(sel.which_class, sel.num_classes)?;
    check_binary_truth(y_true)?;
    Ok(cfg.discretization.apply(y_pred, cfg.soft_form))
}

/// Intersection over union for one class, averaged over the batch.
///
/// The union counts the full tensors (all channels): per-sample
/// sum(t) + sum(p) - intersection. See [`iou_strict`] for the variant that
/// restricts both sides to the selected class.
pub fn iou(y_true: &Val, y_pred: &Val, sel: &ClassSelector, cfg: &CategoricalConfig) -> Result<Val> {
    let p = prepare(y_true, y_pred, sel, cfg)?;
    let (inter, _, _) = class_counts(y_true, &p, sel)?;
    let per_sample = AxisSet::per_sample();
    let union = y_true
        .reduce(per_sample, ReduceKind::Sum)
        .add(&p.reduce(per_sample, ReduceKind::Sum))?
        .sub(&inter)?;
    let value = inter.div(&union.add_scalar(EPSILON))?.mean_all();
    Ok(orient(value, cfg.use_as_loss))
}

/// IOU with both intersection and union restricted to the selected class.
pub fn iou_strict(
    y_true: &Val,
    y_pred: &Val,
    sel: &ClassSelector,
    cfg: &CategoricalConfig,
) -> Result<Val> {
    let p = prepare(y_true, y_pred, sel, cfg)?;
    let (inter, false_pos, false_neg) = class_counts(y_true, &p, sel)?;
    // union = a + b + c for the selected class
    let union = inter.add(&false_pos)?.add(&false_neg)?;
    let value = inter.div(&union.add_scalar(EPSILON))?.mean_all();
    Ok(orient(value, cfg.use_as_loss))
}

/// Dice coefficient: class intersection over the per-sample element count
/// across all channels (rows * cols * classes). See [`dice_per_grid_point`]
/// for the variant that divides by grid points only.
pub fn dice(
    y_true: &Val,
    y_pred: &Val,
    sel: &ClassSelector,
    cfg: &CategoricalConfig,
) -> Result<Val> {
    let p = prepare(y_true, y_pred, sel, cfg)?;
    let (inter, _, _) = class_counts(y_true, &p, sel)?;
    let count = p
        .ones_like()
        .reduce(AxisSet::per_sample(), ReduceKind::Sum);
    let value = inter.div(&count)?.mean_all();
    Ok(orient(value, cfg.use_as_loss))
}

/// Dice with the denominator equal to the number of grid points (rows * cols).
pub fn dice_per_grid_point(
    y_true: &Val,
    y_pred: &Val,
    sel: &ClassSelector,
    cfg: &CategoricalConfig,
) -> Result<Val> {
    let p = prepare(y_true, y_pred, sel, cfg)?;
    let (inter, _, _) = class_counts(y_true, &p, sel)?;
    let shape = y_true.shape();
    let g = (shape.rows * shape.cols) as f64;
    let value = inter.mul_scalar(1.0 / g).mean_all();
    Ok(orient(value, cfg.use_as_loss))
}

/// Tversky coefficient a / (a + alpha*b + beta*c) per sample, averaged over
/// the batch. Reduces to the CSI contingency form at alpha = beta = 1.
pub fn tversky(
    y_true: &Val,
    y_pred: &Val,
    sel: &ClassSelector,
    cfg: &CategoricalConfig,
) -> Result<Val> {
    let p = prepare(y_true, y_pred, sel, cfg)?;
    let (inter, false_pos, false_neg) = class_counts(y_true, &p, sel)?;
    let denom = inter
        .add(&false_pos.mul_scalar(cfg.alpha))?
        .add(&false_neg.mul_scalar(cfg.beta))?
        .add_scalar(EPSILON);
    let value = inter.div(&denom)?.mean_all();
    Ok(orient(value, cfg.use_as_loss))
}

/// Arithmetic mean of a single-class measure over all classes.
pub fn all_class_mean<F>(
    metric: F,
    y_true: &Val,
    y_pred: &Val,
    num_classes: usize,
    cfg: &CategoricalConfig,
) -> Result<Val>
where
    F: Fn(&Val, &Val, &ClassSelector, &CategoricalConfig) -> Result<Val>,
{
    if num_classes == 0 {
        return Err(GridError::ClassOutOfRange {
            index: 0,
            num_classes,
        });
    }
    let mut total: Option<Val> = None;
    for k in 0..num_classes {
        let sel = ClassSelector::new(k, num_classes)?;
        let v = metric(y_true, y_pred, &sel, cfg)?;
        total = Some(match total {
            Some(acc) => acc.add(&v)?,
            None => v,
        });
    }
    Ok(total
        .expect("at least one class")
        .mul_scalar(1.0 / num_classes as f64))
}

/// Brute-force contingency-table counts (a, b, c) on hard binary fields.
/// Test oracle; counts by explicit iteration, no tensor algebra.
pub fn contingency_counts(truth: &GridTensor, pred_binary: &GridTensor) -> (f64, f64, f64) {
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for (t, p) in truth.data().iter().zip(pred_binary.data()) {
        match (*t > 0.5, *p > 0.5) {
            (true, true) => a += 1.0,
            (false, true) => b += 1.0,
            (true, false) => c += 1.0,
            (false, false) => {}
        }
    }
    (a, b, c)
}
