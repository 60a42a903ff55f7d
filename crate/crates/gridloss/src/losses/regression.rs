//! Pointwise regression losses: the MSE family, amplitude weighting,
//! conditional weighting, Sobel augmentation, supplementary-channel
//! weighting, and the miss-penalizing asymmetric loss.
//!
//! Every function here returns a scalar `Val` recorded on the inputs' tape,
//! so the same code path serves plain evaluation and gradient computation.

use super::LossFn;
use crate::autodiff::Val;
use crate::error::{GridError, Result};
use crate::tensor::{AxisSet, ReduceKind};
use std::sync::Arc;

/// Mean over all elements, batch included, of (pred - true)^2.
pub fn mse(y_true: &Val, y_pred: &Val) -> Result<Val> {
    Ok(y_pred.sub(y_true)?.square().mean_all())
}

/// Global mean first, square root second: one RMSE for the whole batch.
pub fn rmse_by_batch(y_true: &Val, y_pred: &Val) -> Result<Val> {
    y_pred.sub(y_true)?.square().mean_all().sqrt()
}

/// Per-sample RMSE, then the batch mean of those scalars. Differs from
/// [`rmse_by_batch`] whenever per-sample errors differ.
pub fn rmse_by_sample(y_true: &Val, y_pred: &Val) -> Result<Val> {
    let per_sample = y_pred
        .sub(y_true)?
        .square()
        .reduce(AxisSet::per_sample(), ReduceKind::Mean)
        .sqrt()?;
    Ok(per_sample.mean_all())
}

/// Mean of e^(w * y_true) * (pred - true)^2: exponentially more weight on
/// high-amplitude truth.
pub fn mse_weighted_exp(y_true: &Val, y_pred: &Val, w: f64) -> Result<Val> {
    let weight = y_true.mul_scalar(w).exp();
    Ok(weight.mul(&y_pred.sub(y_true)?.square())?.mean_all())
}

/// Mean of e^(w * y_true^2) * (pred - true)^2: even in y_true, so negative
/// and positive amplitudes weigh equally.
pub fn mse_weighted_genexp(y_true: &Val, y_pred: &Val, w: f64) -> Result<Val> {
    let weight = y_true.square().mul_scalar(w).exp();
    Ok(weight.mul(&y_pred.sub(y_true)?.square())?.mean_all())
}

/// Mean of max(|true|, |pred|)^gamma * (pred - true)^2.
pub fn dual_weighted_mse(y_true: &Val, y_pred: &Val, gamma: f64) -> Result<Val> {
    let weight = y_true.abs().maximum(&y_pred.abs())?.powf(gamma)?;
    Ok(weight.mul(&y_pred.sub(y_true)?.square())?.mean_all())
}

/// Separate weights for zero and non-zero truth pixels (strict y_true > 0;
/// negative truth lands in the "zero" class).
pub fn mse_zero_nonzero(y_true: &Val, y_pred: &Val, w_zero: f64, w_nonzero: f64) -> Result<Val> {
    let cond = y_true.value().greater_scalar(0.0);
    let ones = y_true.ones_like();
    let weights = Val::select(&cond, &ones.mul_scalar(w_nonzero), &ones.mul_scalar(w_zero))?;
    Ok(weights.mul(&y_pred.sub(y_true)?.square())?.mean_all())
}

/// MSE plus weighted squared differences of the Sobel edge responses;
/// single-channel inputs only.
pub fn mse_with_sobel(y_true: &Val, y_pred: &Val, w: f64) -> Result<Val> {
    let (dy_pred, dx_pred) = y_pred.sobel_edges()?;
    let (dy_true, dx_true) = y_true.sobel_edges()?;
    let point = y_pred.sub(y_true)?.square();
    let edge_y = dy_pred.sub(&dy_true)?.square().mul_scalar(w);
    let edge_x = dx_pred.sub(&dx_true)?.square().mul_scalar(w);
    Ok(point.add(&edge_y)?.add(&edge_x)?.mean_all())
}

/// Weighted MSE where y_true carries the truth in channel 0 and a
/// supplementary mask in channel 1; weight w0 applies where the mask is
/// below 1, w1 elsewhere.
pub fn mse_supplementary_weighted(
    y_true_aug: &Val,
    y_pred: &Val,
    weights: (f64, f64),
) -> Result<Val> {
    if y_true_aug.shape().channels != 2 {
        return Err(GridError::MissingSupplementChannel(
            y_true_aug.shape().channels,
        ));
    }
    let truth = y_true_aug.slice_channel(0)?;
    let suppl = y_true_aug.value().slice_channel(1)?;
    let cond = suppl.less_scalar(1.0);
    let ones = truth.ones_like();
    let w = Val::select(&cond, &ones.mul_scalar(weights.0), &ones.mul_scalar(weights.1))?;
    Ok(w.mul(&y_pred.sub(&truth)?.square())?.mean_all())
}

/// MSE plus max(true - pred, 0): under-prediction pays an extra, linear
/// penalty; over-prediction does not.
pub fn mse_fewer_misses(y_true: &Val, y_pred: &Val) -> Result<Val> {
    let diff = y_true.sub(y_pred)?;
    let zeros = y_true.ones_like().mul_scalar(0.0);
    let miss = diff.maximum(&zeros)?;
    Ok(y_pred.sub(y_true)?.square().add(&miss)?.mean_all())
}

/// Weighted sum of loss terms, evaluated on the same (y_true, y_pred) pair.
pub fn combine_losses(terms: Vec<(LossFn, f64)>) -> Result<LossFn> {
    if terms.is_empty() {
        return Err(GridError::EmptyCombination);
    }
    if let Some((_, w)) = terms.iter().find(|(_, w)| !w.is_finite()) {
        return Err(GridError::InvalidConfig(format!("non-finite weight {w}")));
    }
    Ok(Arc::new(move |y_true, y_pred| {
        let mut total: Option<Val> = None;
        for (loss, weight) in &terms {
            let term = loss(y_true, y_pred)?.mul_scalar(*weight);
            total = Some(match total {
                Some(acc) => acc.add(&term)?,
                None => term,
            });
        }
        Ok(total.expect("non-empty combination"))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::tensor::{GridTensor, Shape};

    fn eval(
        f: impl Fn(&Val, &Val) -> Result<Val>,
        t: &GridTensor,
        p: &GridTensor,
    ) -> Result<f64> {
        let tape = Tape::new();
        let tv = tape.constant(t.clone());
        let pv = tape.constant(p.clone());
        f(&tv, &pv)?.scalar_value()
    }

    fn row(data: Vec<f64>) -> GridTensor {
        let n = data.len();
        GridTensor::new(Shape::new(1, 1, n, 1).unwrap(), data).unwrap()
    }

    #[test]
    fn mse_basics() {
        let t = row(vec![0.0, 0.0]);
        let p = row(vec![1.0, 3.0]);
        assert_eq!(eval(mse, &t, &t).unwrap(), 0.0);
        assert_eq!(eval(mse, &t, &p).unwrap(), 5.0);
        // permutation invariance
        let p2 = row(vec![3.0, 1.0]);
        assert_eq!(eval(mse, &t, &p2).unwrap(), 5.0);
    }

    #[test]
    fn mse_shape_mismatch_errors() {
        let t = row(vec![0.0, 0.0]);
        let p = row(vec![1.0]);
        assert!(matches!(
            eval(mse, &t, &p),
            Err(GridError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rmse_constant_error() {
        let t = GridTensor::zeros(Shape::new(4, 1, 1, 1).unwrap());
        let p = GridTensor::filled(t.shape(), 2.0).unwrap();
        assert_eq!(eval(rmse_by_batch, &t, &p).unwrap(), 2.0);
    }

    #[test]
    fn batch_vs_sample_rmse_differ() {
        // two samples with per-sample MSEs 1 and 9
        let shape = Shape::new(2, 1, 2, 1).unwrap();
        let t = GridTensor::zeros(shape);
        let p = GridTensor::new(shape, vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let by_batch = eval(rmse_by_batch, &t, &p).unwrap();
        let by_sample = eval(rmse_by_sample, &t, &p).unwrap();
        assert!((by_batch - 5.0f64.sqrt()).abs() < 1e-12);
        assert!((by_sample - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sample_rmse_collapses_for_single_sample() {
        let shape = Shape::new(1, 2, 2, 1).unwrap();
        let t = GridTensor::zeros(shape);
        let p = GridTensor::new(shape, vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        let a = eval(rmse_by_batch, &t, &p).unwrap();
        let b = eval(rmse_by_sample, &t, &p).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn exp_weight_anchor() {
        // truth 1, pred 0, w 5: weight e^5 ~ 148.413
        let t = row(vec![1.0]);
        let p = row(vec![0.0]);
        let v = eval(|t, p| mse_weighted_exp(t, p, 5.0), &t, &p).unwrap();
        assert!((v - 5.0f64.exp()).abs() < 1e-9);
        // truth 0, pred 1: weight e^0 = 1
        let v = eval(|t, p| mse_weighted_exp(t, p, 5.0), &p, &t).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_weight_neutral_at_zero() {
        let t = row(vec![0.7, -0.3, 1.5]);
        let p = row(vec![0.1, 0.4, 2.0]);
        let a = eval(|t, p| mse_weighted_exp(t, p, 0.0), &t, &p).unwrap();
        let b = eval(mse, &t, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn genexp_is_even_in_truth() {
        let p = row(vec![0.0]);
        let a = eval(|t, p| mse_weighted_genexp(t, p, 1.0), &row(vec![-1.0]), &p).unwrap();
        let b = eval(|t, p| mse_weighted_genexp(t, p, 1.0), &row(vec![1.0]), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn genexp_value() {
        // truth 2, pred 0, w 1: e^4 * 4
        let v = eval(
            |t, p| mse_weighted_genexp(t, p, 1.0),
            &row(vec![2.0]),
            &row(vec![0.0]),
        )
        .unwrap();
        assert!((v - 4.0f64.exp() * 4.0).abs() < 1e-9);
        assert!((v - 218.39).abs() < 0.01);
    }

    #[test]
    fn dual_weighted_values() {
        let v = eval(
            |t, p| dual_weighted_mse(t, p, 1.0),
            &row(vec![2.0]),
            &row(vec![1.0]),
        )
        .unwrap();
        assert_eq!(v, 2.0);
        // abs in the weight: truth -2 still weighs 2
        let v = eval(
            |t, p| dual_weighted_mse(t, p, 1.0),
            &row(vec![-2.0]),
            &row(vec![1.0]),
        )
        .unwrap();
        assert_eq!(v, 18.0);
    }

    #[test]
    fn dual_weighted_neutral_gamma() {
        let t = row(vec![0.7, -0.3, 0.0]);
        let p = row(vec![0.1, 0.4, 2.0]);
        let a = eval(|t, p| dual_weighted_mse(t, p, 0.0), &t, &p).unwrap();
        let b = eval(mse, &t, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_nonzero_weighting() {
        let t = row(vec![0.0, 1.0]);
        let p = row(vec![1.0, 0.0]);
        let v = eval(|t, p| mse_zero_nonzero(t, p, 2.0, 4.0), &t, &p).unwrap();
        assert_eq!(v, 3.0);
        // neutral weights collapse to mse
        let v = eval(|t, p| mse_zero_nonzero(t, p, 1.0, 1.0), &t, &p).unwrap();
        assert_eq!(v, eval(mse, &t, &p).unwrap());
        // negative truth counts as the "zero" class
        let t = row(vec![-1.0]);
        let p = row(vec![0.0]);
        let v = eval(|t, p| mse_zero_nonzero(t, p, 3.0, 100.0), &t, &p).unwrap();
        assert_eq!(v, 3.0);
    }

    #[test]
    fn sobel_constant_offset() {
        // pred = true + c: by linearity the edge-response difference equals
        // the Sobel response of the constant field (nonzero only at the
        // zero-padded border), so loss = c^2 + w * mean(dy_c^2 + dx_c^2)
        let shape = Shape::new(1, 5, 5, 1).unwrap();
        let t = GridTensor::new(shape, (0..25).map(|v| (v as f64 * 0.71).sin()).collect())
            .unwrap();
        let p = t.add_scalar(0.3);
        let v = eval(|t, p| mse_with_sobel(t, p, 2.5), &t, &p).unwrap();
        let (dy_c, dx_c) = GridTensor::filled(shape, 0.3).unwrap().sobel_edges().unwrap();
        let border = dy_c.square().add(&dx_c.square()).unwrap().reduce_mean_all();
        assert!((v - (0.09 + 2.5 * border)).abs() < 1e-12);
        // w = 0 equals mse
        let p2 = t.map(|v| v * 1.3 + 0.1);
        let a = eval(|t, p| mse_with_sobel(t, p, 0.0), &t, &p2).unwrap();
        let b = eval(mse, &t, &p2).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn supplementary_weighting() {
        let aug_shape = Shape::new(1, 1, 2, 2).unwrap();
        // channel 0 truth [0, 0], channel 1 mask [0, 1]
        let t_aug = GridTensor::new(aug_shape, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = row(vec![1.0, 1.0]);
        let v = eval(
            |t, p| mse_supplementary_weighted(t, p, (0.8, 1.2)),
            &t_aug,
            &p,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // missing supplement channel
        let bad = row(vec![0.0, 0.0]);
        assert!(matches!(
            eval(|t, p| mse_supplementary_weighted(t, p, (0.8, 1.2)), &bad, &p),
            Err(GridError::MissingSupplementChannel(1))
        ));
    }

    #[test]
    fn fewer_misses_asymmetry() {
        let v = eval(mse_fewer_misses, &row(vec![1.0]), &row(vec![0.0])).unwrap();
        assert_eq!(v, 2.0);
        let v = eval(mse_fewer_misses, &row(vec![0.0]), &row(vec![1.0])).unwrap();
        assert_eq!(v, 1.0);
        let t = row(vec![0.4, 0.6]);
        assert_eq!(eval(mse_fewer_misses, &t, &t).unwrap(), 0.0);
    }

    #[test]
    fn combination_scales_and_sums() {
        let t = row(vec![0.0, 0.0]);
        let p = row(vec![1.0, 3.0]);
        let combined = combine_losses(vec![(Arc::new(mse) as LossFn, 2.0)]).unwrap();
        assert_eq!(eval(|a, b| combined(a, b), &t, &p).unwrap(), 10.0);
        let both = combine_losses(vec![
            (Arc::new(mse) as LossFn, 1.0),
            (Arc::new(mse_fewer_misses) as LossFn, 0.5),
        ])
        .unwrap();
        let expect = eval(mse, &t, &p).unwrap() + 0.5 * eval(mse_fewer_misses, &t, &p).unwrap();
        assert!((eval(|a, b| both(a, b), &t, &p).unwrap() - expect).abs() < 1e-12);
        assert!(matches!(
            combine_losses(vec![]),
            Err(GridError::EmptyCombination)
        ));
    }

    #[test]
    fn losses_vanish_only_at_equality() {
        let t = row(vec![0.3, 0.9, 0.0]);
        let p = row(vec![0.3, 0.9, 0.0]);
        let p_off = row(vec![0.3, 0.8, 0.0]);
        for f in [
            mse as fn(&Val, &Val) -> Result<Val>,
            rmse_by_batch,
            rmse_by_sample,
            mse_fewer_misses,
        ] {
            assert_eq!(eval(f, &t, &p).unwrap(), 0.0);
            assert!(eval(f, &t, &p_off).unwrap() > 0.0);
        }
    }
}
