//! Neighborhood-based spatial measures: fractions skill score over pooled
//! event densities, and single-scale SSIM with a Gaussian window.

use crate::autodiff::Val;
use crate::discretize::{DiscretizationMode, SoftForm};
use crate::error::{GridError, Result};
use crate::tensor::{Axis, AxisSet, ConvKernel, Padding, ReduceKind};

/// Denominator guard for the soft FSS ratio.
pub const FSS_EPSILON: f64 = 1e-7;

/// Fractions-skill-score configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FssConfig {
    /// Neighborhood (pooling window) edge length; densities are averages
    /// over mask_size x mask_size squares at stride one.
    pub mask_size: usize,
    pub discretization: DiscretizationMode,
    pub soft_form: SoftForm,
}

impl Default for FssConfig {
    fn default() -> Self {
        FssConfig {
            mask_size: 3,
            discretization: DiscretizationMode::Soft { cutoff: 0.5, c: 10.0 },
            soft_form: SoftForm::Centered,
        }
    }
}

impl FssConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mask_size == 0 {
            return Err(GridError::InvalidConfig("mask_size must be >= 1".into()));
        }
        self.discretization.validate()
    }
}

fn check_single_channel_pair(context: &str, a: &Val, b: &Val) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GridError::ShapeMismatch {
            context: context.into(),
            left: a.shape().to_string(),
            right: b.shape().to_string(),
        });
    }
    if a.shape().channels != 1 {
        return Err(GridError::ShapeMismatch {
            context: context.into(),
            left: "1 channel".into(),
            right: format!("{} channels", a.shape().channels),
        });
    }
    Ok(())
}

/// MSE_n / MSE_n_ref on pooled densities.
///
/// Both fields are discretized, then pooled with a mask_size window at
/// stride one (valid). MSE_n is the global mean of the squared density
/// difference over batch and pixels jointly; MSE_n_ref sums squared
/// densities over the whole batch but normalizes by a single sample's
/// pooled pixel count. That batch-semantics mix is deliberate; see
/// [`fss_loss_per_sample`] for the consistent per-sample form.
///
/// Under hard discretization the metric branches on the reference term:
/// MSE_n_ref = 0 (both fields eventless) returns MSE_n directly, which is 0
/// when the fields agree. Soft and raw modes use a fixed-epsilon
/// denominator instead and stay differentiable.
fn fss_ratio(y_true: &Val, y_pred: &Val, cfg: &FssConfig, as_loss: bool) -> Result<Val> {
    cfg.validate()?;
    check_single_channel_pair("fss", y_true, y_pred)?;
    if as_loss && cfg.discretization.is_hard() {
        return Err(GridError::HardModeAsLoss);
    }
    let shape = y_true.shape();
    if cfg.mask_size > shape.rows || cfg.mask_size > shape.cols {
        return Err(GridError::MaskTooLarge {
            mask: cfg.mask_size,
            dims: (shape.rows, shape.cols),
        });
    }

    let o = cfg.discretization.apply(y_true, cfg.soft_form);
    let m = cfg.discretization.apply(y_pred, cfg.soft_form);
    let pool = (cfg.mask_size, cfg.mask_size);
    let o_d = o.average_pool2d(pool, (1, 1))?;
    let m_d = m.average_pool2d(pool, (1, 1))?;

    let mse_n = o_d.sub(&m_d)?.square().mean_all();
    let pooled = o_d.shape();
    let n_density_pixels = (pooled.rows * pooled.cols) as f64;
    let mse_n_ref = o_d
        .square()
        .sum_all()
        .add(&m_d.square().sum_all())?
        .mul_scalar(1.0 / n_density_pixels);

    if cfg.discretization.is_hard() {
        let reference = mse_n_ref.scalar_value()?;
        if reference == 0.0 {
            return Ok(mse_n);
        }
        return mse_n.div(&mse_n_ref);
    }
    mse_n.div(&mse_n_ref.add_scalar(FSS_EPSILON))
}

/// FSS in loss orientation: MSE_n / (MSE_n_ref + eps), 0 at a perfect match.
/// Hard discretization is rejected; use [`fss_score`] for hard-mode metrics.
pub fn fss_loss(y_true: &Val, y_pred: &Val, cfg: &FssConfig) -> Result<Val> {
    fss_ratio(y_true, y_pred, cfg, true)
}

/// FSS in metric orientation: 1 - ratio, maximum 1. Hard mode permitted.
pub fn fss_score(y_true: &Val, y_pred: &Val, cfg: &FssConfig) -> Result<Val> {
    Ok(fss_ratio(y_true, y_pred, cfg, false)?
        .mul_scalar(-1.0)
        .add_scalar(1.0))
}

/// Per-sample FSS ratio averaged over the batch: both MSE_n and MSE_n_ref
/// are computed per sample, with the epsilon denominator throughout.
pub fn fss_loss_per_sample(y_true: &Val, y_pred: &Val, cfg: &FssConfig) -> Result<Val> {
    cfg.validate()?;
    check_single_channel_pair("fss", y_true, y_pred)?;
    if cfg.discretization.is_hard() {
        return Err(GridError::HardModeAsLoss);
    }
    let shape = y_true.shape();
    if cfg.mask_size > shape.rows || cfg.mask_size > shape.cols {
        return Err(GridError::MaskTooLarge {
            mask: cfg.mask_size,
            dims: (shape.rows, shape.cols),
        });
    }

    let o = cfg.discretization.apply(y_true, cfg.soft_form);
    let m = cfg.discretization.apply(y_pred, cfg.soft_form);
    let pool = (cfg.mask_size, cfg.mask_size);
    let o_d = o.average_pool2d(pool, (1, 1))?;
    let m_d = m.average_pool2d(pool, (1, 1))?;

    let per_sample = AxisSet::per_sample();
    let mse_n = o_d.sub(&m_d)?.square().reduce(per_sample, ReduceKind::Mean);
    let mse_n_ref = o_d
        .square()
        .reduce(per_sample, ReduceKind::Mean)
        .add(&m_d.square().reduce(per_sample, ReduceKind::Mean))?;
    let ratio = mse_n.div(&mse_n_ref.add_scalar(FSS_EPSILON))?;
    Ok(ratio.mean_all())
}

/// Single-scale SSIM configuration; defaults follow the common
/// implementation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Dynamic range L of the images.
    pub max_val: f64,
    pub filter_size: usize,
    pub filter_sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl SsimConfig {
    pub fn new(max_val: f64) -> Self {
        SsimConfig {
            max_val,
            filter_size: 11,
            filter_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_val.is_finite() && self.max_val > 0.0) {
            return Err(GridError::InvalidConfig(format!(
                "max_val = {} must be finite and positive",
                self.max_val
            )));
        }
        if self.filter_size == 0 || self.filter_size % 2 == 0 {
            return Err(GridError::InvalidConfig(format!(
                "filter_size = {} must be odd and positive",
                self.filter_size
            )));
        }
        if !(self.filter_sigma > 0.0) || !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(GridError::InvalidConfig(
                "filter_sigma, k1, k2 must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Normalized 2-D Gaussian window as a single-channel kernel.
    pub fn window(&self) -> ConvKernel {
        let n = self.filter_size;
        let m = (n as f64 - 1.0) / 2.0;
        let s2 = 2.0 * self.filter_sigma * self.filter_sigma;
        let mut rows = vec![vec![0.0; n]; n];
        let mut total = 0.0;
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                let di = i as f64 - m;
                let dj = j as f64 - m;
                *w = (-(di * di + dj * dj) / s2).exp();
                total += *w;
            }
        }
        for row in rows.iter_mut() {
            for w in row.iter_mut() {
                *w /= total;
            }
        }
        let slices: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        ConvKernel::from_stencil(&slices, 1).expect("window stencil is well formed")
    }
}

fn check_range(name: &str, img: &Val, max_val: f64) -> Result<()> {
    let v = img.value();
    if let Some((i, x)) = v
        .data()
        .iter()
        .enumerate()
        .find(|(_, x)| **x < 0.0 || **x > max_val)
    {
        return Err(GridError::RangeViolation(format!(
            "{name} element {i} = {x} outside [0, {max_val}]"
        )));
    }
    Ok(())
}

/// Mean structural similarity over valid window positions, then over batch.
///
/// Local statistics come from the Gaussian window applied with valid
/// padding; the per-pixel value uses the merged two-term form, which equals
/// the luminance * contrast * structure product at C3 = C2 / 2:
///
///   ((2 mu1 mu2 + C1)(2 sigma12 + C2)) /
///   ((mu1^2 + mu2^2 + C1)(sigma1^2 + sigma2^2 + C2))
pub fn ssim(img1: &Val, img2: &Val, cfg: &SsimConfig) -> Result<Val> {
    cfg.validate()?;
    check_single_channel_pair("ssim", img1, img2)?;
    check_range("img1", img1, cfg.max_val)?;
    check_range("img2", img2, cfg.max_val)?;
    let shape = img1.shape();
    if cfg.filter_size > shape.rows || cfg.filter_size > shape.cols {
        return Err(GridError::MaskTooLarge {
            mask: cfg.filter_size,
            dims: (shape.rows, shape.cols),
        });
    }

    let window = cfg.window();
    let conv = |v: &Val| v.conv2d(&window, Padding::Valid);
    let mu1 = conv(img1)?;
    let mu2 = conv(img2)?;
    let mu1_sq = mu1.square();
    let mu2_sq = mu2.square();
    let mu12 = mu1.mul(&mu2)?;
    let sigma1_sq = conv(&img1.square())?.sub(&mu1_sq)?;
    let sigma2_sq = conv(&img2.square())?.sub(&mu2_sq)?;
    let sigma12 = conv(&img1.mul(img2)?)?.sub(&mu12)?;

    let c1 = (cfg.k1 * cfg.max_val).powi(2);
    let c2 = (cfg.k2 * cfg.max_val).powi(2);
    let num = mu12
        .mul_scalar(2.0)
        .add_scalar(c1)
        .mul(&sigma12.mul_scalar(2.0).add_scalar(c2))?;
    let den = mu1_sq
        .add(&mu2_sq)?
        .add_scalar(c1)
        .mul(&sigma1_sq.add(&sigma2_sq)?.add_scalar(c2))?;
    Ok(num
        .div(&den)?
        .reduce(
            AxisSet::new(&[Axis::Rows, Axis::Cols, Axis::Channels]).expect("static axes"),
            ReduceKind::Mean,
        )
        .mean_all())
}

/// 1 - ssim, for training.
pub fn ssim_loss(img1: &Val, img2: &Val, cfg: &SsimConfig) -> Result<Val> {
    Ok(ssim(img1, img2, cfg)?.mul_scalar(-1.0).add_scalar(1.0))
}
