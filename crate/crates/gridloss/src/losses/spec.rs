//! Serializable loss descriptions and the name registry that turns them
//! into callable [`LossFn`] closures.
//!
//! A spec is either JSON (`{"name": "dual_weighted_mse", "params":
//! {"gamma_weight": 2.0}}`) or the shorthand
//! `dual_weighted_mse:gamma_weight=2`. Positively oriented measures (csi,
//! iou, dice, tversky, fss, ssim) take a `.loss` suffix for the 1 - value
//! form.

use super::{categorical, regression, spatial, LossFn};
use crate::discretize::{DiscretizationMode, SoftForm};
use crate::error::{GridError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Discretization description as it appears in loss JSON:
/// `{"mode": "hard" | "soft" | "none", "cutoff": x, "c": y}`.
/// Omitted cutoff and c default to 0.5 and 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl ModeSpec {
    pub fn resolve(&self) -> Result<DiscretizationMode> {
        let cutoff = self.cutoff.unwrap_or(0.5);
        let c = self.c.unwrap_or(10.0);
        let mode = match self.mode.as_str() {
            "hard" => DiscretizationMode::Hard { cutoff },
            "soft" => DiscretizationMode::Soft { cutoff, c },
            "none" => DiscretizationMode::None,
            other => {
                return Err(GridError::Parse(format!(
                    "unknown discretization mode \"{other}\" (expected hard, soft, or none)"
                )))
            }
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// A named loss plus its numeric parameters; the closure analogue that the
/// CLI and training configs can serialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization: Option<ModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_form: Option<SoftForm>,
}

impl LossSpec {
    pub fn named(name: &str) -> Self {
        LossSpec {
            name: name.to_string(),
            params: BTreeMap::new(),
            discretization: None,
            soft_form: None,
        }
    }

    /// Parse either inline JSON (leading `{`) or the
    /// `name:key=val,key=val` shorthand. Shorthand recognizes the special
    /// keys `mode` (hard|soft|none), `cutoff`, `c`, and `soft_form`
    /// (centered|raw_sigmoid); every other key is a numeric parameter.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| GridError::Parse(e.to_string()));
        }
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        if name.is_empty() {
            return Err(GridError::Parse("empty loss name".into()));
        }
        let mut spec = LossSpec::named(name);
        let mut mode: Option<String> = None;
        let mut cutoff: Option<f64> = None;
        let mut c: Option<f64> = None;
        if let Some(rest) = rest {
            for pair in rest.split(',').filter(|p| !p.is_empty()) {
                let (key, value) = pair.split_once('=').ok_or_else(|| {
                    GridError::Parse(format!("expected key=value, got \"{pair}\""))
                })?;
                match key {
                    "mode" => mode = Some(value.to_string()),
                    "soft_form" => {
                        spec.soft_form = Some(match value {
                            "centered" => SoftForm::Centered,
                            "raw_sigmoid" => SoftForm::RawSigmoid,
                            other => {
                                return Err(GridError::Parse(format!(
                                    "unknown soft_form \"{other}\""
                                )))
                            }
                        })
                    }
                    _ => {
                        let v: f64 = value.parse().map_err(|_| {
                            GridError::Parse(format!("non-numeric value for {key}: \"{value}\""))
                        })?;
                        match key {
                            "cutoff" => cutoff = Some(v),
                            "c" => c = Some(v),
                            _ => {
                                spec.params.insert(key.to_string(), v);
                            }
                        }
                    }
                }
            }
        }
        if mode.is_some() || cutoff.is_some() || c.is_some() {
            spec.discretization = Some(ModeSpec {
                mode: mode.unwrap_or_else(|| "soft".to_string()),
                cutoff,
                c,
            });
        }
        Ok(spec)
    }

    fn param(&self, key: &str) -> Result<f64> {
        self.params.get(key).copied().ok_or_else(|| GridError::MissingParam {
            loss: self.name.clone(),
            param: key.to_string(),
        })
    }

    fn param_or(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn usize_param_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(&v) => {
                if v.fract() != 0.0 || v < 0.0 {
                    return Err(GridError::InvalidConfig(format!(
                        "{} must be a non-negative integer, got {v}",
                        key
                    )));
                }
                Ok(v as usize)
            }
        }
    }

    fn mode_or(&self, default: DiscretizationMode) -> Result<DiscretizationMode> {
        match &self.discretization {
            Some(m) => m.resolve(),
            None => Ok(default),
        }
    }

    fn categorical_config(&self, use_as_loss: bool) -> Result<categorical::CategoricalConfig> {
        Ok(categorical::CategoricalConfig {
            use_as_loss,
            discretization: self.mode_or(DiscretizationMode::None)?,
            soft_form: self.soft_form.unwrap_or_default(),
            alpha: self.param_or("alpha", 1.0),
            beta: self.param_or("beta", 1.0),
        })
    }

    fn fss_config(&self) -> Result<spatial::FssConfig> {
        Ok(spatial::FssConfig {
            mask_size: self.usize_param_or("mask_size", 3)?,
            discretization: self.mode_or(DiscretizationMode::Soft { cutoff: 0.5, c: 10.0 })?,
            soft_form: self.soft_form.unwrap_or_default(),
        })
    }

    fn ssim_config(&self) -> Result<spatial::SsimConfig> {
        Ok(spatial::SsimConfig {
            max_val: self.param_or("max_val", 1.0),
            filter_size: self.usize_param_or("filter_size", 11)?,
            filter_sigma: self.param_or("filter_sigma", 1.5),
            k1: self.param_or("k1", 0.01),
            k2: self.param_or("k2", 0.03),
        })
    }

    /// Class selection for the per-class measures: `which_class` defaults
    /// to 0, `num_classes` to the truth tensor's channel count at call time.
    fn class_selector(
        &self,
        channels: usize,
    ) -> Result<categorical::ClassSelector> {
        let which = self.usize_param_or("which_class", 0)?;
        let num = self.usize_param_or("num_classes", channels)?;
        categorical::ClassSelector::new(which, num)
    }

    /// Resolve the name to a callable loss. `.loss` selects the 1 - value
    /// orientation of the positively oriented measures.
    pub fn build(&self) -> Result<LossFn> {
        let (base, as_loss) = match self.name.strip_suffix(".loss") {
            Some(b) => (b, true),
            None => (self.name.as_str(), false),
        };
        let spec = self.clone();
        let f: LossFn = match base {
            "mse" => Arc::new(|t, p| regression::mse(t, p)),
            "rmse_by_batch" => Arc::new(|t, p| regression::rmse_by_batch(t, p)),
            "rmse_by_sample" => Arc::new(|t, p| regression::rmse_by_sample(t, p)),
            "mse_weighted_exp" => {
                let w = self.param("exp_weight")?;
                Arc::new(move |t, p| regression::mse_weighted_exp(t, p, w))
            }
            "mse_weighted_genexp" => {
                let w = self.param("genexp_weight")?;
                Arc::new(move |t, p| regression::mse_weighted_genexp(t, p, w))
            }
            "dual_weighted_mse" => {
                let gamma = self.param("gamma_weight")?;
                Arc::new(move |t, p| regression::dual_weighted_mse(t, p, gamma))
            }
            "mse_zero_nonzero" => {
                let w_zero = self.param("w_zero")?;
                let w_nonzero = self.param("w_nonzero")?;
                Arc::new(move |t, p| regression::mse_zero_nonzero(t, p, w_zero, w_nonzero))
            }
            "mse_with_sobel" => {
                let w = self.param("sobel_weight")?;
                Arc::new(move |t, p| regression::mse_with_sobel(t, p, w))
            }
            "mse_supplementary_weighted" => {
                let w0 = self.param("w0")?;
                let w1 = self.param("w1")?;
                Arc::new(move |t, p| regression::mse_supplementary_weighted(t, p, (w0, w1)))
            }
            "mse_fewer_misses" => Arc::new(|t, p| regression::mse_fewer_misses(t, p)),
            "csi" => {
                let cfg = self.categorical_config(as_loss)?;
                Arc::new(move |t, p| categorical::csi(t, p, &cfg))
            }
            "iou" | "iou_strict" | "dice" | "dice_per_grid_point" | "tversky" => {
                let cfg = self.categorical_config(as_loss)?;
                type Metric = fn(
                    &crate::autodiff::Val,
                    &crate::autodiff::Val,
                    &categorical::ClassSelector,
                    &categorical::CategoricalConfig,
                ) -> Result<crate::autodiff::Val>;
                let metric: Metric = match base {
                    "iou" => categorical::iou,
                    "iou_strict" => categorical::iou_strict,
                    "dice" => categorical::dice,
                    "dice_per_grid_point" => categorical::dice_per_grid_point,
                    _ => categorical::tversky,
                };
                Arc::new(move |t: &crate::autodiff::Val, p: &crate::autodiff::Val| {
                    let sel = spec.class_selector(t.shape().channels)?;
                    metric(t, p, &sel, &cfg)
                })
            }
            "fss" => {
                let cfg = self.fss_config()?;
                if as_loss {
                    Arc::new(move |t, p| spatial::fss_loss(t, p, &cfg))
                } else {
                    Arc::new(move |t, p| spatial::fss_score(t, p, &cfg))
                }
            }
            "fss_per_sample" => {
                let cfg = self.fss_config()?;
                Arc::new(move |t, p| spatial::fss_loss_per_sample(t, p, &cfg))
            }
            "ssim" => {
                let cfg = self.ssim_config()?;
                if as_loss {
                    Arc::new(move |t, p| spatial::ssim_loss(t, p, &cfg))
                } else {
                    Arc::new(move |t, p| spatial::ssim(t, p, &cfg))
                }
            }
            other => return Err(GridError::UnknownLoss(other.to_string())),
        };
        Ok(f)
    }
}
