//! Physically constrained radiative-flux loss.
//!
//! Per-sample scalar fluxes ride in a (batch, 1, 1, 2) tensor: channel 0 is
//! the surface downwelling flux F_down, channel 1 the top-of-atmosphere
//! upwelling flux F_up, both in W m^-2. Net flux is F_down - F_up; the
//! constrained loss adds the squared net-flux error so compensating biases
//! in the two components are penalized instead of cancelling.

use crate::autodiff::Val;
use crate::error::{GridError, Result};
use crate::tensor::{GridTensor, Shape};

/// Validated per-sample flux pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTriple {
    tensor: GridTensor,
}

impl FluxTriple {
    /// Wrap a (batch, 1, 1, 2) tensor; fluxes must be finite and
    /// non-negative (the physical ingestion constraint — the losses
    /// themselves never re-check).
    pub fn new(tensor: GridTensor) -> Result<Self> {
        let s = tensor.shape();
        if s.rows != 1 || s.cols != 1 || s.channels != 2 {
            return Err(GridError::ShapeMismatch {
                context: "FluxTriple".into(),
                left: "(batch, 1, 1, 2)".into(),
                right: s.to_string(),
            });
        }
        if let Some((i, v)) = tensor
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(GridError::DomainError(format!(
                "flux element {i} = {v} must be finite and non-negative"
            )));
        }
        Ok(FluxTriple { tensor })
    }

    /// Build from per-sample component slices.
    pub fn from_components(down: &[f64], up: &[f64]) -> Result<Self> {
        if down.len() != up.len() || down.is_empty() {
            return Err(GridError::ShapeMismatch {
                context: "FluxTriple::from_components".into(),
                left: format!("{} down values", down.len()),
                right: format!("{} up values", up.len()),
            });
        }
        let mut data = Vec::with_capacity(down.len() * 2);
        for (d, u) in down.iter().zip(up) {
            data.push(*d);
            data.push(*u);
        }
        FluxTriple::new(GridTensor::new(
            Shape::new(down.len(), 1, 1, 2)?,
            data,
        )?)
    }

    pub fn tensor(&self) -> &GridTensor {
        &self.tensor
    }

    pub fn batch(&self) -> usize {
        self.tensor.shape().batch
    }
}

/// Per-sample net flux F_down - F_up as a (batch, 1, 1, 1) tensor.
pub fn net_flux(t: &FluxTriple) -> GridTensor {
    let down = t.tensor.slice_channel(0).expect("channel 0 exists");
    let up = t.tensor.slice_channel(1).expect("channel 1 exists");
    down.sub(&up).expect("matching shapes")
}

fn component_errors(y_true: &Val, y_pred: &Val) -> Result<(Val, Val)> {
    let s = y_true.shape();
    if s != y_pred.shape() || s.rows != 1 || s.cols != 1 || s.channels != 2 {
        return Err(GridError::ShapeMismatch {
            context: "flux loss".into(),
            left: y_true.shape().to_string(),
            right: y_pred.shape().to_string(),
        });
    }
    let d_down = y_true.slice_channel(0)?.sub(&y_pred.slice_channel(0)?)?;
    let d_up = y_true.slice_channel(1)?.sub(&y_pred.slice_channel(1)?)?;
    Ok((d_down, d_up))
}

/// Mean over samples of (F_down - F^_down)^2 + (F_up - F^_up)^2.
/// The mean divides by the batch size only, not the component count.
pub fn flux_loss_unconstrained(y_true: &Val, y_pred: &Val) -> Result<Val> {
    let (d_down, d_up) = component_errors(y_true, y_pred)?;
    Ok(d_down.square().add(&d_up.square())?.mean_all())
}

/// Unconstrained loss plus the squared net-flux error
/// (F_down - F_up - F^_down + F^_up)^2 per sample.
pub fn flux_loss_constrained(y_true: &Val, y_pred: &Val) -> Result<Val> {
    let (d_down, d_up) = component_errors(y_true, y_pred)?;
    let net = d_down.sub(&d_up)?;
    Ok(d_down
        .square()
        .add(&d_up.square())?
        .add(&net.square())?
        .mean_all())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn eval(
        f: impl Fn(&Val, &Val) -> Result<Val>,
        t: &FluxTriple,
        p: &FluxTriple,
    ) -> f64 {
        let tape = Tape::new();
        let tv = tape.constant(t.tensor().clone());
        let pv = tape.constant(p.tensor().clone());
        f(&tv, &pv).unwrap().scalar_value().unwrap()
    }

    #[test]
    fn net_flux_examples() {
        let t = FluxTriple::from_components(&[100.0, 300.0], &[100.0, 100.0]).unwrap();
        let n = net_flux(&t);
        assert_eq!(n.data(), &[0.0, 200.0]);
    }

    #[test]
    fn net_flux_is_linear() {
        let a = FluxTriple::from_components(&[120.0], &[30.0]).unwrap();
        let b = FluxTriple::from_components(&[10.0], &[25.0]).unwrap();
        let sum = FluxTriple::new(a.tensor().add(b.tensor()).unwrap()).unwrap();
        assert_eq!(
            net_flux(&sum).data()[0],
            net_flux(&a).data()[0] + net_flux(&b).data()[0]
        );
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let t = FluxTriple::from_components(&[250.0, 180.0], &[90.0, 40.0]).unwrap();
        assert_eq!(eval(flux_loss_unconstrained, &t, &t), 0.0);
        assert_eq!(eval(flux_loss_constrained, &t, &t), 0.0);
    }

    #[test]
    fn compounding_biases_dominate_the_net_term() {
        // truth (300, 100); prediction 10 low on down, 10 high on up
        let t = FluxTriple::from_components(&[300.0], &[100.0]).unwrap();
        let p = FluxTriple::from_components(&[290.0], &[110.0]).unwrap();
        assert!((eval(flux_loss_unconstrained, &t, &p) - 200.0).abs() < 1e-9);
        assert!((eval(flux_loss_constrained, &t, &p) - 600.0).abs() < 1e-9);
    }

    #[test]
    fn compensating_biases_drop_the_net_term() {
        let t = FluxTriple::from_components(&[300.0], &[100.0]).unwrap();
        let p = FluxTriple::from_components(&[310.0], &[110.0]).unwrap();
        assert!((eval(flux_loss_unconstrained, &t, &p) - 200.0).abs() < 1e-9);
        assert!((eval(flux_loss_constrained, &t, &p) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn constrained_minus_net_term_is_unconstrained() {
        let t = FluxTriple::from_components(&[300.0, 150.0], &[100.0, 50.0]).unwrap();
        let p = FluxTriple::from_components(&[280.0, 160.0], &[120.0, 45.0]).unwrap();
        let unc = eval(flux_loss_unconstrained, &t, &p);
        let con = eval(flux_loss_constrained, &t, &p);
        // net term per sample: (d_down - d_up)^2
        let net = ((20.0f64 - (-20.0)).powi(2) + ((-10.0f64) - 5.0).powi(2)) / 2.0;
        assert!((con - unc - net).abs() < 1e-9);
    }

    #[test]
    fn ingestion_rejects_negative_flux() {
        assert!(FluxTriple::from_components(&[-1.0], &[0.0]).is_err());
    }

    #[test]
    fn ingestion_rejects_wrong_shape() {
        let t = GridTensor::zeros(Shape::new(1, 2, 1, 2).unwrap());
        assert!(matches!(
            FluxTriple::new(t),
            Err(GridError::ShapeMismatch { .. })
        ));
    }
}
