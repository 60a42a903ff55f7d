//! Finite-difference gradient oracle and the gradient-check harness.
//!
//! The oracle is deliberately independent of the tape: it only re-evaluates
//! the function at perturbed points, so it can falsify a wrong backward rule.

use super::{Tape, Val};
use crate::error::Result;
use crate::tensor::GridTensor;
use serde::Serialize;

/// Default central-difference step for unit-scale data.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h per element.
pub fn finite_diff_grad(
    f: &dyn Fn(&[GridTensor]) -> Result<f64>,
    params: &[GridTensor],
    h: f64,
) -> Result<Vec<GridTensor>> {
    let mut grads = Vec::with_capacity(params.len());
    for (pi, p) in params.iter().enumerate() {
        let mut g = vec![0.0; p.len()];
        for i in 0..p.len() {
            let x = p.data()[i];
            let mut plus: Vec<GridTensor> = params.to_vec();
            plus[pi] = p.with_element(i, x + h);
            let mut minus: Vec<GridTensor> = params.to_vec();
            minus[pi] = p.with_element(i, x - h);
            g[i] = (f(&plus)? - f(&minus)?) / (2.0 * h);
        }
        grads.push(GridTensor::new_unchecked(p.shape(), g)?);
    }
    Ok(grads)
}

/// Outcome of one reverse-mode vs finite-difference comparison.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub op: String,
    pub max_rel_err: f64,
    /// (param index, batch, row, col, channel) of the worst element.
    pub worst_coord: Option<(usize, usize, usize, usize, usize)>,
    pub pass: bool,
    /// Names of gradient-blocked ops; when non-empty the check is excluded
    /// rather than failed.
    pub blocked: Vec<String>,
}

/// Compare reverse-mode gradients against the finite-difference oracle.
///
/// `f` builds the scalar expression on the supplied tape; non-scalar outputs
/// are mean-reduced on both routes. Passes iff
/// max |AD - FD| / max(|AD|, |FD|, 1e-8) < rel_tol over all elements.
pub fn grad_check<F>(
    name: &str,
    f: F,
    params: &[GridTensor],
    h: f64,
    rel_tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &[Val]) -> Result<Val>,
{
    // reverse-mode route
    let tape = Tape::new();
    let vals: Vec<Val> = params.iter().map(|p| tape.parameter(p.clone())).collect();
    let out = f(&tape, &vals)?;
    let out = if out.shape().is_scalar() {
        out
    } else {
        out.mean_all()
    };
    let blocked: Vec<String> = tape.blocked_ops().iter().map(|s| s.to_string()).collect();
    if !blocked.is_empty() {
        return Ok(GradCheckReport {
            op: name.to_string(),
            max_rel_err: 0.0,
            worst_coord: None,
            pass: true,
            blocked,
        });
    }
    let grads = tape.backward(&out)?;

    // oracle route: plain re-evaluation, no tape reuse
    let eval = |ps: &[GridTensor]| -> Result<f64> {
        let t = Tape::new();
        let vs: Vec<Val> = ps.iter().map(|p| t.constant(p.clone())).collect();
        let o = f(&t, &vs)?;
        let o = if o.shape().is_scalar() { o } else { o.mean_all() };
        o.scalar_value()
    };
    let fd = finite_diff_grad(&eval, params, h)?;

    let mut max_rel_err = 0.0;
    let mut worst_coord = None;
    for (pi, (ad_t, fd_t)) in vals
        .iter()
        .map(|v| grads.get(v).expect("param gradient").clone())
        .zip(fd.iter())
        .enumerate()
    {
        for i in 0..ad_t.len() {
            let ad = ad_t.data()[i];
            let fdv = fd_t.data()[i];
            let rel = (ad - fdv).abs() / ad.abs().max(fdv.abs()).max(1e-8);
            if rel > max_rel_err {
                max_rel_err = rel;
                let (b, r, c, k) = ad_t.coords(i);
                worst_coord = Some((pi, b, r, c, k));
            }
        }
    }

    Ok(GradCheckReport {
        op: name.to_string(),
        max_rel_err,
        worst_coord,
        pass: max_rel_err < rel_tol,
        blocked: Vec::new(),
    })
}
