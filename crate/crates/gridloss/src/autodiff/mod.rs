//! Reverse-mode differentiation over `GridTensor` expressions.
//!
//! A [`Tape`] records every operation during the forward pass; [`Tape::backward`]
//! replays it in reverse to produce the gradient of a scalar loss with respect
//! to every marked parameter. Ops without a backward rule (hard discretization,
//! comparisons) are recorded as gradient-blocked: they contribute zero gradient
//! and set an explicit flag so a training harness can reject such losses up
//! front instead of silently training on nothing.

pub mod check;

pub use check::{finite_diff_grad, grad_check, GradCheckReport, DEFAULT_FD_STEP};

use crate::error::{GridError, Result};
use crate::tensor::{Axis, AxisSet, ConvKernel, GridTensor, Padding, ReduceKind, Shape};
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

#[derive(Debug, Clone, Copy)]
enum UnaryKind {
    Square,
    Sqrt,
    Exp,
    Abs,
    Sigmoid,
    Neg,
    Powf(f64),
    // the shift itself never enters the backward rule (d/dx (x + s) = 1)
    AddScalar,
    MulScalar(f64),
}

#[derive(Debug, Clone, Copy)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
    Maximum,
    Minimum,
}

enum Op {
    Constant,
    Parameter,
    Unary {
        input: usize,
        kind: UnaryKind,
    },
    Binary {
        lhs: usize,
        rhs: usize,
        kind: BinaryKind,
    },
    Reduce {
        input: usize,
        axes: AxisSet,
        kind: ReduceKind,
    },
    Select {
        cond: GridTensor,
        a: usize,
        b: usize,
    },
    AvgPool {
        input: usize,
        pool: (usize, usize),
        stride: (usize, usize),
    },
    Conv2d {
        input: usize,
        kernel: ConvKernel,
        padding: Padding,
    },
    SliceChannel {
        input: usize,
        channel: usize,
    },
    BroadcastBatch {
        input: usize,
    },
    /// Output is constant with respect to everything upstream; the op name
    /// lives in the tape's blocked list.
    Blocked,
}

struct Node {
    value: GridTensor,
    op: Op,
}

struct TapeInner {
    nodes: Vec<Node>,
    params: Vec<usize>,
    blocked_ops: Vec<&'static str>,
}

/// Differentiation tape. Single-writer during the forward pass; backward is a
/// read-only pass over the recorded nodes.
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                params: Vec::new(),
                blocked_ops: Vec::new(),
            })),
        }
    }

    fn push(&self, value: GridTensor, op: Op) -> Val {
        let shape = value.shape();
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node { value, op });
        Val {
            tape: Rc::clone(&self.inner),
            id,
            shape,
        }
    }

    /// Record a value that does not receive gradient.
    pub fn constant(&self, value: GridTensor) -> Val {
        self.push(value, Op::Constant)
    }

    pub fn scalar(&self, value: f64) -> Result<Val> {
        Ok(self.constant(GridTensor::scalar(value)?))
    }

    /// Record a trainable parameter tensor.
    pub fn parameter(&self, value: GridTensor) -> Val {
        let val = self.push(value, Op::Parameter);
        self.inner.borrow_mut().params.push(val.id);
        val
    }

    /// Names of gradient-blocked ops recorded so far (empty when the whole
    /// expression is differentiable).
    pub fn blocked_ops(&self) -> Vec<&'static str> {
        self.inner.borrow().blocked_ops.clone()
    }

    pub fn is_blocked(&self) -> bool {
        !self.inner.borrow().blocked_ops.is_empty()
    }

    /// Gradient of a scalar loss with respect to every marked parameter.
    pub fn backward(&self, loss: &Val) -> Result<GradientSet> {
        if !Rc::ptr_eq(&self.inner, &loss.tape) {
            return Err(GridError::DomainError("loss is from another tape".into()));
        }
        if !loss.shape.is_scalar() {
            return Err(GridError::NonScalarLoss(loss.shape.to_string()));
        }
        let inner = self.inner.borrow();
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &inner.nodes[id];
            match &node.op {
                Op::Constant | Op::Parameter | Op::Blocked { .. } => {
                    grads[id] = Some(g); // keep for parameter readout
                }
                Op::Unary { input, kind } => {
                    let x = &inner.nodes[*input].value;
                    let y = &node.value;
                    let dg: Vec<f64> = match kind {
                        UnaryKind::Square => g
                            .iter()
                            .zip(x.data())
                            .map(|(&gi, &xi)| gi * 2.0 * xi)
                            .collect(),
                        UnaryKind::Sqrt => g
                            .iter()
                            .zip(y.data())
                            .map(|(&gi, &yi)| gi * 0.5 / yi)
                            .collect(),
                        UnaryKind::Exp => {
                            g.iter().zip(y.data()).map(|(&gi, &yi)| gi * yi).collect()
                        }
                        UnaryKind::Abs => g
                            .iter()
                            .zip(x.data())
                            .map(|(&gi, &xi)| gi * xi.signum() * if xi == 0.0 { 0.0 } else { 1.0 })
                            .collect(),
                        UnaryKind::Sigmoid => g
                            .iter()
                            .zip(y.data())
                            .map(|(&gi, &yi)| gi * yi * (1.0 - yi))
                            .collect(),
                        UnaryKind::Neg => g.iter().map(|&gi| -gi).collect(),
                        UnaryKind::Powf(p) => g
                            .iter()
                            .zip(x.data())
                            .map(|(&gi, &xi)| gi * p * xi.powf(p - 1.0))
                            .collect(),
                        UnaryKind::AddScalar => g.clone(),
                        UnaryKind::MulScalar(s) => g.iter().map(|&gi| gi * s).collect(),
                    };
                    accumulate(&mut grads[*input], &dg);
                }
                Op::Binary { lhs, rhs, kind } => {
                    let a = &inner.nodes[*lhs].value;
                    let b = &inner.nodes[*rhs].value;
                    let (da, db): (Vec<f64>, Vec<f64>) = match kind {
                        BinaryKind::Add => (g.clone(), g.clone()),
                        BinaryKind::Sub => (g.clone(), g.iter().map(|&gi| -gi).collect()),
                        BinaryKind::Mul => (
                            g.iter().zip(b.data()).map(|(&gi, &bi)| gi * bi).collect(),
                            g.iter().zip(a.data()).map(|(&gi, &ai)| gi * ai).collect(),
                        ),
                        BinaryKind::Div => (
                            g.iter().zip(b.data()).map(|(&gi, &bi)| gi / bi).collect(),
                            g.iter()
                                .zip(a.data().iter().zip(b.data()))
                                .map(|(&gi, (&ai, &bi))| -gi * ai / (bi * bi))
                                .collect(),
                        ),
                        // ties assign the whole subgradient to the first argument
                        BinaryKind::Maximum => (
                            g.iter()
                                .zip(a.data().iter().zip(b.data()))
                                .map(|(&gi, (&ai, &bi))| if ai >= bi { gi } else { 0.0 })
                                .collect(),
                            g.iter()
                                .zip(a.data().iter().zip(b.data()))
                                .map(|(&gi, (&ai, &bi))| if ai >= bi { 0.0 } else { gi })
                                .collect(),
                        ),
                        BinaryKind::Minimum => (
                            g.iter()
                                .zip(a.data().iter().zip(b.data()))
                                .map(|(&gi, (&ai, &bi))| if ai <= bi { gi } else { 0.0 })
                                .collect(),
                            g.iter()
                                .zip(a.data().iter().zip(b.data()))
                                .map(|(&gi, (&ai, &bi))| if ai <= bi { 0.0 } else { gi })
                                .collect(),
                        ),
                    };
                    accumulate(&mut grads[*lhs], &da);
                    accumulate(&mut grads[*rhs], &db);
                }
                Op::Reduce { input, axes, kind } => {
                    let in_shape = inner.nodes[*input].value.shape();
                    let out = &node.value;
                    let scale = match kind {
                        ReduceKind::Sum => 1.0,
                        ReduceKind::Mean => {
                            let count: usize = axes.iter().map(|a| in_shape.dim(a)).product();
                            1.0 / count as f64
                        }
                    };
                    let mut dg = vec![0.0; in_shape.len()];
                    let in_zero = GridTensor::zeros(in_shape);
                    for b in 0..in_shape.batch {
                        for r in 0..in_shape.rows {
                            for c in 0..in_shape.cols {
                                for k in 0..in_shape.channels {
                                    let ob = if axes.contains(Axis::Batch) { 0 } else { b };
                                    let or = if axes.contains(Axis::Rows) { 0 } else { r };
                                    let oc = if axes.contains(Axis::Cols) { 0 } else { c };
                                    let ok = if axes.contains(Axis::Channels) { 0 } else { k };
                                    dg[in_zero.flat_index(b, r, c, k)] =
                                        g[out.flat_index(ob, or, oc, ok)] * scale;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads[*input], &dg);
                }
                Op::Select { cond, a, b } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(cond.data())
                        .map(|(&gi, &ci)| gi * ci)
                        .collect();
                    let db: Vec<f64> = g
                        .iter()
                        .zip(cond.data())
                        .map(|(&gi, &ci)| gi * (1.0 - ci))
                        .collect();
                    accumulate(&mut grads[*a], &da);
                    accumulate(&mut grads[*b], &db);
                }
                Op::AvgPool {
                    input,
                    pool,
                    stride,
                } => {
                    let in_shape = inner.nodes[*input].value.shape();
                    let out = &node.value;
                    let out_shape = out.shape();
                    let area = (pool.0 * pool.1) as f64;
                    let mut dg = vec![0.0; in_shape.len()];
                    let in_zero = GridTensor::zeros(in_shape);
                    for b in 0..out_shape.batch {
                        for i in 0..out_shape.rows {
                            for j in 0..out_shape.cols {
                                for k in 0..out_shape.channels {
                                    let gi = g[out.flat_index(b, i, j, k)] / area;
                                    for di in 0..pool.0 {
                                        for dj in 0..pool.1 {
                                            dg[in_zero.flat_index(
                                                b,
                                                i * stride.0 + di,
                                                j * stride.1 + dj,
                                                k,
                                            )] += gi;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut grads[*input], &dg);
                }
                Op::Conv2d {
                    input,
                    kernel,
                    padding,
                } => {
                    let in_shape = inner.nodes[*input].value.shape();
                    let out = &node.value;
                    let out_shape = out.shape();
                    let (pad_r, pad_c) = match padding {
                        Padding::Same => (kernel.kr / 2, kernel.kc / 2),
                        Padding::Valid => (0, 0),
                    };
                    let mut dg = vec![0.0; in_shape.len()];
                    let in_zero = GridTensor::zeros(in_shape);
                    for b in 0..out_shape.batch {
                        for i in 0..out_shape.rows {
                            for j in 0..out_shape.cols {
                                for oc in 0..kernel.out_channels {
                                    let gi = g[out.flat_index(b, i, j, oc)];
                                    if gi == 0.0 {
                                        continue;
                                    }
                                    for di in 0..kernel.kr {
                                        for dj in 0..kernel.kc {
                                            let r = (i + di).wrapping_sub(pad_r);
                                            let c = (j + dj).wrapping_sub(pad_c);
                                            if r >= in_shape.rows || c >= in_shape.cols {
                                                continue;
                                            }
                                            for ic in 0..kernel.in_channels {
                                                dg[in_zero.flat_index(b, r, c, ic)] += gi
                                                    * kernel.weights[((di * kernel.kc + dj)
                                                        * kernel.in_channels
                                                        + ic)
                                                        * kernel.out_channels
                                                        + oc];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut grads[*input], &dg);
                }
                Op::SliceChannel { input, channel } => {
                    let in_shape = inner.nodes[*input].value.shape();
                    let out = &node.value;
                    let mut dg = vec![0.0; in_shape.len()];
                    let in_zero = GridTensor::zeros(in_shape);
                    for b in 0..in_shape.batch {
                        for r in 0..in_shape.rows {
                            for c in 0..in_shape.cols {
                                dg[in_zero.flat_index(b, r, c, *channel)] =
                                    g[out.flat_index(b, r, c, 0)];
                            }
                        }
                    }
                    accumulate(&mut grads[*input], &dg);
                }
                Op::BroadcastBatch { input } => {
                    let in_shape = inner.nodes[*input].value.shape();
                    let out = &node.value;
                    let out_shape = out.shape();
                    let mut dg = vec![0.0; in_shape.len()];
                    for b in 0..out_shape.batch {
                        for idx in 0..in_shape.len() {
                            dg[idx] += g[b * in_shape.len() + idx];
                        }
                    }
                    accumulate(&mut grads[*input], &dg);
                }
            }
        }

        let mut out = HashMap::new();
        for &pid in &inner.params {
            let shape = inner.nodes[pid].value.shape();
            let data = grads[pid].take().unwrap_or_else(|| vec![0.0; shape.len()]);
            if data.iter().any(|v| !v.is_finite()) {
                return Err(GridError::NonFiniteGradient(pid));
            }
            out.insert(pid, GridTensor::new_unchecked(shape, data)?);
        }
        Ok(GradientSet {
            grads: out,
            blocked: !inner.blocked_ops.is_empty(),
        })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: &[f64]) {
    match slot {
        Some(g) => {
            for (gi, di) in g.iter_mut().zip(delta) {
                *gi += di;
            }
        }
        None => *slot = Some(delta.to_vec()),
    }
}

/// Gradients keyed by parameter node, plus the gradient-blocked flag.
pub struct GradientSet {
    grads: HashMap<usize, GridTensor>,
    pub blocked: bool,
}

impl GradientSet {
    pub fn get(&self, param: &Val) -> Option<&GridTensor> {
        self.grads.get(&param.id)
    }
}

/// A tensor recorded on a tape. Cheap to clone; operations return new `Val`s
/// recorded on the same tape.
#[derive(Clone)]
pub struct Val {
    tape: Rc<RefCell<TapeInner>>,
    id: usize,
    shape: Shape,
}

impl Val {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn value(&self) -> GridTensor {
        self.tape.borrow().nodes[self.id].value.clone()
    }

    pub fn scalar_value(&self) -> Result<f64> {
        self.value().scalar_value()
    }

    fn tape(&self) -> Tape {
        Tape {
            inner: Rc::clone(&self.tape),
        }
    }

    fn same_tape(&self, other: &Val) -> Result<()> {
        if !Rc::ptr_eq(&self.tape, &other.tape) {
            return Err(GridError::DomainError(
                "operands recorded on different tapes".into(),
            ));
        }
        Ok(())
    }

    fn unary(&self, value: GridTensor, kind: UnaryKind) -> Val {
        self.tape().push(
            value,
            Op::Unary {
                input: self.id,
                kind,
            },
        )
    }

    fn binary(&self, other: &Val, kind: BinaryKind, value: GridTensor) -> Val {
        self.tape().push(
            value,
            Op::Binary {
                lhs: self.id,
                rhs: other.id,
                kind,
            },
        )
    }

    pub fn add(&self, other: &Val) -> Result<Val> {
        self.same_tape(other)?;
        Ok(self.binary(other, BinaryKind::Add, self.value().add(&other.value())?))
    }

    pub fn sub(&self, other: &Val) -> Result<Val> {
        self.same_tape(other)?;
        Ok(self.binary(other, BinaryKind::Sub, self.value().sub(&other.value())?))
    }

    pub fn mul(&self, other: &Val) -> Result<Val> {
        self.same_tape(other)?;
        Ok(self.binary(other, BinaryKind::Mul, self.value().mul(&other.value())?))
    }

    pub fn div(&self, other: &Val) -> Result<Val> {
        self.same_tape(other)?;
        Ok(self.binary(other, BinaryKind::Div, self.value().div(&other.value())?))
    }

    pub fn maximum(&self, other: &Val) -> Result<Val> {
        self.same_tape(other)?;
        Ok(self.binary(
            other,
            BinaryKind::Maximum,
            self.value().maximum(&other.value())?,
        ))
    }

    pub fn minimum(&self, other: &Val) -> Result<Val> {
        self.same_tape(other)?;
        Ok(self.binary(
            other,
            BinaryKind::Minimum,
            self.value().minimum(&other.value())?,
        ))
    }

    pub fn square(&self) -> Val {
        self.unary(self.value().square(), UnaryKind::Square)
    }

    pub fn sqrt(&self) -> Result<Val> {
        Ok(self.unary(self.value().sqrt()?, UnaryKind::Sqrt))
    }

    pub fn exp(&self) -> Val {
        self.unary(self.value().exp(), UnaryKind::Exp)
    }

    pub fn abs(&self) -> Val {
        self.unary(self.value().abs(), UnaryKind::Abs)
    }

    pub fn sigmoid(&self) -> Val {
        self.unary(self.value().sigmoid(), UnaryKind::Sigmoid)
    }

    pub fn neg(&self) -> Val {
        self.unary(self.value().mul_scalar(-1.0), UnaryKind::Neg)
    }

    pub fn powf(&self, p: f64) -> Result<Val> {
        Ok(self.unary(self.value().powf(p)?, UnaryKind::Powf(p)))
    }

    pub fn add_scalar(&self, s: f64) -> Val {
        self.unary(self.value().add_scalar(s), UnaryKind::AddScalar)
    }

    pub fn mul_scalar(&self, s: f64) -> Val {
        self.unary(self.value().mul_scalar(s), UnaryKind::MulScalar(s))
    }

    pub fn ones_like(&self) -> Val {
        self.tape().constant(self.value().ones_like())
    }

    pub fn reduce(&self, axes: AxisSet, kind: ReduceKind) -> Val {
        let value = self.value().reduce(axes, kind);
        self.tape().push(
            value,
            Op::Reduce {
                input: self.id,
                axes,
                kind,
            },
        )
    }

    /// Global mean over all axes, yielding a scalar.
    pub fn mean_all(&self) -> Val {
        self.reduce(AxisSet::all(), ReduceKind::Mean)
    }

    pub fn sum_all(&self) -> Val {
        self.reduce(AxisSet::all(), ReduceKind::Sum)
    }

    /// Branch selection by a constant {0,1} condition. Gradient flows only
    /// through the selected branch.
    pub fn select(cond: &GridTensor, a: &Val, b: &Val) -> Result<Val> {
        a.same_tape(b)?;
        let value = GridTensor::select(cond, &a.value(), &b.value())?;
        Ok(a.tape().push(
            value,
            Op::Select {
                cond: cond.clone(),
                a: a.id,
                b: b.id,
            },
        ))
    }

    pub fn average_pool2d(&self, pool: (usize, usize), stride: (usize, usize)) -> Result<Val> {
        let value = self.value().average_pool2d(pool, stride)?;
        Ok(self.tape().push(
            value,
            Op::AvgPool {
                input: self.id,
                pool,
                stride,
            },
        ))
    }

    pub fn conv2d(&self, kernel: &ConvKernel, padding: Padding) -> Result<Val> {
        let value = self.value().conv2d(kernel, padding)?;
        Ok(self.tape().push(
            value,
            Op::Conv2d {
                input: self.id,
                kernel: kernel.clone(),
                padding,
            },
        ))
    }

    /// Fixed-weight convolution with zero-padded `same` output.
    pub fn conv2d_fixed(&self, kernel: &ConvKernel) -> Result<Val> {
        self.conv2d(kernel, Padding::Same)
    }

    /// Vertical and horizontal Sobel responses, as two fixed convolutions.
    pub fn sobel_edges(&self) -> Result<(Val, Val)> {
        if self.shape.channels != 1 {
            return Err(GridError::ShapeMismatch {
                context: "sobel_edges".into(),
                left: "single-channel input".into(),
                right: format!("{} channels", self.shape.channels),
            });
        }
        let dy_rows: Vec<&[f64]> = crate::tensor::SOBEL_DY.iter().map(|r| r.as_slice()).collect();
        let dx_rows: Vec<&[f64]> = crate::tensor::SOBEL_DX.iter().map(|r| r.as_slice()).collect();
        let dy = self.conv2d(&ConvKernel::from_stencil(&dy_rows, 1)?, Padding::Same)?;
        let dx = self.conv2d(&ConvKernel::from_stencil(&dx_rows, 1)?, Padding::Same)?;
        Ok((dy, dx))
    }

    pub fn slice_channel(&self, channel: usize) -> Result<Val> {
        let value = self.value().slice_channel(channel)?;
        Ok(self.tape().push(
            value,
            Op::SliceChannel {
                input: self.id,
                channel,
            },
        ))
    }

    pub fn broadcast_batch(&self, batch: usize) -> Result<Val> {
        let value = self.value().broadcast_batch(batch)?;
        Ok(self
            .tape()
            .push(value, Op::BroadcastBatch { input: self.id }))
    }

    /// Threshold to {0,1} with strict `>`. Gradient-blocked: usable in
    /// metrics, never in losses.
    pub fn hard_discretize(&self, cutoff: f64) -> Val {
        let value = self.value().greater_scalar(cutoff);
        let tape = self.tape();
        tape.inner
            .borrow_mut()
            .blocked_ops
            .push("hard_discretize");
        tape.push(
            value,
            Op::Blocked,
        )
    }
}
