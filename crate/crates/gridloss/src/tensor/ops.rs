//! Elementwise math, reductions, and the structured grid operations
//! (pooling, fixed convolution, Sobel) on `GridTensor`.
//!
//! All operations are pure functions; reductions use a fixed summation
//! order so results are deterministic regardless of thread count.

use super::{Axis, AxisSet, GridTensor, Shape};
use crate::error::{GridError, Result};

/// Reduction kind for [`GridTensor::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Mean,
    Sum,
}

/// Spatial padding rule for fixed convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero-padded output of the same spatial size.
    Same,
    /// No padding; output shrinks by kernel-1 per axis.
    Valid,
}

/// Constant convolution weights with shape (kr, kc, in_channels, out_channels),
/// plus one bias per output channel. Never trained.
#[derive(Debug, Clone)]
pub struct ConvKernel {
    pub kr: usize,
    pub kc: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Row-major (kr, kc, in, out), out fastest.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        kr: usize,
        kc: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != kr * kc * in_channels * out_channels {
            return Err(GridError::ShapeMismatch {
                context: "ConvKernel::new".into(),
                left: format!("({kr}, {kc}, {in_channels}, {out_channels})"),
                right: format!("{} weights", weights.len()),
            });
        }
        if bias.len() != out_channels {
            return Err(GridError::ShapeMismatch {
                context: "ConvKernel::new bias".into(),
                left: format!("{out_channels} output channels"),
                right: format!("{} bias values", bias.len()),
            });
        }
        if weights.iter().chain(bias.iter()).any(|w| !w.is_finite()) {
            return Err(GridError::NonFiniteOperand("conv kernel weights".into()));
        }
        Ok(ConvKernel {
            kr,
            kc,
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    /// Build a kernel from a single 2-D stencil, replicated across
    /// `channels` input and output channels with zero bias.
    pub fn from_stencil(stencil: &[&[f64]], channels: usize) -> Result<Self> {
        let kr = stencil.len();
        let kc = stencil[0].len();
        let mut weights = vec![0.0; kr * kc * channels * channels];
        for (i, row) in stencil.iter().enumerate() {
            if row.len() != kc {
                return Err(GridError::DomainError("ragged stencil".into()));
            }
            for (j, &w) in row.iter().enumerate() {
                for ic in 0..channels {
                    for oc in 0..channels {
                        weights[((i * kc + j) * channels + ic) * channels + oc] = w;
                    }
                }
            }
        }
        ConvKernel::new(kr, kc, channels, channels, weights, vec![0.0; channels])
    }

    #[inline]
    fn weight(&self, i: usize, j: usize, ic: usize, oc: usize) -> f64 {
        self.weights[((i * self.kc + j) * self.in_channels + ic) * self.out_channels + oc]
    }
}

/// 5x5 Gaussian smoother with e-folding radius of one pixel.
pub const GAUSSIAN_SMOOTHER_5X5: [[f64; 5]; 5] = [
    [0.00296902, 0.01330621, 0.02193823, 0.01330621, 0.00296902],
    [0.01330621, 0.0596343, 0.09832033, 0.0596343, 0.01330621],
    [0.02193823, 0.09832033, 0.16210282, 0.09832033, 0.02193823],
    [0.01330621, 0.0596343, 0.09832033, 0.0596343, 0.01330621],
    [0.00296902, 0.01330621, 0.02193823, 0.01330621, 0.00296902],
];

/// Vertical Sobel stencil (row-derivative response).
pub const SOBEL_DY: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Horizontal Sobel stencil (column-derivative response).
pub const SOBEL_DX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// The 5x5 Gaussian smoother as a single-channel convolution kernel.
pub fn gaussian_kernel(channels: usize) -> ConvKernel {
    let rows: Vec<&[f64]> = GAUSSIAN_SMOOTHER_5X5.iter().map(|r| r.as_slice()).collect();
    ConvKernel::from_stencil(&rows, channels).expect("static stencil is well formed")
}

fn sobel_kernel(stencil: &[[f64; 3]; 3]) -> ConvKernel {
    let rows: Vec<&[f64]> = stencil.iter().map(|r| r.as_slice()).collect();
    ConvKernel::from_stencil(&rows, 1).expect("static stencil is well formed")
}

fn check_same_shape(context: &str, a: &GridTensor, b: &GridTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GridError::ShapeMismatch {
            context: context.into(),
            left: a.shape().to_string(),
            right: b.shape().to_string(),
        });
    }
    Ok(())
}

impl GridTensor {
    /// Apply a scalar function elementwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridTensor {
        let data: Vec<f64> = self.data().iter().map(|&v| f(v)).collect();
        GridTensor::new_unchecked(self.shape(), data).expect("shape preserved")
    }

    /// Combine two equal-shape tensors elementwise.
    pub fn zip(&self, other: &GridTensor, f: impl Fn(f64, f64) -> f64) -> Result<GridTensor> {
        check_same_shape("zip", self, other)?;
        let data: Vec<f64> = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridTensor::new_unchecked(self.shape(), data)
    }

    pub fn add(&self, other: &GridTensor) -> Result<GridTensor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridTensor) -> Result<GridTensor> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridTensor) -> Result<GridTensor> {
        self.zip(other, |a, b| a * b)
    }

    pub fn div(&self, other: &GridTensor) -> Result<GridTensor> {
        if other.data().iter().any(|&v| v == 0.0) {
            return Err(GridError::DomainError("division by zero element".into()));
        }
        self.zip(other, |a, b| a / b)
    }

    pub fn maximum(&self, other: &GridTensor) -> Result<GridTensor> {
        self.zip(other, f64::max)
    }

    pub fn minimum(&self, other: &GridTensor) -> Result<GridTensor> {
        self.zip(other, f64::min)
    }

    pub fn square(&self) -> GridTensor {
        self.map(|v| v * v)
    }

    pub fn sqrt(&self) -> Result<GridTensor> {
        if self.data().iter().any(|&v| v < 0.0) {
            return Err(GridError::DomainError("sqrt of negative element".into()));
        }
        Ok(self.map(f64::sqrt))
    }

    pub fn exp(&self) -> GridTensor {
        self.map(f64::exp)
    }

    pub fn abs(&self) -> GridTensor {
        self.map(f64::abs)
    }

    pub fn sigmoid(&self) -> GridTensor {
        self.map(|v| 1.0 / (1.0 + (-v).exp()))
    }

    pub fn add_scalar(&self, s: f64) -> GridTensor {
        self.map(|v| v + s)
    }

    pub fn mul_scalar(&self, s: f64) -> GridTensor {
        self.map(|v| v * s)
    }

    /// x^p elementwise; requires non-negative base for fractional exponents.
    pub fn powf(&self, p: f64) -> Result<GridTensor> {
        if p.fract() != 0.0 && self.data().iter().any(|&v| v < 0.0) {
            return Err(GridError::DomainError(
                "fractional power of negative element".into(),
            ));
        }
        Ok(self.map(|v| v.powf(p)))
    }

    pub fn ones_like(&self) -> GridTensor {
        GridTensor::ones(self.shape())
    }

    /// 1.0 where the element exceeds `s`, else 0.0. Used to build `where`
    /// conditions from model-independent tensors.
    pub fn greater_scalar(&self, s: f64) -> GridTensor {
        self.map(|v| if v > s { 1.0 } else { 0.0 })
    }

    /// 1.0 where the element is below `s`, else 0.0.
    pub fn less_scalar(&self, s: f64) -> GridTensor {
        self.map(|v| if v < s { 1.0 } else { 0.0 })
    }

    /// Branch selection with a {0,1}-valued condition tensor.
    ///
    /// Both branches are validated eagerly for finiteness: a NaN in the
    /// unselected branch would otherwise leak through the multiplicative-mask
    /// gradient, so it is rejected here instead.
    pub fn select(cond: &GridTensor, a: &GridTensor, b: &GridTensor) -> Result<GridTensor> {
        check_same_shape("select cond/a", cond, a)?;
        check_same_shape("select a/b", a, b)?;
        if let Some((i, v)) = cond
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| **v != 0.0 && **v != 1.0)
        {
            return Err(GridError::DomainError(format!(
                "select condition element {i} = {v} is not in {{0, 1}}"
            )));
        }
        if !a.is_finite() {
            return Err(GridError::NonFiniteOperand("select branch a".into()));
        }
        if !b.is_finite() {
            return Err(GridError::NonFiniteOperand("select branch b".into()));
        }
        let data: Vec<f64> = cond
            .data()
            .iter()
            .zip(a.data().iter().zip(b.data()))
            .map(|(&c, (&x, &y))| if c == 1.0 { x } else { y })
            .collect();
        GridTensor::new_unchecked(a.shape(), data)
    }

    /// Axis-aware reduction with kept dims: reduced axes collapse to size 1.
    pub fn reduce(&self, axes: AxisSet, kind: ReduceKind) -> GridTensor {
        let s = self.shape();
        let out_shape = Shape {
            batch: if axes.contains(Axis::Batch) { 1 } else { s.batch },
            rows: if axes.contains(Axis::Rows) { 1 } else { s.rows },
            cols: if axes.contains(Axis::Cols) { 1 } else { s.cols },
            channels: if axes.contains(Axis::Channels) {
                1
            } else {
                s.channels
            },
        };
        let mut out = vec![0.0; out_shape.len()];
        let zero = GridTensor::zeros(out_shape);
        for b in 0..s.batch {
            for r in 0..s.rows {
                for c in 0..s.cols {
                    for k in 0..s.channels {
                        let ob = if axes.contains(Axis::Batch) { 0 } else { b };
                        let or = if axes.contains(Axis::Rows) { 0 } else { r };
                        let oc = if axes.contains(Axis::Cols) { 0 } else { c };
                        let ok = if axes.contains(Axis::Channels) { 0 } else { k };
                        out[zero.flat_index(ob, or, oc, ok)] += self.get(b, r, c, k);
                    }
                }
            }
        }
        if kind == ReduceKind::Mean {
            let count: usize = axes.iter().map(|a| s.dim(a)).product();
            for v in &mut out {
                *v /= count as f64;
            }
        }
        GridTensor::new_unchecked(out_shape, out).expect("reduce shape")
    }

    pub fn reduce_mean_all(&self) -> f64 {
        self.data().iter().sum::<f64>() / self.len() as f64
    }

    pub fn reduce_sum_all(&self) -> f64 {
        self.data().iter().sum()
    }

    /// Average pooling with `valid` padding, per channel, per batch member.
    pub fn average_pool2d(
        &self,
        pool: (usize, usize),
        stride: (usize, usize),
    ) -> Result<GridTensor> {
        let s = self.shape();
        if pool.0 == 0 || pool.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(GridError::DomainError("zero pool or stride".into()));
        }
        if pool.0 > s.rows || pool.1 > s.cols {
            return Err(GridError::PoolTooLarge {
                pool,
                dims: (s.rows, s.cols),
            });
        }
        let out_rows = (s.rows - pool.0) / stride.0 + 1;
        let out_cols = (s.cols - pool.1) / stride.1 + 1;
        let out_shape = Shape::new(s.batch, out_rows, out_cols, s.channels)?;
        let mut out = vec![0.0; out_shape.len()];
        let area = (pool.0 * pool.1) as f64;
        let zero = GridTensor::zeros(out_shape);
        for b in 0..s.batch {
            for i in 0..out_rows {
                for j in 0..out_cols {
                    for k in 0..s.channels {
                        let mut sum = 0.0;
                        for di in 0..pool.0 {
                            for dj in 0..pool.1 {
                                sum += self.get(b, i * stride.0 + di, j * stride.1 + dj, k);
                            }
                        }
                        out[zero.flat_index(b, i, j, k)] = sum / area;
                    }
                }
            }
        }
        GridTensor::new_unchecked(out_shape, out)
    }

    /// Cross-correlation with a constant kernel.
    pub fn conv2d(&self, kernel: &ConvKernel, padding: Padding) -> Result<GridTensor> {
        let s = self.shape();
        if kernel.in_channels != s.channels {
            return Err(GridError::ShapeMismatch {
                context: "conv2d input channels".into(),
                left: format!("tensor channels {}", s.channels),
                right: format!("kernel in_channels {}", kernel.in_channels),
            });
        }
        let (out_rows, out_cols, pad_r, pad_c) = match padding {
            Padding::Same => (s.rows, s.cols, kernel.kr / 2, kernel.kc / 2),
            Padding::Valid => {
                if kernel.kr > s.rows || kernel.kc > s.cols {
                    return Err(GridError::PoolTooLarge {
                        pool: (kernel.kr, kernel.kc),
                        dims: (s.rows, s.cols),
                    });
                }
                (s.rows - kernel.kr + 1, s.cols - kernel.kc + 1, 0, 0)
            }
        };
        let out_shape = Shape::new(s.batch, out_rows, out_cols, kernel.out_channels)?;
        let mut out = vec![0.0; out_shape.len()];
        let zero = GridTensor::zeros(out_shape);
        for b in 0..s.batch {
            for i in 0..out_rows {
                for j in 0..out_cols {
                    for oc in 0..kernel.out_channels {
                        let mut sum = kernel.bias[oc];
                        for di in 0..kernel.kr {
                            for dj in 0..kernel.kc {
                                let r = (i + di).wrapping_sub(pad_r);
                                let c = (j + dj).wrapping_sub(pad_c);
                                if r >= s.rows || c >= s.cols {
                                    continue; // zero padding
                                }
                                for ic in 0..kernel.in_channels {
                                    sum += self.get(b, r, c, ic) * kernel.weight(di, dj, ic, oc);
                                }
                            }
                        }
                        out[zero.flat_index(b, i, j, oc)] = sum;
                    }
                }
            }
        }
        GridTensor::new_unchecked(out_shape, out)
    }

    /// Vertical and horizontal Sobel responses, single-channel input,
    /// zero-padded `same` output. Returns (dy, dx).
    pub fn sobel_edges(&self) -> Result<(GridTensor, GridTensor)> {
        if self.shape().channels != 1 {
            return Err(GridError::ShapeMismatch {
                context: "sobel_edges".into(),
                left: "single-channel input".into(),
                right: format!("{} channels", self.shape().channels),
            });
        }
        let dy = self.conv2d(&sobel_kernel(&SOBEL_DY), Padding::Same)?;
        let dx = self.conv2d(&sobel_kernel(&SOBEL_DX), Padding::Same)?;
        Ok((dy, dx))
    }

    /// Extract one channel as a single-channel tensor.
    pub fn slice_channel(&self, channel: usize) -> Result<GridTensor> {
        let s = self.shape();
        if channel >= s.channels {
            return Err(GridError::ClassOutOfRange {
                index: channel,
                num_classes: s.channels,
            });
        }
        let out_shape = Shape::new(s.batch, s.rows, s.cols, 1)?;
        let mut out = Vec::with_capacity(out_shape.len());
        for b in 0..s.batch {
            for r in 0..s.rows {
                for c in 0..s.cols {
                    out.push(self.get(b, r, c, channel));
                }
            }
        }
        GridTensor::new_unchecked(out_shape, out)
    }

    /// Repeat a batch-1 tensor across `batch` samples.
    pub fn broadcast_batch(&self, batch: usize) -> Result<GridTensor> {
        let s = self.shape();
        if s.batch != 1 {
            return Err(GridError::ShapeMismatch {
                context: "broadcast_batch".into(),
                left: "batch-1 input".into(),
                right: s.to_string(),
            });
        }
        let out_shape = Shape::new(batch, s.rows, s.cols, s.channels)?;
        let mut out = Vec::with_capacity(out_shape.len());
        for _ in 0..batch {
            out.extend_from_slice(self.data());
        }
        GridTensor::new_unchecked(out_shape, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: Vec<f64>) -> GridTensor {
        GridTensor::new(Shape::new(1, rows, cols, 1).unwrap(), data).unwrap()
    }

    #[test]
    fn square_matches_scalar_identity() {
        let x = t(1, 2, vec![-2.0, 3.0]);
        assert_eq!(x.square().data(), &[4.0, 9.0]);
    }

    #[test]
    fn maximum_is_idempotent() {
        let x = t(2, 2, vec![1.0, -3.0, 0.5, 2.0]);
        assert_eq!(x.maximum(&x).unwrap(), x);
    }

    #[test]
    fn sigmoid_at_zero() {
        let x = t(1, 1, vec![0.0]);
        assert_eq!(x.sigmoid().data(), &[0.5]);
    }

    #[test]
    fn divide_by_zero_is_an_error() {
        let a = t(1, 2, vec![1.0, 2.0]);
        let b = t(1, 2, vec![1.0, 0.0]);
        assert!(matches!(a.div(&b), Err(GridError::DomainError(_))));
    }

    #[test]
    fn sqrt_of_negative_is_an_error() {
        let a = t(1, 1, vec![-1.0]);
        assert!(a.sqrt().is_err());
    }

    #[test]
    fn reduce_sum_all_counts() {
        let x = GridTensor::ones(Shape::new(2, 2, 2, 1).unwrap());
        let r = x.reduce(AxisSet::all(), ReduceKind::Sum);
        assert_eq!(r.scalar_value().unwrap(), 8.0);
    }

    #[test]
    fn reduce_mean_of_constant() {
        let x = GridTensor::filled(Shape::new(2, 3, 1, 1).unwrap(), 4.25).unwrap();
        let r = x.reduce(AxisSet::all(), ReduceKind::Mean);
        assert_eq!(r.scalar_value().unwrap(), 4.25);
    }

    #[test]
    fn per_sample_means() {
        let x = GridTensor::new(
            Shape::new(2, 2, 2, 1).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        )
        .unwrap();
        let r = x.reduce(AxisSet::per_sample(), ReduceKind::Mean);
        assert_eq!(r.shape(), Shape::new(2, 1, 1, 1).unwrap());
        assert_eq!(r.data(), &[2.5, 6.5]);
    }

    #[test]
    fn select_picks_by_condition() {
        let cond = t(1, 2, vec![1.0, 0.0]);
        let a = t(1, 2, vec![10.0, 10.0]);
        let b = t(1, 2, vec![20.0, 20.0]);
        assert_eq!(
            GridTensor::select(&cond, &a, &b).unwrap().data(),
            &[10.0, 20.0]
        );
    }

    #[test]
    fn select_rejects_nan_in_unselected_branch() {
        let cond = t(1, 2, vec![1.0, 0.0]);
        let a = t(1, 2, vec![10.0, 10.0]);
        let b = GridTensor::new_unchecked(a.shape(), vec![f64::NAN, 20.0]).unwrap();
        assert!(matches!(
            GridTensor::select(&cond, &a, &b),
            Err(GridError::NonFiniteOperand(_))
        ));
    }

    #[test]
    fn pool_identity_and_constant() {
        let x = t(3, 3, (1..=9).map(|v| v as f64).collect());
        assert_eq!(x.average_pool2d((1, 1), (1, 1)).unwrap(), x);
        let c = GridTensor::filled(Shape::new(1, 4, 4, 1).unwrap(), 7.0).unwrap();
        let p = c.average_pool2d((2, 2), (1, 1)).unwrap();
        assert!(p.data().iter().all(|&v| (v - 7.0).abs() < 1e-12));
        assert_eq!(p.shape(), Shape::new(1, 3, 3, 1).unwrap());
    }

    #[test]
    fn pool_too_large_is_an_error() {
        let x = t(2, 2, vec![0.0; 4]);
        assert!(matches!(
            x.average_pool2d((3, 3), (1, 1)),
            Err(GridError::PoolTooLarge { .. })
        ));
    }

    #[test]
    fn full_extent_pool_equals_spatial_mean() {
        let x = t(3, 4, (0..12).map(|v| v as f64 * 0.37).collect());
        let p = x.average_pool2d((3, 4), (1, 1)).unwrap();
        let m = x.reduce(AxisSet::spatial(), ReduceKind::Mean);
        assert!((p.data()[0] - m.data()[0]).abs() < 1e-12);
    }

    #[test]
    fn identity_conv_is_identity() {
        let x = t(3, 3, (0..9).map(|v| v as f64).collect());
        let k = ConvKernel::new(1, 1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(x.conv2d(&k, Padding::Same).unwrap(), x);
    }

    #[test]
    fn gaussian_weights_sum_to_one() {
        let sum: f64 = GAUSSIAN_SMOOTHER_5X5.iter().flatten().sum();
        assert!((sum - 1.0).abs() < 2e-7, "kernel sum {sum}");
    }

    #[test]
    fn gaussian_on_constant_field_is_constant_in_interior() {
        let c = GridTensor::filled(Shape::new(1, 9, 9, 1).unwrap(), 3.5).unwrap();
        let k = gaussian_kernel(1);
        let y = c.conv2d(&k, Padding::Same).unwrap();
        let kernel_sum: f64 = GAUSSIAN_SMOOTHER_5X5.iter().flatten().sum();
        for r in 2..7 {
            for col in 2..7 {
                assert!((y.get(0, r, col, 0) - 3.5 * kernel_sum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_image_imprints_kernel() {
        let mut data = vec![0.0; 81];
        data[4 * 9 + 4] = 1.0;
        let x = t(9, 9, data);
        let k = gaussian_kernel(1);
        let y = x.conv2d(&k, Padding::Same).unwrap();
        for di in 0..5 {
            for dj in 0..5 {
                let expect = GAUSSIAN_SMOOTHER_5X5[di][dj];
                assert!((y.get(0, 2 + di, 2 + dj, 0) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sobel_of_constant_is_zero() {
        let c = GridTensor::filled(Shape::new(1, 5, 5, 1).unwrap(), 2.0).unwrap();
        let (dy, dx) = c.sobel_edges().unwrap();
        // interior only; zero padding makes borders nonzero for constants
        for r in 1..4 {
            for col in 1..4 {
                assert_eq!(dy.get(0, r, col, 0), 0.0);
                assert_eq!(dx.get(0, r, col, 0), 0.0);
            }
        }
    }

    #[test]
    fn sobel_of_ramp() {
        // values equal to column index: interior dx constant 8, dy 0
        let mut data = Vec::new();
        for _r in 0..5 {
            for c in 0..5 {
                data.push(c as f64);
            }
        }
        let x = t(5, 5, data);
        let (dy, dx) = x.sobel_edges().unwrap();
        for r in 1..4 {
            for col in 1..4 {
                assert_eq!(dx.get(0, r, col, 0), 8.0);
                assert_eq!(dy.get(0, r, col, 0), 0.0);
            }
        }
    }

    #[test]
    fn sobel_transpose_swaps_dy_dx() {
        let x = t(4, 4, (0..16).map(|v| (v as f64).sin()).collect());
        let mut tdata = vec![0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                tdata[c * 4 + r] = x.get(0, r, c, 0);
            }
        }
        let xt = t(4, 4, tdata);
        let (dy, dx) = x.sobel_edges().unwrap();
        let (tdy, tdx) = xt.sobel_edges().unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((dy.get(0, r, c, 0) - tdx.get(0, c, r, 0)).abs() < 1e-12);
                assert!((dx.get(0, r, c, 0) - tdy.get(0, c, r, 0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slice_and_broadcast() {
        let x = GridTensor::new(
            Shape::new(1, 1, 2, 2).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let c0 = x.slice_channel(0).unwrap();
        assert_eq!(c0.data(), &[1.0, 3.0]);
        let b = c0.broadcast_batch(3).unwrap();
        assert_eq!(b.shape().batch, 3);
        assert_eq!(b.data(), &[1.0, 3.0, 1.0, 3.0, 1.0, 3.0]);
    }
}
