//! Immutable 4-D tensor type for gridded fields.
//!
//! Every value in this crate is a `GridTensor` with shape
//! (batch, rows, cols, channels), stored row-major with channel as the
//! fastest-varying axis. Lower-rank data is embedded with singleton axes.

mod ops;
pub mod io;

pub use ops::{
    gaussian_kernel, ConvKernel, Padding, ReduceKind, GAUSSIAN_SMOOTHER_5X5, SOBEL_DX, SOBEL_DY,
};

use crate::error::{GridError, Result};
use std::fmt;
use std::sync::Arc;

/// Tensor shape: (batch, rows, cols, channels), each >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub batch: usize,
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(batch: usize, rows: usize, cols: usize, channels: usize) -> Result<Self> {
        if batch == 0 || rows == 0 || cols == 0 || channels == 0 {
            return Err(GridError::DomainError(format!(
                "shape dimensions must be >= 1, got ({batch}, {rows}, {cols}, {channels})"
            )));
        }
        Ok(Shape {
            batch,
            rows,
            cols,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.batch * self.rows * self.cols * self.channels
    }

    pub fn is_empty(&self) -> bool {
        false // dimensions are all >= 1
    }

    /// True for the 1x1x1x1 shape treated as a scalar.
    pub fn is_scalar(&self) -> bool {
        self.len() == 1
    }

    pub fn dim(&self, axis: Axis) -> usize {
        match axis {
            Axis::Batch => self.batch,
            Axis::Rows => self.rows,
            Axis::Cols => self.cols,
            Axis::Channels => self.channels,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.batch, self.rows, self.cols, self.channels
        )
    }
}

/// The four tensor axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axis {
    Batch,
    Rows,
    Cols,
    Channels,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Batch, Axis::Rows, Axis::Cols, Axis::Channels];

    fn index(self) -> usize {
        match self {
            Axis::Batch => 0,
            Axis::Rows => 1,
            Axis::Cols => 2,
            Axis::Channels => 3,
        }
    }
}

/// A non-empty, duplicate-free subset of the four axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisSet {
    mask: [bool; 4],
}

impl AxisSet {
    pub fn new(axes: &[Axis]) -> Result<Self> {
        if axes.is_empty() {
            return Err(GridError::InvalidAxis("empty axis set".into()));
        }
        let mut mask = [false; 4];
        for &a in axes {
            if mask[a.index()] {
                return Err(GridError::InvalidAxis(format!("duplicate axis {a:?}")));
            }
            mask[a.index()] = true;
        }
        Ok(AxisSet { mask })
    }

    pub fn all() -> Self {
        AxisSet { mask: [true; 4] }
    }

    /// Every axis except batch: the per-sample reduction of the RMSE-by-sample
    /// construction.
    pub fn per_sample() -> Self {
        AxisSet {
            mask: [false, true, true, true],
        }
    }

    pub fn spatial() -> Self {
        AxisSet {
            mask: [false, true, true, false],
        }
    }

    pub fn contains(&self, axis: Axis) -> bool {
        self.mask[axis.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = Axis> + '_ {
        Axis::ALL.into_iter().filter(|a| self.contains(*a))
    }
}

/// Immutable dense 4-D array of f64. Cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensor {
    shape: Shape,
    data: Arc<[f64]>,
}

impl GridTensor {
    /// Construct from a flat row-major buffer, rejecting NaN/Inf.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(GridError::ShapeMismatch {
                context: "GridTensor::new".into(),
                left: format!("{shape} = {} elements", shape.len()),
                right: format!("{} data values", data.len()),
            });
        }
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFiniteOperand(format!(
                "element {i} = {v} in GridTensor::new"
            )));
        }
        Ok(GridTensor {
            shape,
            data: data.into(),
        })
    }

    /// Construct without the finiteness check. Only for callers that need to
    /// carry NaN/Inf deliberately (e.g. tests of the `where` guard).
    pub fn new_unchecked(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(GridError::ShapeMismatch {
                context: "GridTensor::new_unchecked".into(),
                left: format!("{shape} = {} elements", shape.len()),
                right: format!("{} data values", data.len()),
            });
        }
        Ok(GridTensor {
            shape,
            data: data.into(),
        })
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        GridTensor::new(shape, vec![value; shape.len()])
    }

    pub fn zeros(shape: Shape) -> Self {
        GridTensor {
            shape,
            data: vec![0.0; shape.len()].into(),
        }
    }

    pub fn ones(shape: Shape) -> Self {
        GridTensor {
            shape,
            data: vec![1.0; shape.len()].into(),
        }
    }

    /// A 1x1x1x1 tensor holding one value.
    pub fn scalar(value: f64) -> Result<Self> {
        GridTensor::new(Shape::new(1, 1, 1, 1)?, vec![value])
    }

    /// Embed a single 2-D grid as shape (1, rows, cols, 1).
    pub fn from_grid(grid: &[Vec<f64>]) -> Result<Self> {
        let rows = grid.len();
        if rows == 0 {
            return Err(GridError::DomainError("empty grid".into()));
        }
        let cols = grid[0].len();
        if grid.iter().any(|r| r.len() != cols) {
            return Err(GridError::DomainError("ragged grid rows".into()));
        }
        let data: Vec<f64> = grid.iter().flatten().copied().collect();
        GridTensor::new(Shape::new(1, rows, cols, 1)?, data)
    }

    /// Embed per-sample scalars as shape (batch, 1, 1, 1), one sample per value.
    pub fn from_batch_scalars(values: &[f64]) -> Result<Self> {
        GridTensor::new(Shape::new(values.len(), 1, 1, 1)?, values.to_vec())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn flat_index(&self, b: usize, r: usize, c: usize, k: usize) -> usize {
        ((b * self.shape.rows + r) * self.shape.cols + c) * self.shape.channels + k
    }

    #[inline]
    pub fn get(&self, b: usize, r: usize, c: usize, k: usize) -> f64 {
        self.data[self.flat_index(b, r, c, k)]
    }

    /// Coordinates of a flat index, as (batch, row, col, channel).
    pub fn coords(&self, flat: usize) -> (usize, usize, usize, usize) {
        let k = flat % self.shape.channels;
        let rest = flat / self.shape.channels;
        let c = rest % self.shape.cols;
        let rest = rest / self.shape.cols;
        let r = rest % self.shape.rows;
        let b = rest / self.shape.rows;
        (b, r, c, k)
    }

    /// The single value of a scalar tensor.
    pub fn scalar_value(&self) -> Result<f64> {
        if !self.shape.is_scalar() {
            return Err(GridError::NonScalarLoss(self.shape.to_string()));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Replace one element, returning a new tensor. Used by the
    /// finite-difference oracle.
    pub fn with_element(&self, flat: usize, value: f64) -> GridTensor {
        let mut data = self.data.to_vec();
        data[flat] = value;
        GridTensor {
            shape: self.shape,
            data: data.into(),
        }
    }
}
