//! Grid file formats.
//!
//! "GRD1": 4 magic bytes `GRD1`, four u32 little-endian dims
//! (batch, rows, cols, channels), then batch*rows*cols*channels f64
//! little-endian values in row-major order, channel fastest.
//!
//! CSV: a single 2-D grid, one row per line, comma-separated, loaded as
//! shape (1, rows, cols, 1).

use super::{GridTensor, Shape};
use crate::error::{GridError, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const GRD1_MAGIC: &[u8; 4] = b"GRD1";

pub fn write_grd1<W: Write>(w: &mut W, t: &GridTensor) -> Result<()> {
    let s = t.shape();
    w.write_all(GRD1_MAGIC)?;
    for dim in [s.batch, s.rows, s.cols, s.channels] {
        let dim = u32::try_from(dim)
            .map_err(|_| GridError::DomainError(format!("dimension {dim} exceeds u32")))?;
        w.write_all(&dim.to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grd1<R: Read>(r: &mut R) -> Result<GridTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GRD1_MAGIC {
        return Err(GridError::Parse(format!(
            "bad magic {:?}, expected GRD1",
            magic
        )));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        *d = u32::from_le_bytes(buf) as usize;
    }
    let shape = Shape::new(dims[0], dims[1], dims[2], dims[3])?;
    let mut data = Vec::with_capacity(shape.len());
    let mut buf = [0u8; 8];
    for _ in 0..shape.len() {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    GridTensor::new(shape, data)
}

pub fn read_csv_grid<R: Read>(r: &mut R) -> Result<GridTensor> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut grid: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| {
                    GridError::Parse(format!("line {}: {cell:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        grid.push(row);
    }
    GridTensor::from_grid(&grid)
}

/// Load a tensor from a path, sniffing GRD1 magic vs CSV text.
pub fn load_tensor(path: &Path) -> Result<GridTensor> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= 4 && &bytes[..4] == GRD1_MAGIC {
        read_grd1(&mut &bytes[..])
    } else {
        read_csv_grid(&mut &bytes[..])
    }
}

pub fn save_grd1(path: &Path, t: &GridTensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_grd1(&mut f, t)
}
