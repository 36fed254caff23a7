//! Dense row-major f32 tensor and the FXT1 on-disk format.
//!
//! FXT1 layout, all little-endian:
//! bytes 0-3   ASCII "FXT1"
//! bytes 4-7   u32 ndim
//! then        ndim x u32 dims
//! then        product(dims) x f32 values, row-major

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const FXT1_MAGIC: [u8; 4] = *b"FXT1";

/// Dense n-dimensional array of f32, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, rejecting dim/length mismatches and non-finite values.
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!(
                "zero-sized dimension in {dims:?}"
            )));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} imply {expected} elements, data has {}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("tensor element {idx}"),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len: usize = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major offset of a [C, H, W] index.
    pub fn offset3(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert_eq!(self.dims.len(), 3);
        (c * self.dims[1] + y) * self.dims[2] + x
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        w.write_all(&FXT1_MAGIC).map_err(io_err)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
        for &v in &self.data {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut r = BufReader::new(File::open(path).map_err(io_err)?);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if magic != FXT1_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
            });
        }

        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4).map_err(io_err)?;
        let ndim = u32::from_le_bytes(buf4) as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            r.read_exact(&mut buf4).map_err(io_err)?;
            dims.push(u32::from_le_bytes(buf4) as usize);
        }

        let expected: usize = dims.iter().product();
        let mut payload = Vec::new();
        r.read_to_end(&mut payload).map_err(io_err)?;
        if payload.len() != expected * 4 {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: expected * 4,
                got: payload.len(),
            });
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::new(dims, data)
    }
}

/// Confidence heatmap, values in [0, 1], shape [H, W].
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    values: Tensor,
}

impl Heatmap {
    pub fn new(values: Tensor) -> Result<Self> {
        if values.dims().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "heatmap expects [H, W], got {:?}",
                values.dims()
            )));
        }
        if values.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument(
                "heatmap values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn height(&self) -> usize {
        self.values.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.values.dims()[1]
    }

    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.values.data()[y * self.width() + x]
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor {
        self.values
    }
}

/// Per-pixel embedding vectors, shape [D, H, W] with D >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMap {
    values: Tensor,
}

impl EmbeddingMap {
    pub fn new(values: Tensor) -> Result<Self> {
        if values.dims().len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "embedding map expects [D, H, W], got {:?}",
                values.dims()
            )));
        }
        if values.dims()[0] < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must be >= 2, got {}",
                values.dims()[0]
            )));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.values.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.values.dims()[2]
    }

    /// The embedding column at pixel (y, x).
    pub fn column(&self, y: usize, x: usize) -> Vec<f32> {
        (0..self.dim())
            .map(|c| self.values.data()[self.values.offset3(c, y, x)])
            .collect()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor {
        self.values
    }
}
