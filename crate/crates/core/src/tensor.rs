//! Dense `C x H x W` float tensors and the `DTN1` file format.

use crate::codec::{Cursor, FormatError};

pub const TENSOR_MAGIC: &[u8; 4] = b"DTN1";

/// Channel-outermost, row-major `f32` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl DenseTensor {
    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    /// Panics if `data.len() != channels * height * width`.
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), channels * height * width, "tensor data length mismatch");
        Self { channels, height, width, data }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// One `H x W` plane.
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    /// Copies channel `c` into a `1 x H x W` tensor.
    pub fn layer(&self, c: usize) -> DenseTensor {
        DenseTensor::from_vec(1, self.height, self.width, self.plane(c).to_vec())
    }

    /// Values across all channels at one pixel.
    pub fn column(&self, y: usize, x: usize) -> Vec<f32> {
        (0..self.channels).map(|c| self.get(c, y, x)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bitwise equality, treating `-0.0` and `0.0` as different.
    pub fn bit_eq(&self, other: &DenseTensor) -> bool {
        self.dims() == other.dims()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 + 12 + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&3u32.to_le_bytes());
        for d in [self.channels, self.height, self.width] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Reads a rank-3 tensor. Rank 2 (`H x W`) is accepted as a single channel.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut cur = Cursor::with_magic(bytes, TENSOR_MAGIC)?;
        let rank = cur.u32()?;
        let (channels, height, width) = match rank {
            2 => (1, cur.u32()? as usize, cur.u32()? as usize),
            3 => (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize),
            r => return Err(FormatError::BadHeader(format!("rank {r}, expected 2 or 3"))),
        };
        let n = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| FormatError::BadHeader("dimensions overflow".into()))?;
        if cur.remaining() < n * 4 {
            return Err(FormatError::Truncated);
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(cur.f32()?);
        }
        cur.finish()?;
        Ok(Self { channels, height, width, data })
    }
}
