//! Per-pixel 2-vector fields with a validity mask, and the `FLW1` file format.
//!
//! Values are held in `f64` in memory and stored as `f32` on disk.

use crate::codec::{Cursor, FormatError};

pub const FLOW_MAGIC: &[u8; 4] = b"FLW1";

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    vectors: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    /// All-zero, all-invalid field.
    pub fn invalid(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            vectors: vec![[0.0; 2]; height * width],
            valid: vec![false; height * width],
        }
    }

    /// Every pixel valid and equal to `(u, v)`.
    pub fn uniform(height: usize, width: usize, u: f64, v: f64) -> Self {
        Self {
            height,
            width,
            vectors: vec![[u, v]; height * width],
            valid: vec![true; height * width],
        }
    }

    /// Builds a field from a closure returning `None` for invalid pixels.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Option<[f64; 2]>) -> Self {
        let mut field = Self::invalid(height, width);
        for y in 0..height {
            for x in 0..width {
                if let Some(uv) = f(x, y) {
                    field.set(x, y, uv);
                }
            }
        }
        field
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
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[f64; 2]> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.vectors[i])
    }

    /// Stored vector regardless of validity.
    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> [f64; 2] {
        self.vectors[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Stores `uv` and marks the pixel valid.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, uv: [f64; 2]) {
        let i = y * self.width + x;
        self.vectors[i] = uv;
        self.valid[i] = true;
    }

    /// Zeroes the pixel and marks it invalid.
    #[inline]
    pub fn clear(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.vectors[i] = [0.0; 2];
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// `(x, y, vector)` for every valid pixel in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, [f64; 2])> + '_ {
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i % self.width, i / self.width, self.vectors[i]))
    }

    /// Multiplies every vector by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for uv in &mut out.vectors {
            uv[0] *= s;
            uv[1] *= s;
        }
        out
    }

    /// Adds `(du, dv)` to every valid vector.
    pub fn offset(&self, du: f64, dv: f64) -> Self {
        let mut out = self.clone();
        for (uv, &ok) in out.vectors.iter_mut().zip(&self.valid) {
            if ok {
                uv[0] += du;
                uv[1] += dv;
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 12 * self.vectors.len());
        out.extend_from_slice(FLOW_MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for (uv, &ok) in self.vectors.iter().zip(&self.valid) {
            out.extend_from_slice(&(uv[0] as f32).to_le_bytes());
            out.extend_from_slice(&(uv[1] as f32).to_le_bytes());
            out.extend_from_slice(&[ok as u8, 0, 0, 0]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut cur = Cursor::with_magic(bytes, FLOW_MAGIC)?;
        let height = cur.u32()? as usize;
        let width = cur.u32()? as usize;
        let n = height
            .checked_mul(width)
            .ok_or_else(|| FormatError::BadHeader("dimensions overflow".into()))?;
        if cur.remaining() < n * 12 {
            return Err(FormatError::Truncated);
        }
        let mut field = Self::invalid(height, width);
        for i in 0..n {
            let u = cur.f32()? as f64;
            let v = cur.f32()? as f64;
            let ok = cur.u8()? != 0;
            cur.skip(3)?;
            field.vectors[i] = [u, v];
            field.valid[i] = ok;
        }
        cur.finish()?;
        Ok(field)
    }
}
