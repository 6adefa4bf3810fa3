//! Little-endian helpers shared by the tensor, flow and trajectory file formats.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("expected magic {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("file ends before the declared payload")]
    Truncated,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("unsupported header: {0}")]
    BadHeader(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FormatError {
    fn from(err: std::io::Error) -> Self {
        FormatError::Io(err.to_string())
    }
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn with_magic(bytes: &'a [u8], magic: &'static [u8; 4]) -> Result<Self, FormatError> {
        if bytes.len() < 4 || &bytes[..4] != magic {
            return Err(FormatError::BadMagic {
                expected: std::str::from_utf8(magic).unwrap_or("?"),
            });
        }
        Ok(Self { bytes, pos: 4 })
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + N)
            .ok_or(FormatError::Truncated)?;
        self.pos += N;
        Ok(chunk.try_into().unwrap())
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take::<1>()?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub(crate) fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    pub(crate) fn skip(&mut self, n: usize) -> Result<(), FormatError> {
        if self.pos + n > self.bytes.len() {
            return Err(FormatError::Truncated);
        }
        self.pos += n;
        Ok(())
    }

    /// Fails unless every byte was consumed.
    pub(crate) fn finish(self) -> Result<(), FormatError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
