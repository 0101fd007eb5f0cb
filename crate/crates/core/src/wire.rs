//! Byte-level framing shared by the two stream formats: LEB128 varints and
//! packed 2-bit element tags.

use thiserror::Error;

use crate::entropy::EntropyError;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),
    #[error("stream truncated at byte {0}")]
    Truncated(usize),
    #[error("varint at byte {0} overflows 64 bits")]
    VarintOverflow(usize),
    #[error("{0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("invalid element tag {tag} at element {index}")]
    BadTag { index: usize, tag: u8 },
    #[error("header declares {declared} tokens but the payload holds {actual}")]
    TokenCount { declared: u64, actual: u64 },
    #[error("malformed element {index}: {message}")]
    Malformed { index: usize, message: String },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Cursor over a byte slice.
pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.bytes.len() - self.pos < n {
            return Err(WireError::Truncated(self.bytes.len()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn byte(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn varint(&mut self) -> Result<u64, WireError> {
        let start = self.pos;
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.byte()?;
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(WireError::VarintOverflow(start))
    }

    pub fn expect_magic(&mut self, magic: &'static str) -> Result<(), WireError> {
        match self.take(magic.len()) {
            Ok(m) if m == magic.as_bytes() => Ok(()),
            _ => Err(WireError::BadMagic { expected: magic }),
        }
    }

    pub fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }
}

/// Packs 2-bit tags four to a byte, first element in the high bits.
pub fn pack_tags(tags: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; tags.len().div_ceil(4)];
    for (i, &t) in tags.iter().enumerate() {
        debug_assert!(t < 4);
        out[i / 4] |= (t & 0b11) << (6 - 2 * (i % 4));
    }
    out
}

pub fn unpack_tags(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n)
        .map(|i| (bytes[i / 4] >> (6 - 2 * (i % 4))) & 0b11)
        .collect()
}
