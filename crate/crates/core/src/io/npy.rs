//! `.npy` reader and writer for rank-3 little-endian float arrays.
//!
//! Writing always emits format version 1.0 with the header padded exactly as
//! numpy does (64-byte alignment, trailing newline). Reading accepts versions
//! 1.0 and 2.0.

use std::path::Path;

use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::patch::LatentTensor;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }
}

impl std::str::FromStr for Dtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }
}

#[derive(Debug, PartialEq)]
struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn header_text(dtype: Dtype, shape: &[usize]) -> String {
    let dims = match shape {
        [one] => format!("({one},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut text = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}",
        dtype.descr()
    );
    // magic (6) + version (2) + length (2) + text + '\n'
    let unpadded = MAGIC.len() + 4 + text.len() + 1;
    text.push_str(&" ".repeat((ALIGN - unpadded % ALIGN) % ALIGN));
    text.push('\n');
    text
}

/// Serializes a tensor as `.npy` bytes. `f32` narrowing rounds to nearest even.
pub fn encode(t: &LatentTensor, dtype: Dtype) -> Vec<u8> {
    let (c, h, w) = t.shape();
    let header = header_text(dtype, &[c, h, w]);
    let mut out = Vec::with_capacity(10 + header.len() + t.data().len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match dtype {
        Dtype::F32 => t.data().iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        Dtype::F64 => t.data().iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

fn need(bytes: &[u8], needed: usize) -> Result<()> {
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    Ok(())
}

/// Parses `.npy` bytes into a tensor widened to `f64`, returning the on-disk dtype too.
pub fn decode(bytes: &[u8]) -> Result<(LatentTensor, Dtype)> {
    need(bytes, MAGIC.len() + 2)?;
    if &bytes[..6] != MAGIC {
        return Err(Error::Format("bad .npy magic".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (len_bytes, header_start) = match major {
        1 => (2, 10),
        2 => (4, 12),
        _ => {
            return Err(Error::Format(format!(
                "unsupported .npy version {major}.{minor}"
            )))
        }
    };
    need(bytes, header_start)?;
    let header_len = if len_bytes == 2 {
        u16::from_le_bytes([bytes[8], bytes[9]]) as usize
    } else {
        u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize
    };
    let data_start = header_start
        .checked_add(header_len)
        .ok_or_else(|| Error::Format("header length overflow".into()))?;
    need(bytes, data_start)?;
    let text = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|_| Error::Format(".npy header is not valid text".into()))?;
    let header = parse_header(text)?;
    let dtype = Dtype::from_descr(&header.descr)?;
    if header.fortran_order {
        return Err(Error::Format("Fortran-ordered arrays are not supported".into()));
    }
    let [c, h, w] = header.shape[..] else {
        return Err(Error::Format(format!(
            "expected a rank-3 array, found shape {:?}",
            header.shape
        )));
    };
    let count = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .ok_or_else(|| Error::Format("array shape overflows".into()))?;
    let payload = count
        .checked_mul(dtype.size())
        .ok_or_else(|| Error::Format("array shape overflows".into()))?;
    need(bytes, data_start + payload)?;
    let body = &bytes[data_start..data_start + payload];
    let data: Vec<f64> = match dtype {
        Dtype::F32 => body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    };
    Ok((LatentTensor::new(c, h, w, data)?, dtype))
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<LatentTensor> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    decode(&bytes).map(|(t, _)| t)
}

pub fn write_npy(path: impl AsRef<Path>, t: &LatentTensor, dtype: Dtype) -> Result<()> {
    write_atomic(path.as_ref(), &encode(t, dtype))
}

// Minimal parser for the python-literal dict numpy writes.
struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Format(format!(
                "malformed .npy header: expected '{}' at byte {}",
                c as char, self.pos
            )))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = self.peek().filter(|q| *q == b'\'' || *q == b'"').ok_or_else(|| {
            Error::Format("malformed .npy header: expected a string".into())
        })?;
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            return Err(Error::Format("malformed .npy header: unterminated string".into()));
        }
        let out = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(out)
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("")
    }

    fn tuple(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(dims);
            }
            let w = self.word();
            let d = w
                .trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("malformed .npy shape entry {w:?}")))?;
            dims.push(d);
            if self.peek() == Some(b',') {
                self.pos += 1;
            }
        }
    }
}

fn parse_header(text: &str) -> Result<Header> {
    let mut cur = Cursor {
        s: text.as_bytes(),
        pos: 0,
    };
    cur.expect(b'{')?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    loop {
        if cur.peek() == Some(b'}') {
            break;
        }
        let key = cur.string()?;
        cur.expect(b':')?;
        match key.as_str() {
            "descr" => descr = Some(cur.string()?),
            "fortran_order" => {
                fortran = Some(match cur.word() {
                    "True" => true,
                    "False" => false,
                    other => return Err(Error::Format(format!("bad fortran_order value {other:?}"))),
                })
            }
            "shape" => shape = Some(cur.tuple()?),
            other => return Err(Error::Format(format!("unexpected .npy header key {other:?}"))),
        }
        if cur.peek() == Some(b',') {
            cur.pos += 1;
        }
    }
    Ok(Header {
        descr: descr.ok_or_else(|| Error::Format(".npy header lacks 'descr'".into()))?,
        fortran_order: fortran.ok_or_else(|| Error::Format(".npy header lacks 'fortran_order'".into()))?,
        shape: shape.ok_or_else(|| Error::Format(".npy header lacks 'shape'".into()))?,
    })
}
