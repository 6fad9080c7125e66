//! Binary containers for fitted statistics and transport operators.
//!
//! All integers and floats are little-endian. Matrices are row-major `f64`.
//!
//! Statistics (`PTOSTATS`, version 1):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `PTOSTATS` |
//! | 8 | 4 | version `u32` |
//! | 12 | 4 | reserved, zero |
//! | 16 | 8 | dimension `d` (`u64`) |
//! | 24 | 8 | sample count `N` (`u64`) |
//! | 32 | 8·d | mean |
//! | … | 8·d² | covariance |
//!
//! Operators (`PTOXFORM`, version 1):
//!
//! | size | field |
//! |---|---|
//! | 8 | magic `PTOXFORM` |
//! | 4 | version `u32` |
//! | 1 | kind (0 deterministic, 1 stochastic) |
//! | 1 | flatten order tag (0 = channel, patch row, patch column) |
//! | 1 | noise flag (1 if a noise covariance follows `b`) |
//! | 1 | reserved, zero |
//! | 4 | channels `u32` |
//! | 4 | patch size `u32` |
//! | 8 | dimension `d = c·p²` (`u64`) |
//! | 8 | stabilization shift (`f64`, 0 if none) |
//! | 8 + 8·d + 8·d² | source stats: `N`, mean, covariance |
//! | 8 + 8·d + 8·d² | target stats: `N`, mean, covariance |
//! | 32 | SHA-256 of the source stats container |
//! | 32 | SHA-256 of the target stats container |
//! | 8·d² | linear map `A` |
//! | 8·d | shift `b` |
//! | 8·d² | noise covariance, only when the noise flag is set |
//!
//! Loading an operator checks both fingerprints against the embedded
//! statistics and re-verifies the transport certificates.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, TransportKind, TransportOperator};
use crate::pipeline::{FittedTransport, FlattenOrder, LatentGeometry};
use crate::stats::GaussianStats;

pub const STATS_MAGIC: &[u8; 8] = b"PTOSTATS";
pub const OPERATOR_MAGIC: &[u8; 8] = b"PTOXFORM";
pub const STATS_VERSION: u32 = 1;
pub const OPERATOR_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        // row-major
        self.f64s(m.transpose().as_slice());
    }
    fn stats_body(&mut self, s: &GaussianStats) {
        self.u64(s.count());
        self.f64s(s.mean().as_slice());
        self.matrix(s.cov().matrix());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| Error::Format("length overflow".into()))?;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                needed: end,
                found: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
    fn matrix(&mut self, d: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(d, d, &self.f64s(d * d)?))
    }
    fn stats_body(&mut self, d: usize) -> Result<GaussianStats> {
        let count = self.u64()?;
        let mean = DVector::from_vec(self.f64s(d)?);
        let cov = SymMatrix::new(self.matrix(d)?)?;
        GaussianStats::new(mean, cov, count)
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after container",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
    fn header(&mut self, magic: &[u8; 8], version: u32) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::Format(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let found = self.u32()?;
        if found != version {
            return Err(Error::Version {
                found,
                expected: version,
            });
        }
        Ok(())
    }
}

/// Checks that `d` square matrices fit in what is left of the input before
/// anything is allocated.
fn check_dim(d: u64, remaining: usize, blocks: u64) -> Result<usize> {
    let bytes = d
        .checked_mul(d)
        .and_then(|dd| dd.checked_mul(8 * blocks))
        .ok_or_else(|| Error::Format(format!("implausible dimension {d}")))?;
    if d == 0 || bytes > remaining as u64 {
        return Err(Error::Format(format!(
            "dimension {d} does not fit in the remaining {remaining} bytes"
        )));
    }
    Ok(d as usize)
}

pub fn encode_stats(s: &GaussianStats) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(32 + 8 * s.dim() * (s.dim() + 1)));
    w.0.extend_from_slice(STATS_MAGIC);
    w.u32(STATS_VERSION);
    w.u32(0);
    w.u64(s.dim() as u64);
    w.stats_body(s);
    w.0
}

pub fn decode_stats(bytes: &[u8]) -> Result<GaussianStats> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(STATS_MAGIC, STATS_VERSION)?;
    r.u32()?;
    let d = r.u64()?;
    let d = check_dim(d, bytes.len().saturating_sub(r.pos), 1)?;
    let s = r.stats_body(d)?;
    r.finish()?;
    Ok(s)
}

/// SHA-256 of the statistics container.
pub fn stats_fingerprint(s: &GaussianStats) -> [u8; 32] {
    Sha256::digest(encode_stats(s)).into()
}

pub fn save_stats(path: impl AsRef<Path>, s: &GaussianStats) -> Result<()> {
    write_atomic(path.as_ref(), &encode_stats(s))
}

pub fn load_stats(path: impl AsRef<Path>) -> Result<GaussianStats> {
    decode_stats(&read_file(path.as_ref())?)
}

pub fn encode_operator(t: &FittedTransport) -> Vec<u8> {
    let op = t.operator();
    let geom = t.geometry();
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(OPERATOR_MAGIC);
    w.u32(OPERATOR_VERSION);
    w.u8(match op.kind() {
        TransportKind::Deterministic => 0,
        TransportKind::Stochastic => 1,
    });
    w.u8(t.flatten_order().tag());
    w.u8(op.noise_cov().is_some() as u8);
    w.u8(0);
    w.u32(geom.channels as u32);
    w.u32(geom.patch as u32);
    w.u64(op.dim() as u64);
    w.f64s([op.stabilization()].iter());
    w.stats_body(t.source());
    w.stats_body(t.target());
    w.0.extend_from_slice(t.source_fingerprint());
    w.0.extend_from_slice(t.target_fingerprint());
    w.matrix(op.linear());
    w.f64s(op.shift().as_slice());
    if let Some(n) = op.noise_cov() {
        w.matrix(n.matrix());
    }
    w.0
}

fn corrupt(e: Error) -> Error {
    match e {
        Error::Version { .. } | Error::Truncated { .. } | Error::CorruptOperator(_) | Error::Format(_) => e,
        other => Error::CorruptOperator(other.to_string()),
    }
}

pub fn decode_operator(bytes: &[u8]) -> Result<FittedTransport> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(OPERATOR_MAGIC, OPERATOR_VERSION)?;
    let kind = r.u8()?;
    let order = FlattenOrder::from_tag(r.u8()?)?;
    let has_noise = r.u8()?;
    r.u8()?;
    let channels = r.u32()? as usize;
    let patch = r.u32()? as usize;
    let d = r.u64()?;
    let d = check_dim(d, bytes.len().saturating_sub(r.pos), 3)?;
    let geometry = LatentGeometry { channels, patch };
    if geometry.dim() != d {
        return Err(Error::CorruptOperator(format!(
            "dimension {d} does not equal channels·patch² = {}",
            geometry.dim()
        )));
    }
    let stabilization = r.f64()?;
    let source = r.stats_body(d).map_err(corrupt)?;
    let target = r.stats_body(d).map_err(corrupt)?;
    let src_fp = r.take(32)?;
    let tgt_fp = r.take(32)?;
    if src_fp != stats_fingerprint(&source) || tgt_fp != stats_fingerprint(&target) {
        return Err(Error::CorruptOperator(
            "embedded statistics do not match their fingerprints".into(),
        ));
    }
    let linear = r.matrix(d)?;
    let shift = DVector::from_vec(r.f64s(d)?);
    let noise = match has_noise {
        0 => None,
        1 => Some(SymMatrix::new(r.matrix(d)?).map_err(corrupt)?),
        f => return Err(Error::Format(format!("bad noise flag {f}"))),
    };
    r.finish()?;
    let op = TransportOperator::from_parts(linear, shift, noise, stabilization).map_err(corrupt)?;
    let expected_kind = match kind {
        0 => TransportKind::Deterministic,
        1 => TransportKind::Stochastic,
        k => return Err(Error::Format(format!("bad operator kind {k}"))),
    };
    if op.kind() != expected_kind {
        return Err(Error::CorruptOperator("operator kind disagrees with noise flag".into()));
    }
    FittedTransport::from_parts(op, geometry, order, source, target).map_err(corrupt)
}

pub fn save_operator(path: impl AsRef<Path>, t: &FittedTransport) -> Result<()> {
    write_atomic(path.as_ref(), &encode_operator(t))
}

pub fn load_operator(path: impl AsRef<Path>) -> Result<FittedTransport> {
    decode_operator(&read_file(path.as_ref())?)
}
