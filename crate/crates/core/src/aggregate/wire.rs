//! Inter-worker message encoding.
//!
//! Length-prefixed little-endian records: `[u32 body_len][u32 partition_id]
//! [u8 kind][payload]`, where `body_len` counts everything after the length
//! field. The collectives run in-process, but every exchanged value passes
//! through this encoding so a real transport can slot in unchanged.
//!
//! Kinds: 1 = centroid summary (flags byte, class masses, dense means),
//! 2 = model (sparse index/value pairs), 3 = feature scale (dense).

use crate::centroid::CentroidSummary;
use crate::error::{Error, Result};
use crate::objective::ModelVector;

const KIND_CENTROIDS: u8 = 1;
const KIND_MODEL: u8 = 2;
const KIND_SCALE: u8 = 3;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(partition_id: usize, kind: u8) -> Self {
        let mut buf = vec![0u8; 4];
        buf.extend_from_slice(&(partition_id as u32).to_le_bytes());
        buf.push(kind);
        Writer { buf }
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn finish(mut self) -> Vec<u8> {
        let body = (self.buf.len() - 4) as u32;
        self.buf[..4].copy_from_slice(&body.to_le_bytes());
        self.buf
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Validates the header and positions after the kind byte.
    fn open(buf: &'a [u8], expect_kind: u8) -> Result<(usize, Self)> {
        if buf.len() < 9 {
            return Err(Error::Wire("record shorter than header".into()));
        }
        let body = u32::from_le_bytes(buf[..4].try_into().unwrap()) as usize;
        if buf.len() != 4 + body {
            return Err(Error::Wire(format!(
                "length prefix {} does not match record size {}",
                body,
                buf.len() - 4
            )));
        }
        let partition_id = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
        let kind = buf[8];
        if kind != expect_kind {
            return Err(Error::Wire(format!(
                "expected kind {expect_kind}, found {kind}"
            )));
        }
        Ok((partition_id, Reader { buf, pos: 9 }))
    }

    fn u8(&mut self) -> Result<u8> {
        if self.pos + 1 > self.buf.len() {
            return Err(Error::Wire("truncated payload".into()));
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        Ok(v)
    }

    fn u64(&mut self) -> Result<u64> {
        if self.pos + 8 > self.buf.len() {
            return Err(Error::Wire("truncated payload".into()));
        }
        let v = u64::from_le_bytes(self.buf[self.pos..self.pos + 8].try_into().unwrap());
        self.pos += 8;
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn close(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Wire(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_centroids(c: &CentroidSummary) -> Vec<u8> {
    let mut w = Writer::new(c.partition_id, KIND_CENTROIDS);
    let flags = (c.valid_plus as u8) | ((c.valid_minus as u8) << 1);
    w.buf.push(flags);
    w.u64(c.mass_plus);
    w.u64(c.mass_minus);
    w.u64(c.mu_plus.len() as u64);
    for &v in &c.mu_plus {
        w.f64(v);
    }
    for &v in &c.mu_minus {
        w.f64(v);
    }
    w.finish()
}

pub fn decode_centroids(buf: &[u8]) -> Result<CentroidSummary> {
    let (partition_id, mut r) = Reader::open(buf, KIND_CENTROIDS)?;
    let flags = r.u8()?;
    if flags > 3 {
        return Err(Error::Wire(format!("invalid centroid flags {flags:#x}")));
    }
    let mass_plus = r.u64()?;
    let mass_minus = r.u64()?;
    let d = r.u64()? as usize;
    let mut mu_plus = Vec::with_capacity(d);
    for _ in 0..d {
        mu_plus.push(r.f64()?);
    }
    let mut mu_minus = Vec::with_capacity(d);
    for _ in 0..d {
        mu_minus.push(r.f64()?);
    }
    r.close()?;
    Ok(CentroidSummary {
        partition_id,
        mu_plus,
        mu_minus,
        mass_plus,
        mass_minus,
        valid_plus: flags & 1 != 0,
        valid_minus: flags & 2 != 0,
    })
}

/// Models travel sparse: only nonzero coefficients are shipped. Intercepts
/// never occur in the distributed rounds and are rejected.
pub fn encode_model(partition_id: usize, m: &ModelVector) -> Result<Vec<u8>> {
    if m.intercept.is_some() {
        return Err(Error::Wire("model intercepts are not transportable".into()));
    }
    let mut w = Writer::new(partition_id, KIND_MODEL);
    w.u64(m.dim() as u64);
    w.u64(m.nnz() as u64);
    for (j, &v) in m.coefficients.iter().enumerate() {
        if v != 0.0 {
            w.u64(j as u64);
            w.f64(v);
        }
    }
    Ok(w.finish())
}

pub fn decode_model(buf: &[u8]) -> Result<(usize, ModelVector)> {
    let (partition_id, mut r) = Reader::open(buf, KIND_MODEL)?;
    let d = r.u64()? as usize;
    let nnz = r.u64()? as usize;
    let mut coefficients = vec![0.0; d];
    let mut prev: Option<usize> = None;
    for _ in 0..nnz {
        let j = r.u64()? as usize;
        if j >= d {
            return Err(Error::Wire(format!("coefficient index {j} out of range {d}")));
        }
        if prev.is_some_and(|p| j <= p) {
            return Err(Error::Wire("coefficient indices not increasing".into()));
        }
        prev = Some(j);
        coefficients[j] = r.f64()?;
    }
    r.close()?;
    Ok((partition_id, ModelVector::new(coefficients)))
}

pub fn encode_scale(partition_id: usize, alpha: &[f64]) -> Vec<u8> {
    let mut w = Writer::new(partition_id, KIND_SCALE);
    w.u64(alpha.len() as u64);
    for &v in alpha {
        w.f64(v);
    }
    w.finish()
}

pub fn decode_scale(buf: &[u8]) -> Result<(usize, Vec<f64>)> {
    let (partition_id, mut r) = Reader::open(buf, KIND_SCALE)?;
    let d = r.u64()? as usize;
    let mut alpha = Vec::with_capacity(d);
    for _ in 0..d {
        alpha.push(r.f64()?);
    }
    r.close()?;
    Ok((partition_id, alpha))
}
