//! Little-endian byte encoding of a [`QuantizedTensor`].
//!
//! Layout: `kind:u8 exp:f64 group:u32 q_min:f32 q_max:f32 round:u8 precision:u8
//! rank:u32 (label_len:u32 label dim:u64)* n_groups:u32 scales zeros payload_len:u32 payload`.
//! A group of 0 means the entire tensor.

use super::{Grouping, QuantError, QuantKind, QuantScheme, QuantizedTensor, Result};
use crate::tensors::{Mode, Precision};

pub fn encode(q: &QuantizedTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + q.nbytes());
    out.push(q.scheme.kind.tag());
    out.extend(q.scheme.exp.to_le_bytes());
    let group = match q.scheme.group {
        Grouping::EntireTensor => 0u32,
        Grouping::GroupSize(g) => g as u32,
    };
    out.extend(group.to_le_bytes());
    out.extend((q.scheme.q_min as f32).to_le_bytes());
    out.extend((q.scheme.q_max as f32).to_le_bytes());
    out.push(q.scheme.round as u8);
    out.push(match q.precision {
        Precision::C64 => 0,
        Precision::CHalf => 1,
    });
    out.extend((q.modes.len() as u32).to_le_bytes());
    for m in &q.modes {
        let name = m.label.as_str().as_bytes();
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name);
        out.extend((m.dim as u64).to_le_bytes());
    }
    out.extend((q.scales.len() as u32).to_le_bytes());
    for v in q.scales.iter().chain(&q.zeros) {
        out.extend(v.to_le_bytes());
    }
    out.extend((q.payload.len() as u32).to_le_bytes());
    out.extend(&q.payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| QuantError::Corrupt(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<QuantizedTensor> {
    let mut r = Reader { bytes, at: 0 };
    let tag = r.u8()?;
    let kind = QuantKind::from_tag(tag).ok_or_else(|| QuantError::Corrupt(format!("unknown kind tag {tag}")))?;
    let exp = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let group = match r.u32()? {
        0 => Grouping::EntireTensor,
        g => Grouping::GroupSize(g as usize),
    };
    let (q_min, q_max) = (r.f32()? as f64, r.f32()? as f64);
    let round = r.u8()? != 0;
    let precision = match r.u8()? {
        0 => Precision::C64,
        1 => Precision::CHalf,
        p => return Err(QuantError::Corrupt(format!("unknown precision tag {p}"))),
    };
    let scheme = QuantScheme { kind, q_min, q_max, exp, group, round };
    scheme.validate().map_err(|e| QuantError::Corrupt(e.to_string()))?;
    let rank = r.u32()? as usize;
    let mut modes = Vec::with_capacity(rank.min(64));
    for _ in 0..rank {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| QuantError::Corrupt(e.to_string()))?;
        let dim = r.u64()? as usize;
        modes.push(Mode::new(name, dim));
    }
    let groups = r.u32()? as usize;
    let mut floats = Vec::with_capacity(2 * groups.min(1 << 20));
    for _ in 0..2 * groups {
        floats.push(r.f32()?);
    }
    let zeros = floats.split_off(groups);
    let len = r.u32()? as usize;
    let payload = r.take(len)?.to_vec();
    if r.at != bytes.len() {
        return Err(QuantError::Corrupt(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    let q = QuantizedTensor { scheme, modes, precision, scales: floats, zeros, payload };
    // validated here so a decoded tensor always dequantizes
    super::dequantize(&q)?;
    Ok(q)
}
