//! Framed little-endian containers: magic, optional u16 version, u32 header
//! length, UTF-8 JSON header, raw payload.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

fn malformed(offset: u64, msg: impl Into<String>) -> Error {
    Error::Malformed { offset, msg: msg.into() }
}

pub fn write_framed<W: Write, H: Serialize>(w: &mut W, magic: &[u8; 4], version: Option<u16>, header: &H, payload: &[u8]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(magic)?;
    if let Some(v) = version {
        w.write_all(&v.to_le_bytes())?;
    }
    let len = u32::try_from(json.len()).map_err(|_| malformed(4, "header too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(payload)?;
    Ok(())
}

/// Parsed header plus the payload bytes and the payload's byte offset.
pub struct Framed<H> {
    pub header: H,
    pub payload: Vec<u8>,
    pub payload_offset: u64,
}

pub fn read_framed<R: Read, H: DeserializeOwned>(r: &mut R, magic: &[u8; 4], version: Option<u16>) -> Result<Framed<H>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let take = |off: usize, n: usize| -> Result<&[u8]> {
        bytes.get(off..off + n).ok_or_else(|| malformed(off as u64, format!("unexpected end of file, wanted {n} bytes")))
    };
    if take(0, 4)? != magic {
        return Err(malformed(0, format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    let mut off = 4;
    if let Some(v) = version {
        let got = u16::from_le_bytes(take(off, 2)?.try_into().expect("2 bytes"));
        if got != v {
            return Err(malformed(off as u64, format!("unsupported version {got}, expected {v}")));
        }
        off += 2;
    }
    let len = u32::from_le_bytes(take(off, 4)?.try_into().expect("4 bytes")) as usize;
    off += 4;
    let header: H = serde_json::from_slice(take(off, len)?).map_err(|e| malformed(off as u64, format!("bad JSON header: {e}")))?;
    off += len;
    Ok(Framed { header, payload: bytes[off..].to_vec(), payload_offset: off as u64 })
}

pub fn f64_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn f32_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|&x| (x as f32).to_le_bytes()).collect()
}

/// Decodes `n` f64 values, failing with the offending offset on a size mismatch.
pub fn decode_f64(bytes: &[u8], n: usize, offset: u64) -> Result<Vec<f64>> {
    if bytes.len() != n * 8 {
        return Err(malformed(offset, format!("payload has {} bytes, header implies {}", bytes.len(), n * 8)));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn decode_f32(bytes: &[u8], n: usize, offset: u64) -> Result<Vec<f64>> {
    if bytes.len() != n * 4 {
        return Err(malformed(offset, format!("payload has {} bytes, header implies {}", bytes.len(), n * 4)));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect())
}
