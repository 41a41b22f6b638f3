use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::io::binary::{decode_f64, f64_bytes, read_framed, write_framed};

const MAGIC: &[u8; 4] = b"SEP1";

/// Named contiguous slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl ParamGroup {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsHeader {
    pub config_hash: String,
    pub n_params: usize,
    pub groups: Vec<ParamGroup>,
}

pub fn write_params<W: Write>(w: &mut W, config_hash: &str, groups: &[ParamGroup], params: &[f64]) -> Result<()> {
    let header = ParamsHeader { config_hash: config_hash.to_string(), n_params: params.len(), groups: groups.to_vec() };
    write_framed(w, MAGIC, None, &header, &f64_bytes(params))
}

/// Reads a checkpoint and checks it against the expected config hash and
/// parameter count.
pub fn read_params<R: Read>(r: &mut R, expected_hash: &str, expected_len: usize) -> Result<(ParamsHeader, Vec<f64>)> {
    let fr = read_framed::<_, ParamsHeader>(r, MAGIC, None)?;
    let h = fr.header;
    if h.config_hash != expected_hash {
        return Err(Error::ConfigHash { expected: expected_hash.to_string(), found: h.config_hash });
    }
    if h.n_params != expected_len {
        return Err(shape_err(format!("checkpoint holds {} parameters, model needs {expected_len}", h.n_params)));
    }
    let p = decode_f64(&fr.payload, h.n_params, fr.payload_offset)?;
    Ok((h, p))
}
