//! `QSTF` field container: magic, u16 version, u32 header length, JSON
//! header, then little-endian samples in field index order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binary::{decode_f32, decode_f64, f32_bytes, f64_bytes, read_framed, write_framed};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::QScheme;
use crate::so3::TensorType;

const MAGIC: &[u8; 4] = b"QSTF";
const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QstfHeader {
    pub p_dims: [usize; 3],
    pub tensor_type: TensorType,
    pub q_scheme: QScheme,
    pub dtype: Dtype,
}

pub fn write_field<W: Write>(w: &mut W, field: &Field, dtype: Dtype) -> Result<()> {
    let header = QstfHeader { p_dims: field.dims(), tensor_type: field.ty().clone(), q_scheme: field.q().clone(), dtype };
    let payload = match dtype {
        Dtype::F32 => f32_bytes(field.data()),
        Dtype::F64 => f64_bytes(field.data()),
    };
    write_framed(w, MAGIC, Some(VERSION), &header, &payload)
}

pub fn read_field<R: Read>(r: &mut R) -> Result<(Field, Dtype)> {
    let fr = read_framed::<_, QstfHeader>(r, MAGIC, Some(VERSION))?;
    let h = fr.header;
    let n = h.tensor_type.dim() * h.p_dims.iter().product::<usize>() * h.q_scheme.len();
    let data = match h.dtype {
        Dtype::F32 => decode_f32(&fr.payload, n, fr.payload_offset)?,
        Dtype::F64 => decode_f64(&fr.payload, n, fr.payload_offset)?,
    };
    let field = Field::new(h.tensor_type, h.p_dims, h.q_scheme, data)
        .map_err(|e| Error::Malformed { offset: fr.payload_offset, msg: e.to_string() })?;
    Ok((field, h.dtype))
}

pub fn save_field(path: &Path, field: &Field, dtype: Dtype) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    Ok(read_field(&mut BufReader::new(File::open(path)?))?.0)
}

/// Per-voxel scalar map (labels, masks, probabilities) as a `τ = (1)` field
/// on the single-point scheme.
pub fn scalar_map(dims: [usize; 3], values: Vec<f64>) -> Result<Field> {
    Field::new(TensorType::scalars(1), dims, QScheme::zero(), values)
}
