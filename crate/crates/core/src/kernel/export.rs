use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::basis::Kernel;
use super::qscheme::{PFilterGrid, QScheme};
use crate::error::{shape_err, Result};
use crate::io::binary::{decode_f64, f64_bytes, read_framed, write_framed};
use crate::so3::TensorType;

const MAGIC: &[u8; 4] = b"SEK1";

/// JSON header of an exported kernel. `shape` is
/// `[Q_out * dim_out, Q_in * dim_in, S, S, S]` with the filter axes ordered
/// `(z, y, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelHeader {
    pub shape: [usize; 5],
    pub tau_in: TensorType,
    pub tau_out: TensorType,
    pub q_in: QScheme,
    pub q_out: QScheme,
    pub p_filter: usize,
    pub dtype: String,
}

pub fn write_kernel<W: Write>(w: &mut W, k: &Kernel) -> Result<()> {
    let s = k.grid.side();
    let header = KernelHeader {
        shape: [k.cout(), k.cin(), s, s, s],
        tau_in: k.tau_in.clone(),
        tau_out: k.tau_out.clone(),
        q_in: k.q_in.clone(),
        q_out: k.q_out.clone(),
        p_filter: k.grid.radius,
        dtype: "f64".into(),
    };
    write_framed(w, MAGIC, None, &header, &f64_bytes(&k.to_export_layout()))
}

pub fn read_kernel<R: Read>(r: &mut R) -> Result<(KernelHeader, Kernel)> {
    let fr = read_framed::<_, KernelHeader>(r, MAGIC, None)?;
    let h = fr.header;
    let n: usize = h.shape.iter().product();
    let flat = decode_f64(&fr.payload, n, fr.payload_offset)?;
    let grid = PFilterGrid::new(h.p_filter);
    let mut k = Kernel::zeros(grid, h.tau_in.clone(), h.q_in.clone(), h.tau_out.clone(), h.q_out.clone());
    if k.cout() != h.shape[0] || k.cin() != h.shape[1] || grid.side() != h.shape[2] {
        return Err(shape_err("kernel header shape is inconsistent with its metadata"));
    }
    let (nf, ci, co) = (grid.count(), k.cin(), k.cout());
    for o in 0..co {
        for i in 0..ci {
            for f in 0..nf {
                k.data[(f * ci + i) * co + o] = flat[(o * ci + i) * nf + f];
            }
        }
    }
    Ok((h, k))
}
