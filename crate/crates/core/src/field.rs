//! Multi-channel spherical-tensor fields over a voxel grid and a q-scheme.

use crate::error::{shape_err, invalid, Result};
use crate::kernel::QScheme;
use crate::so3::TensorType;

/// Field values laid out `[component][z][y][x][q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    ty: TensorType,
    /// `(P_x, P_y, P_z)`.
    dims: [usize; 3],
    q: QScheme,
    data: Vec<f64>,
}

impl Field {
    pub fn new(ty: TensorType, dims: [usize; 3], q: QScheme, data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(invalid("grid dimensions must be positive"));
        }
        let n = ty.dim() * dims.iter().product::<usize>() * q.len();
        if data.len() != n {
            return Err(shape_err(format!("field needs {n} values, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Self { ty, dims, q, data })
    }

    pub fn zeros(ty: TensorType, dims: [usize; 3], q: QScheme) -> Self {
        let n = ty.dim() * dims.iter().product::<usize>() * q.len();
        Self { ty, dims, q, data: vec![0.0; n] }
    }

    pub fn ty(&self) -> &TensorType {
        &self.ty
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn q(&self) -> &QScheme {
        &self.q
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn voxels(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn index(&self, comp: usize, x: usize, y: usize, z: usize, n: usize) -> usize {
        let [px, py, pz] = self.dims;
        (((comp * pz + z) * py + y) * px + x) * self.q.len() + n
    }

    pub fn get(&self, comp: usize, x: usize, y: usize, z: usize, n: usize) -> f64 {
        self.data[self.index(comp, x, y, z, n)]
    }

    pub fn set(&mut self, comp: usize, x: usize, y: usize, z: usize, n: usize, v: f64) {
        let i = self.index(comp, x, y, z, n);
        self.data[i] = v;
    }

    /// Same values under a new scheme of equal size.
    pub fn with_scheme(mut self, q: QScheme) -> Result<Self> {
        if q.len() != self.q.len() {
            return Err(shape_err("replacement scheme has a different size"));
        }
        self.q = q;
        Ok(self)
    }

    /// Voxel-major copy `[v][n][comp]`, `v = (z * P_y + y) * P_x + x`.
    pub fn to_voxel_major(&self) -> VoxelMajor {
        let (nv, nq, dim) = (self.voxels(), self.q.len(), self.ty.dim());
        let mut data = vec![0.0; nv * nq * dim];
        for c in 0..dim {
            for v in 0..nv {
                for n in 0..nq {
                    data[(v * nq + n) * dim + c] = self.data[(c * nv + v) * nq + n];
                }
            }
        }
        VoxelMajor { dims: self.dims, nq, dim, data }
    }

    pub fn from_voxel_major(ty: TensorType, q: QScheme, vm: &VoxelMajor) -> Result<Self> {
        if vm.dim != ty.dim() || vm.nq != q.len() {
            return Err(shape_err("voxel-major array does not match the field type"));
        }
        let nv: usize = vm.dims.iter().product();
        let (nq, dim) = (vm.nq, vm.dim);
        let mut data = vec![0.0; vm.data.len()];
        for c in 0..dim {
            for v in 0..nv {
                for n in 0..nq {
                    data[(c * nv + v) * nq + n] = vm.data[(v * nq + n) * dim + c];
                }
            }
        }
        Field::new(ty, vm.dims, q, data)
    }
}

/// Working layout for the convolution engine: `[v][n][comp]`, so each voxel
/// holds a contiguous `c' = n * dim + comp` channel vector.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelMajor {
    pub dims: [usize; 3],
    pub nq: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl VoxelMajor {
    pub fn zeros(dims: [usize; 3], nq: usize, dim: usize) -> Self {
        Self { dims, nq, dim, data: vec![0.0; dims.iter().product::<usize>() * nq * dim] }
    }

    pub fn voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn channels(&self) -> usize {
        self.nq * self.dim
    }
}
