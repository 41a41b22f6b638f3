//! Field-level layers: pq/p convolutions, q-reductions, b0 averaging and
//! gated nonlinearities.
//!
//! Each op has a [`Field`] entry point and, where the model needs gradients,
//! a voxel-major forward/backward pair.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conv::{conv3d_at, conv3d_grad_input, conv3d_grad_kernel, Precision};
use crate::error::{invalid, shape_err, Error, Result};
use crate::field::{Field, VoxelMajor};
use crate::kernel::{Kernel, KernelBasis, QScheme, Q_TOL};
use crate::radial::RadialBasisSpec;
use crate::so3::{TensorType, Vec3};

fn check_input(kernel: &Kernel, input: &Field) -> Result<()> {
    if input.ty() != &kernel.tau_in {
        return Err(shape_err(format!("input type {} does not match kernel input type {}", input.ty(), kernel.tau_in)));
    }
    if input.q().len() != kernel.q_in.len() {
        return Err(shape_err(format!("input has {} q-samples, kernel expects {}", input.q().len(), kernel.q_in.len())));
    }
    Ok(())
}

/// Same-size zero-padded convolution on a voxel-major array.
pub fn conv_vm(kernel: &Kernel, x: &VoxelMajor, precision: Precision) -> VoxelMajor {
    let data = conv3d_at(precision, &x.data, x.dims, kernel.cin(), &kernel.data, kernel.grid, kernel.cout());
    VoxelMajor { dims: x.dims, nq: kernel.q_out.len(), dim: kernel.tau_out.dim(), data }
}

/// Gradients of [`conv_vm`] wrt its input and its kernel.
pub fn conv_vm_backward(kernel: &Kernel, x: &VoxelMajor, dy: &VoxelMajor) -> (VoxelMajor, Vec<f64>) {
    let dx = conv3d_grad_input(&dy.data, x.dims, kernel.cout(), &kernel.data, kernel.grid, kernel.cin());
    let dk = conv3d_grad_kernel(&x.data, &dy.data, x.dims, kernel.cin(), kernel.cout(), kernel.grid);
    (VoxelMajor { dims: x.dims, nq: x.nq, dim: x.dim, data: dx }, dk)
}

pub fn pq_conv(kernel: &Kernel, input: &Field) -> Result<Field> {
    pq_conv_with(kernel, input, Precision::Double)
}

pub fn pq_conv_with(kernel: &Kernel, input: &Field, precision: Precision) -> Result<Field> {
    check_input(kernel, input)?;
    let out = conv_vm(kernel, &input.to_voxel_major(), precision);
    Field::from_voxel_major(kernel.tau_out.clone(), kernel.q_out.clone(), &out)
}

/// Direct double sum over output/input voxels and q-samples with the kernel
/// evaluated from the continuous filter definitions at `Δp = p_out - p_in`.
/// Cost is `O(P * S³ * Q_out * Q_in)`; meant for small instances.
pub fn pq_conv_reference(basis: &KernelBasis, w: &[f64], radial_p: Option<&RadialBasisSpec>, input: &Field) -> Result<Field> {
    if input.ty() != &basis.ty_in || input.q().len() != basis.q_in.len() {
        return Err(shape_err("input does not match the basis"));
    }
    if w.len() != basis.n_weights() {
        return Err(shape_err("weight length mismatch"));
    }
    let [px, py, pz] = input.dims();
    let r = basis.grid.radius as i64;
    let (qo, qi) = (&basis.q_out, &basis.q_in);
    let (dim_in, dim_out) = (basis.ty_in.dim(), basis.ty_out.dim());
    let mut cache: HashMap<([i64; 3], usize, usize), DMatrix<f64>> = HashMap::new();
    let mut out = Field::zeros(basis.ty_out.clone(), input.dims(), qo.clone());
    for z in 0..pz as i64 {
        for y in 0..py as i64 {
            for x in 0..px as i64 {
                for (zi, yi, xi) in (-r..=r).flat_map(|a| (-r..=r).flat_map(move |b| (-r..=r).map(move |c| (z + a, y + b, x + c)))) {
                    if zi < 0 || yi < 0 || xi < 0 || zi >= pz as i64 || yi >= py as i64 || xi >= px as i64 {
                        continue;
                    }
                    let d = [x - xi, y - yi, z - zi];
                    for no in 0..qo.len() {
                        for ni in 0..qi.len() {
                            let k = cache.entry((d, no, ni)).or_insert_with(|| {
                                let dp = Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64);
                                basis.eval_continuous(w, radial_p, &dp, qo.get(no), qi.get(ni))
                            });
                            for a in 0..dim_out {
                                let mut s = 0.0;
                                for b in 0..dim_in {
                                    s += k[(a, b)] * input.get(b, xi as usize, yi as usize, zi as usize, ni);
                                }
                                let idx = out.index(a, x as usize, y as usize, z as usize, no);
                                out.data_mut()[idx] += s;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// pq-convolution restricted to single-sample q-schemes.
pub fn p_conv(kernel: &Kernel, input: &Field) -> Result<Field> {
    if kernel.q_in.len() != 1 || kernel.q_out.len() != 1 {
        return Err(invalid("p_conv needs single-sample q-schemes"));
    }
    pq_conv(kernel, input)
}

fn is_zero_scheme(q: &QScheme) -> bool {
    q.len() == 1 && q.get(0).norm() <= Q_TOL
}

/// Gradual q-reduction: a pq-convolution onto `Q_out = {0}`.
pub fn q_reduce_gradual(kernel: &Kernel, input: &Field) -> Result<Field> {
    if !is_zero_scheme(&kernel.q_out) {
        return Err(invalid("gradual q-reduction needs the output scheme {(0,0,0)}"));
    }
    pq_conv(kernel, input)
}

/// Late q-reduction: `out(p, c) = sum_n sum_k w[c][k] phi_k(|q_n|) in(p, q_n, c) / Q`.
#[derive(Clone, Debug)]
pub struct QLengthAverage {
    pub ty: TensorType,
    /// `phi[n][k] / Q`.
    table: Vec<Vec<f64>>,
    k: usize,
}

impl QLengthAverage {
    pub fn new(ty: &TensorType, q: &QScheme, radial: &RadialBasisSpec) -> Result<Self> {
        radial.validate()?;
        if radial.is_learnable() {
            return Err(invalid("q-length radial basis must be fixed"));
        }
        let nq = q.len() as f64;
        let table = q.vectors().iter().map(|v| radial.eval(v.norm()).map(|p| p.into_iter().map(|x| x / nq).collect())).collect::<Result<_>>()?;
        Ok(Self { ty: ty.clone(), table, k: radial.size() })
    }

    pub fn n_weights(&self) -> usize {
        self.ty.num_channels() * self.k
    }

    /// Per-channel, per-sample coefficient `a[c][n]`.
    fn coefficients(&self, w: &[f64]) -> Vec<Vec<f64>> {
        (0..self.ty.num_channels())
            .map(|c| self.table.iter().map(|phi| (0..self.k).map(|k| w[c * self.k + k] * phi[k]).sum()).collect())
            .collect()
    }

    fn channel_of(&self) -> Vec<usize> {
        let orders = self.ty.orders();
        orders.iter().enumerate().flat_map(|(c, &l)| std::iter::repeat_n(c, 2 * l + 1)).collect()
    }

    pub fn forward(&self, x: &VoxelMajor, w: &[f64]) -> VoxelMajor {
        let a = self.coefficients(w);
        let ch = self.channel_of();
        let (nq, dim) = (x.nq, x.dim);
        let mut out = VoxelMajor::zeros(x.dims, 1, dim);
        for v in 0..x.voxels() {
            for n in 0..nq {
                let src = &x.data[(v * nq + n) * dim..(v * nq + n + 1) * dim];
                for (comp, s) in src.iter().enumerate() {
                    out.data[v * dim + comp] += a[ch[comp]][n] * s;
                }
            }
        }
        out
    }

    /// Returns `(d input, d w)`.
    pub fn backward(&self, x: &VoxelMajor, w: &[f64], dy: &VoxelMajor) -> (VoxelMajor, Vec<f64>) {
        let a = self.coefficients(w);
        let ch = self.channel_of();
        let (nq, dim) = (x.nq, x.dim);
        let mut dx = VoxelMajor::zeros(x.dims, nq, dim);
        // g[c][n] = sum_v sum_{comp in c} in[v][n][comp] dy[v][comp]
        let mut g = vec![vec![0.0; nq]; self.ty.num_channels()];
        for v in 0..x.voxels() {
            let d = &dy.data[v * dim..(v + 1) * dim];
            for n in 0..nq {
                let base = (v * nq + n) * dim;
                for comp in 0..dim {
                    dx.data[base + comp] = a[ch[comp]][n] * d[comp];
                    g[ch[comp]][n] += x.data[base + comp] * d[comp];
                }
            }
        }
        let mut dw = vec![0.0; w.len()];
        for (c, gc) in g.iter().enumerate() {
            for (n, phi) in self.table.iter().enumerate() {
                for k in 0..self.k {
                    dw[c * self.k + k] += phi[k] * gc[n];
                }
            }
        }
        (dx, dw)
    }
}

/// Field-level late q-reduction; `w` is `channels x K` row-major.
pub fn q_reduce_weighted_average(input: &Field, radial: &RadialBasisSpec, w: &[f64]) -> Result<Field> {
    let op = QLengthAverage::new(input.ty(), input.q(), radial)?;
    if w.len() != op.n_weights() {
        return Err(shape_err(format!("q-reduction expects {} weights, got {}", op.n_weights(), w.len())));
    }
    let out = op.forward(&input.to_voxel_major(), w);
    Field::from_voxel_major(input.ty().clone(), QScheme::zero(), &out)
}

/// Replaces the listed zero-vector samples by their mean, stored at the
/// position of the first listed index.
pub fn b0_mean(input: &Field, b0_indices: &[usize]) -> Result<Field> {
    let q = input.q();
    if b0_indices.is_empty() {
        return Err(invalid("b0 index list is empty"));
    }
    let mut sorted = b0_indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &i in &sorted {
        if i >= q.len() {
            return Err(invalid(format!("b0 index {i} out of range")));
        }
        if q.get(i).norm() > Q_TOL {
            return Err(invalid(format!("q-sample {i} is not the zero vector")));
        }
    }
    let first = sorted[0];
    let keep: Vec<usize> = (0..q.len()).filter(|n| *n == first || sorted.binary_search(n).is_err()).collect();
    let new_q = QScheme::new(keep.iter().map(|&n| *q.get(n)).collect())?;
    let [px, py, pz] = input.dims();
    let mut out = Field::zeros(input.ty().clone(), input.dims(), new_q);
    let inv = 1.0 / sorted.len() as f64;
    for c in 0..input.ty().dim() {
        for z in 0..pz {
            for y in 0..py {
                for x in 0..px {
                    for (m, &n) in keep.iter().enumerate() {
                        let v = if n == first { sorted.iter().map(|&i| input.get(c, x, y, z, i)).sum::<f64>() * inv } else { input.get(c, x, y, z, n) };
                        out.set(c, x, y, z, m, v);
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairing of every non-scalar channel of `ty_out` with a scalar gate in the
/// augmented pre-activation type.
///
/// The augmented type lists the real scalars first, then one gate per
/// non-scalar channel (in channel order), then the non-scalar channels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub ty_in: TensorType,
    pub ty_out: TensorType,
    /// `(tensor channel in ty_in, gate channel in ty_in)`.
    pub pairs: Vec<(usize, usize)>,
}

impl GateSpec {
    pub fn for_output(ty_out: &TensorType) -> Self {
        let n0 = ty_out.count(0);
        let ng = ty_out.num_channels() - n0;
        let ty_in = ty_out.with_extra_scalars(ng);
        let pairs = (0..ng).map(|i| (n0 + ng + i, n0 + i)).collect();
        Self { ty_in, ty_out: ty_out.clone(), pairs }
    }

    fn real_scalars(&self) -> usize {
        self.ty_out.count(0)
    }

    fn check(&self) -> Result<()> {
        let orders = self.ty_in.orders();
        for &(t, g) in &self.pairs {
            if orders.get(g) != Some(&0) || orders.get(t).is_none_or(|&l| l == 0) {
                return Err(invalid("gate pairing must map tensor channels to scalar channels"));
            }
        }
        Ok(())
    }

    /// Component ranges: `(in offset, out offset, len, gate component or None)`.
    fn layout(&self) -> Vec<(usize, usize, usize, Option<usize>)> {
        let offs_in = self.ty_in.offsets();
        let mut v: Vec<_> = (0..self.real_scalars()).map(|c| (offs_in[c], c, 1, None)).collect();
        let orders_in = self.ty_in.orders();
        let offs_out = self.ty_out.offsets();
        for (i, &(t, g)) in self.pairs.iter().enumerate() {
            let l = orders_in[t];
            v.push((offs_in[t], offs_out[self.real_scalars() + i], 2 * l + 1, Some(offs_in[g])));
        }
        v
    }

    /// Per-point map `[*][dim_in] -> [*][dim_out]`.
    pub fn forward(&self, x: &VoxelMajor) -> VoxelMajor {
        let (din, dout) = (self.ty_in.dim(), self.ty_out.dim());
        let layout = self.layout();
        let n = x.data.len() / din;
        let mut out = VoxelMajor::zeros(x.dims, x.nq, dout);
        for p in 0..n {
            let src = &x.data[p * din..(p + 1) * din];
            let dst = &mut out.data[p * dout..(p + 1) * dout];
            for &(i, o, len, gate) in &layout {
                match gate {
                    None => dst[o] = src[i] * sigmoid(src[i]),
                    Some(gc) => {
                        let s = sigmoid(src[gc]);
                        for m in 0..len {
                            dst[o + m] = src[i + m] * s;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, x: &VoxelMajor, dy: &VoxelMajor) -> VoxelMajor {
        let (din, dout) = (self.ty_in.dim(), self.ty_out.dim());
        let layout = self.layout();
        let n = x.data.len() / din;
        let mut dx = VoxelMajor::zeros(x.dims, x.nq, din);
        for p in 0..n {
            let src = &x.data[p * din..(p + 1) * din];
            let d = &dy.data[p * dout..(p + 1) * dout];
            let dst = &mut dx.data[p * din..(p + 1) * din];
            for &(i, o, len, gate) in &layout {
                match gate {
                    None => {
                        let s = sigmoid(src[i]);
                        dst[i] += d[o] * (s + src[i] * s * (1.0 - s));
                    }
                    Some(gc) => {
                        let s = sigmoid(src[gc]);
                        let mut dot = 0.0;
                        for m in 0..len {
                            dst[i + m] += d[o + m] * s;
                            dot += d[o + m] * src[i + m];
                        }
                        dst[gc] += dot * s * (1.0 - s);
                    }
                }
            }
        }
        dx
    }
}

/// Swish on real scalars, sigmoid gating on tensor channels; gate scalars
/// are dropped from the output type.
pub fn gated_nonlinearity(input: &Field, gates: &GateSpec) -> Result<Field> {
    if input.ty() != &gates.ty_in {
        return Err(Error::Shape(format!("gated input type {} does not match {}", input.ty(), gates.ty_in)));
    }
    gates.check()?;
    let out = gates.forward(&input.to_voxel_major());
    Field::from_voxel_major(gates.ty_out.clone(), input.q().clone(), &out)
}
