use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::qscheme::{PFilterGrid, QScheme};
use crate::error::{invalid, shape_err, Error, Result};
use crate::filter::{angular_eval_with, enumerate_channels, AngularChannel, FilterBasisSpec};
use crate::radial::RadialBasisSpec;
use crate::so3::{CgTable, TensorType, Vec3};

pub const DEFAULT_BYTE_BUDGET: u64 = 2 << 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisOptions {
    /// Restrict the filter to the Euclidean ball of radius `P_filter`.
    pub ball_mask: bool,
    pub byte_budget: u64,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self { ball_mask: false, byte_budget: DEFAULT_BYTE_BUDGET }
    }
}

/// CG-contracted basis responses shared by every `(c_out, c_in)` pair with
/// orders `(l_out, l_in)`.
///
/// `data` is laid out `[js][s][m_out][m_in]` where `js` enumerates stored
/// `(c_filter, k)` entries and `s = (q_out, q_in, p_filter)` with `p_filter`
/// fastest. When the p radial basis is learnable, channels that use it store
/// only the q radial product and the p factor is applied at assembly.
#[derive(Clone, Debug)]
pub struct BlockBasis {
    pub l_out: usize,
    pub l_in: usize,
    pub channels: Vec<AngularChannel>,
    /// Offset of each channel's first weight in the `(c_filter, k)` index.
    pub full_offsets: Vec<usize>,
    stored_offsets: Vec<usize>,
    /// Per channel: whether the p radial factor is deferred to assembly.
    deferred: Vec<bool>,
    /// Per channel: stored radial size (`K_q` part only when deferred).
    stored_k: Vec<usize>,
    pub j_full: usize,
    j_stored: usize,
    data: Vec<f64>,
}

impl BlockBasis {
    fn mm(&self) -> usize {
        (2 * self.l_out + 1) * (2 * self.l_in + 1)
    }
}

#[derive(Clone, Debug)]
struct Pair {
    block: usize,
    w_offset: usize,
    comp_out: usize,
    comp_in: usize,
}

/// Precomputed kernel basis for one layer.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub spec: FilterBasisSpec,
    pub ty_in: TensorType,
    pub ty_out: TensorType,
    pub q_in: QScheme,
    pub q_out: QScheme,
    pub grid: PFilterGrid,
    pub options: BasisOptions,
    effective: FilterBasisSpec,
    blocks: Vec<BlockBasis>,
    block_of: BTreeMap<(usize, usize), usize>,
    pairs: Vec<Pair>,
    n_weights: usize,
    deferred: bool,
    radii: Vec<f64>,
    radius_index: Vec<usize>,
    cg: CgTable,
}

/// Assembled kernel in the layout consumed by the convolution:
/// `data[f][c'_in][c'_out]` with `c' = n * dim + component`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub grid: PFilterGrid,
    pub tau_in: TensorType,
    pub tau_out: TensorType,
    pub q_in: QScheme,
    pub q_out: QScheme,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn zeros(grid: PFilterGrid, tau_in: TensorType, q_in: QScheme, tau_out: TensorType, q_out: QScheme) -> Self {
        let n = grid.count() * q_in.len() * tau_in.dim() * q_out.len() * tau_out.dim();
        Self { grid, tau_in, tau_out, q_in, q_out, data: vec![0.0; n] }
    }

    pub fn cin(&self) -> usize {
        self.q_in.len() * self.tau_in.dim()
    }

    pub fn cout(&self) -> usize {
        self.q_out.len() * self.tau_out.dim()
    }

    #[inline]
    pub fn at(&self, f: usize, ci: usize, co: usize) -> f64 {
        self.data[(f * self.cin() + ci) * self.cout() + co]
    }

    /// Row-major `(c'_out, c'_in, f)` array, the exported conv3d layout.
    pub fn to_export_layout(&self) -> Vec<f64> {
        let (nf, ci, co) = (self.grid.count(), self.cin(), self.cout());
        let mut out = vec![0.0; nf * ci * co];
        for f in 0..nf {
            for i in 0..ci {
                for o in 0..co {
                    out[(o * ci + i) * nf + f] = self.data[(f * ci + i) * co + o];
                }
            }
        }
        out
    }
}

/// Gradients produced by [`KernelBasis::weight_grad`].
#[derive(Clone, Debug, PartialEq)]
pub struct BasisGrad {
    pub w: Vec<f64>,
    /// Gradient wrt the learnable p radial parameters, when present.
    pub radial_p: Option<Vec<f64>>,
}

fn cg_triples(blocks: &[(usize, usize, Vec<AngularChannel>)]) -> Vec<(usize, usize, usize)> {
    let mut t = Vec::new();
    for (lo, li, chans) in blocks {
        for ch in chans {
            t.push((ch.l_filter, *li, *lo));
            if let crate::filter::AngularKind::Tp { l_p, l_q } = ch.kind {
                t.push((l_p, l_q, ch.l_filter));
            }
        }
    }
    t
}

impl KernelBasis {
    pub fn precompute(
        spec: &FilterBasisSpec,
        ty_in: &TensorType,
        ty_out: &TensorType,
        q_in: &QScheme,
        q_out: &QScheme,
        grid: PFilterGrid,
        options: BasisOptions,
    ) -> Result<Self> {
        if !q_in.is_distinct() || !q_out.is_distinct() {
            return Err(invalid("kernel q-schemes must not repeat the zero vector; apply b0_mean first"));
        }
        spec.radial_p.validate()?;
        spec.radial_q_out.validate()?;
        spec.radial_q_in.validate()?;
        if spec.radial_q_in.is_learnable() || spec.radial_q_out.is_learnable() {
            return Err(invalid("only the p radial basis may be learnable"));
        }

        let mut effective = spec.clone();
        if options.ball_mask {
            let r = grid.radius as f64;
            effective.p_support = Some(effective.p_support.map_or(r, |s| s.min(r)));
        }
        let deferred = spec.radial_p.is_learnable();

        let mut ls_out: Vec<usize> = ty_out.orders();
        ls_out.dedup();
        let mut ls_in: Vec<usize> = ty_in.orders();
        ls_in.dedup();
        let block_specs: Vec<(usize, usize, Vec<AngularChannel>)> = ls_out
            .iter()
            .flat_map(|&lo| ls_in.iter().map(move |&li| (lo, li)))
            .map(|(lo, li)| (lo, li, enumerate_channels(spec.family, li, lo)))
            .collect();
        let cg = CgTable::for_triples(cg_triples(&block_specs));

        let n_s = q_out.len() * q_in.len() * grid.count();
        let mut blocks = Vec::with_capacity(block_specs.len());
        let mut needed: u64 = 0;
        for (lo, li, channels) in &block_specs {
            let (mut full_offsets, mut stored_offsets, mut dflags, mut stored_k) = (vec![], vec![], vec![], vec![]);
            let (mut jf, mut js) = (0, 0);
            for ch in channels {
                let kf = spec.radial_size(ch.kind);
                let d = deferred && ch.kind.uses_p_radial();
                let ks = if d { kf / spec.radial_p.size() } else { kf };
                full_offsets.push(jf);
                stored_offsets.push(js);
                dflags.push(d);
                stored_k.push(ks);
                jf += kf;
                js += ks;
            }
            let mm = (2 * lo + 1) * (2 * li + 1);
            needed += (js * n_s * mm * std::mem::size_of::<f64>()) as u64;
            blocks.push(BlockBasis {
                l_out: *lo,
                l_in: *li,
                channels: channels.clone(),
                full_offsets,
                stored_offsets,
                deferred: dflags,
                stored_k,
                j_full: jf,
                j_stored: js,
                data: Vec::new(),
            });
        }
        if needed > options.byte_budget {
            return Err(Error::OverBudget { needed, budget: options.byte_budget });
        }

        let (sq, radius_index) = grid.radius_classes();
        let radii: Vec<f64> = sq.iter().map(|&s| (s as f64).sqrt()).collect();

        let mut this = Self {
            spec: spec.clone(),
            ty_in: ty_in.clone(),
            ty_out: ty_out.clone(),
            q_in: q_in.clone(),
            q_out: q_out.clone(),
            grid,
            options,
            effective,
            blocks: Vec::new(),
            block_of: BTreeMap::new(),
            pairs: Vec::new(),
            n_weights: 0,
            deferred,
            radii,
            radius_index,
            cg,
        };
        for mut b in blocks {
            b.data = this.fill_block(&b);
            this.block_of.insert((b.l_out, b.l_in), this.blocks.len());
            this.blocks.push(b);
        }

        let (orders_out, offs_out) = (ty_out.orders(), ty_out.offsets());
        let (orders_in, offs_in) = (ty_in.orders(), ty_in.offsets());
        let mut w_offset = 0;
        for (co, &lo) in orders_out.iter().enumerate() {
            for (ci, &li) in orders_in.iter().enumerate() {
                let block = this.block_of[&(lo, li)];
                this.pairs.push(Pair { block, w_offset, comp_out: offs_out[co], comp_in: offs_in[ci] });
                w_offset += this.blocks[block].j_full;
            }
        }
        this.n_weights = w_offset;
        Ok(this)
    }

    /// Decomposes a spatial index into `(q_out, q_in, f)`.
    #[inline]
    fn split_s(&self, s: usize) -> (usize, usize, usize) {
        let nf = self.grid.count();
        let f = s % nf;
        let rest = s / nf;
        (rest / self.q_in.len(), rest % self.q_in.len(), f)
    }

    fn fill_block(&self, b: &BlockBasis) -> Vec<f64> {
        let n_s = self.q_out.len() * self.q_in.len() * self.grid.count();
        let mm = b.mm();
        let per_s: Vec<Vec<f64>> = (0..n_s)
            .into_par_iter()
            .map(|s| {
                let (no, ni, f) = self.split_s(s);
                let o = self.grid.offset(f);
                let dp = -Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64);
                self.stored_entries(b, &dp, self.q_out.get(no), self.q_in.get(ni))
            })
            .collect();
        let mut data = vec![0.0; b.j_stored * n_s * mm];
        for (s, vals) in per_s.iter().enumerate() {
            for js in 0..b.j_stored {
                let dst = (js * n_s + s) * mm;
                data[dst..dst + mm].copy_from_slice(&vals[js * mm..(js + 1) * mm]);
            }
        }
        data
    }

    /// `sum_mf C^(l_out)_(l_f, l_in) A_mf` as an `m_out x m_in` row-major matrix.
    fn contracted_angular(&self, lo: usize, li: usize, ch: &AngularChannel, dp: &Vec3, qo: &Vec3, qi: &Vec3) -> Vec<f64> {
        let a = angular_eval_with(&self.cg, ch, dp, qo, qi);
        let c = self.cg.get(ch.l_filter, li, lo);
        let (d_o, d_f, d_i) = (2 * lo + 1, 2 * ch.l_filter + 1, 2 * li + 1);
        let mut m = vec![0.0; d_o * d_i];
        for mo in 0..d_o {
            for mi in 0..d_i {
                let mut s = 0.0;
                for (mf, av) in a.iter().enumerate().take(d_f) {
                    s += c.at(mo, mf, mi) * av;
                }
                m[mo * d_i + mi] = s;
            }
        }
        m
    }

    /// Stored values for every `js` at one coordinate triple, `[js][mm]`.
    fn stored_entries(&self, b: &BlockBasis, dp: &Vec3, qo: &Vec3, qi: &Vec3) -> Vec<f64> {
        let mm = b.mm();
        let mut out = vec![0.0; b.j_stored * mm];
        for (c, ch) in b.channels.iter().enumerate() {
            let radial = if b.deferred[c] {
                let inside = self.effective.p_support.is_none_or(|s| dp.norm() <= s);
                let ind = if inside { 1.0 } else { 0.0 };
                if ch.kind.uses_q_radial() {
                    let q = self.effective.radial_eval(crate::filter::AngularKind::QDiff, dp, qo, qi);
                    q.into_iter().map(|v| v * ind).collect()
                } else {
                    vec![ind]
                }
            } else {
                self.effective.radial_eval(ch.kind, dp, qo, qi)
            };
            if radial.iter().all(|&r| r == 0.0) {
                continue;
            }
            let m = self.contracted_angular(b.l_out, b.l_in, ch, dp, qo, qi);
            for (k, r) in radial.iter().enumerate() {
                let dst = (b.stored_offsets[c] + k) * mm;
                for (o, v) in out[dst..dst + mm].iter_mut().zip(&m) {
                    *o = r * v;
                }
            }
        }
        out
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn is_deferred(&self) -> bool {
        self.deferred
    }

    pub fn blocks(&self) -> &[BlockBasis] {
        &self.blocks
    }

    pub fn block(&self, l_out: usize, l_in: usize) -> Option<&BlockBasis> {
        self.block_of.get(&(l_out, l_in)).map(|&i| &self.blocks[i])
    }

    /// Number of `(c_filter, k)` weights for a channel pair of the given orders.
    pub fn basis_size(&self, l_out: usize, l_in: usize) -> usize {
        self.block(l_out, l_in).map_or(0, |b| b.j_full)
    }

    /// Weight offset of the `(c_out, c_in)` pair.
    pub fn pair_offset(&self, c_out: usize, c_in: usize) -> usize {
        self.pairs[c_out * self.ty_in.num_channels() + c_in].w_offset
    }

    pub fn bytes(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len() * std::mem::size_of::<f64>()).sum()
    }

    /// Raw stored block array, for determinism checks.
    pub fn raw_blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.blocks.iter().map(|b| b.data.as_slice())
    }

    fn radial_p_or<'a>(&'a self, radial_p: Option<&'a RadialBasisSpec>) -> &'a RadialBasisSpec {
        radial_p.unwrap_or(&self.spec.radial_p)
    }

    /// `phi[r][k_p]` at every distinct offset length, when deferred.
    fn phi_table(&self, radial_p: &RadialBasisSpec) -> Vec<Vec<f64>> {
        self.radii
            .iter()
            .map(|&r| {
                let mut v = vec![0.0; radial_p.size()];
                radial_p.eval_into(r, &mut v);
                v
            })
            .collect()
    }

    /// Effective per-`(js, radius)` coefficients of one pair.
    fn coefficients(&self, b: &BlockBasis, w: &[f64], phi: &[Vec<f64>]) -> (Vec<f64>, usize) {
        let n_r = if self.deferred { self.radii.len() } else { 1 };
        let mut coeff = vec![0.0; b.j_stored * n_r];
        for c in 0..b.channels.len() {
            let (fo, so, ks) = (b.full_offsets[c], b.stored_offsets[c], b.stored_k[c]);
            if b.deferred[c] {
                let kp_n = phi[0].len();
                for kq in 0..ks {
                    for r in 0..n_r {
                        coeff[(so + kq) * n_r + r] = (0..kp_n).map(|kp| w[fo + kp * ks + kq] * phi[r][kp]).sum();
                    }
                }
            } else {
                for k in 0..ks {
                    for r in 0..n_r {
                        coeff[(so + k) * n_r + r] = w[fo + k];
                    }
                }
            }
        }
        (coeff, n_r)
    }

    /// Kernel `K = sum W * basis`, linear in `w`. `radial_p` overrides the
    /// learnable p radial parameters stored in the `FilterBasisSpec`.
    pub fn assemble(&self, w: &[f64], radial_p: Option<&RadialBasisSpec>) -> Result<Kernel> {
        if w.len() != self.n_weights {
            return Err(shape_err(format!("layer has {} weights, got {}", self.n_weights, w.len())));
        }
        let phi = if self.deferred { self.phi_table(self.radial_p_or(radial_p)) } else { vec![] };
        let (nqo, nqi, nf) = (self.q_out.len(), self.q_in.len(), self.grid.count());
        let n_s = nqo * nqi * nf;
        let mut k = Kernel::zeros(self.grid, self.ty_in.clone(), self.q_in.clone(), self.ty_out.clone(), self.q_out.clone());
        let (cin, cout) = (k.cin(), k.cout());
        let mut acc = Vec::new();
        for p in &self.pairs {
            let b = &self.blocks[p.block];
            if b.j_full == 0 {
                continue;
            }
            let wp = &w[p.w_offset..p.w_offset + b.j_full];
            if wp.iter().all(|&x| x == 0.0) {
                continue;
            }
            let (coeff, n_r) = self.coefficients(b, wp, &phi);
            let mm = b.mm();
            acc.clear();
            acc.resize(n_s * mm, 0.0);
            for js in 0..b.j_stored {
                let src = &b.data[js * n_s * mm..(js + 1) * n_s * mm];
                for s in 0..n_s {
                    let r = if n_r == 1 { 0 } else { self.radius_index[s % nf] };
                    let c = coeff[js * n_r + r];
                    if c == 0.0 {
                        continue;
                    }
                    for (a, v) in acc[s * mm..(s + 1) * mm].iter_mut().zip(&src[s * mm..(s + 1) * mm]) {
                        *a += c * v;
                    }
                }
            }
            let (d_o, d_i) = (2 * b.l_out + 1, 2 * b.l_in + 1);
            for s in 0..n_s {
                let (no, ni, f) = self.split_s(s);
                for mi in 0..d_i {
                    let row = (f * cin + ni * self.ty_in.dim() + p.comp_in + mi) * cout + no * self.ty_out.dim() + p.comp_out;
                    for mo in 0..d_o {
                        k.data[row + mo] += acc[s * mm + mo * d_i + mi];
                    }
                }
            }
        }
        Ok(k)
    }

    /// Backpropagates a kernel gradient `dk` (same layout as [`Kernel::data`])
    /// to the weights and, when learnable, the p radial parameters.
    pub fn weight_grad(&self, dk: &[f64], w: &[f64], radial_p: Option<&RadialBasisSpec>) -> Result<BasisGrad> {
        if w.len() != self.n_weights {
            return Err(shape_err("weight length mismatch"));
        }
        let radial = self.radial_p_or(radial_p);
        let phi = if self.deferred { self.phi_table(radial) } else { vec![] };
        let (nqo, nqi, nf) = (self.q_out.len(), self.q_in.len(), self.grid.count());
        let n_s = nqo * nqi * nf;
        let (cin, cout) = (nqi * self.ty_in.dim(), nqo * self.ty_out.dim());
        let n_r = if self.deferred { self.radii.len() } else { 1 };
        let mut dw = vec![0.0; self.n_weights];
        let mut dphi = vec![vec![0.0; if self.deferred { radial.size() } else { 0 }]; n_r];
        let mut dm = Vec::new();
        for p in &self.pairs {
            let b = &self.blocks[p.block];
            if b.j_full == 0 {
                continue;
            }
            let mm = b.mm();
            let (d_o, d_i) = (2 * b.l_out + 1, 2 * b.l_in + 1);
            dm.clear();
            dm.resize(n_s * mm, 0.0);
            for s in 0..n_s {
                let (no, ni, f) = self.split_s(s);
                for mi in 0..d_i {
                    let row = (f * cin + ni * self.ty_in.dim() + p.comp_in + mi) * cout + no * self.ty_out.dim() + p.comp_out;
                    for mo in 0..d_o {
                        dm[s * mm + mo * d_i + mi] = dk[row + mo];
                    }
                }
            }
            // g[js][r] = <stored_js, dK> summed over entries of radius class r.
            let mut g = vec![0.0; b.j_stored * n_r];
            for js in 0..b.j_stored {
                let src = &b.data[js * n_s * mm..(js + 1) * n_s * mm];
                for s in 0..n_s {
                    let r = if n_r == 1 { 0 } else { self.radius_index[s % nf] };
                    let dot: f64 = src[s * mm..(s + 1) * mm].iter().zip(&dm[s * mm..(s + 1) * mm]).map(|(a, b)| a * b).sum();
                    g[js * n_r + r] += dot;
                }
            }
            let wp = &w[p.w_offset..p.w_offset + b.j_full];
            let dwp = &mut dw[p.w_offset..p.w_offset + b.j_full];
            for c in 0..b.channels.len() {
                let (fo, so, ks) = (b.full_offsets[c], b.stored_offsets[c], b.stored_k[c]);
                if b.deferred[c] {
                    let kp_n = phi[0].len();
                    for kq in 0..ks {
                        for r in 0..n_r {
                            let gv = g[(so + kq) * n_r + r];
                            for kp in 0..kp_n {
                                dwp[fo + kp * ks + kq] += phi[r][kp] * gv;
                                dphi[r][kp] += wp[fo + kp * ks + kq] * gv;
                            }
                        }
                    }
                } else {
                    for k in 0..ks {
                        dwp[fo + k] = (0..n_r).map(|r| g[(so + k) * n_r + r]).sum();
                    }
                }
            }
        }
        let radial_grad = match radial {
            RadialBasisSpec::Mlp(m) if self.deferred => {
                let mut gp = vec![0.0; m.num_params()];
                for (r, d) in self.radii.iter().zip(&dphi) {
                    if d.iter().any(|&v| v != 0.0) {
                        m.backward(*r, d, &mut gp);
                    }
                }
                Some(gp)
            }
            _ => None,
        };
        Ok(BasisGrad { w: dw, radial_p: radial_grad })
    }

    /// Full kernel matrix `dim_out x dim_in` at continuous coordinates,
    /// evaluated directly from the filter definitions.
    pub fn eval_continuous(&self, w: &[f64], radial_p: Option<&RadialBasisSpec>, dp: &Vec3, qo: &Vec3, qi: &Vec3) -> DMatrix<f64> {
        let mut spec = self.effective.clone();
        if let Some(r) = radial_p {
            spec.radial_p = r.clone();
        }
        let mut out = DMatrix::zeros(self.ty_out.dim(), self.ty_in.dim());
        for p in &self.pairs {
            let b = &self.blocks[p.block];
            let (d_o, d_i) = (2 * b.l_out + 1, 2 * b.l_in + 1);
            for (c, ch) in b.channels.iter().enumerate() {
                let radial = spec.radial_eval(ch.kind, dp, qo, qi);
                let m = self.contracted_angular(b.l_out, b.l_in, ch, dp, qo, qi);
                let coef: f64 = radial.iter().enumerate().map(|(k, r)| r * w[p.w_offset + b.full_offsets[c] + k]).sum();
                for mo in 0..d_o {
                    for mi in 0..d_i {
                        out[(p.comp_out + mo, p.comp_in + mi)] += coef * m[mo * d_i + mi];
                    }
                }
            }
        }
        out
    }

    /// Single basis element `sum_mf C F^(c_filter,k)` for an order block at
    /// continuous coordinates, `m_out x m_in`.
    pub fn element_continuous(&self, l_out: usize, l_in: usize, channel: usize, k: usize, dp: &Vec3, qo: &Vec3, qi: &Vec3) -> DMatrix<f64> {
        let b = self.block(l_out, l_in).expect("block exists");
        let ch = &b.channels[channel];
        let r = self.effective.radial_eval(ch.kind, dp, qo, qi)[k];
        let m = self.contracted_angular(l_out, l_in, ch, dp, qo, qi);
        DMatrix::from_row_slice(2 * l_out + 1, 2 * l_in + 1, &m) * r
    }

    /// Stored-and-expanded basis element at grid entry `(no, ni, f)` for
    /// block weight index `j`, including any deferred p factor.
    pub fn element_on_grid(&self, l_out: usize, l_in: usize, j: usize, no: usize, ni: usize, f: usize, radial_p: Option<&RadialBasisSpec>) -> DMatrix<f64> {
        let b = self.block(l_out, l_in).expect("block exists");
        let mut w = vec![0.0; b.j_full];
        w[j] = 1.0;
        let phi = if self.deferred { self.phi_table(self.radial_p_or(radial_p)) } else { vec![] };
        let (coeff, n_r) = self.coefficients(b, &w, &phi);
        let n_s = self.q_out.len() * self.q_in.len() * self.grid.count();
        let s = (no * self.q_in.len() + ni) * self.grid.count() + f;
        let r = if n_r == 1 { 0 } else { self.radius_index[f] };
        let mm = b.mm();
        let mut m = vec![0.0; mm];
        for js in 0..b.j_stored {
            let c = coeff[js * n_r + r];
            for (a, v) in m.iter_mut().zip(&b.data[(js * n_s + s) * mm..(js * n_s + s + 1) * mm]) {
                *a += c * v;
            }
        }
        DMatrix::from_row_slice(2 * l_out + 1, 2 * l_in + 1, &m)
    }
}
