use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{q_radial, ModelConfig, QReduction};
use super::loss::weighted_bce_logits_grad;
use super::params::ParamGroup;
use crate::conv::{conv3d_grad_input, conv3d_grad_kernel, Precision};
use crate::error::{invalid, shape_err, Result};
use crate::field::{Field, VoxelMajor};
use crate::filter::FilterFamily;
use crate::kernel::{BasisOptions, Kernel, KernelBasis, PFilterGrid, QScheme, DEFAULT_BYTE_BUDGET, Q_TOL};
use crate::layers::{b0_mean, conv_vm, sigmoid, GateSpec, QLengthAverage};
use crate::radial::{MlpRadial, RadialBasisSpec};
use crate::so3::{Rotation, TensorType};

/// One training/evaluation example. `labels` and `mask` are per voxel in
/// `(z, y, x)` row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Field,
    pub labels: Vec<f64>,
    pub mask: Vec<bool>,
}

enum Op {
    Conv { basis: KernelBasis, gate: Option<GateSpec>, mlp: Option<MlpRadial>, n_bias: usize },
    QAverage(QLengthAverage),
}

struct Stage {
    op: Op,
    w: Range<usize>,
    /// Fixed per-weight factor: effective weights are `scale ⊙ raw`.
    w_scale: Vec<f64>,
    bias: Range<usize>,
    mlp: Range<usize>,
}

/// A built model: precomputed kernel bases for every stage plus the flat
/// parameter layout.
pub struct Model {
    pub config: ModelConfig,
    stages: Vec<Stage>,
    groups: Vec<ParamGroup>,
    n_params: usize,
    b0: Vec<usize>,
}

/// Intermediate values of a forward pass kept for backpropagation.
pub struct Trace {
    /// Input of every stage.
    acts: Vec<VoxelMajor>,
    /// Pre-activation output of every stage.
    pre: Vec<VoxelMajor>,
    kernels: Vec<Option<Kernel>>,
    pub dims: [usize; 3],
    /// Final pre-sigmoid outputs.
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Trace {
    /// RMS of every stage's pre-activation output.
    pub fn stage_rms(&self) -> Vec<f64> {
        self.pre.iter().map(|v| (v.data.iter().map(|x| x * x).sum::<f64>() / v.data.len().max(1) as f64).sqrt()).collect()
    }
}

impl Model {
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let grid = PFilterGrid::new(config.p_filter);
        let options = BasisOptions { ball_mask: config.ball_mask, byte_budget: config.byte_budget.unwrap_or(DEFAULT_BYTE_BUDGET) };
        let mut b = Builder { config: &config, grid, options, stages: vec![], groups: vec![], off: 0 };

        let mut tau = TensorType::scalars(1);
        let mut q = config.effective_q_in();
        for (i, l) in config.pq_layers.iter().enumerate() {
            let q_out = l.q_out.clone().unwrap_or_else(|| q.clone());
            b.conv(&format!("pq{i}"), config.filter, &tau, &l.tau_out, &q, &q_out, true, &mut rng)?;
            tau = l.tau_out.clone();
            q = q_out;
        }
        match config.q_reduction {
            QReduction::Late => {
                let op = QLengthAverage::new(&tau, &q, &q_radial(&q))?;
                let w = b.group("qred.w", op.n_weights());
                b.stages.push(Stage { op: Op::QAverage(op), w, w_scale: vec![], bias: 0..0, mlp: 0..0 });
            }
            QReduction::Gradual => {
                b.conv("qred", config.filter, &tau, &config.q_reduce_tau, &q, &QScheme::zero(), true, &mut rng)?;
            }
        }
        tau = config.q_reduce_tau.clone();
        let zero = QScheme::zero();
        let last = config.p_layers.len() - 1;
        for (i, t) in config.p_layers.iter().enumerate() {
            b.conv(&format!("p{i}"), FilterFamily::PSpace, &tau, t, &zero, &zero, i != last, &mut rng)?;
            tau = t.clone();
        }
        let (stages, groups, n_params) = (b.stages, b.groups, b.off);
        let b0 = config.q_in.zero_indices();
        Ok(Self { config, stages, groups, n_params, b0 })
    }

    /// Same architecture with every q-scheme rotated by `g`.
    pub fn with_rotated_schemes(&self, g: &Rotation) -> Result<Self> {
        let mut c = self.config.clone();
        c.q_in = c.q_in.rotated(g);
        for l in &mut c.pq_layers {
            if let Some(q) = &mut l.q_out {
                *q = q.rotated(g);
            }
        }
        Self::build(c)
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    /// Raw conv weights `U(±1)`, zero biases, the radial networks of the
    /// build, and `U(±1/√K)` late q-reduction weights.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.n_params];
        for st in &self.stages {
            match &st.op {
                Op::Conv { mlp, .. } => {
                    for v in &mut p[st.w.clone()] {
                        *v = rng.random_range(-1.0..=1.0);
                    }
                    if let Some(m) = mlp {
                        p[st.mlp.clone()].copy_from_slice(&m.params());
                    }
                }
                Op::QAverage(op) => {
                    let a = 1.0 / ((op.n_weights() / op.ty.num_channels()) as f64).sqrt();
                    for v in &mut p[st.w.clone()] {
                        *v = rng.random_range(-a..=a);
                    }
                }
            }
        }
        p
    }

    fn effective_w(st: &Stage, params: &[f64]) -> Vec<f64> {
        params[st.w.clone()].iter().zip(&st.w_scale).map(|(a, b)| a * b).collect()
    }

    fn radial_for(&self, st: &Stage, params: &[f64]) -> Result<Option<RadialBasisSpec>> {
        match &st.op {
            Op::Conv { mlp: Some(m), .. } => {
                let mut m = m.clone();
                m.set_params(&params[st.mlp.clone()])?;
                Ok(Some(RadialBasisSpec::Mlp(m)))
            }
            _ => Ok(None),
        }
    }

    /// ReLU pre-activations of every radial MLP at every filter offset
    /// length. The loss is smooth along a parameter path on which none of
    /// them changes sign.
    pub fn mlp_preactivations(&self, params: &[f64]) -> Result<Vec<f64>> {
        let r = self.config.p_filter as i64;
        let mut radii: Vec<f64> = (-r..=r)
            .flat_map(|z| (-r..=r).flat_map(move |y| (-r..=r).map(move |x| ((x * x + y * y + z * z) as f64).sqrt())))
            .collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let mut out = Vec::new();
        for st in &self.stages {
            if let Some(RadialBasisSpec::Mlp(m)) = self.radial_for(st, params)? {
                for &x in &radii {
                    out.extend(m.hidden_preactivations(x));
                }
            }
        }
        Ok(out)
    }

    /// Assembled kernel of every stage; `None` for the late q-average.
    pub fn kernels(&self, params: &[f64]) -> Result<Vec<Option<Kernel>>> {
        self.stages
            .iter()
            .map(|st| match &st.op {
                Op::Conv { basis, .. } => {
                    let radial = self.radial_for(st, params)?;
                    basis.assemble(&Self::effective_w(st, params), radial.as_ref()).map(Some)
                }
                Op::QAverage(_) => Ok(None),
            })
            .collect()
    }

    /// Validates the raw input against the configured scheme and merges the
    /// zero-vector samples.
    pub fn prepare_input(&self, input: &Field) -> Result<VoxelMajor> {
        if input.ty() != &TensorType::scalars(1) {
            return Err(shape_err(format!("model input must be a single scalar channel, got {}", input.ty())));
        }
        let q = &self.config.q_in;
        if input.q().len() != q.len() || input.q().vectors().iter().zip(q.vectors()).any(|(a, b)| (a - b).norm() > Q_TOL) {
            return Err(shape_err("input q-scheme does not match the model config"));
        }
        let f = if self.b0.len() > 1 { b0_mean(input, &self.b0)? } else { input.clone() };
        Ok(f.to_voxel_major())
    }

    pub fn forward_trace(&self, params: &[f64], input: &Field, precision: Precision) -> Result<Trace> {
        if params.len() != self.n_params {
            return Err(shape_err(format!("model has {} parameters, got {}", self.n_params, params.len())));
        }
        let mut x = self.prepare_input(input)?;
        let dims = x.dims;
        let n = self.stages.len();
        let (mut acts, mut pre, mut kernels) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for st in &self.stages {
            match &st.op {
                Op::Conv { basis, gate, n_bias, .. } => {
                    let radial = self.radial_for(st, params)?;
                    let k = basis.assemble(&Self::effective_w(st, params), radial.as_ref())?;
                    let mut y = conv_vm(&k, &x, precision);
                    let bias = &params[st.bias.clone()];
                    for chunk in y.data.chunks_exact_mut(y.dim) {
                        for (v, b) in chunk[..*n_bias].iter_mut().zip(bias) {
                            *v += b;
                        }
                    }
                    acts.push(std::mem::replace(&mut x, VoxelMajor::zeros([0, 0, 0], 0, 0)));
                    x = match gate {
                        Some(g) => g.forward(&y),
                        None => y.clone(),
                    };
                    pre.push(y);
                    kernels.push(Some(k));
                }
                Op::QAverage(op) => {
                    let y = op.forward(&x, &params[st.w.clone()]);
                    acts.push(std::mem::replace(&mut x, y.clone()));
                    pre.push(y);
                    kernels.push(None);
                }
            }
        }
        let probs = x.data.iter().map(|&z| sigmoid(z)).collect();
        Ok(Trace { acts, pre, kernels, dims, logits: x.data, probs })
    }

    /// Probability field, `τ = (1)` on the single-point scheme.
    pub fn predict(&self, params: &[f64], input: &Field) -> Result<Field> {
        self.predict_with(params, input, Precision::Double)
    }

    pub fn predict_with(&self, params: &[f64], input: &Field, precision: Precision) -> Result<Field> {
        let t = self.forward_trace(params, input, precision)?;
        Field::new(TensorType::scalars(1), t.dims, QScheme::zero(), t.probs)
    }

    /// Pre-sigmoid output field.
    pub fn logits_with(&self, params: &[f64], input: &Field, precision: Precision) -> Result<Field> {
        let t = self.forward_trace(params, input, precision)?;
        Field::new(TensorType::scalars(1), t.dims, QScheme::zero(), t.logits)
    }

    /// Gradient of a scalar loss given `d loss / d logit` per voxel.
    pub fn backward(&self, params: &[f64], trace: &Trace, dlogit: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.n_params];
        let mut d = VoxelMajor { dims: trace.dims, nq: 1, dim: 1, data: dlogit.to_vec() };
        for (i, st) in self.stages.iter().enumerate().rev() {
            match &st.op {
                Op::Conv { basis, gate, n_bias, .. } => {
                    let dpre = match gate {
                        Some(g) => g.backward(&trace.pre[i], &d),
                        None => d,
                    };
                    let gb = &mut grad[st.bias.clone()];
                    for chunk in dpre.data.chunks_exact(dpre.dim) {
                        for (g, v) in gb.iter_mut().zip(&chunk[..*n_bias]) {
                            *g += v;
                        }
                    }
                    let k = trace.kernels[i].as_ref().expect("conv stage has a kernel");
                    let x = &trace.acts[i];
                    let dk = conv3d_grad_kernel(&x.data, &dpre.data, x.dims, k.cin(), k.cout(), k.grid);
                    let radial = self.radial_for(st, params)?;
                    let bg = basis.weight_grad(&dk, &Self::effective_w(st, params), radial.as_ref())?;
                    for ((g, d), s) in grad[st.w.clone()].iter_mut().zip(&bg.w).zip(&st.w_scale) {
                        *g = d * s;
                    }
                    if let Some(gm) = bg.radial_p {
                        grad[st.mlp.clone()].copy_from_slice(&gm);
                    }
                    if i == 0 {
                        break;
                    }
                    let dx = conv3d_grad_input(&dpre.data, x.dims, k.cout(), &k.data, k.grid, k.cin());
                    d = VoxelMajor { dims: x.dims, nq: x.nq, dim: x.dim, data: dx };
                }
                Op::QAverage(op) => {
                    let (dx, dw) = op.backward(&trace.acts[i], &params[st.w.clone()], &d);
                    grad[st.w.clone()].copy_from_slice(&dw);
                    d = dx;
                }
            }
        }
        Ok(grad)
    }

    pub fn loss(&self, params: &[f64], sample: &Sample, pos_weight: f64) -> Result<f64> {
        let t = self.forward_trace(params, &sample.input, Precision::Double)?;
        Ok(weighted_bce_logits_grad(&t.logits, &sample.labels, &sample.mask, pos_weight)?.0)
    }

    pub fn loss_and_grad(&self, params: &[f64], sample: &Sample, pos_weight: f64) -> Result<(f64, Vec<f64>)> {
        let t = self.forward_trace(params, &sample.input, Precision::Double)?;
        let (loss, dlogit) = weighted_bce_logits_grad(&t.logits, &sample.labels, &sample.mask, pos_weight)?;
        Ok((loss, self.backward(params, &t, &dlogit)?))
    }
}

struct Builder<'a> {
    config: &'a ModelConfig,
    grid: PFilterGrid,
    options: BasisOptions,
    stages: Vec<Stage>,
    groups: Vec<ParamGroup>,
    off: usize,
}

impl Builder<'_> {
    fn group(&mut self, name: &str, len: usize) -> Range<usize> {
        let r = self.off..self.off + len;
        if len > 0 {
            self.groups.push(ParamGroup { name: name.to_string(), offset: self.off, len });
        }
        self.off += len;
        r
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        name: &str,
        family: FilterFamily,
        tau_in: &TensorType,
        tau_out: &TensorType,
        q_in: &QScheme,
        q_out: &QScheme,
        gated: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        if tau_in.num_channels() == 0 {
            return Err(invalid(format!("{name}: empty input type")));
        }
        let gate = gated.then(|| GateSpec::for_output(tau_out));
        let pre_tau = gate.as_ref().map_or_else(|| tau_out.clone(), |g| g.ty_in.clone());
        let radial_p = self.config.radial.p_basis(self.config.p_filter, &self.config.mlp_hidden, rng);
        let spec = self.config.stage_spec(family, radial_p, q_in, q_out);
        let basis = KernelBasis::precompute(&spec, tau_in, &pre_tau, q_in, q_out, self.grid, self.options)?;
        let mlp = match &spec.radial_p {
            RadialBasisSpec::Mlp(m) => Some(m.clone()),
            _ => None,
        };
        let n_bias = pre_tau.count(0);
        let w_scale = weight_scale(&basis, &spec.radial_p, gated, rng)?;
        let w = self.group(&format!("{name}.w"), basis.n_weights());
        let bias = self.group(&format!("{name}.bias"), n_bias);
        let mlp_r = self.group(&format!("{name}.mlp"), mlp.as_ref().map_or(0, |m| m.num_params()));
        self.stages.push(Stage { op: Op::Conv { basis, gate, mlp, n_bias }, w, w_scale, bias, mlp: mlp_r });
        Ok(())
    }
}

/// Per-weight factor giving every output channel unit gain (two before a
/// gate, since swish and sigmoid gates halve small activations) for
/// unit-variance inputs and raw weights drawn `U(±1)`.
fn weight_scale(basis: &KernelBasis, radial_p: &RadialBasisSpec, gated: bool, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let raw: Vec<f64> = (0..basis.n_weights()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let k = basis.assemble(&raw, Some(radial_p))?;
    let gains = output_gains(&k);
    let target = if gated { 2.0 } else { 1.0 };
    let (oo, oi) = (basis.ty_out.orders(), basis.ty_in.orders());
    let mut scale = vec![0.0; basis.n_weights()];
    for (co, g) in gains.iter().enumerate() {
        let s = if *g > 0.0 { target / g.sqrt() } else { 0.0 };
        for (ci, &li) in oi.iter().enumerate() {
            let off = basis.pair_offset(co, ci);
            scale[off..off + basis.basis_size(oo[co], li)].fill(s);
        }
    }
    Ok(scale)
}

/// Per output channel: mean squared kernel norm plus the squared response to
/// constant inputs, per output component and averaged over output q-samples.
fn output_gains(k: &Kernel) -> Vec<f64> {
    let (dout, nqo) = (k.tau_out.dim(), k.q_out.len());
    let row = k.cin() * k.cout();
    let mut e = vec![0.0; dout];
    let mut dc = vec![0.0; row];
    for f in k.data.chunks_exact(row) {
        for (i, v) in f.iter().enumerate() {
            e[(i % k.cout()) % dout] += v * v;
            dc[i] += v;
        }
    }
    for (i, v) in dc.iter().enumerate() {
        e[(i % k.cout()) % dout] += v * v;
    }
    let orders = k.tau_out.orders();
    orders.iter().zip(k.tau_out.offsets()).map(|(&l, o)| e[o..o + 2 * l + 1].iter().sum::<f64>() / ((2 * l + 1) * nqo) as f64).collect()
}
