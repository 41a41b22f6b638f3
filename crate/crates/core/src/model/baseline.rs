//! Non-equivariant reference network: plain 3D convolutions over the
//! q-samples as channels, ReLU activations and a sigmoid output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::Sample;
use super::train::Objective;
use super::loss::weighted_bce_logits_grad;
use crate::conv::{conv3d, conv3d_grad_input, conv3d_grad_kernel};
use crate::error::{shape_err, Result};
use crate::kernel::{PFilterGrid, QScheme};
use crate::layers::{b0_mean, sigmoid};
use crate::so3::TensorType;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub q_in: QScheme,
    /// Channel widths after the input, ending in 1.
    pub widths: Vec<usize>,
    pub p_filter: usize,
}

pub struct Baseline {
    pub config: BaselineConfig,
    b0: Vec<usize>,
    /// `(in, out, kernel offset, bias offset)` per layer.
    layers: Vec<(usize, usize, usize, usize)>,
    n_params: usize,
}

impl Baseline {
    pub fn new(config: BaselineConfig) -> Result<Self> {
        if config.widths.last() != Some(&1) {
            return Err(shape_err("baseline must end in one output channel"));
        }
        let b0 = config.q_in.zero_indices();
        let nf = PFilterGrid::new(config.p_filter).count();
        let mut cin = config.q_in.len() - b0.len().saturating_sub(1);
        let mut off = 0;
        let mut layers = Vec::new();
        for &w in &config.widths {
            layers.push((cin, w, off, off + nf * cin * w));
            off += nf * cin * w + w;
            cin = w;
        }
        Ok(Self { config, b0, layers, n_params: off })
    }

    /// One hidden layer of the width whose parameter count is closest to `target`.
    pub fn matched(q_in: QScheme, p_filter: usize, target: usize) -> Result<Self> {
        let best = (1..=4096)
            .map(|h| Self::new(BaselineConfig { q_in: q_in.clone(), widths: vec![h, 1], p_filter }).expect("valid widths"))
            .min_by_key(|b| b.n_params.abs_diff(target))
            .expect("non-empty range");
        Ok(best)
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nf = PFilterGrid::new(self.config.p_filter).count();
        let mut p = vec![0.0; self.n_params];
        for &(cin, cout, k, _) in &self.layers {
            let a = 1.0 / ((cin * nf) as f64).sqrt();
            for v in &mut p[k..k + nf * cin * cout] {
                *v = rng.random_range(-a..=a);
            }
        }
        p
    }

    fn input(&self, s: &Sample) -> Result<(Vec<f64>, [usize; 3])> {
        if s.input.ty() != &TensorType::scalars(1) || s.input.q().len() != self.config.q_in.len() {
            return Err(shape_err("baseline input does not match its config"));
        }
        let f = if self.b0.len() > 1 { b0_mean(&s.input, &self.b0)? } else { s.input.clone() };
        let vm = f.to_voxel_major();
        Ok((vm.data, vm.dims))
    }

    /// Returns the input of every layer, the pre-activations and the output probabilities.
    fn run(&self, params: &[f64], s: &Sample) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, [usize; 3])> {
        if params.len() != self.n_params {
            return Err(shape_err("baseline parameter count mismatch"));
        }
        let grid = PFilterGrid::new(self.config.p_filter);
        let (mut x, dims) = self.input(s)?;
        let (mut acts, mut pres) = (Vec::new(), Vec::new());
        let last = self.layers.len() - 1;
        for (i, &(cin, cout, k, b)) in self.layers.iter().enumerate() {
            let mut y = conv3d(&x, dims, cin, &params[k..k + grid.count() * cin * cout], grid, cout);
            for chunk in y.chunks_exact_mut(cout) {
                for (v, bb) in chunk.iter_mut().zip(&params[b..b + cout]) {
                    *v += bb;
                }
            }
            acts.push(x);
            x = if i == last { y.iter().map(|&v| sigmoid(v)).collect() } else { y.iter().map(|&v| v.max(0.0)).collect() };
            pres.push(y);
        }
        Ok((acts, pres, x, dims))
    }

    pub fn predict(&self, params: &[f64], s: &Sample) -> Result<Vec<f64>> {
        Ok(self.run(params, s)?.2)
    }
}

impl Objective for Baseline {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn loss_and_grad(&self, params: &[f64], s: &Sample, pos_weight: f64) -> Result<(f64, Vec<f64>)> {
        let grid = PFilterGrid::new(self.config.p_filter);
        let (acts, pres, _, dims) = self.run(params, s)?;
        let logits = pres.last().expect("at least one layer");
        let (loss, mut d) = weighted_bce_logits_grad(logits, &s.labels, &s.mask, pos_weight)?;
        let mut grad = vec![0.0; self.n_params];
        for (i, &(cin, cout, k, b)) in self.layers.iter().enumerate().rev() {
            if i != self.layers.len() - 1 {
                for (g, &z) in d.iter_mut().zip(&pres[i]) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            for chunk in d.chunks_exact(cout) {
                for (g, v) in grad[b..b + cout].iter_mut().zip(chunk) {
                    *g += v;
                }
            }
            let dk = conv3d_grad_kernel(&acts[i], &d, dims, cin, cout, grid);
            grad[k..k + dk.len()].copy_from_slice(&dk);
            if i > 0 {
                d = conv3d_grad_input(&d, dims, cout, &params[k..k + dk.len()], grid, cin);
            }
        }
        Ok((loss, grad))
    }
}
