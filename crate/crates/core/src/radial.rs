//! Scalar radial basis families.
//!
//! Fixed families (Gaussian, cosine) have no trainable state. The MLP family
//! feeds a fixed inner basis through a ReLU network whose final layer width is
//! the basis size; its weights are trainable and exposed as one flat vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadialBasisSpec {
    Gaussian { centers: Vec<f64>, sigma: f64 },
    Cosine { centers: Vec<f64>, gamma: f64 },
    Mlp(MlpRadial),
}

/// Equally spaced centers on `[0, x_max]` and their spacing. A single center
/// sits at the origin with spacing `max(x_max, 1)`.
fn uniform_centers(k: usize, x_max: f64) -> (Vec<f64>, f64) {
    if k <= 1 {
        return (vec![0.0], x_max.max(1.0));
    }
    let h = x_max / (k - 1) as f64;
    let h = if h > 0.0 { h } else { 1.0 };
    ((0..k).map(|i| i as f64 * h).collect(), h)
}

impl RadialBasisSpec {
    pub fn gaussian(k: usize, x_max: f64) -> Self {
        let (centers, h) = uniform_centers(k, x_max);
        Self::Gaussian { centers, sigma: h }
    }

    pub fn cosine(k: usize, x_max: f64) -> Self {
        let (centers, h) = uniform_centers(k, x_max);
        Self::Cosine { centers, gamma: 1.0 / h }
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Gaussian { centers, .. } | Self::Cosine { centers, .. } => centers.len(),
            Self::Mlp(m) => m.size(),
        }
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self, Self::Mlp(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { centers, sigma } => {
                if centers.is_empty() || !(*sigma > 0.0) {
                    return Err(invalid("gaussian basis needs K >= 1 and sigma > 0"));
                }
            }
            Self::Cosine { centers, gamma } => {
                if centers.is_empty() || !(*gamma > 0.0) {
                    return Err(invalid("cosine basis needs K >= 1 and gamma > 0"));
                }
            }
            Self::Mlp(m) => m.validate()?,
        }
        Ok(())
    }

    /// Evaluates all `K` functions at `x >= 0`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        if !(x >= 0.0) {
            return Err(invalid(format!("radial argument must be non-negative, got {x}")));
        }
        let mut out = vec![0.0; self.size()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        match self {
            Self::Gaussian { centers, sigma } => {
                let s2 = 2.0 * sigma * sigma;
                for (o, mu) in out.iter_mut().zip(centers) {
                    *o = (-(x - mu) * (x - mu) / s2).exp();
                }
            }
            Self::Cosine { centers, gamma } => {
                for (o, mu) in out.iter_mut().zip(centers) {
                    let t = gamma * (x - mu);
                    *o = if t.abs() <= 1.0 {
                        let c = (t * std::f64::consts::FRAC_PI_2).cos();
                        c * c
                    } else {
                        0.0
                    };
                }
            }
            Self::Mlp(m) => m.forward(x, out),
        }
    }
}

/// Outer product flattened row-major: `k = k1 * K2 + k2`.
pub fn combine_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// One affine layer, `w` stored row-major as `n_out x n_in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.w[j * self.n_in..(j + 1) * self.n_in];
            *o = self.b[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// Fixed inner basis followed by ReLU-separated dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpRadial {
    pub inner: Box<RadialBasisSpec>,
    pub layers: Vec<Dense>,
}

impl MlpRadial {
    /// Hidden widths `hidden`, output width `k`, weights uniform in
    /// `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(inner: RadialBasisSpec, hidden: &[usize], k: usize, rng: &mut R) -> Self {
        let mut widths = vec![inner.size()];
        widths.extend_from_slice(hidden);
        widths.push(k);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    n_in: w[0],
                    n_out: w[1],
                    w: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..=bound)).collect(),
                    b: (0..w[1]).map(|_| rng.random_range(-bound..=bound)).collect(),
                }
            })
            .collect();
        Self { inner: Box::new(inner), layers }
    }

    pub fn size(&self) -> usize {
        self.layers.last().map_or(self.inner.size(), |l| l.n_out)
    }

    fn validate(&self) -> Result<()> {
        if self.inner.is_learnable() {
            return Err(invalid("MLP inner basis must be fixed"));
        }
        self.inner.validate()?;
        let mut n = self.inner.size();
        for l in &self.layers {
            if l.n_in != n || l.w.len() != l.n_in * l.n_out || l.b.len() != l.n_out {
                return Err(shape_err("MLP layer widths do not chain"));
            }
            n = l.n_out;
        }
        if self.layers.is_empty() {
            return Err(invalid("MLP needs at least one layer"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat parameters, per layer `w` then `b`.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(shape_err(format!("MLP has {} params, got {}", self.num_params(), p.len())));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Pre-activations of every layer; the last entry is the output.
    fn activations(&self, x: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut h = vec![0.0; self.inner.size()];
        self.inner.eval_into(x, &mut h);
        let input = h.clone();
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; l.n_out];
            l.apply(&h, &mut z);
            h = if i + 1 < self.layers.len() { z.iter().map(|v| v.max(0.0)).collect() } else { z.clone() };
            pre.push(z);
        }
        (input, pre)
    }

    /// Pre-activations of every ReLU unit at `x`.
    pub fn hidden_preactivations(&self, x: f64) -> Vec<f64> {
        let (_, mut pre) = self.activations(x);
        pre.pop();
        pre.concat()
    }

    fn forward(&self, x: f64, out: &mut [f64]) {
        let (_, pre) = self.activations(x);
        out.copy_from_slice(pre.last().expect("validated nonempty"));
    }

    /// Accumulates `d(sum_k dout_k * phi_k(x)) / d params` into `grad`.
    pub fn backward(&self, x: f64, dout: &[f64], grad: &mut [f64]) {
        let (input, pre) = self.activations(x);
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.w.len() + l.b.len();
                Some(o)
            })
            .collect();
        let mut delta = dout.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let h_in: Vec<f64> = if i == 0 { input.clone() } else { pre[i - 1].iter().map(|v| v.max(0.0)).collect() };
            let off = offsets[i];
            for j in 0..l.n_out {
                for a in 0..l.n_in {
                    grad[off + j * l.n_in + a] += delta[j] * h_in[a];
                }
                grad[off + l.w.len() + j] += delta[j];
            }
            if i > 0 {
                let mut next = vec![0.0; l.n_in];
                for (a, nx) in next.iter_mut().enumerate() {
                    if pre[i - 1][a] > 0.0 {
                        *nx = (0..l.n_out).map(|j| l.w[j * l.n_in + a] * delta[j]).sum();
                    }
                }
                delta = next;
            }
        }
    }
}
