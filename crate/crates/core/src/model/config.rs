use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::filter::{FilterBasisSpec, FilterFamily};
use crate::kernel::{QScheme, Q_TOL};
use crate::radial::{MlpRadial, RadialBasisSpec};
use crate::so3::TensorType;

/// p-space radial family of every convolution stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialChoice {
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "cosine")]
    Cosine,
    #[serde(rename = "gaussian+fc")]
    GaussianFc,
    #[serde(rename = "cosine+fc")]
    CosineFc,
}

impl RadialChoice {
    pub fn is_fc(self) -> bool {
        matches!(self, Self::GaussianFc | Self::CosineFc)
    }

    /// p radial basis with `K_p = max(1, P_filter)` functions on `[0, P_filter]`.
    pub fn p_basis<R: Rng + ?Sized>(self, p_filter: usize, hidden: &[usize], rng: &mut R) -> RadialBasisSpec {
        let k = p_filter.max(1);
        let x_max = p_filter as f64;
        let fixed = match self {
            Self::Gaussian | Self::GaussianFc => RadialBasisSpec::gaussian(k, x_max),
            Self::Cosine | Self::CosineFc => RadialBasisSpec::cosine(k, x_max),
        };
        if self.is_fc() {
            RadialBasisSpec::Mlp(MlpRadial::init(fixed, hidden, k, rng))
        } else {
            fixed
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QReduction {
    Late,
    Gradual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PqLayerConfig {
    pub tau_out: TensorType,
    /// Output q-scheme; `None` keeps the input scheme (late reduction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_out: Option<QScheme>,
}

/// Full model description, serialized as the JSON model config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub filter: FilterFamily,
    pub radial: RadialChoice,
    pub q_reduction: QReduction,
    /// Raw input scheme; zero vectors are averaged into one sample first.
    pub q_in: QScheme,
    pub pq_layers: Vec<PqLayerConfig>,
    pub q_reduce_tau: TensorType,
    pub p_layers: Vec<TensorType>,
    pub p_filter: usize,
    #[serde(default = "default_hidden")]
    pub mlp_hidden: Vec<usize>,
    #[serde(default)]
    pub ball_mask: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub byte_budget: Option<u64>,
}

fn default_hidden() -> Vec<usize> {
    vec![50, 50, 50]
}

impl ModelConfig {
    /// Scheme seen by the first layer: all zero vectors merged into the
    /// position of the first one.
    pub fn effective_q_in(&self) -> QScheme {
        let zeros = self.q_in.zero_indices();
        if zeros.len() <= 1 {
            return self.q_in.clone();
        }
        let v = (0..self.q_in.len()).filter(|n| *n == zeros[0] || !zeros.contains(n)).map(|n| *self.q_in.get(n)).collect();
        QScheme::new(v).expect("subset of a valid scheme")
    }

    /// Output τ of the input and of every layer, in order.
    pub fn tau_rows(&self) -> Vec<TensorType> {
        let mut rows = vec![TensorType::scalars(1)];
        rows.extend(self.pq_layers.iter().map(|l| l.tau_out.clone()));
        rows.push(self.q_reduce_tau.clone());
        rows.extend(self.p_layers.iter().cloned());
        rows
    }

    /// Number of samples in the input and each pq-layer output.
    pub fn q_rows(&self) -> Vec<usize> {
        let mut q = self.effective_q_in();
        let mut rows = vec![q.len()];
        for l in &self.pq_layers {
            if let Some(s) = &l.q_out {
                q = s.clone();
            }
            rows.push(q.len());
        }
        rows
    }

    /// Layer count string such as `1+1+4`.
    pub fn layer_counts(&self) -> String {
        format!("{}+1+{}", self.pq_layers.len(), self.p_layers.len())
    }

    /// Number of convolution-type layers, used for border cropping.
    pub fn conv_depth(&self) -> usize {
        self.pq_layers.len() + self.p_layers.len() + usize::from(self.q_reduction == QReduction::Gradual)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_layers.last() != Some(&TensorType::scalars(1)) {
            return Err(invalid("the final layer must output a single scalar channel"));
        }
        if self.p_layers.iter().chain(self.pq_layers.iter().map(|l| &l.tau_out)).any(|t| t.num_channels() == 0) {
            return Err(invalid("every layer needs at least one output channel"));
        }
        let mut prev_tau = TensorType::scalars(1);
        let mut prev_q = self.effective_q_in();
        for (i, l) in self.pq_layers.iter().enumerate() {
            match (self.q_reduction, &l.q_out) {
                (QReduction::Late, Some(_)) => return Err(invalid(format!("pq-layer {i}: late reduction keeps the input scheme"))),
                (QReduction::Gradual, None) => return Err(invalid(format!("pq-layer {i}: gradual reduction needs an output scheme"))),
                (QReduction::Gradual, Some(q)) => {
                    if q.len() >= prev_q.len() {
                        return Err(invalid(format!("pq-layer {i}: gradual schemes must shrink ({} -> {})", prev_q.len(), q.len())));
                    }
                    if !q.is_distinct() {
                        return Err(invalid(format!("pq-layer {i}: output scheme repeats the zero vector")));
                    }
                    prev_q = q.clone();
                }
                (QReduction::Late, None) => {}
            }
            prev_tau = l.tau_out.clone();
        }
        if self.q_reduction == QReduction::Late && self.q_reduce_tau != prev_tau {
            return Err(invalid(format!("late q-reduction is channelwise: expected type {prev_tau}, got {}", self.q_reduce_tau)));
        }
        if self.q_reduction == QReduction::Gradual && prev_q.len() == 1 && prev_q.get(0).norm() <= Q_TOL {
            return Err(invalid("gradual q-reduction input is already reduced"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Basis spec of a stage mapping `q_in -> q_out`.
    pub(crate) fn stage_spec(&self, family: FilterFamily, radial_p: RadialBasisSpec, q_in: &QScheme, q_out: &QScheme) -> FilterBasisSpec {
        FilterBasisSpec {
            family,
            radial_p,
            radial_q_out: q_radial(q_out),
            radial_q_in: q_radial(q_in),
            p_support: None,
        }
    }
}

/// Gaussian basis with one function per distinct q length.
pub fn q_radial(q: &QScheme) -> RadialBasisSpec {
    RadialBasisSpec::gaussian(q.distinct_lengths().len(), q.max_len())
}
