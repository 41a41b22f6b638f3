use serde::{Deserialize, Serialize};

use super::net::{Model, Sample};
use crate::error::{invalid, Error, Result};

/// Anything with a scalar loss and its gradient on one sample.
pub trait Objective {
    fn n_params(&self) -> usize;
    fn loss_and_grad(&self, params: &[f64], sample: &Sample, pos_weight: f64) -> Result<(f64, Vec<f64>)>;
}

impl Objective for Model {
    fn n_params(&self) -> usize {
        Model::n_params(self)
    }

    fn loss_and_grad(&self, params: &[f64], sample: &Sample, pos_weight: f64) -> Result<(f64, Vec<f64>)> {
        Model::loss_and_grad(self, params, sample, pos_weight)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub params: Vec<f64>,
    /// Loss of each step, evaluated before that step's update.
    pub losses: Vec<f64>,
}

/// `#negative / #positive` over the masked voxels of the whole set.
pub fn pos_weight(data: &[Sample]) -> Result<f64> {
    let (mut pos, mut neg) = (0usize, 0usize);
    for s in data {
        for (&y, &m) in s.labels.iter().zip(&s.mask) {
            if m {
                if y >= 0.5 {
                    pos += 1;
                } else {
                    neg += 1;
                }
            }
        }
    }
    if pos == 0 {
        return Err(invalid("training set has no positive voxels"));
    }
    Ok(neg as f64 / pos as f64)
}

/// Plain SGD with batch size one, cycling through `data` in order.
pub fn train_toy<O: Objective + ?Sized>(obj: &O, init: Vec<f64>, data: &[Sample], steps: usize, lr: f64, pos_weight: f64) -> Result<TrainResult> {
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if init.len() != obj.n_params() {
        return Err(invalid("initial parameters do not match the model"));
    }
    let mut params = init;
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let (loss, grad) = obj.loss_and_grad(&params, &data[step % data.len()], pos_weight)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= lr * g;
        }
    }
    Ok(TrainResult { params, losses })
}
