use crate::error::{invalid, shape_err, Result};

const EPS: f64 = 1e-12;

/// Masked mean of `-[w₊ y log p + (1 - y) log(1 - p)]` with log arguments
/// clamped at `1e-12`, and its derivative wrt every `p`.
pub fn weighted_bce_grad(probs: &[f64], labels: &[f64], mask: &[bool], pos_weight: f64) -> Result<(f64, Vec<f64>)> {
    if probs.len() != labels.len() || probs.len() != mask.len() {
        return Err(shape_err("prediction, labels and mask differ in size"));
    }
    let m = mask.iter().filter(|&&b| b).count();
    if m == 0 {
        return Err(invalid("loss mask is empty"));
    }
    let inv = 1.0 / m as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for (i, ((&p, &y), &keep)) in probs.iter().zip(labels).zip(mask).enumerate() {
        if !keep {
            continue;
        }
        loss -= pos_weight * y * p.max(EPS).ln() + (1.0 - y) * (1.0 - p).max(EPS).ln();
        let dpos = if p > EPS { pos_weight * y / p } else { 0.0 };
        let dneg = if 1.0 - p > EPS { (1.0 - y) / (1.0 - p) } else { 0.0 };
        grad[i] = (dneg - dpos) * inv;
    }
    Ok((loss * inv, grad))
}

pub fn weighted_bce(probs: &[f64], labels: &[f64], mask: &[bool], pos_weight: f64) -> Result<f64> {
    Ok(weighted_bce_grad(probs, labels, mask, pos_weight)?.0)
}

/// `ln σ(z)` without cancellation.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// The same clamped loss as [`weighted_bce_grad`] with `p = σ(z)`, evaluated
/// from logits so saturated predictions keep full precision. Returns the
/// derivative wrt every logit.
pub fn weighted_bce_logits_grad(logits: &[f64], labels: &[f64], mask: &[bool], pos_weight: f64) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() || logits.len() != mask.len() {
        return Err(shape_err("prediction, labels and mask differ in size"));
    }
    let m = mask.iter().filter(|&&b| b).count();
    if m == 0 {
        return Err(invalid("loss mask is empty"));
    }
    let inv = 1.0 / m as f64;
    let floor = EPS.ln();
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, ((&z, &y), &keep)) in logits.iter().zip(labels).zip(mask).enumerate() {
        if !keep {
            continue;
        }
        let (lp, ln) = (log_sigmoid(z), log_sigmoid(-z));
        loss -= pos_weight * y * lp.max(floor) + (1.0 - y) * ln.max(floor);
        // d/dz ln σ(z) = σ(-z), d/dz ln σ(-z) = -σ(z).
        let dpos = if lp > floor { -pos_weight * y * ln.exp() } else { 0.0 };
        let dneg = if ln > floor { (1.0 - y) * lp.exp() } else { 0.0 };
        grad[i] = (dpos + dneg) * inv;
    }
    Ok((loss * inv, grad))
}
