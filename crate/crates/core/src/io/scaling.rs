//! Two-stage intensity normalization: each scan by its own mean intensity,
//! then each q-channel by its mean over the set.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::field::Field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    /// Mean intensity of every scan before scaling.
    pub scan_means: Vec<f64>,
    /// Per `(component, q)` channel mean after the first stage.
    pub channel_means: Vec<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

fn channel_index(f: &Field, i: usize) -> usize {
    let nq = f.q().len();
    let per_comp = f.voxels() * nq;
    (i / per_comp) * nq + i % nq
}

fn channel_means(fields: &[Field]) -> Vec<f64> {
    let f0 = &fields[0];
    let nc = f0.ty().dim() * f0.q().len();
    let mut sum = vec![0.0; nc];
    let mut count = vec![0usize; nc];
    for f in fields {
        for (i, v) in f.data().iter().enumerate() {
            let c = channel_index(f, i);
            sum[c] += v;
            count[c] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &n)| s / n as f64).collect()
}

/// Scales a set of scans sharing one type and q-scheme.
pub fn feature_scale(fields: &[Field]) -> Result<(Vec<Field>, ScaleRecord)> {
    let Some(f0) = fields.first() else {
        return Err(invalid("nothing to scale"));
    };
    if fields.iter().any(|f| f.ty() != f0.ty() || f.q() != f0.q()) {
        return Err(shape_err("scans differ in tensor type or q-scheme"));
    }
    let mut scan_means = Vec::with_capacity(fields.len());
    let mut stage1 = Vec::with_capacity(fields.len());
    for f in fields {
        let m = mean(f.data().iter().copied());
        if m == 0.0 || !m.is_finite() {
            return Err(invalid("scan has zero mean intensity"));
        }
        scan_means.push(m);
        let mut g = f.clone();
        g.data_mut().iter_mut().for_each(|v| *v /= m);
        stage1.push(g);
    }
    let channel_means = channel_means(&stage1);
    if channel_means.iter().any(|&m| m == 0.0 || !m.is_finite()) {
        return Err(invalid("channel has zero mean"));
    }
    let rec = ScaleRecord { scan_means, channel_means };
    for g in &mut stage1 {
        divide_channels(g, &rec.channel_means);
    }
    Ok((stage1, rec))
}

fn divide_channels(f: &mut Field, means: &[f64]) {
    let idx: Vec<usize> = (0..f.data().len()).map(|i| channel_index(f, i)).collect();
    for (v, c) in f.data_mut().iter_mut().zip(idx) {
        *v /= means[c];
    }
}

impl ScaleRecord {
    /// Scales a new scan with its own mean and the stored channel means.
    pub fn apply(&self, field: &Field) -> Result<Field> {
        if field.ty().dim() * field.q().len() != self.channel_means.len() {
            return Err(shape_err("scan does not match the scale record"));
        }
        let m = mean(field.data().iter().copied());
        if m == 0.0 || !m.is_finite() {
            return Err(invalid("scan has zero mean intensity"));
        }
        let mut g = field.clone();
        g.data_mut().iter_mut().for_each(|v| *v /= m);
        divide_channels(&mut g, &self.channel_means);
        Ok(g)
    }

    /// Undoes the scaling of scan `i` of the set the record was built from.
    pub fn invert(&self, i: usize, scaled: &Field) -> Result<Field> {
        let m = *self.scan_means.get(i).ok_or_else(|| invalid("scan index out of range"))?;
        let mut g = scaled.clone();
        let idx: Vec<usize> = (0..g.data().len()).map(|k| channel_index(&g, k)).collect();
        for (v, c) in g.data_mut().iter_mut().zip(idx) {
            *v *= self.channel_means[c] * m;
        }
        Ok(g)
    }
}
