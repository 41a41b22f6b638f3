//! Roto-translation action on sampled fields and equivariance measurement.

use serde::{Deserialize, Serialize};

use crate::conv::Precision;
use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::model::Model;
use crate::so3::{Rotation, Vec3, WignerSet};

/// Rotation about the grid center followed by a translation in voxels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub rotation: Rotation,
    pub translation: [f64; 3],
}

impl RigidMotion {
    pub fn rotation(rotation: Rotation) -> Self {
        Self { rotation, translation: [0.0; 3] }
    }

    pub fn identity() -> Self {
        Self::rotation(Rotation::identity())
    }

    fn validate(&self) -> Result<()> {
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(invalid("translation must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Voxel and q-sample permutation; needs a grid-exact motion and a
    /// closed q-scheme.
    ExactGrid,
    /// Trilinear resampling in p; the q-scheme itself is rotated.
    Trilinear,
}

fn center(dims: [usize; 3]) -> Vec3 {
    Vec3::new((dims[0] as f64 - 1.0) / 2.0, (dims[1] as f64 - 1.0) / 2.0, (dims[2] as f64 - 1.0) / 2.0)
}

/// Applies the per-voxel Wigner blocks of `g` to every `(voxel, q)` sample in
/// place. Skipped for the exact identity so that it acts bitwise trivially.
fn rotate_components(f: &mut Field, g: &Rotation) {
    if g == &Rotation::identity() {
        return;
    }
    let ty = f.ty().clone();
    let ws = WignerSet::new(g, ty.max_order());
    let block = f.voxels() * f.q().len();
    let dim = ty.dim();
    let data = f.data_mut();
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for s in 0..block {
        for (c, v) in x.iter_mut().enumerate() {
            *v = data[c * block + s];
        }
        ws.apply_type(&ty, &x, &mut y);
        for (c, v) in y.iter().enumerate() {
            data[c * block + s] = *v;
        }
    }
}

/// `field'(p, q) = D_g field(g⁻¹(p − t − c) + c, g⁻¹ q)` with zero outside
/// the grid and `c` the grid center.
pub fn act_on_field(field: &Field, motion: &RigidMotion, mode: Interpolation) -> Result<Field> {
    motion.validate()?;
    match mode {
        Interpolation::ExactGrid => act_exact(field, motion),
        Interpolation::Trilinear => act_trilinear(field, motion),
    }
}

fn act_exact(field: &Field, motion: &RigidMotion) -> Result<Field> {
    let g = &motion.rotation;
    if !g.is_grid_exact() {
        return Err(Error::Precondition("rotation does not map the voxel grid to itself".into()));
    }
    if motion.translation.iter().any(|t| t.fract() != 0.0) {
        return Err(Error::Precondition("exact-grid translation must be integer".into()));
    }
    let dims = field.dims();
    let m = g.matrix();
    for i in 0..3 {
        let j = (0..3).find(|&j| m[(i, j)] != 0.0).expect("signed permutation");
        if dims[i] != dims[j] {
            return Err(Error::Precondition(format!("rotation maps grid axis {j} onto axis {i} of different length")));
        }
    }
    let perm = field.q().preimage_permutation(g)?;
    let ginv = g.inverse();
    let c = center(dims);
    let t = Vec3::from(motion.translation);
    let nq = field.q().len();
    let mut out = Field::zeros(field.ty().clone(), dims, field.q().clone());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = Vec3::new(x as f64, y as f64, z as f64);
                let src = ginv.apply(&(p - t - c)) + c;
                let s = [src.x.round(), src.y.round(), src.z.round()];
                if s.iter().zip(&dims).any(|(&v, &d)| v < 0.0 || v >= d as f64) {
                    continue;
                }
                let (sx, sy, sz) = (s[0] as usize, s[1] as usize, s[2] as usize);
                for comp in 0..field.ty().dim() {
                    for (n, &pn) in perm.iter().enumerate().take(nq) {
                        out.set(comp, x, y, z, n, field.get(comp, sx, sy, sz, pn));
                    }
                }
            }
        }
    }
    rotate_components(&mut out, g);
    Ok(out)
}

fn act_trilinear(field: &Field, motion: &RigidMotion) -> Result<Field> {
    let g = &motion.rotation;
    let dims = field.dims();
    let ginv = g.inverse();
    let c = center(dims);
    let t = Vec3::from(motion.translation);
    let nq = field.q().len();
    let mut out = Field::zeros(field.ty().clone(), dims, field.q().rotated(g));
    let inside = |i: i64, d: usize| i >= 0 && (i as usize) < d;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = Vec3::new(x as f64, y as f64, z as f64);
                let src = ginv.apply(&(p - t - c)) + c;
                let base = [src.x.floor(), src.y.floor(), src.z.floor()];
                let frac = [src.x - base[0], src.y - base[1], src.z - base[2]];
                let mut taps = Vec::with_capacity(8);
                for corner in 0..8 {
                    let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                    let idx: Vec<i64> = (0..3).map(|a| base[a] as i64 + o[a] as i64).collect();
                    if !(0..3).all(|a| inside(idx[a], dims[a])) {
                        continue;
                    }
                    let w: f64 = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
                    if w != 0.0 {
                        taps.push(([idx[0] as usize, idx[1] as usize, idx[2] as usize], w));
                    }
                }
                for comp in 0..field.ty().dim() {
                    for n in 0..nq {
                        let v = taps.iter().map(|(i, w)| w * field.get(comp, i[0], i[1], i[2], n)).sum();
                        out.set(comp, x, y, z, n, v);
                    }
                }
            }
        }
    }
    rotate_components(&mut out, g);
    Ok(out)
}

/// Voxels entering the error metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "border")]
pub enum Crop {
    /// Drop a border of this many voxels on every face.
    Box(usize),
    /// Keep the ball around the grid center whose radius is the inscribed
    /// radius minus this border.
    Ball(usize),
}

impl Crop {
    /// Border for `depth` stacked convolutions with filter radius `p_filter`:
    /// a box for exact-grid motions, a ball for arbitrary rotations.
    pub fn for_depth(p_filter: usize, depth: usize, mode: Interpolation) -> Self {
        match mode {
            Interpolation::ExactGrid => Self::Box(p_filter * depth),
            Interpolation::Trilinear => Self::Ball(p_filter * depth),
        }
    }

    pub fn mask(&self, dims: [usize; 3]) -> Vec<bool> {
        let c = center(dims);
        let mut m = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p = [x, y, z];
                    m.push(match *self {
                        Self::Box(b) => (0..3).all(|a| p[a] >= b && p[a] + b < dims[a]),
                        Self::Ball(b) => {
                            let r = dims.iter().map(|&d| (d as f64 - 1.0) / 2.0).fold(f64::INFINITY, f64::min) - b as f64;
                            (Vec3::new(x as f64, y as f64, z as f64) - c).norm() <= r + 1e-9
                        }
                    });
                }
            }
        }
        m
    }
}

fn cropped_norms(a: &Field, b: &Field, denom: &Field, crop: &Crop) -> Result<f64> {
    if a.dims() != b.dims() || a.data().len() != b.data().len() || denom.data().len() != a.data().len() {
        return Err(Error::Shape("equivariance operands differ in shape".into()));
    }
    let mask = crop.mask(a.dims());
    let nq = a.q().len();
    let nv = a.voxels();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, ((x, y), d)) in a.data().iter().zip(b.data()).zip(denom.data()).enumerate() {
        if mask[(i / nq) % nv] {
            num += (x - y) * (x - y);
            den += d * d;
        }
    }
    if den == 0.0 {
        return Err(Error::Undefined("reference output vanishes on the cropped region".into()));
    }
    Ok((num / den).sqrt())
}

/// `‖apply_moved(act(x)) − act(apply(x))‖ / ‖apply(x)‖` over the crop.
/// `apply_moved` receives the acted field, whose q-scheme is rotated in
/// trilinear mode.
pub fn equivariance_error<F, G>(apply: F, apply_moved: G, field: &Field, motion: &RigidMotion, mode: Interpolation, crop: &Crop) -> Result<f64>
where
    F: Fn(&Field) -> Result<Field>,
    G: Fn(&Field) -> Result<Field>,
{
    let y = apply(field)?;
    let lhs = apply_moved(&act_on_field(field, motion, mode)?)?;
    let rhs = act_on_field(&y, motion, mode)?;
    cropped_norms(&lhs, &rhs, &y, crop)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub motion: RigidMotion,
    pub error: f64,
    pub mode: Interpolation,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub max_error: f64,
}

impl AuditReport {
    pub fn new(entries: Vec<AuditEntry>) -> Self {
        let max_error = entries.iter().map(|e| e.error).fold(0.0, f64::max);
        Self { entries, max_error }
    }
}

/// Errors of all 24 grid rotations, in `Rotation::cube_group` order.
pub fn cube_group_audit<F>(apply: F, field: &Field, crop: &Crop) -> Result<Vec<(RigidMotion, f64)>>
where
    F: Fn(&Field) -> Result<Field>,
{
    let group = Rotation::cube_group();
    if let Some(g) = group.iter().find(|g| !field.q().is_closed_under(g)) {
        return Err(Error::Precondition(format!("q-scheme is not closed under the cube rotation {:?}", g.matrix())));
    }
    group
        .into_iter()
        .map(|g| {
            let m = RigidMotion::rotation(g);
            let e = equivariance_error(&apply, &apply, field, &m, Interpolation::ExactGrid, crop)?;
            Ok((m, e))
        })
        .collect()
}

/// Which model output the audit compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Logits,
    Probabilities,
}

/// Model wrapped as a field map for auditing.
pub struct ModelProbe<'a> {
    pub model: &'a Model,
    pub params: &'a [f64],
    pub precision: Precision,
    pub output: Output,
}

impl ModelProbe<'_> {
    fn run(&self, m: &Model, x: &Field) -> Result<Field> {
        match self.output {
            Output::Logits => m.logits_with(self.params, x, self.precision),
            Output::Probabilities => m.predict_with(self.params, x, self.precision),
        }
    }

    pub fn apply(&self, x: &Field) -> Result<Field> {
        self.run(self.model, x)
    }

    /// Exact grid rotations about the center commute with zero padding, so
    /// pure rotations keep every voxel; anything else drops the border.
    pub fn default_crop(&self, motion: &RigidMotion, mode: Interpolation) -> Crop {
        if mode == Interpolation::ExactGrid && motion.translation == [0.0; 3] {
            return Crop::Box(0);
        }
        Crop::for_depth(self.model.config.p_filter, self.model.config.conv_depth(), mode)
    }

    /// Error for one motion; in trilinear mode the moved input is processed
    /// by the same weights on rotated q-schemes.
    pub fn error(&self, field: &Field, motion: &RigidMotion, mode: Interpolation, crop: &Crop) -> Result<f64> {
        match mode {
            Interpolation::ExactGrid => equivariance_error(|x| self.apply(x), |x| self.apply(x), field, motion, mode, crop),
            Interpolation::Trilinear => {
                let moved = self.model.with_rotated_schemes(&motion.rotation)?;
                equivariance_error(|x| self.apply(x), |x| self.run(&moved, x), field, motion, mode, crop)
            }
        }
    }

    pub fn cube_report(&self, field: &Field) -> Result<AuditReport> {
        let crop = Crop::Box(0);
        let hash = self.model.config.hash();
        let rows = cube_group_audit(|x| self.apply(x), field, &crop)?;
        Ok(AuditReport::new(
            rows.into_iter()
                .map(|(motion, error)| AuditEntry { motion, error, mode: Interpolation::ExactGrid, config_hash: hash.clone() })
                .collect(),
        ))
    }

    pub fn continuous_report(&self, field: &Field, motions: &[RigidMotion]) -> Result<AuditReport> {
        let hash = self.model.config.hash();
        let entries = motions
            .iter()
            .map(|m| {
                let crop = self.default_crop(m, Interpolation::Trilinear);
                let error = self.error(field, m, Interpolation::Trilinear, &crop)?;
                Ok(AuditEntry { motion: m.clone(), error, mode: Interpolation::Trilinear, config_hash: hash.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AuditReport::new(entries))
    }
}
