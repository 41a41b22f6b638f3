//! Synthetic diffusion phantoms with the Gaussian signal model
//! `I(p, q) = exp(-b qᵀ D(p) q)`.
//!
//! Geometry lives in physical coordinates `x = (p - c) / s`, with `c` the
//! grid center and `s` half the smallest grid extent, so a larger grid
//! samples the same object more finely.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schemes::{fibonacci_shell, make_octahedral_scheme, OctahedralShell};
use crate::error::{invalid, Result};
use crate::field::Field;
use crate::kernel::QScheme;
use crate::so3::{Rotation, TensorType, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SchemeChoice {
    /// Cube-closed shells, see [`make_octahedral_scheme`].
    Octahedral { points: usize, radii: Vec<f64>, with_zero: bool },
    /// Seeded uniform random directions on one shell.
    UniformRandom { n: usize, radius: f64, seed: u64, with_zero: bool },
    Fibonacci { n: usize, radius: f64, with_zero: bool },
}

impl SchemeChoice {
    pub fn build(&self) -> Result<QScheme> {
        let prefix = |z: bool| if z { vec![Vec3::zeros()] } else { vec![] };
        match self {
            Self::Octahedral { points, radii, with_zero } => make_octahedral_scheme(OctahedralShell::from_count(*points)?, radii, *with_zero),
            Self::UniformRandom { n, radius, seed, with_zero } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut v = prefix(*with_zero);
                v.extend((0..*n).map(|_| Vec3::from(UnitSphere.sample(&mut rng)) * *radius));
                QScheme::new(v)
            }
            Self::Fibonacci { n, radius, with_zero } => {
                let mut v = prefix(*with_zero);
                v.extend(fibonacci_shell(*n, *radius));
                QScheme::new(v)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diffusivities {
    /// Along the fiber.
    pub parallel: f64,
    pub perpendicular: f64,
    /// Inside lesions.
    pub isotropic: f64,
}

impl Default for Diffusivities {
    fn default() -> Self {
        Self { parallel: 2.0, perpendicular: 0.5, isotropic: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub seed: u64,
    pub q_scheme: SchemeChoice,
    pub b_scale: f64,
    #[serde(default)]
    pub diffusivities: Diffusivities,
    /// Dominant fiber direction; random when absent.
    #[serde(default)]
    pub fiber_direction: Option<[f64; 3]>,
    /// Strength of the linear bending of the fiber field (`< 1/√3`).
    #[serde(default)]
    pub fiber_bend: f64,
    pub lesions: usize,
    /// Radius range of the lesion spheres, physical units.
    pub lesion_radius: [f64; 2],
    /// Width of the smooth lesion boundary; zero gives hard edges.
    #[serde(default)]
    pub edge_width: f64,
    #[serde(default)]
    pub noise: f64,
    /// Global rotation applied to the generated geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Rotation>,
    /// Also rotate the q-scheme by `rotation`.
    #[serde(default)]
    pub rotate_q: bool,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(invalid("phantom grid must be nonempty"));
        }
        if !(self.noise >= 0.0 && self.b_scale >= 0.0 && self.edge_width >= 0.0) {
            return Err(invalid("noise, b-scale and edge width must be non-negative"));
        }
        let d = self.diffusivities;
        if [d.parallel, d.perpendicular, d.isotropic].iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("diffusivities must be non-negative"));
        }
        let [r0, r1] = self.lesion_radius;
        if self.lesions > 0 && !(r0 > 0.0 && r1 >= r0) {
            return Err(invalid("lesion radius range must be positive and ordered"));
        }
        if !(0.0..0.5).contains(&self.fiber_bend) {
            return Err(invalid("fiber bend must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// Explicit geometry drawn from a spec's seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    /// Fiber direction field `u(x) ∝ b + A x`.
    pub fiber_b: Vec3,
    pub fiber_a: Matrix3<f64>,
    pub lesions: Vec<(Vec3, f64)>,
}

impl Geometry {
    pub fn draw(spec: &PhantomSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let fiber_b = match spec.fiber_direction {
            Some(d) => Vec3::from(d).normalize(),
            None => Vec3::from(UnitSphere.sample(&mut rng)),
        };
        let mut a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let norm = a.norm();
        if norm > 0.0 {
            a *= spec.fiber_bend / norm;
        }
        let lesions = (0..spec.lesions)
            .map(|_| {
                let dir = Vec3::from(UnitSphere.sample(&mut rng));
                let c = dir * 0.6 * rng.random_range(0.0f64..1.0).cbrt();
                let [r0, r1] = spec.lesion_radius;
                (c, if r1 > r0 { rng.random_range(r0..r1) } else { r0 })
            })
            .collect();
        Self { fiber_b, fiber_a: a, lesions }
    }

    /// Geometry of the object rotated by `g`: `u'(x) = g u(g⁻¹x)`.
    pub fn rotated(&self, g: &Rotation) -> Self {
        let r = g.matrix();
        Self {
            fiber_b: r * self.fiber_b,
            fiber_a: r * self.fiber_a * r.transpose(),
            lesions: self.lesions.iter().map(|(c, rad)| (r * c, *rad)).collect(),
        }
    }

    /// Lesion membership in `[0, 1]`.
    fn lesion_weight(&self, x: &Vec3, edge: f64) -> f64 {
        self.lesions
            .iter()
            .map(|(c, r)| {
                let d = r - (x - c).norm();
                if edge > 0.0 {
                    1.0 / (1.0 + (-4.0 * d / edge).exp())
                } else {
                    f64::from(d >= 0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn tensor(&self, x: &Vec3, d: &Diffusivities, edge: f64) -> (Matrix3<f64>, f64) {
        let u = (self.fiber_b + self.fiber_a * x).normalize();
        let aniso = Matrix3::identity() * d.perpendicular + u * u.transpose() * (d.parallel - d.perpendicular);
        let w = self.lesion_weight(x, edge);
        (aniso * (1.0 - w) + Matrix3::identity() * (d.isotropic * w), w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub field: Field,
    /// Lesion indicator per voxel.
    pub labels: Vec<f64>,
    /// Voxels inside the unit ball.
    pub mask: Vec<bool>,
}

fn physical(dims: [usize; 3], p: [usize; 3]) -> Vec3 {
    let s = ((*dims.iter().min().expect("3 dims") as f64 - 1.0) / 2.0).max(1.0);
    Vec3::new(
        (p[0] as f64 - (dims[0] as f64 - 1.0) / 2.0) / s,
        (p[1] as f64 - (dims[1] as f64 - 1.0) / 2.0) / s,
        (p[2] as f64 - (dims[2] as f64 - 1.0) / 2.0) / s,
    )
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let mut geo = Geometry::draw(spec);
    let mut q = spec.q_scheme.build()?;
    if let Some(g) = &spec.rotation {
        geo = geo.rotated(g);
        if spec.rotate_q {
            q = q.rotated(g);
        }
    }
    let [px, py, pz] = spec.dims;
    let nq = q.len();
    let slice = px * py * nq;
    let mut data = vec![0.0; slice * pz];
    let mut weights = vec![0.0; px * py * pz];
    data.par_chunks_mut(slice).zip(weights.par_chunks_mut(px * py)).enumerate().for_each(|(z, (out, w))| {
        for y in 0..py {
            for x in 0..px {
                let v = y * px + x;
                let (d, lw) = geo.tensor(&physical(spec.dims, [x, y, z]), &spec.diffusivities, spec.edge_width);
                w[v] = lw;
                for (n, qn) in q.vectors().iter().enumerate() {
                    out[v * nq + n] = (-spec.b_scale * (qn.transpose() * d * qn)[0]).exp();
                }
            }
        }
    });
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
        let normal = Normal::new(0.0, spec.noise).map_err(|e| invalid(e.to_string()))?;
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    let mut mask = Vec::with_capacity(weights.len());
    for z in 0..pz {
        for y in 0..py {
            for x in 0..px {
                mask.push(physical(spec.dims, [x, y, z]).norm() <= 1.0 + 1e-12);
            }
        }
    }
    let labels = weights.iter().map(|&w| f64::from(w >= 0.5)).collect();
    Ok(Phantom { field: Field::new(TensorType::scalars(1), spec.dims, q, data)?, labels, mask })
}

/// A phantom set: scan `i` uses seed `base.seed + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSetSpec {
    pub count: usize,
    pub base: PhantomSpec,
}

impl PhantomSetSpec {
    pub fn spec(&self, i: usize) -> PhantomSpec {
        PhantomSpec { seed: self.base.seed.wrapping_add(i as u64), ..self.base.clone() }
    }

    pub fn generate(&self) -> Result<Vec<Phantom>> {
        (0..self.count).map(|i| generate_phantom(&self.spec(i))).collect()
    }
}
