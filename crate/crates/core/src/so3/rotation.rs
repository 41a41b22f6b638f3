use std::ops::Mul;

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance used when validating user-supplied rotation matrices.
const ROTATION_TOL: f64 = 1e-9;

/// A proper rotation of 3D space, stored as its matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

/// Serialized as three matrix rows.
impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| self.0[(i, j)]));
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Rotation::new(Matrix3::from_fn(|i, j| rows[i][j])).map_err(serde::de::Error::custom)
    }
}

impl Rotation {
    /// Validates `m` as a rotation: `mᵀm = I` and `det m = +1` within 1e-9.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let residual = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if !residual.is_finite() || residual > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotARotation { residual, det });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Right-handed rotation by `angle` radians about `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = Unit::new_normalize(axis);
        Self(*UnitQuaternion::from_axis_angle(&axis, angle).to_rotation_matrix().matrix())
    }

    /// Haar-uniform random rotation (normalized Gaussian quaternion).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
                return Self(*uq.to_rotation_matrix().matrix());
            }
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// True when every entry is exactly 0 or ±1, i.e. the rotation maps the
    /// integer lattice onto itself.
    pub fn is_grid_exact(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0 || x == 1.0 || x == -1.0)
    }

    /// The 24 rotations of the cube (signed permutation matrices with det +1),
    /// identity first.
    pub fn cube_group() -> Vec<Rotation> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(24);
        for perm in PERMS {
            for signs in 0..8u32 {
                let mut m = Matrix3::zeros();
                for (row, &col) in perm.iter().enumerate() {
                    m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
                }
                if m.determinant() > 0.0 {
                    out.push(Rotation(m));
                }
            }
        }
        debug_assert_eq!(out.len(), 24);
        debug_assert_eq!(out[0], Rotation::identity());
        out
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_reflection_and_skew() {
        let reflect = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(Rotation::new(reflect), Err(Error::NotARotation { .. })));
        let mut skew = Matrix3::identity();
        skew[(0, 1)] = 1e-6;
        assert!(Rotation::new(skew).is_err());
    }

    #[test]
    fn random_rotations_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = Rotation::random(&mut rng);
            let m = *g.matrix();
            assert!(Rotation::new(m).is_ok());
            assert!((m.transpose() * m - Matrix3::identity()).amax() < 1e-12);
        }
    }

    #[test]
    fn cube_group_is_closed() {
        let group = Rotation::cube_group();
        for a in &group {
            assert!(a.is_grid_exact());
            for b in &group {
                let ab = a.compose(b);
                assert!(group.contains(&ab));
            }
        }
    }

    #[test]
    fn axis_angle_quarter_turn() {
        let g = Rotation::from_axis_angle(Vec3::z(), std::f64::consts::FRAC_PI_2);
        let v = g.apply(&Vec3::x());
        assert!((v - Vec3::y()).amax() < 1e-15);
    }
}
