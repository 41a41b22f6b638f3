use serde::{Deserialize, Serialize};

use super::clebsch::clebsch_gordan;
use super::rotation::Rotation;
use super::wigner::WignerSet;
use crate::error::{invalid, shape_err, Result};

/// A single real spherical tensor of order `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalTensor {
    l: usize,
    data: Vec<f64>,
}

impl SphericalTensor {
    pub fn from_vec(l: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * l + 1 {
            return Err(shape_err(format!("order {l} needs {} components, got {}", 2 * l + 1, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("spherical tensor components must be finite"));
        }
        Ok(Self { l, data })
    }

    pub fn zeros(l: usize) -> Self {
        Self { l, data: vec![0.0; 2 * l + 1] }
    }

    pub fn order(&self) -> usize {
        self.l
    }

    pub fn components(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn rotate(&self, g: &Rotation) -> Self {
        let w = WignerSet::new(g, self.l);
        let mut out = vec![0.0; self.data.len()];
        w.apply_block(self.l, &self.data, &mut out);
        Self { l: self.l, data: out }
    }
}

/// Channel multiplicities per order: `counts[l]` channels of order `l`.
///
/// Trailing zeros are trimmed so equal types compare equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct TensorType(Vec<usize>);

impl From<Vec<usize>> for TensorType {
    fn from(v: Vec<usize>) -> Self {
        Self::new(v)
    }
}

impl From<TensorType> for Vec<usize> {
    fn from(t: TensorType) -> Self {
        t.0
    }
}

impl TensorType {
    pub fn new(mut counts: Vec<usize>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        Self(counts)
    }

    pub fn scalars(n: usize) -> Self {
        Self::new(vec![n])
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn count(&self, l: usize) -> usize {
        self.0.get(l).copied().unwrap_or(0)
    }

    /// Highest order with a nonzero count; 0 for the empty type.
    pub fn max_order(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn num_channels(&self) -> usize {
        self.0.iter().sum()
    }

    /// Total number of real components, `sum_l counts[l] * (2l+1)`.
    pub fn dim(&self) -> usize {
        self.0.iter().enumerate().map(|(l, &n)| n * (2 * l + 1)).sum()
    }

    /// Order of every channel, ascending in `l`.
    pub fn orders(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| std::iter::repeat_n(l, n))
            .collect()
    }

    /// Component offset of each channel in the flat layout.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.orders()
            .into_iter()
            .map(|l| {
                let o = off;
                off += 2 * l + 1;
                o
            })
            .collect()
    }

    pub fn is_scalar(&self) -> bool {
        self.0.len() <= 1
    }

    /// Appends `n` extra scalar channels (used for gate channels).
    pub fn with_extra_scalars(&self, n: usize) -> Self {
        let mut c = self.0.clone();
        if c.is_empty() {
            c.push(0);
        }
        c[0] += n;
        Self::new(c)
    }

    pub fn padded(&self, len: usize) -> Vec<usize> {
        let mut v = self.0.clone();
        v.resize(len.max(v.len()), 0);
        v
    }
}

impl std::fmt::Display for TensorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A direct sum of spherical tensors, laid out channel-major with `m`
/// ascending inside each channel.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChannelTensor {
    ty: TensorType,
    data: Vec<f64>,
}

impl MultiChannelTensor {
    pub fn new(ty: TensorType, data: Vec<f64>) -> Result<Self> {
        if data.len() != ty.dim() {
            return Err(shape_err(format!("type {ty} has dimension {}, got {} values", ty.dim(), data.len())));
        }
        Ok(Self { ty, data })
    }

    pub fn zeros(ty: TensorType) -> Self {
        let n = ty.dim();
        Self { ty, data: vec![0.0; n] }
    }

    pub fn ty(&self) -> &TensorType {
        &self.ty
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> SphericalTensor {
        let l = self.ty.orders()[c];
        let off = self.ty.offsets()[c];
        SphericalTensor { l, data: self.data[off..off + 2 * l + 1].to_vec() }
    }
}

/// Couples `a` and `b` into order `l` with real CG coefficients.
/// Returns the zero tensor when `l` violates the triangle rule.
pub fn tensor_product(a: &SphericalTensor, b: &SphericalTensor, l: usize) -> SphericalTensor {
    let c = clebsch_gordan(a.l, b.l, l);
    let (d, d1, d2) = c.dims();
    let mut out = vec![0.0; d];
    for (m, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for m1 in 0..d1 {
            for m2 in 0..d2 {
                s += c.at(m, m1, m2) * a.data[m1] * b.data[m2];
            }
        }
        *o = s;
    }
    SphericalTensor { l, data: out }
}

/// Applies `D^(l(c))_g` to every channel independently.
pub fn rotate_multichannel(x: &MultiChannelTensor, g: &Rotation) -> MultiChannelTensor {
    let w = WignerSet::new(g, x.ty.max_order());
    let mut out = vec![0.0; x.data.len()];
    w.apply_type(&x.ty, &x.data, &mut out);
    MultiChannelTensor { ty: x.ty.clone(), data: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{sph_harm, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn type_dimension_and_channel_map() {
        let t = TensorType::new(vec![2, 1, 0, 1, 0]);
        assert_eq!(t.counts(), &[2, 1, 0, 1]);
        assert_eq!(t.dim(), 2 + 3 + 7);
        assert_eq!(t.orders(), vec![0, 0, 1, 3]);
        assert_eq!(t.offsets(), vec![0, 1, 2, 5]);
        assert_eq!(t.to_string(), "(2,1,0,1)");
    }

    #[test]
    fn scalar_channels_are_invariant() {
        let x = MultiChannelTensor::new(TensorType::scalars(3), vec![1.0, -2.0, 0.5]).unwrap();
        let g = Rotation::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7);
        assert_eq!(rotate_multichannel(&x, &g), x);
    }

    #[test]
    fn half_turn_about_z_on_vector() {
        let x = MultiChannelTensor::new(TensorType::new(vec![0, 1]), vec![1.0, 2.0, 3.0]).unwrap();
        let g = Rotation::from_axis_angle(Vec3::z(), std::f64::consts::PI);
        let y = rotate_multichannel(&x, &g);
        for (a, b) in y.data().iter().zip([-1.0, 2.0, -3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_product_from_order_one_coupling() {
        // e_x, e_y in (y,z,x) layout couple to a multiple of e_z.
        let ex = SphericalTensor::from_vec(1, vec![0.0, 0.0, 1.0]).unwrap();
        let ey = SphericalTensor::from_vec(1, vec![1.0, 0.0, 0.0]).unwrap();
        let z = tensor_product(&ex, &ey, 1);
        let c = clebsch_gordan(1, 1, 1).at(1, 2, 0);
        assert!(c.abs() > 0.5);
        assert!(z.components()[0].abs() < 1e-14 && z.components()[2].abs() < 1e-14);
        assert!((z.components()[1] - c).abs() < 1e-14);
    }

    #[test]
    fn rotation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ty = TensorType::new(vec![1, 2, 1, 1]);
        let data: Vec<f64> = (0..ty.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = MultiChannelTensor::new(ty, data).unwrap();
        let g = Rotation::random(&mut rng);
        let back = rotate_multichannel(&rotate_multichannel(&x, &g), &g.inverse());
        for (a, b) in back.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn product_of_harmonics_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n1 = Vec3::new(0.3, -0.8, 0.1);
        let n2 = Vec3::new(-0.5, 0.2, 0.9);
        let g = Rotation::random(&mut rng);
        for (l1, l2, l) in [(1, 2, 2), (2, 2, 3), (3, 1, 3)] {
            let lhs = tensor_product(&sph_harm(l1, &g.apply(&n1)), &sph_harm(l2, &g.apply(&n2)), l);
            let rhs = tensor_product(&sph_harm(l1, &n1), &sph_harm(l2, &n2), l).rotate(&g);
            for (a, b) in lhs.components().iter().zip(rhs.components()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
