//! Order-2 Cartesian tensors as `l = 0 ⊕ 1 ⊕ 2` spherical tensors.
//!
//! Each spherical component is the Frobenius inner product with a fixed
//! orthonormal matrix basis, so the map is an isometry and its inverse is the
//! transpose.

use nalgebra::Matrix3;

use super::tensor::{MultiChannelTensor, TensorType};
use crate::error::{shape_err, Result};

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;

/// The nine orthonormal basis matrices in output order
/// `[l0 | l1: y z x | l2: m=-2..2]`.
fn basis() -> [Matrix3<f64>; 9] {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let r3 = 1.0 / 3f64.sqrt();
    let r6 = 1.0 / 6f64.sqrt();
    let anti = |i: usize, j: usize| {
        let mut m = Matrix3::zeros();
        m[(i, j)] = r2;
        m[(j, i)] = -r2;
        m
    };
    let sym = |i: usize, j: usize| {
        let mut m = Matrix3::zeros();
        m[(i, j)] = r2;
        m[(j, i)] = r2;
        m
    };
    [
        Matrix3::identity() * r3,
        // Axial vector w with A_ij = eps_ijk w_k: w_y = A_zx, w_z = A_xy, w_x = A_yz.
        anti(Z, X),
        anti(X, Y),
        anti(Y, Z),
        sym(X, Y),
        sym(Y, Z),
        Matrix3::from_diagonal(&nalgebra::Vector3::new(-r6, -r6, 2.0 * r6)),
        sym(X, Z),
        Matrix3::from_diagonal(&nalgebra::Vector3::new(r2, -r2, 0.0)),
    ]
}

fn cart2_type() -> TensorType {
    TensorType::new(vec![1, 1, 1])
}

/// Splits `m` into its isotropic, antisymmetric and symmetric-traceless parts.
pub fn cart2_to_spherical(m: &Matrix3<f64>) -> MultiChannelTensor {
    let data = basis().iter().map(|b| b.dot(m)).collect();
    MultiChannelTensor::new(cart2_type(), data).expect("dimension 9")
}

pub fn spherical_to_cart2(x: &MultiChannelTensor) -> Result<Matrix3<f64>> {
    if *x.ty() != cart2_type() {
        return Err(shape_err(format!("expected type (1,1,1), got {}", x.ty())));
    }
    Ok(basis().iter().zip(x.data()).fold(Matrix3::zeros(), |acc, (b, &c)| acc + b * c))
}
