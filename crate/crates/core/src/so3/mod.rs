//! Real spherical-tensor algebra over SO(3).
//!
//! Conventions used everywhere in the crate:
//! * real spherical harmonics are orthonormal on the sphere and carry no
//!   Condon-Shortley phase;
//! * components of an order-`l` tensor are stored with `m = -l..=l` ascending;
//! * order-1 components map to Cartesian axes as `(m=-1, 0, +1) = (y, z, x)`.

mod cartesian;
mod clebsch;
mod harmonics;
mod rotation;
mod tensor;
mod wigner;

pub use cartesian::{cart2_to_spherical, spherical_to_cart2};
pub use clebsch::{clebsch_gordan, CgTable, CgTensor};
pub use harmonics::{sph_harm, sph_harm_into, Y00};
pub use rotation::{Rotation, Vec3};
pub use tensor::{rotate_multichannel, tensor_product, MultiChannelTensor, SphericalTensor, TensorType};
pub use wigner::{wigner_d, wigner_d_from_matrix, WignerSet};

/// Index of component `m` in an order-`l` component array.
#[inline]
pub fn m_index(l: usize, m: i64) -> usize {
    (m + l as i64) as usize
}
