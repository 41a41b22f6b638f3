//! Discretized p/q-spaces, kernel-basis precompute, weighted assembly and
//! export of conv3d-shaped kernels.

mod basis;
mod export;
mod qscheme;
mod steer;

pub use basis::{BasisGrad, BasisOptions, BlockBasis, Kernel, KernelBasis, DEFAULT_BYTE_BUDGET};
pub use export::{read_kernel, write_kernel, KernelHeader};
pub use qscheme::{PFilterGrid, QScheme, Q_TOL};
pub use steer::{random_coordinates, steerability_check};
