//! Roto-translation equivariant convolutions over joint p-space/q-space
//! spherical-tensor fields, as used for diffusion MRI.

pub mod audit;
pub mod cli;
pub mod conv;
pub mod error;
pub mod field;
pub mod filter;
pub mod io;
pub mod kernel;
pub mod layers;
pub mod model;
pub mod radial;
pub mod so3;

pub use error::{Error, Result};
