pub mod binary;
pub mod phantom;
pub mod qstf;
pub mod scaling;
pub mod schemes;
