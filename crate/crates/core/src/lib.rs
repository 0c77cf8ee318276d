pub mod analysis;
pub mod error;
pub mod heat;
pub mod harness;
pub mod hierarchy;
pub mod multigrid;
pub mod par;
pub mod pfasst;
pub mod quadrature;
pub mod sdc;
pub mod transfer;

pub use error::{Error, Result};
