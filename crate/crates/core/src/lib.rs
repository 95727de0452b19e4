//! Holographic MERA toolkit: tensor contraction, the critical chain, the analytic
//! network, scaling superoperators, bulk excitations and the emergent-gravity comparison.

pub mod ascension;
pub mod engine;
pub mod error;
pub mod fitting;
pub mod gravity;
pub mod hologron;
pub mod lattice;
pub mod mera;
pub mod noise;
pub mod ops;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use ops::CMat;
pub use tensor::Tensor;
