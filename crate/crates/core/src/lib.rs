pub mod duality;
pub mod error;
pub mod experiment;
pub mod finite_rate;
pub mod infinite_rate;
pub mod jump_measure;
pub mod migration;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
