//! Exact out-of-time-ordered correlators, Redfield reduced dynamics and
//! quantum speed limit bounds for the transverse-field Ising chain.

pub mod bath;
pub mod error;
pub mod exact;
pub mod grid;
pub mod harness;
pub mod operator;
pub mod params;
pub mod quadrature;
pub mod redfield;
pub mod spinchain;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use operator::DenseOperator;
pub use params::ChainParams;
