//! Dilithium fault-attack laboratory.
//!
//! Signing with faulted secret keys, correction of faulty signatures back to
//! valid ones, aggregation of recovered key bits, and lattice security
//! estimates for the reduced-secret instance.

pub mod correction;
pub mod error;
pub mod estimator;
pub mod fault;
pub mod knowledge;
pub mod packing;
pub mod params;
pub mod pipeline;
pub mod poly;
pub mod rounding;
pub mod scheme;
pub mod seed;
pub mod xof;

pub use error::{Error, Result};
pub use params::{ParameterSet, Revision};
