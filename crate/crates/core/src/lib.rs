//! Random subspace local projections.
//!
//! Impulse responses are estimated by local projections in which a large set
//! of candidate controls is compressed by averaging over many random subsets.
//! The crate covers identification by observed shocks, external instruments
//! and cumulative SVAR restrictions, error bands, data ingestion, and
//! simulation designs with analytically known responses for validation.

pub mod cli;
pub mod data;
pub mod dgp;
pub mod error;
pub mod inference;
pub(crate) mod linalg;
pub mod linreg;
pub mod lp;
pub mod mc;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};
