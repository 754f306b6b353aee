//! Approximate-orthogonality-preservation analysis for dense linear operators.

pub mod error;
pub mod matrix;
pub mod metrics;
pub mod nearness;
pub mod oracle;
pub mod repro;
pub mod sample;
pub mod spectral;
pub mod tolerances;
