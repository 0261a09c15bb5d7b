//! Verifier-guided preference-data toolkit for mathematical
//! chain-of-thought: per-solution error profiling along six dimensions,
//! hard-negative mining, batch-weighted preference loss with a toy
//! analytic policy, and an exact-match evaluation harness.

pub mod align;
pub mod expr;
pub mod num;
pub mod parsing;
pub mod rank;
pub mod semantic;

/// Scalar type the pipeline is instantiated at. Core numeric modules are
/// generic over [`num::Real`]; everything serialized uses this alias.
pub type Scalar = f64;
