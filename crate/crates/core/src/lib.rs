//! Jet-level and grid-level checks of the separation property for
//! hierarchies of multi-particle Schrödinger operators.

pub mod derivation;
pub mod evolution;
pub mod gauge;
pub mod jetcore;
pub mod opdsl;
pub mod tensor;
