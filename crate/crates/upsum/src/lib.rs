//! Exact-arithmetic universal path sums at desk scale.
//!
//! The crate enumerates the halting programs of a concrete prefix-free
//! two-counter machine, evaluates truncated path sums with rigorous error
//! enclosures, assigns decoherence-checked probabilities to coarse-grained
//! path events, and cross-validates the quantum-circuit path-sum
//! correspondence against a dense state-vector oracle.

pub mod bitcore;
pub mod circuits;
pub mod cli;
pub mod enumerator;
pub mod events;
pub mod machine;
pub mod pathsum;
pub mod translate;
