//! Repeated cake cutting between a learning cutter (Alice) and a chooser
//! (Bob): valuations, partitions, Stackelberg benchmarks, both players'
//! strategies, adversarial instance families, the round engine with regret
//! accounting, and a Robertson-Webb query protocol.

pub mod adversary;
pub mod alice;
pub mod bob;
pub mod engine;
pub mod error;
pub mod partitions;
pub mod rw;
pub mod stackelberg;
pub mod valuations;

pub use error::{CakeError, Result};
