//! Low-order model of neural computation.
//!
//! Binary inputs are expanded into parity ("dendritic") codes, stored in a
//! covariance-learning associative memory, and read back as per-bit spike
//! probabilities. Processing units built from these pieces are wired into a
//! two-layer grid network that learns MNIST online, one image at a time.

pub mod checkpoint;
pub mod code;
pub mod config;
pub mod error;
pub mod experiment;
pub mod memory;
pub mod mnist;
pub mod network;
pub mod rng;
pub mod soma;
pub mod unit;

pub use checkpoint::Checkpoint;
pub use code::{encode, BinaryVector, DendriticCode, Encoder};
pub use error::{LomError, Result};
pub use memory::{Generalization, LearningParams, Representation, RetrievalResult, SynapticMemory};
pub use network::{Network, TopologyConfig};
pub use rng::SpikeRng;
pub use soma::{Decode, ProbabilityVector};
pub use unit::{ProcessingUnit, UnitConfig};
