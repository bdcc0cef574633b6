//! Simulator, decoder and leakage analyzer for bidirectional secure
//! communication over entanglement swapping of pre-shared Bell pairs.
//!
//! Alice holds the `a` photon of every pair and Bob the `b` photon; no photon
//! ever travels between them. Each party applies a two-bit-coded local
//! operation to every even-ordered photon, Bell-measures consecutive photon
//! pairs, and announces the result on a public classical channel. Swapping
//! correlations let each side infer the partner's operation from the two
//! announced labels plus its own private choice.
//!
//! Module map:
//! - [`quantum`]: state vectors, Bell states, local operations, Bell measurement
//! - [`swap`]: swapping decompositions and the derived decode table
//! - [`audit`], [`verify`]: printed-table audit and algebra self-check
//! - [`message`]: bit strings and their operation encoding
//! - [`channel`]: public announcement channel, in-process and TCP
//! - [`protocol`]: two-party sessions and replay
//! - [`adversary`]: what a transcript-only eavesdropper learns
//! - [`stats`]: chi-square and entropy helpers

pub mod adversary;
pub mod audit;
pub mod channel;
pub mod message;
pub mod protocol;
pub mod quantum;
pub mod stats;
pub mod swap;
pub mod verify;

pub use message::MessageBits;
pub use quantum::{BellLabel, PauliCode, PureState};
pub use swap::{DecodeTable, SwapOutcome};
