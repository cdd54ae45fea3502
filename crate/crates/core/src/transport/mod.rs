//! Coordinator/worker execution over a real process boundary.
//!
//! Workers hold raw shards and serialize exactly their summary under the
//! configured transmission budget; the coordinator aggregates. The protocol
//! is a line-oriented text format so that a transcript can be audited by eye:
//! no raw observation ever appears on the wire, and every summary line
//! carries exactly its budget of statistics.

pub mod session;
pub mod wire;

pub use session::{coordinate, serve_worker_tcp, worker_serve, SessionConfig, PROTOCOL_VERSION};
pub use wire::{decode, encode, WireMessage, WireSummary};
