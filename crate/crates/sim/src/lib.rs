//! Deterministic discrete-event simulation of the secure-aggregation protocol.
//!
//! [`session::Session`] runs the pre-round and any number of collection iterations
//! over [`net::Net`], a single-threaded event queue with seeded delays. Every message
//! is counted on its serialized envelope in [`metrics::Metrics`]. [`adversary`] holds
//! the scripted server behaviours and [`harness`] the experiment configuration and
//! command implementations behind the `secagg` binary.

pub mod adversary;
pub mod delay;
pub mod dropout;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod net;
pub mod session;

pub use adversary::AdversaryScript;
pub use error::SimError;
pub use metrics::{Metrics, Outcome, Phase};
pub use session::{IterationReport, Session, SessionConfig};
