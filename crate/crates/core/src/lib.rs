//! Secure aggregation with one-time seed sharing and a two-round collection phase.
//!
//! Clients mask their input vectors with a self mask and pairwise masks derived from
//! seeds that were Shamir-shared to a decryptor committee once, during a pre-round
//! phase. Every later iteration derives fresh masks from those same seeds by raising
//! a per-iteration generator `g_t` to the seed, so shares never need to be re-dealt.
//! Decryptors answer the server's survivor/dropout view in a single message whose
//! temporary key can only be recovered when at least `κ` decryptors saw the same view.
//!
//! Module map:
//!
//! * [`group`]: prime-order group backends, Lagrange interpolation, hashing, PRG.
//! * [`sharing`]: Shamir sharing, multilevel threshold sharing, Feldman DKG.
//! * [`authcrypto`]: key triples, DH agreement, AES-GCM, Schnorr signatures, Merkle trees.
//! * [`wire`]: the tagged message envelope and canonical body encodings.
//! * [`protocol`]: client, decryptor and server state machines.
//! * [`tss`]: threshold signatures for the alternative cross-check.

pub mod authcrypto;
pub mod error;
pub mod group;
pub mod protocol;
pub mod sharing;
pub mod tss;
pub mod wire;

pub use error::{Error, Result};
pub use group::{Bls12G1, Group, TinyGroup};
