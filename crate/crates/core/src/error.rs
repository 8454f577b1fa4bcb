use thiserror::Error;

/// Errors raised by the aggregation primitives and protocol state machines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("share indices must be distinct and nonzero")]
    InvalidIndexSet,
    #[error("no share supplied for index {0}")]
    MissingShare(u64),
    #[error("PRG expansion length must be at least one")]
    EmptyExpansion,
    #[error("threshold {threshold} exceeds holder count {holders}")]
    ThresholdTooLarge { threshold: usize, holders: usize },
    #[error("{have} shares supplied, {need} required")]
    InsufficientShares { have: usize, need: usize },
    #[error("extension threshold {threshold} must exceed the {prior_holders} existing holders")]
    DegenerateExtension { threshold: usize, prior_holders: usize },
    #[error("holder set does not satisfy the access structure")]
    AccessDenied,
    #[error("DKG dealing from participant {0} failed verification")]
    DkgComplaint(u64),
    #[error("peer public key is invalid")]
    InvalidPeerKey,
    #[error("authenticated decryption failed")]
    AeAuthFailure,
    #[error("index {index} out of range for {len} leaves")]
    InvalidIndex { index: usize, len: usize },
    #[error("no pairwise seed with neighbor {0}")]
    MissingSeed(u64),
    #[error("round aborted: {0}")]
    RoundAbort(String),
    #[error("consistency check failed: {0}")]
    ConsistencyAbort(String),
    #[error("client {0} is not a participant this iteration")]
    NotParticipant(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no verification material for signer {0}")]
    VerifyUnavailable(u64),
    #[error("ill-formed signature share from signer {0}")]
    CombineReject(u64),
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error("Merkle verification failed for client {0}")]
    CommitmentMismatch(u64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
