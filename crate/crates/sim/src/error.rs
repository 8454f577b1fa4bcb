use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid dropout plan: {0}")]
    InvalidPlan(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] secagg_core::Error),
}

impl PartialEq for SimError {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SimError::InvalidPlan(a), SimError::InvalidPlan(b)) | (SimError::Config(a), SimError::Config(b)) => a == b,
            (SimError::Protocol(a), SimError::Protocol(b)) => a == b,
            _ => false,
        }
    }
}
