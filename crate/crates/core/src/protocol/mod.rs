//! Client, decryptor and server state machines.
//!
//! The pre-round registers key triples under a signed Merkle root, picks the
//! decryptor committee from that root, runs the DKG among decryptors and has every
//! client Shamir-share its self seed and all pairwise seeds to the committee. Each
//! collection iteration then costs one report per client and one response per
//! decryptor.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{hash_to_scalar, Group};

mod client;
mod decryptor;
mod masking;
mod select;
mod server;

pub use client::{client_report, pre_round_client, ClientKeys, ClientState, JoinLevel, PreRoundConfig, SeedPayload};
pub use decryptor::{decryptor_respond, DecryptorState, OwnerShares};
pub use masking::{apply_masks, mask_sign, MaskHooks, MaskKey};
pub use select::{choose_set, choose_set_dynamic, choose_set_static, edge_present, find_neighbors};
pub use server::{
    open_seed_ciphertext, recover_key, server_collect, server_unmask, Aggregate, OpenedResponses, RoundState,
    ServerState,
};

/// AE nonce purposes.
pub const PURPOSE_SEED_SHARE: u8 = 1;
pub const PURPOSE_DKG: u8 = 2;
pub const PURPOSE_SEED_OPEN: u8 = 3;

pub type Roster<G> = BTreeMap<u64, [<G as Group>::Element; 3]>;

/// A rate in parts per million, so threshold comparisons stay exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(u32);

impl Rate {
    pub const ONE: u32 = 1_000_000;

    pub fn from_ppm(ppm: u32) -> Self {
        Rate(ppm.min(Self::ONE))
    }

    pub fn from_f64(v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidConfig(format!("rate {v} outside [0, 1]")));
        }
        Ok(Rate((v * Self::ONE as f64).round() as u32))
    }

    pub fn ppm(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::ONE as f64
    }

    /// `⌊rate · n⌋`.
    pub fn floor_of(self, n: usize) -> usize {
        (self.0 as u128 * n as u128 / Self::ONE as u128) as usize
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Exactly `n_t` clients per iteration.
    Static { n_t: usize },
    /// Each client independently with probability `n / m`.
    Dynamic { n: u64, m: u64 },
}

/// When the server gives up on a collection round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AbortRule {
    /// Fewer than `(1 − η)·n_t` verified reports, with `η = η_C + η_D`.
    #[default]
    Quorum,
    /// Fewer than `κ` verified reports.
    Threshold,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Consistency enforced through the key-binding in each decryptor response.
    #[default]
    OneRound,
    /// Consistency enforced by threshold signatures over the survivor/dropout view.
    Tss,
}

/// Per-iteration parameters as seen by one party.
#[derive(Clone, Debug)]
pub struct RoundConfig {
    pub t: u64,
    pub digest: [u8; 32],
    pub clients: usize,
    pub selection: Selection,
    pub decryptors: usize,
    pub threshold: usize,
    pub eta_c: Rate,
    pub eta_d: Rate,
    /// Expected neighbour count `A_t`.
    pub degree: usize,
    pub len: usize,
    pub abort_rule: AbortRule,
    pub mode: Mode,
    pub hooks: MaskHooks,
}

/// `2κ > (1 + η_C − η_D)·n_I`, evaluated exactly.
pub fn threshold_gate(threshold: usize, decryptors: usize, eta_c: Rate, eta_d: Rate) -> bool {
    let lhs = 2 * threshold as i128 * Rate::ONE as i128;
    let rhs = (Rate::ONE as i128 + eta_c.0 as i128 - eta_d.0 as i128) * decryptors as i128;
    lhs > rhs
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::InvalidConfig("vector length must be at least 1".into()));
        }
        if self.threshold == 0 || self.threshold > self.decryptors {
            return Err(Error::InvalidConfig(format!("threshold {} outside [1, {}]", self.threshold, self.decryptors)));
        }
        if self.decryptors > self.clients {
            return Err(Error::InvalidConfig("more decryptors than clients".into()));
        }
        if !threshold_gate(self.threshold, self.decryptors, self.eta_c, self.eta_d) {
            return Err(Error::InvalidConfig(format!(
                "2κ > (1 + η_C − η_D)·n_I fails for κ={}, n_I={}, η_C={}, η_D={}",
                self.threshold, self.decryptors, self.eta_c, self.eta_d
            )));
        }
        if self.eta_c.0 as u64 + self.eta_d.0 as u64 >= Rate::ONE as u64 {
            return Err(Error::InvalidConfig("η_C + η_D must stay below 1".into()));
        }
        match self.selection {
            Selection::Static { n_t } if n_t == 0 || n_t > self.clients => {
                Err(Error::InvalidConfig(format!("n_t={n_t} outside [1, {}]", self.clients)))
            }
            Selection::Dynamic { n, m } if m == 0 || n > m => {
                Err(Error::InvalidConfig(format!("selection probability {n}/{m} invalid")))
            }
            _ => Ok(()),
        }
    }

    /// Same parameters for another iteration and model.
    pub fn for_iteration(&self, t: u64, digest: [u8; 32]) -> Self {
        RoundConfig { t, digest, ..self.clone() }
    }

    /// Whether `survivors` verified reports out of `selected` let the round proceed.
    pub fn meets_quorum(&self, survivors: usize, selected: usize) -> bool {
        match self.abort_rule {
            AbortRule::Quorum => {
                let eta = self.eta_c.0 as u128 + self.eta_d.0 as u128;
                survivors as u128 * Rate::ONE as u128 >= (Rate::ONE as u128 - eta) * selected as u128
            }
            AbortRule::Threshold => survivors >= self.threshold,
        }
    }

    /// `S_t` for this iteration.
    pub fn selected(&self) -> Result<Vec<u64>> {
        choose_set(&self.digest, self.t, self.selection, self.clients)
    }
}

/// Hash of the canonical view `t ∥ U_S ∥ U_D` to a scalar.
pub fn view_hash<G: Group>(t: u64, survivors: &[u64], dropouts: &[u64]) -> G::Scalar {
    let mut input = b"secagg/view".to_vec();
    input.extend_from_slice(&t.to_le_bytes());
    for set in [survivors, dropouts] {
        input.extend_from_slice(&(set.len() as u32).to_le_bytes());
        for id in set {
            input.extend_from_slice(&id.to_le_bytes());
        }
    }
    hash_to_scalar::<G>(&input)
}

/// Order of the exponent shares inside every decryptor response: each survivor's self
/// seed, then for each dropout `j` the seeds shared with its surviving neighbours.
/// `None` marks a self seed, `Some(k)` the pairwise seed with `k`.
pub fn seed_layout(
    cfg: &RoundConfig,
    selected: &[u64],
    survivors: &[u64],
    dropouts: &[u64],
) -> Result<Vec<(u64, Option<u64>)>> {
    let mut layout: Vec<(u64, Option<u64>)> = survivors.iter().map(|&i| (i, None)).collect();
    for &j in dropouts {
        let neighbours = find_neighbors(&cfg.digest, cfg.t, selected, j, cfg.degree)?;
        layout.extend(neighbours.into_iter().filter(|k| survivors.binary_search(k).is_ok()).map(|k| (j, Some(k))));
    }
    Ok(layout)
}

/// Shared, read-only override table used by tests to force specific mask vectors.
pub type MaskTable = Arc<BTreeMap<MaskKey, Vec<u32>>>;

#[cfg(test)]
mod tests;
