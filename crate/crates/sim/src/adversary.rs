//! Scripted server misbehaviour. Scripts only touch server-originated collection
//! messages; registration and the root commitment always run honestly.

use std::collections::BTreeSet;

use secagg_core::protocol::{open_seed_ciphertext, recover_key};
use secagg_core::wire::{CheckReq, DecBody, DecResp};
use secagg_core::Group;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum AdversaryScript {
    #[default]
    Honest,
    /// Decryptors in `partition` get a view where the `moved` highest-id survivors
    /// are listed as dropouts instead.
    InconsistentSets { partition: BTreeSet<u64>, moved: usize },
    /// Clients and decryptors in `partition` get the model digest `digest`.
    InconsistentModel { partition: BTreeSet<u64>, digest: [u8; 32] },
    /// The server discards responses from these decryptors.
    DropResponses { subset: BTreeSet<u64> },
}

impl AdversaryScript {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryScript::Honest => "honest",
            AdversaryScript::InconsistentSets { .. } => "inconsistent_sets",
            AdversaryScript::InconsistentModel { .. } => "inconsistent_model",
            AdversaryScript::DropResponses { .. } => "drop_responses",
        }
    }

    /// The digest that node `id` is told.
    pub fn digest_for(&self, id: u64, honest: [u8; 32]) -> [u8; 32] {
        match self {
            AdversaryScript::InconsistentModel { partition, digest } if partition.contains(&id) => *digest,
            _ => honest,
        }
    }

    pub fn drops_response(&self, from: u64) -> bool {
        matches!(self, AdversaryScript::DropResponses { subset } if subset.contains(&from))
    }

    /// The survivor/dropout view sent to decryptor `u`, derived from the honest one.
    pub fn view_for(&self, u: u64, honest: &CheckReq) -> CheckReq {
        match self {
            AdversaryScript::InconsistentSets { partition, moved } if partition.contains(&u) => {
                let keep = honest.survivors.len().saturating_sub(*moved);
                let mut dropouts: Vec<u64> = honest.dropouts.iter().chain(&honest.survivors[keep..]).copied().collect();
                dropouts.sort_unstable();
                CheckReq {
                    t: honest.t,
                    digest: honest.digest,
                    survivors: honest.survivors[..keep].to_vec(),
                    dropouts,
                    attestations: honest.attestations[..keep].to_vec(),
                }
            }
            AdversaryScript::InconsistentModel { partition, digest } if partition.contains(&u) => {
                CheckReq { digest: *digest, ..honest.clone() }
            }
            _ => honest.clone(),
        }
    }
}

/// Tries to recover responder `u`'s key from the decryption shares of `helpers` and to
/// open its `c_seed`. `None` when `u` sent no keyed response or a helper supplied no
/// share for `u`.
pub fn try_open_key<G: Group>(t: u64, responses: &[DecResp<G>], u: u64, helpers: &[u64]) -> Option<bool> {
    let keyed = |id: u64| {
        responses.iter().find(|r| r.from == id).and_then(|r| match &r.body {
            DecBody::Keyed { c_seed, c_key, dec_shares } => Some((c_seed, c_key, dec_shares)),
            DecBody::Plain { .. } => None,
        })
    };
    let (c_seed, c_key, _) = keyed(u)?;
    let shares = helpers
        .iter()
        .map(|&i| {
            let (_, _, dec_shares) = keyed(i)?;
            dec_shares.iter().find(|(to, _)| *to == u).map(|(_, c)| (i, *c))
        })
        .collect::<Option<Vec<(u64, G::Element)>>>()?;
    Some(recover_key::<G>(c_key, &shares).and_then(|k| open_seed_ciphertext::<G>(&k, c_seed, t, u)).is_ok())
}

/// Exhaustive key-recovery attempt: for every responder `u` and every `threshold`-subset
/// of the other msk-holding responders, recover `k_u` and try to open `c_seed_u`.
/// Returns `(attempts, successes)`.
pub fn exhaustive_key_check<G: Group>(
    t: u64,
    responses: &[DecResp<G>],
    msk_holders: &[u64],
    threshold: usize,
) -> (usize, usize) {
    let mut attempts = 0;
    let mut opened = 0;
    for resp in responses {
        let u = resp.from;
        let helpers: Vec<u64> =
            responses.iter().map(|r| r.from).filter(|&i| i != u && msk_holders.contains(&i)).collect();
        for subset in subsets(helpers.len(), threshold) {
            let chosen: Vec<u64> = subset.iter().map(|&i| helpers[i]).collect();
            if let Some(ok) = try_open_key(t, responses, u, &chosen) {
                attempts += 1;
                opened += ok as usize;
            }
        }
    }
    (attempts, opened)
}

/// All `k`-subsets of `0..n` as index lists, in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}
