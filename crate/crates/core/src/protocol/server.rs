use std::collections::{BTreeMap, BTreeSet};

use rand_core::{CryptoRng, RngCore};

use super::client::{root_message, JoinLevel};
use super::decryptor::{response_ad, response_key};
use super::masking::mask_key;
use super::{apply_masks, mask_sign, seed_layout, PreRoundConfig, Roster, RoundConfig};
use crate::authcrypto::{
    ae_decrypt, ds_sign, ds_verify, merkle_commit, merkle_leaf, online_message, KeyPair, KeyPurpose,
};
use crate::error::{Error, Result};
use crate::group::{lagrange_coefficients, Group};
use crate::sharing::AccessStructure;
use crate::wire::{Attestation, CheckReq, DecBody, DecResp, DkgMsg, PkCommit, Report, RootSig};

#[derive(Clone, Debug)]
pub struct ServerState<G: Group> {
    key: KeyPair<G>,
    roster: Roster<G>,
    root: Option<[u8; 32]>,
    access: Option<AccessStructure>,
    dkg_commitments: BTreeMap<u64, Vec<G::Element>>,
    aggregated: Vec<G::Element>,
    mpk: Option<G::Element>,
    vks: BTreeMap<u64, G::VerifyKey>,
}

/// Server-side record of one collection iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundState {
    pub t: u64,
    pub digest: [u8; 32],
    pub selected: Vec<u64>,
    pub survivors: Vec<u64>,
    pub dropouts: Vec<u64>,
    pub masked: BTreeMap<u64, Vec<u32>>,
    pub attestations: Vec<Attestation>,
}

impl RoundState {
    pub fn check_request(&self) -> CheckReq {
        CheckReq {
            t: self.t,
            digest: self.digest,
            survivors: self.survivors.clone(),
            dropouts: self.dropouts.clone(),
            attestations: self.attestations.clone(),
        }
    }
}

/// Per-decryptor result of opening the responses.
#[derive(Clone, Debug)]
pub struct OpenedResponses<G: Group> {
    pub values: BTreeMap<u64, Vec<G::Element>>,
    pub failed: BTreeMap<u64, Error>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregate {
    pub sum: Vec<u32>,
    /// Decryptors whose shares were interpolated.
    pub quorum: Vec<u64>,
    /// Decryptors whose responses could not be opened.
    pub failed: Vec<u64>,
}

/// `k_u = c_key / Π c_{i,u}^{β_i}` with `β` over the helper ids.
pub fn recover_key<G: Group>(c_key: &G::Element, helpers: &[(u64, G::Element)]) -> Result<G::Element> {
    let ids: Vec<u64> = helpers.iter().map(|(i, _)| *i).collect();
    let beta = lagrange_coefficients::<G>(&ids)?;
    let bases: Vec<G::Element> = helpers.iter().map(|(_, c)| *c).collect();
    let exps: Vec<G::Scalar> = ids.iter().map(|i| *beta.get(*i).expect("coefficient")).collect();
    Ok(G::div(c_key, &G::multi_pow(&bases, &exps)))
}

/// Decrypts `c_seed_u` under the key derived from `k_u` and splits it into elements.
pub fn open_seed_ciphertext<G: Group>(k_u: &G::Element, c_seed: &[u8], t: u64, u: u64) -> Result<Vec<G::Element>> {
    let plain = ae_decrypt(&response_key::<G>(k_u), c_seed, &response_ad(t, u))?;
    if plain.len() % G::ELEMENT_LEN != 0 {
        return Err(Error::Malformed("seed ciphertext length"));
    }
    plain
        .chunks_exact(G::ELEMENT_LEN)
        .map(|c| G::element_from_bytes(c).ok_or(Error::Malformed("group element")))
        .collect()
}

impl<G: Group> ServerState<G> {
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        ServerState {
            key: KeyPair::generate(KeyPurpose::AuthCrypt, rng),
            roster: BTreeMap::new(),
            root: None,
            access: None,
            dkg_commitments: BTreeMap::new(),
            aggregated: Vec::new(),
            mpk: None,
            vks: BTreeMap::new(),
        }
    }

    pub fn public_key(&self) -> G::Element {
        self.key.pk
    }

    pub fn roster(&self) -> &Roster<G> {
        &self.roster
    }

    pub fn root(&self) -> Option<&[u8; 32]> {
        self.root.as_ref()
    }

    pub fn access(&self) -> Option<&AccessStructure> {
        self.access.as_ref()
    }

    pub fn decryptors(&self) -> Vec<u64> {
        self.access.as_ref().map(|a| a.all_members().collect()).unwrap_or_default()
    }

    pub fn mpk(&self) -> Option<&G::Element> {
        self.mpk.as_ref()
    }

    pub fn aggregated_commitments(&self) -> &[G::Element] {
        &self.aggregated
    }

    pub fn verify_keys(&self) -> &BTreeMap<u64, G::VerifyKey> {
        &self.vks
    }

    fn msk_holders(&self) -> Result<(Vec<u64>, usize)> {
        let first = self.access.as_ref().and_then(|a| a.levels().first()).ok_or(Error::AccessDenied)?;
        Ok((first.members.iter().copied().collect(), first.threshold))
    }

    pub fn register(&mut self, commit: &PkCommit<G>) -> Result<()> {
        if commit.id == 0 || self.roster.contains_key(&commit.id) {
            return Err(Error::InvalidIndexSet);
        }
        self.roster.insert(commit.id, commit.pks);
        Ok(())
    }

    /// Commits to the roster (ascending ids) and signs the root.
    pub fn commit_roster(&mut self) -> Result<RootSig<G>> {
        let entries: Vec<PkCommit<G>> = self.roster.iter().map(|(&id, pks)| PkCommit { id, pks: *pks }).collect();
        let leaves: Vec<Vec<u8>> = entries.iter().map(|e| merkle_leaf::<G>(e.id, &e.pks)).collect();
        let root = merkle_commit(&leaves)?.root();
        self.root = Some(root);
        Ok(RootSig { root, sig: ds_sign::<G>(0, &self.key.sk, &root_message(&root)), roster: entries })
    }

    /// Fixes the committee once the root is known.
    pub fn select_committee(&mut self, cfg: &PreRoundConfig) -> Result<&AccessStructure> {
        let root = self.root.ok_or(Error::InvalidConfig("roster not committed".into()))?;
        self.access = Some(cfg.committee_for::<G>(&root)?);
        Ok(self.access.as_ref().expect("just set"))
    }

    pub fn apply_join_level(&mut self, level: &JoinLevel) -> Result<()> {
        self.access.as_mut().ok_or(Error::AccessDenied)?.push_level::<G>(&level.members, level.threshold)
    }

    /// Records relayed DKG traffic: dealers' commitments and published verify keys.
    pub fn observe_dkg(&mut self, msg: &DkgMsg<G>) {
        match msg {
            DkgMsg::Deal { dealer, commitments, .. } => {
                self.dkg_commitments.entry(*dealer).or_insert_with(|| commitments.clone());
            }
            DkgMsg::VerifyKey { from, vk } => {
                self.vks.insert(*from, *vk);
            }
        }
    }

    /// Combines the observed commitments into `mpk` and the aggregate commitment vector.
    pub fn finish_dkg(&mut self) -> Result<()> {
        let (holders, threshold) = self.msk_holders()?;
        let mut aggregated = vec![G::identity(); threshold];
        for h in &holders {
            let c = self.dkg_commitments.get(h).ok_or(Error::DkgComplaint(*h))?;
            if c.len() != threshold {
                return Err(Error::DkgComplaint(*h));
            }
            for (acc, e) in aggregated.iter_mut().zip(c) {
                *acc = G::op(acc, e);
            }
        }
        self.mpk = Some(aggregated[0]);
        self.aggregated = aggregated;
        Ok(())
    }

    /// Verifies reports, fixes `U_S`/`U_D` and applies the abort rule.
    pub fn collect(&self, cfg: &RoundConfig, reports: &[Report]) -> Result<RoundState> {
        let selected = cfg.selected()?;
        let mut masked = BTreeMap::new();
        let mut attestations = BTreeMap::new();
        for r in reports {
            if selected.binary_search(&r.id).is_err() || masked.contains_key(&r.id) {
                continue;
            }
            let Some(pks) = self.roster.get(&r.id) else { continue };
            let valid = r.t == cfg.t
                && r.y.len() == cfg.len
                && r.sig.signer == r.id
                && r.m == online_message(r.id, cfg.t)
                && ds_verify::<G>(&pks[1], &r.sig, &r.m);
            if valid {
                masked.insert(r.id, r.y.clone());
                attestations.insert(r.id, Attestation { id: r.id, m: r.m.clone(), sig: r.sig.clone() });
            }
        }
        let survivors: Vec<u64> = masked.keys().copied().collect();
        let dropouts: Vec<u64> = selected.iter().copied().filter(|i| !masked.contains_key(i)).collect();
        if !cfg.meets_quorum(survivors.len(), selected.len()) {
            return Err(Error::RoundAbort(format!(
                "{} of {} selected clients reported",
                survivors.len(),
                selected.len()
            )));
        }
        Ok(RoundState {
            t: cfg.t,
            digest: cfg.digest,
            selected,
            survivors,
            dropouts,
            masked,
            attestations: attestations.into_values().collect(),
        })
    }

    /// Recovers every responder's `k_u` and opens its `c_seed`.
    ///
    /// Helpers for `u` are the lowest-id responders other than `u` that hold `msk`
    /// shares; failures are recorded per decryptor rather than aborting.
    pub fn open_responses(&self, round: &RoundState, responses: &[DecResp<G>]) -> Result<OpenedResponses<G>> {
        let (holders, threshold) = self.msk_holders()?;
        let decryptors = self.decryptors();
        let mut by_id: BTreeMap<u64, &DecResp<G>> = BTreeMap::new();
        for r in responses {
            if r.t == round.t && decryptors.contains(&r.from) {
                by_id.entry(r.from).or_insert(r);
            }
        }
        let mut opened = OpenedResponses { values: BTreeMap::new(), failed: BTreeMap::new() };
        for (&u, resp) in &by_id {
            let result = match &resp.body {
                DecBody::Plain { values } => Ok(values.clone()),
                DecBody::Keyed { c_seed, c_key, .. } => {
                    let helpers: Vec<(u64, G::Element)> = by_id
                        .iter()
                        .filter(|(&i, _)| i != u && holders.contains(&i))
                        .filter_map(|(&i, r)| match &r.body {
                            DecBody::Keyed { dec_shares, .. } => {
                                dec_shares.iter().find(|(to, _)| *to == u).map(|(_, c)| (i, *c))
                            }
                            DecBody::Plain { .. } => None,
                        })
                        .take(threshold)
                        .collect();
                    if helpers.len() < threshold {
                        Err(Error::InsufficientShares { have: helpers.len(), need: threshold })
                    } else {
                        recover_key::<G>(c_key, &helpers)
                            .and_then(|k_u| open_seed_ciphertext::<G>(&k_u, c_seed, round.t, u))
                    }
                }
            };
            match result {
                Ok(v) => {
                    opened.values.insert(u, v);
                }
                Err(e) => {
                    opened.failed.insert(u, e);
                }
            }
        }
        Ok(opened)
    }

    /// Rebuilds the masks in the exponent and removes them from the survivors' sum.
    pub fn unmask(&self, cfg: &RoundConfig, round: &RoundState, responses: &[DecResp<G>]) -> Result<Aggregate> {
        let opened = self.open_responses(round, responses)?;
        let layout = seed_layout(cfg, &round.selected, &round.survivors, &round.dropouts)?;
        let usable: Vec<u64> = opened.values.iter().filter(|(_, v)| v.len() == layout.len()).map(|(&u, _)| u).collect();
        let access = self.access.as_ref().ok_or(Error::AccessDenied)?;
        let quorum = access.minimal_quorum(&usable).ok_or_else(|| {
            Error::RoundAbort(format!(
                "{} of {} decryptor responses could be opened",
                usable.len(),
                opened.values.len() + opened.failed.len()
            ))
        })?;
        let beta = lagrange_coefficients::<G>(&quorum)?;
        let exps: Vec<G::Scalar> = quorum.iter().map(|q| *beta.get(*q).expect("coefficient")).collect();

        let mut sum = vec![0u32; cfg.len];
        for y in round.masked.values() {
            apply_masks(&mut sum, y, 1);
        }
        let mut bases = Vec::with_capacity(quorum.len());
        for (idx, &(owner, kind)) in layout.iter().enumerate() {
            bases.clear();
            bases.extend(quorum.iter().map(|q| opened.values[q][idx]));
            let mask = cfg.hooks.expand::<G>(mask_key(owner, kind), cfg.len, || G::multi_pow(&bases, &exps))?;
            match kind {
                None => apply_masks(&mut sum, &mask, -1),
                // survivor k added sign(k, j)·m_{k,j}; the dropout's opposite term is absent
                Some(k) => apply_masks(&mut sum, &mask, -mask_sign(k, owner)),
            }
        }
        let failed = opened
            .failed
            .keys()
            .copied()
            .chain(opened.values.iter().filter(|(_, v)| v.len() != layout.len()).map(|(&u, _)| u))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Aggregate { sum, quorum, failed })
    }
}

pub fn server_collect<G: Group>(server: &ServerState<G>, cfg: &RoundConfig, reports: &[Report]) -> Result<RoundState> {
    server.collect(cfg, reports)
}

pub fn server_unmask<G: Group>(
    server: &ServerState<G>,
    cfg: &RoundConfig,
    round: &RoundState,
    responses: &[DecResp<G>],
) -> Result<Aggregate> {
    server.unmask(cfg, round, responses)
}
