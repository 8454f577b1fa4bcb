use std::collections::{BTreeMap, BTreeSet};

use rand_core::{CryptoRng, RngCore};

use super::client::JoinLevel;
use super::{seed_layout, view_hash, ClientState, RoundConfig, PURPOSE_DKG, PURPOSE_SEED_OPEN};
use crate::authcrypto::{ae_decrypt, ae_encrypt, ae_nonce, ds_verify, ka_transport, online_message, AeKey};
use crate::error::{Error, Result};
use crate::group::{derive_round_generator, Group};
use crate::protocol::SeedPayload;
use crate::sharing::{dkg_deal, AccessStructure, DkgOutcome, DkgParticipant, Share};
use crate::wire::{CheckReq, DecBody, DecResp, DkgMsg, SeedShareMsg, Writer};

/// Shares of one owner's seeds held by a decryptor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnerShares<G: Group> {
    pub self_share: Option<G::Scalar>,
    pub pairs: BTreeMap<u64, G::Scalar>,
}

impl<G: Group> Default for OwnerShares<G> {
    fn default() -> Self {
        OwnerShares { self_share: None, pairs: BTreeMap::new() }
    }
}

/// AE key derived from the one-time key `k_u`.
pub fn response_key<G: Group>(k_u: &G::Element) -> AeKey {
    AeKey::derive(b"secagg/ku", &G::element_to_bytes(k_u))
}

pub(crate) fn response_ad(t: u64, u: u64) -> Vec<u8> {
    let mut ad = t.to_le_bytes().to_vec();
    ad.extend_from_slice(&u.to_le_bytes());
    ad
}

/// Decryptor-only state. Methods take the owning client's state for keys and roster.
#[derive(Clone, Debug)]
pub struct DecryptorState<G: Group> {
    id: u64,
    access: AccessStructure,
    /// Holders of `msk` shares, i.e. the first level.
    msk_holders: Vec<u64>,
    msk_threshold: usize,
    dkg: Option<DkgParticipant<G>>,
    outcome: Option<DkgOutcome<G>>,
    mpk: Option<G::Element>,
    aggregated: Vec<G::Element>,
    vks: BTreeMap<u64, G::VerifyKey>,
    transport: BTreeMap<u64, AeKey>,
    table: BTreeMap<u64, OwnerShares<G>>,
}

impl<G: Group> DecryptorState<G> {
    /// A first-level decryptor that will take part in the DKG.
    pub fn new(client: &ClientState<G>) -> Result<Self> {
        let access = client.access().clone();
        let first = access.levels().first().ok_or(Error::AccessDenied)?;
        let msk_holders: Vec<u64> = first.members.iter().copied().collect();
        if !msk_holders.contains(&client.id()) {
            return Err(Error::NotParticipant(client.id()));
        }
        let dkg = DkgParticipant::new(client.id(), &msk_holders, first.threshold)?;
        Ok(DecryptorState {
            id: client.id(),
            msk_threshold: first.threshold,
            access,
            msk_holders,
            dkg: Some(dkg),
            outcome: None,
            mpk: None,
            aggregated: Vec::new(),
            vks: BTreeMap::new(),
            transport: BTreeMap::new(),
            table: BTreeMap::new(),
        })
    }

    /// A decryptor added at a later level: it holds seed shares but no `msk` share.
    pub fn joined(
        client: &ClientState<G>,
        mpk: G::Element,
        aggregated: Vec<G::Element>,
        vks: BTreeMap<u64, G::VerifyKey>,
    ) -> Result<Self> {
        let access = client.access().clone();
        if access.level_of(client.id()).unwrap_or(1) < 2 {
            return Err(Error::NotParticipant(client.id()));
        }
        let first = &access.levels()[0];
        Ok(DecryptorState {
            id: client.id(),
            msk_holders: first.members.iter().copied().collect(),
            msk_threshold: first.threshold,
            access,
            dkg: None,
            outcome: None,
            mpk: Some(mpk),
            aggregated,
            vks,
            transport: BTreeMap::new(),
            table: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn access(&self) -> &AccessStructure {
        &self.access
    }

    pub fn mpk(&self) -> Option<&G::Element> {
        self.mpk.as_ref()
    }

    pub fn msk_share(&self) -> Option<&Share<G>> {
        self.outcome.as_ref().map(|o| &o.my_share)
    }

    pub fn dkg_outcome(&self) -> Option<&DkgOutcome<G>> {
        self.outcome.as_ref()
    }

    pub fn aggregated_commitments(&self) -> &[G::Element] {
        &self.aggregated
    }

    pub fn verify_keys(&self) -> &BTreeMap<u64, G::VerifyKey> {
        &self.vks
    }

    pub fn msk_holders(&self) -> &[u64] {
        &self.msk_holders
    }

    pub fn msk_threshold(&self) -> usize {
        self.msk_threshold
    }

    pub fn share_table(&self) -> &BTreeMap<u64, OwnerShares<G>> {
        &self.table
    }

    fn transport_key(&mut self, client: &ClientState<G>, peer: u64) -> Result<AeKey> {
        if let Some(k) = self.transport.get(&peer) {
            return Ok(*k);
        }
        let pk = client.roster().get(&peer).ok_or(Error::NotParticipant(peer))?;
        let key = ka_transport::<G>(&client.keys()[1].sk, &pk[1])?;
        self.transport.insert(peer, key);
        Ok(key)
    }

    /// Deals this decryptor's DKG contribution; its own share is kept locally.
    pub fn dkg_deal<R: RngCore + CryptoRng>(&mut self, client: &ClientState<G>, rng: &mut R) -> Result<Vec<DkgMsg<G>>> {
        let (dealing, _) = dkg_deal::<G, _>(self.id, &self.msk_holders, self.msk_threshold, rng)?;
        let mut out = Vec::new();
        let lone = self.msk_holders.len() == 1;
        for share in &dealing.shares {
            // a lone dealer still publishes its commitments, so it addresses itself
            if share.holder == self.id && !lone {
                self.dkg.as_mut().ok_or(Error::DkgComplaint(self.id))?.receive(
                    self.id,
                    dealing.commitments.clone(),
                    share.value,
                )?;
                continue;
            }
            let key = self.transport_key(client, share.holder)?;
            let nonce = ae_nonce(PURPOSE_DKG, self.id, share.holder, 0);
            let mut w = Writer::new();
            w.scalar::<G>(&share.value);
            out.push(DkgMsg::Deal {
                dealer: self.id,
                to: share.holder,
                commitments: dealing.commitments.clone(),
                ciphertext: ae_encrypt(&key, &nonce, &w.into_bytes(), &[]),
            });
        }
        Ok(out)
    }

    pub fn on_dkg(&mut self, client: &ClientState<G>, msg: &DkgMsg<G>) -> Result<()> {
        match msg {
            DkgMsg::Deal { dealer, to, commitments, ciphertext } => {
                if *to != self.id {
                    return Err(Error::NotParticipant(*to));
                }
                let key = self.transport_key(client, *dealer)?;
                let plain = ae_decrypt(&key, ciphertext, &[]).map_err(|_| Error::DkgComplaint(*dealer))?;
                let share = G::scalar_from_bytes(&plain).ok_or(Error::DkgComplaint(*dealer))?;
                self.dkg.as_mut().ok_or(Error::DkgComplaint(*dealer))?.receive(*dealer, commitments.clone(), share)
            }
            DkgMsg::VerifyKey { from, vk } => {
                self.vks.insert(*from, *vk);
                Ok(())
            }
        }
    }

    pub fn dkg_ready(&self) -> bool {
        self.dkg.as_ref().is_some_and(|d| d.is_complete())
    }

    /// Verifies all received shares and publishes `g2^{msk_u}`.
    pub fn finish_dkg(&mut self) -> Result<DkgMsg<G>> {
        let dkg = self.dkg.take().ok_or(Error::DkgComplaint(self.id))?;
        let outcome = dkg.finish()?;
        self.mpk = Some(outcome.mpk);
        self.aggregated = outcome.aggregated_commitments().to_vec();
        let vk = G::verify_key(&outcome.my_share.value);
        self.vks.insert(self.id, vk);
        self.outcome = Some(outcome);
        Ok(DkgMsg::VerifyKey { from: self.id, vk })
    }

    /// Decrypts and files a SEEDSHARE message. Nothing is stored on failure.
    pub fn on_seed_share(&mut self, client: &ClientState<G>, msg: &SeedShareMsg) -> Result<()> {
        if msg.to != self.id {
            return Err(Error::NotParticipant(msg.to));
        }
        let key = self.transport_key(client, msg.from)?;
        let plain = ae_decrypt(&key, &msg.ciphertext, &[])?;
        let payload = SeedPayload::<G>::decode(&plain)?;
        if payload.from != msg.from || payload.to != self.id {
            return Err(Error::Malformed("seed share index"));
        }
        let entry = self.table.entry(msg.from).or_default();
        if let Some(s) = payload.self_share {
            entry.self_share = Some(s);
        }
        entry.pairs.extend(payload.pairs);
        Ok(())
    }

    /// Records a decryptor level added after the pre-round.
    pub fn apply_join_level(&mut self, level: &JoinLevel) -> Result<()> {
        self.access.push_level::<G>(&level.members, level.threshold)
    }

    fn share_for(&self, owner: u64, kind: Option<u64>) -> Result<&G::Scalar> {
        let entry = self.table.get(&owner).ok_or(Error::MissingShare(owner))?;
        match kind {
            None => entry.self_share.as_ref(),
            Some(k) => entry.pairs.get(&k),
        }
        .ok_or(Error::MissingShare(owner))
    }

    /// Checks the server's view; returns `S_t` on success.
    pub fn check_view(&self, client: &ClientState<G>, cfg: &RoundConfig, req: &CheckReq) -> Result<Vec<u64>> {
        let abort = |why: &str| Err(Error::ConsistencyAbort(format!("decryptor {}: {why}", self.id)));
        if req.t != cfg.t || req.digest != cfg.digest {
            return abort("request does not match the announced model");
        }
        let selected = cfg.selected()?;
        let survivors: BTreeSet<u64> = req.survivors.iter().copied().collect();
        if req.dropouts.iter().any(|d| survivors.contains(d)) {
            return abort("survivor and dropout sets intersect");
        }
        let mut union: Vec<u64> = req.survivors.iter().chain(&req.dropouts).copied().collect();
        union.sort_unstable();
        if union != selected {
            return abort("survivors and dropouts do not cover the selected set");
        }
        if !cfg.meets_quorum(req.survivors.len(), selected.len()) {
            return abort("too few survivors");
        }
        if req.attestations.len() != req.survivors.len() {
            return abort("attestation count mismatch");
        }
        for (a, &i) in req.attestations.iter().zip(&req.survivors) {
            let pk = client.roster().get(&i).map(|p| p[1]);
            let valid = a.id == i
                && a.sig.signer == i
                && a.m == online_message(i, cfg.t)
                && pk.is_some_and(|pk| ds_verify::<G>(&pk, &a.sig, &a.m));
            if !valid {
                return abort("invalid online signature");
            }
        }
        Ok(selected)
    }

    /// `g_t^{share}` for every entry of the seed layout.
    pub(crate) fn exponent_shares(
        &self,
        cfg: &RoundConfig,
        selected: &[u64],
        req: &CheckReq,
    ) -> Result<Vec<G::Element>> {
        let g_t = derive_round_generator::<G>(&cfg.digest, cfg.t);
        seed_layout(cfg, selected, &req.survivors, &req.dropouts)?
            .into_iter()
            .map(|(owner, kind)| Ok(G::pow(&g_t, self.share_for(owner, kind)?)))
            .collect()
    }

    /// TSS-mode response after the view has been certified.
    pub(crate) fn plain_response(&self, cfg: &RoundConfig, selected: &[u64], req: &CheckReq) -> Result<DecResp<G>> {
        let values = self.exponent_shares(cfg, selected, req)?;
        Ok(DecResp { from: self.id, t: cfg.t, body: DecBody::Plain { values } })
    }

    /// One-round response: `c_seed` under a fresh `k_u`, `c_key = k_u · mpk^{sk_u3 + H}`
    /// and `c_{u,i} = (g^H · pk_{i,3})^{msk_u}` for every other decryptor `i`.
    pub fn respond<R: RngCore + CryptoRng>(
        &self,
        client: &ClientState<G>,
        cfg: &RoundConfig,
        req: &CheckReq,
        rng: &mut R,
    ) -> Result<DecResp<G>> {
        let selected = self.check_view(client, cfg, req)?;
        let values = self.exponent_shares(cfg, &selected, req)?;
        let mpk = self.mpk.ok_or(Error::VerifyUnavailable(self.id))?;
        let h = view_hash::<G>(cfg.t, &req.survivors, &req.dropouts);

        let k_u = G::pow_g(&G::random_scalar(rng));
        let mut plain = Vec::with_capacity(values.len() * G::ELEMENT_LEN);
        for v in &values {
            plain.extend(G::element_to_bytes(v));
        }
        let nonce = ae_nonce(PURPOSE_SEED_OPEN, self.id, 0, cfg.t);
        let c_seed = ae_encrypt(&response_key::<G>(&k_u), &nonce, &plain, &response_ad(cfg.t, self.id));
        let c_key = G::op(&k_u, &G::pow(&mpk, &(client.keys()[2].sk + h)));

        let g_h = G::pow_g(&h);
        let mut dec_shares = Vec::new();
        if let Some(msk) = self.msk_share() {
            for i in self.access.all_members().filter(|&i| i != self.id) {
                let pk3 = client.roster().get(&i).ok_or(Error::NotParticipant(i))?[2];
                dec_shares.push((i, G::pow(&G::op(&g_h, &pk3), &msk.value)));
            }
        }
        Ok(DecResp { from: self.id, t: cfg.t, body: DecBody::Keyed { c_seed, c_key, dec_shares } })
    }
}

pub fn decryptor_respond<G: Group, R: RngCore + CryptoRng>(
    state: &DecryptorState<G>,
    client: &ClientState<G>,
    cfg: &RoundConfig,
    req: &CheckReq,
    rng: &mut R,
) -> Result<DecResp<G>> {
    state.respond(client, cfg, req, rng)
}
