use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};

use super::masking::mask_key;
use super::{apply_masks, find_neighbors, mask_sign, Roster, RoundConfig, PURPOSE_SEED_SHARE};
use crate::authcrypto::{
    ae_encrypt, ae_nonce, ds_sign, ds_verify, ka_seed, ka_transport, keygen_triple, merkle_commit, merkle_leaf,
    online_message, AeKey, KeyPair,
};
use crate::error::{Error, Result};
use crate::group::{derive_round_generator, Group};
use crate::sharing::{AccessStructure, DealerState, Share};
use crate::wire::{PkCommit, Reader, Report, RootSig, SeedShareMsg, Writer};

/// Public parameters of the pre-round.
#[derive(Clone, Debug)]
pub struct PreRoundConfig {
    pub clients: usize,
    pub decryptors: usize,
    pub threshold: usize,
    /// Fixed committee and access structure; otherwise drawn from the Merkle root.
    pub committee: Option<AccessStructure>,
    /// Keep every dealing polynomial so decryptors can be added later.
    pub retain_dealers: bool,
}

impl PreRoundConfig {
    /// The decryptor access structure implied by `root`.
    pub fn committee_for<G: Group>(&self, root: &[u8; 32]) -> Result<AccessStructure> {
        if let Some(gamma) = &self.committee {
            return Ok(gamma.clone());
        }
        let members = super::choose_set_static(root, 0, self.decryptors, self.clients)?;
        AccessStructure::single::<G>(&members, self.threshold)
    }
}

/// A decryptor level added after the pre-round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinLevel {
    pub members: Vec<u64>,
    pub threshold: usize,
}

/// The message the server signs to certify a Merkle root.
pub fn root_message(root: &[u8; 32]) -> Vec<u8> {
    let mut m = b"secagg/root".to_vec();
    m.extend_from_slice(root);
    m
}

/// Rebuilds the Merkle tree from the roster and checks the server's signature.
pub(crate) fn verify_root<G: Group>(msg: &RootSig<G>, server_pk: &G::Element) -> Result<Roster<G>> {
    if !ds_verify::<G>(server_pk, &msg.sig, &root_message(&msg.root)) {
        return Err(Error::ConsistencyAbort("root signature invalid".into()));
    }
    if msg.roster.windows(2).any(|w| w[0].id >= w[1].id) || msg.roster.is_empty() {
        return Err(Error::ConsistencyAbort("roster not in ascending id order".into()));
    }
    let leaves: Vec<Vec<u8>> = msg.roster.iter().map(|e| merkle_leaf::<G>(e.id, &e.pks)).collect();
    if merkle_commit(&leaves)?.root() != msg.root {
        return Err(Error::ConsistencyAbort("roster does not match the committed root".into()));
    }
    Ok(msg.roster.iter().map(|e| (e.id, e.pks)).collect())
}

/// Key material generated before registration.
#[derive(Clone, Debug)]
pub struct ClientKeys<G: Group> {
    pub id: u64,
    pub keys: [KeyPair<G>; 3],
}

impl<G: Group> ClientKeys<G> {
    pub fn generate<R: RngCore + CryptoRng>(id: u64, rng: &mut R) -> Self {
        ClientKeys { id, keys: keygen_triple(rng) }
    }

    pub fn commit(&self) -> PkCommit<G> {
        PkCommit { id: self.id, pks: self.keys.map(|k| k.pk) }
    }
}

/// Decrypted content of one SEEDSHARE message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedPayload<G: Group> {
    pub from: u64,
    pub to: u64,
    pub level: u8,
    pub self_share: Option<G::Scalar>,
    pub pairs: Vec<(u64, G::Scalar)>,
}

impl<G: Group> SeedPayload<G> {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.from).u64(self.to).u8(self.level);
        match &self.self_share {
            Some(s) => w.u8(1).scalar::<G>(s),
            None => w.u8(0),
        };
        w.u32(self.pairs.len() as u32);
        for (peer, v) in &self.pairs {
            w.u64(*peer).scalar::<G>(v);
        }
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let from = r.u64()?;
        let to = r.u64()?;
        let level = r.u8()?;
        let self_share = match r.u8()? {
            0 => None,
            1 => Some(r.scalar::<G>()?),
            _ => return Err(Error::Malformed("self share flag")),
        };
        let n = r.u32()? as usize;
        if n > bytes.len() / 8 {
            return Err(Error::Malformed("pair count"));
        }
        let pairs = (0..n).map(|_| Ok((r.u64()?, r.scalar::<G>()?))).collect::<Result<_>>()?;
        r.finish()?;
        Ok(SeedPayload { from, to, level, self_share, pairs })
    }
}

/// Which seed a dealing belongs to: `None` is the self seed.
type SeedKind = Option<u64>;

#[derive(Clone, Debug)]
pub struct ClientState<G: Group> {
    id: u64,
    keys: [KeyPair<G>; 3],
    root: [u8; 32],
    roster: Roster<G>,
    access: AccessStructure,
    self_seed: G::Scalar,
    pair_seeds: BTreeMap<u64, G::Scalar>,
    dealers: Option<BTreeMap<SeedKind, DealerState<G>>>,
    transport: BTreeMap<u64, AeKey>,
    share_epoch: u64,
}

/// Verifies the committed roster, agrees pairwise seeds with every peer and deals the
/// self seed and all pairwise seeds to the decryptor committee.
pub fn pre_round_client<G: Group, R: RngCore + CryptoRng>(
    keys: ClientKeys<G>,
    root_msg: &RootSig<G>,
    server_pk: &G::Element,
    cfg: &PreRoundConfig,
    rng: &mut R,
) -> Result<(ClientState<G>, Vec<SeedShareMsg>)> {
    let roster = verify_root(root_msg, server_pk)?;
    if roster.get(&keys.id) != Some(&keys.keys.map(|k| k.pk)) {
        return Err(Error::ConsistencyAbort(format!("client {} missing from roster", keys.id)));
    }
    let access = cfg.committee_for::<G>(&root_msg.root)?;
    let mut state = ClientState {
        id: keys.id,
        keys: keys.keys,
        root: root_msg.root,
        roster: BTreeMap::new(),
        access,
        self_seed: G::random_scalar(rng),
        pair_seeds: BTreeMap::new(),
        dealers: cfg.retain_dealers.then(BTreeMap::new),
        transport: BTreeMap::new(),
        share_epoch: 0,
    };
    let peers: Vec<u64> = roster.keys().copied().filter(|&j| j != state.id).collect();
    state.roster = roster;
    for &j in &peers {
        let seed = ka_seed::<G>(&state.keys[0].sk, &state.roster[&j][0])?;
        state.pair_seeds.insert(j, seed);
    }
    state.refresh_transport()?;
    let mut kinds: Vec<SeedKind> = vec![None];
    kinds.extend(peers.into_iter().map(Some));
    let msgs = state.deal(&kinds, rng)?;
    Ok((state, msgs))
}

impl<G: Group> ClientState<G> {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn keys(&self) -> &[KeyPair<G>; 3] {
        &self.keys
    }

    pub fn root(&self) -> &[u8; 32] {
        &self.root
    }

    pub fn roster(&self) -> &Roster<G> {
        &self.roster
    }

    pub fn access(&self) -> &AccessStructure {
        &self.access
    }

    pub fn decryptors(&self) -> Vec<u64> {
        self.access.all_members().collect()
    }

    pub fn is_decryptor(&self) -> bool {
        self.access.level_of(self.id).is_some()
    }

    pub fn pair_seed(&self, peer: u64) -> Option<&G::Scalar> {
        self.pair_seeds.get(&peer)
    }

    pub fn retains_dealers(&self) -> bool {
        self.dealers.is_some()
    }

    /// The self seed; exposed for oracles in tests and the harness only.
    #[doc(hidden)]
    pub fn self_seed(&self) -> &G::Scalar {
        &self.self_seed
    }

    fn refresh_transport(&mut self) -> Result<()> {
        for u in self.access.all_members() {
            if !self.transport.contains_key(&u) {
                let pk = self.roster.get(&u).ok_or(Error::NotParticipant(u))?;
                self.transport.insert(u, ka_transport::<G>(&self.keys[1].sk, &pk[1])?);
            }
        }
        Ok(())
    }

    fn seed_of(&self, kind: SeedKind) -> Result<G::Scalar> {
        match kind {
            None => Ok(self.self_seed),
            Some(j) => self.pair_seeds.get(&j).copied().ok_or(Error::MissingSeed(j)),
        }
    }

    /// Deals the listed seeds under the full current access structure.
    fn deal<R: RngCore + CryptoRng>(&mut self, kinds: &[SeedKind], rng: &mut R) -> Result<Vec<SeedShareMsg>> {
        let mut per_holder: BTreeMap<u64, SeedPayload<G>> = BTreeMap::new();
        for u in self.access.all_members() {
            let level = self.access.level_of(u).expect("member");
            per_holder.insert(u, SeedPayload { from: self.id, to: u, level, self_share: None, pairs: Vec::new() });
        }
        for &kind in kinds {
            let (dealer, shares) = DealerState::deal_under(self.seed_of(kind)?, &self.access, rng)?;
            self.file_shares(kind, &shares, &mut per_holder);
            if let Some(d) = self.dealers.as_mut() {
                d.insert(kind, dealer);
            }
        }
        self.seal(per_holder)
    }

    fn file_shares(&self, kind: SeedKind, shares: &[Share<G>], out: &mut BTreeMap<u64, SeedPayload<G>>) {
        for sh in shares {
            let p = out.get_mut(&sh.holder).expect("holder has a payload");
            match kind {
                None => p.self_share = Some(sh.value),
                Some(j) => p.pairs.push((j, sh.value)),
            }
        }
    }

    fn seal(&mut self, payloads: BTreeMap<u64, SeedPayload<G>>) -> Result<Vec<SeedShareMsg>> {
        let epoch = self.share_epoch;
        self.share_epoch += 1;
        payloads
            .into_values()
            .map(|p| {
                let key = self.transport.get(&p.to).ok_or(Error::NotParticipant(p.to))?;
                let nonce = ae_nonce(PURPOSE_SEED_SHARE, self.id, p.to, epoch);
                Ok(SeedShareMsg { from: self.id, to: p.to, ciphertext: ae_encrypt(key, &nonce, &p.encode(), &[]) })
            })
            .collect()
    }

    /// Extends every retained dealing to a new decryptor level. Only the new members
    /// receive messages.
    pub fn extend_decryptors<R: RngCore + CryptoRng>(
        &mut self,
        level: &JoinLevel,
        rng: &mut R,
    ) -> Result<Vec<SeedShareMsg>> {
        let mut access = self.access.clone();
        access.push_level::<G>(&level.members, level.threshold)?;
        let level_no = access.levels().len() as u8;
        let mut dealers =
            self.dealers.take().ok_or_else(|| Error::InvalidConfig("dealing polynomials were not retained".into()))?;
        let mut per_holder: BTreeMap<u64, SeedPayload<G>> = level
            .members
            .iter()
            .map(|&u| (u, SeedPayload { from: self.id, to: u, level: level_no, self_share: None, pairs: Vec::new() }))
            .collect();
        let result = (|| {
            for (&kind, dealer) in dealers.iter_mut() {
                let shares = dealer.extend_level(level.threshold, &level.members, rng)?;
                self.file_shares(kind, &shares, &mut per_holder);
            }
            Ok::<_, Error>(())
        })();
        self.dealers = Some(dealers);
        result?;
        self.access = access;
        self.refresh_transport()?;
        self.seal(per_holder)
    }

    /// Accepts a re-signed roster that appends new clients, agrees seeds with them and
    /// deals those seeds to the committee.
    pub fn admit_peers<R: RngCore + CryptoRng>(
        &mut self,
        root_msg: &RootSig<G>,
        server_pk: &G::Element,
        rng: &mut R,
    ) -> Result<Vec<SeedShareMsg>> {
        let roster = verify_root(root_msg, server_pk)?;
        for (id, pks) in &self.roster {
            if roster.get(id) != Some(pks) {
                return Err(Error::ConsistencyAbort(format!("roster entry {id} changed")));
            }
        }
        let fresh: Vec<u64> = roster.keys().copied().filter(|j| !self.roster.contains_key(j)).collect();
        self.roster = roster;
        self.root = root_msg.root;
        for &j in &fresh {
            let seed = ka_seed::<G>(&self.keys[0].sk, &self.roster[&j][0])?;
            self.pair_seeds.insert(j, seed);
        }
        if fresh.is_empty() {
            return Ok(Vec::new());
        }
        let kinds: Vec<SeedKind> = fresh.into_iter().map(Some).collect();
        self.deal(&kinds, rng)
    }

    /// Adds a decryptor level dealt by someone else (for clients that joined after it).
    pub fn adopt_access(&mut self, access: AccessStructure) -> Result<()> {
        self.access = access;
        self.refresh_transport()
    }

    fn round_generator(&self, cfg: &RoundConfig) -> G::Element {
        derive_round_generator::<G>(&cfg.digest, cfg.t)
    }

    /// `r_i` for this iteration.
    pub fn self_mask(&self, cfg: &RoundConfig) -> Result<Vec<u32>> {
        let g_t = self.round_generator(cfg);
        cfg.hooks.expand::<G>(mask_key(self.id, None), cfg.len, || G::pow(&g_t, &self.self_seed))
    }

    /// Masks `x` and signs the online attestation.
    pub fn report(&self, cfg: &RoundConfig, x: &[u32]) -> Result<Report> {
        if x.len() != cfg.len {
            return Err(Error::InvalidConfig(format!("input length {} != {}", x.len(), cfg.len)));
        }
        let selected = cfg.selected()?;
        let neighbours = find_neighbors(&cfg.digest, cfg.t, &selected, self.id, cfg.degree)?;
        let g_t = self.round_generator(cfg);
        let mut y = x.to_vec();
        apply_masks(&mut y, &self.self_mask(cfg)?, 1);
        for j in neighbours {
            let seed = self.pair_seeds.get(&j).ok_or(Error::MissingSeed(j))?;
            let m = cfg.hooks.expand::<G>(mask_key(self.id, Some(j)), cfg.len, || G::pow(&g_t, seed))?;
            apply_masks(&mut y, &m, mask_sign(self.id, j));
        }
        let m = online_message(self.id, cfg.t);
        let sig = ds_sign::<G>(self.id, &self.keys[1].sk, &m);
        Ok(Report { id: self.id, t: cfg.t, y, m, sig })
    }
}

/// `y_i = x_i + r_i + Σ_{j>i} m_{i,j} − Σ_{j<i} m_{i,j}` over the neighbours `A_{i,t}`.
pub fn client_report<G: Group>(state: &ClientState<G>, cfg: &RoundConfig, x: &[u32]) -> Result<Report> {
    state.report(cfg, x)
}
