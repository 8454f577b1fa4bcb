//! Drives the core state machines over the simulated network.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use secagg_core::protocol::{
    apply_masks, pre_round_client, AbortRule, ClientKeys, ClientState, DecryptorState, JoinLevel, MaskHooks, Mode,
    PreRoundConfig, Rate, RoundConfig, RoundState, Selection, ServerState,
};
use secagg_core::sharing::AccessStructure;
use secagg_core::tss::{decryptor_tss_finish, decryptor_tss_part, server_crosscheck_alt};
use secagg_core::wire::{
    CheckReq, DecResp, DkgMsg, ModelMsg, MsgType, PkCommit, Report, RootSig, SeedShareMsg, TssFull, TssPart, TssReq,
    WireMessage,
};
use secagg_core::{Error, Group};

use crate::adversary::AdversaryScript;
use crate::delay::DelayModel;
use crate::dropout::inject_dropouts;
use crate::error::SimError;
use crate::metrics::{EntityKind, Metrics, Outcome, Phase};
use crate::net::{Net, Payload, SERVER};

/// Envelopes held back per client until it has the data to process them.
type Backlog = BTreeMap<u64, Vec<(MsgType, Arc<Vec<u8>>)>>;

const STREAM_KEYS: u64 = 1;
const STREAM_DEALING: u64 = 2;
const STREAM_SERVER: u64 = 6;
const STREAM_INPUTS: u64 = 4_000_000;
const STREAM_RESPONSES: u64 = 5_000_000;
const STREAM_MODELS: u64 = 7_000_000;

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub clients: usize,
    pub selection: Selection,
    pub decryptors: usize,
    pub threshold: usize,
    pub eta_c: Rate,
    pub eta_d: Rate,
    pub degree: usize,
    pub len: usize,
    pub mode: Mode,
    pub abort_rule: AbortRule,
    pub committee: Option<AccessStructure>,
    pub retain_dealers: bool,
    pub base_delay_ms: u64,
    pub jitter_ms: u64,
    pub seed: u64,
    pub measure_cpu: bool,
    pub full_range: bool,
    /// Mask taps and overrides passed to every round.
    pub hooks: MaskHooks,
    /// Fixed inputs used in every iteration instead of the seeded synthetic ones.
    pub fixed_inputs: Option<BTreeMap<u64, Vec<u32>>>,
}

impl SessionConfig {
    /// Every client selected each iteration, `η_C = 0`, `η_D = 0.1`.
    pub fn new(clients: usize, decryptors: usize, threshold: usize, len: usize) -> Self {
        SessionConfig {
            clients,
            selection: Selection::Static { n_t: clients },
            decryptors,
            threshold,
            eta_c: Rate::from_ppm(0),
            eta_d: Rate::from_ppm(100_000),
            degree: 16,
            len,
            mode: Mode::OneRound,
            abort_rule: AbortRule::Quorum,
            committee: None,
            retain_dealers: false,
            base_delay_ms: DelayModel::DEFAULT_BASE_MS,
            jitter_ms: DelayModel::DEFAULT_JITTER_MS,
            seed: 0,
            measure_cpu: false,
            full_range: false,
            hooks: MaskHooks::default(),
            fixed_inputs: None,
        }
    }

    pub fn round_template(&self) -> RoundConfig {
        RoundConfig {
            t: 0,
            digest: [0; 32],
            clients: self.clients,
            selection: self.selection,
            decryptors: self.decryptors,
            threshold: self.threshold,
            eta_c: self.eta_c,
            eta_d: self.eta_d,
            degree: self.degree,
            len: self.len,
            abort_rule: self.abort_rule,
            mode: self.mode,
            hooks: self.hooks.clone(),
        }
    }
}

/// What happened in one collection iteration.
#[derive(Clone, Debug)]
pub struct IterationReport<G: Group> {
    pub t: u64,
    pub digest: [u8; 32],
    pub outcome: Outcome,
    pub error: Option<String>,
    pub sum: Option<Vec<u32>>,
    /// Plaintext sum over the server's survivor set (or over the reporting clients
    /// when collection aborted).
    pub expected: Vec<u32>,
    pub selected: Vec<u64>,
    pub survivors: Vec<u64>,
    pub dropouts: Vec<u64>,
    pub rounds: u32,
    /// Masked reports as they reached the server.
    pub reports: Vec<Report>,
    /// Responses the server accepted, in arrival order.
    pub responses: Vec<DecResp<G>>,
    pub quorum: Vec<u64>,
    pub failed: Vec<u64>,
    /// Decryptors that refused the view they were shown.
    pub refused: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Reports,
    Parts,
    Responses,
    Done,
}

pub struct Session<G: Group> {
    cfg: SessionConfig,
    template: RoundConfig,
    net: Net,
    server: ServerState<G>,
    clients: BTreeMap<u64, ClientState<G>>,
    decs: BTreeMap<u64, DecryptorState<G>>,
    key_rng: ChaCha20Rng,
    deal_rng: ChaCha20Rng,
    next_t: u64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<G: Group> Session<G> {
    /// Validates the configuration and runs the pre-round over the network.
    pub fn start(cfg: SessionConfig) -> Result<Self, SimError> {
        let template = cfg.round_template();
        template.validate()?;
        let mut key_rng = rng_for(cfg.seed, STREAM_KEYS);
        let server = ServerState::new(&mut rng_for(cfg.seed, STREAM_SERVER));
        let fresh: BTreeMap<u64, ClientKeys<G>> =
            (1..=cfg.clients as u64).map(|i| (i, ClientKeys::generate(i, &mut key_rng))).collect();
        let mut s = Session {
            net: Net::new(DelayModel::new(cfg.base_delay_ms, cfg.jitter_ms, cfg.seed)),
            template,
            server,
            clients: BTreeMap::new(),
            decs: BTreeMap::new(),
            key_rng,
            deal_rng: rng_for(cfg.seed, STREAM_DEALING),
            next_t: 0,
            cfg,
        };
        s.net.begin(0, Phase::PreRound);
        let pre = PreRoundConfig {
            clients: s.cfg.clients,
            decryptors: s.cfg.decryptors,
            threshold: s.cfg.threshold,
            committee: s.cfg.committee.clone(),
            retain_dealers: s.cfg.retain_dealers,
        };
        s.setup_loop(fresh, &pre)?;
        s.server.finish_dkg()?;
        if let Some(u) = s.decs.values().find(|d| d.mpk().is_none()) {
            return Err(SimError::Protocol(Error::DkgComplaint(u.id())));
        }
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn template(&self) -> &RoundConfig {
        &self.template
    }

    pub fn metrics(&self) -> &Metrics {
        &self.net.metrics
    }

    pub fn server(&self) -> &ServerState<G> {
        &self.server
    }

    pub fn clients(&self) -> &BTreeMap<u64, ClientState<G>> {
        &self.clients
    }

    pub fn decryptors(&self) -> &BTreeMap<u64, DecryptorState<G>> {
        &self.decs
    }

    /// Index of the next collection iteration.
    pub fn next_iteration(&self) -> u64 {
        self.next_t
    }

    /// The synthetic model digest announced in iteration `t`.
    pub fn model_digest(&self, t: u64) -> [u8; 32] {
        let mut d = [0u8; 32];
        rng_for(self.cfg.seed, STREAM_MODELS + t).fill_bytes(&mut d);
        d
    }

    pub fn round_config(&self, t: u64) -> RoundConfig {
        self.template.for_iteration(t, self.model_digest(t))
    }

    /// `S_t` under the honest model digest.
    pub fn selected(&self, t: u64) -> Result<Vec<u64>, SimError> {
        Ok(self.round_config(t).selected()?)
    }

    /// Synthetic inputs of every selected client in iteration `t`.
    pub fn inputs(&self, t: u64) -> Result<BTreeMap<u64, Vec<u32>>, SimError> {
        if let Some(fixed) = &self.cfg.fixed_inputs {
            return self
                .selected(t)?
                .into_iter()
                .map(|i| {
                    let x = fixed.get(&i).ok_or_else(|| SimError::Config(format!("no fixed input for client {i}")))?;
                    Ok((i, x.clone()))
                })
                .collect();
        }
        let mut rng = rng_for(self.cfg.seed, STREAM_INPUTS + t);
        let bound = if self.cfg.full_range { u32::MAX } else { 0xFFFF };
        Ok(self
            .selected(t)?
            .into_iter()
            .map(|i| (i, (0..self.template.len).map(|_| rng.next_u32() & bound).collect()))
            .collect())
    }

    /// `r_i` of client `i` in iteration `t`.
    pub fn self_mask(&self, i: u64, t: u64) -> Result<Vec<u32>, SimError> {
        let client = self.clients.get(&i).ok_or(Error::NotParticipant(i))?;
        Ok(client.self_mask(&self.round_config(t))?)
    }

    pub fn dropouts(&self, t: u64, rate: Rate) -> Result<BTreeSet<u64>, SimError> {
        inject_dropouts(&self.selected(t)?, rate, self.template.eta_d, self.cfg.seed, t)
    }

    fn timed<T>(&mut self, phase: Phase, kind: EntityKind, id: u64, f: impl FnOnce(&mut Self) -> T) -> T {
        if !self.cfg.measure_cpu {
            return f(self);
        }
        let start = Instant::now();
        let out = f(self);
        let us = start.elapsed().as_micros() as u64;
        let iter = self.net.iter();
        self.net.metrics.add_cpu(iter, phase, kind, id, us);
        out
    }

    fn send<M: WireMessage>(&mut self, from: u64, to: u64, msg: &M) {
        self.net.send(from, to, Arc::new(msg.to_envelope()));
    }

    /// Registration, root commitment and seed/DKG dealing. `fresh` are clients that
    /// have not registered yet; everyone else already holds a roster and only admits
    /// the newcomers.
    fn setup_loop(&mut self, fresh: BTreeMap<u64, ClientKeys<G>>, pre: &PreRoundConfig) -> Result<(), SimError> {
        let phase = self.net.phase();
        let mut fresh = fresh;
        for k in fresh.values() {
            self.net.send(k.id, SERVER, Arc::new(k.commit().to_envelope()));
        }
        let expected = fresh.len();
        let mut registered = 0;
        let mut root_cache: Option<(Arc<Vec<u8>>, RootSig<G>)> = None;
        let mut deal_cache: HashMap<usize, (Arc<Vec<u8>>, DkgMsg<G>)> = HashMap::new();
        let mut synced: BTreeSet<u64> = BTreeSet::new();
        let mut pending: Backlog = BTreeMap::new();

        while let Some(ev) = self.net.pop_event() {
            let Payload::Msg { msg_type, bytes } = ev.payload else { continue };
            if ev.to == SERVER {
                self.timed(phase, EntityKind::Server, SERVER, |s| -> Result<(), SimError> {
                    match msg_type {
                        MsgType::PkCommit => {
                            s.server.register(&PkCommit::<G>::from_envelope(&bytes)?)?;
                            registered += 1;
                            if registered == expected {
                                let root = s.server.commit_roster()?;
                                if s.server.access().is_none() {
                                    s.server.select_committee(pre)?;
                                }
                                let env = Arc::new(root.to_envelope());
                                let ids: Vec<u64> = s.server.roster().keys().copied().collect();
                                for id in ids {
                                    s.net.send(SERVER, id, env.clone());
                                }
                            }
                        }
                        MsgType::SeedShare => {
                            let m = SeedShareMsg::from_envelope(&bytes)?;
                            s.net.send(SERVER, m.to, bytes.clone());
                        }
                        MsgType::DkgDeal => {
                            let m = DkgMsg::<G>::from_envelope(&bytes)?;
                            s.server.observe_dkg(&m);
                            match &m {
                                DkgMsg::Deal { to, .. } => s.net.send(SERVER, *to, bytes.clone()),
                                DkgMsg::VerifyKey { from, .. } => {
                                    let holders: Vec<u64> = s.server.access().expect("committee fixed").levels()[0]
                                        .members
                                        .iter()
                                        .copied()
                                        .filter(|h| h != from)
                                        .collect();
                                    for h in holders {
                                        s.net.send(SERVER, h, bytes.clone());
                                    }
                                }
                            }
                            deal_cache.insert(Arc::as_ptr(&bytes) as usize, (bytes.clone(), m));
                        }
                        _ => return Err(Error::Malformed("unexpected message at the server").into()),
                    }
                    Ok(())
                })?;
                continue;
            }
            let mut queue = vec![(msg_type, bytes)];
            while let Some((msg_type, bytes)) = queue.pop() {
                let id = ev.to;
                match msg_type {
                    MsgType::RootSig => {
                        let root = match &root_cache {
                            Some((b, r)) if Arc::ptr_eq(b, &bytes) => r.clone(),
                            _ => {
                                let r = RootSig::<G>::from_envelope(&bytes)?;
                                root_cache = Some((bytes.clone(), r.clone()));
                                r
                            }
                        };
                        let keys = fresh.remove(&id);
                        self.timed(phase, EntityKind::Client, id, |s| s.on_root(id, keys, &root, pre))?;
                        synced.insert(id);
                        // replay in arrival order
                        if let Some(mut held) = pending.remove(&id) {
                            held.reverse();
                            queue.extend(held);
                        }
                    }
                    MsgType::SeedShare | MsgType::DkgDeal if !synced.contains(&id) => {
                        pending.entry(id).or_default().push((msg_type, bytes));
                    }
                    MsgType::SeedShare => {
                        let m = SeedShareMsg::from_envelope(&bytes)?;
                        self.timed(phase, EntityKind::Decryptor, id, |s| {
                            let dec = s.decs.get_mut(&id).ok_or(Error::NotParticipant(id))?;
                            dec.on_seed_share(&s.clients[&id], &m)
                        })?;
                    }
                    MsgType::DkgDeal => {
                        let m = match deal_cache.get(&(Arc::as_ptr(&bytes) as usize)) {
                            Some((b, m)) if Arc::ptr_eq(b, &bytes) => m.clone(),
                            _ => DkgMsg::<G>::from_envelope(&bytes)?,
                        };
                        let vk = self.timed(phase, EntityKind::Decryptor, id, |s| -> Result<_, Error> {
                            let dec = s.decs.get_mut(&id).ok_or(Error::NotParticipant(id))?;
                            dec.on_dkg(&s.clients[&id], &m)?;
                            if dec.dkg_ready() {
                                return dec.finish_dkg().map(Some);
                            }
                            Ok(None)
                        })?;
                        if let Some(vk) = vk {
                            self.send(id, SERVER, &vk);
                        }
                    }
                    _ => return Err(Error::Malformed("unexpected message at a client").into()),
                }
            }
        }
        Ok(())
    }

    fn on_root(
        &mut self,
        id: u64,
        keys: Option<ClientKeys<G>>,
        root: &RootSig<G>,
        pre: &PreRoundConfig,
    ) -> Result<(), SimError> {
        let spk = self.server.public_key();
        let msgs = match keys {
            Some(keys) => {
                let (state, msgs) = pre_round_client(keys, root, &spk, pre, &mut self.deal_rng)?;
                let first_level = state.access().levels()[0].members.contains(&id);
                self.clients.insert(id, state);
                if first_level && !self.decs.contains_key(&id) {
                    let mut dec = DecryptorState::new(&self.clients[&id])?;
                    let deals = dec.dkg_deal(&self.clients[&id], &mut self.deal_rng)?;
                    self.decs.insert(id, dec);
                    for d in &deals {
                        self.send(id, SERVER, d);
                    }
                }
                msgs
            }
            None => {
                let client = self.clients.get_mut(&id).ok_or(Error::NotParticipant(id))?;
                client.admit_peers(root, &spk, &mut self.deal_rng)?
            }
        };
        for m in &msgs {
            self.send(id, SERVER, m);
        }
        Ok(())
    }

    /// Registers `count` new clients mid-session. Existing clients admit them and deal
    /// the new pairwise seeds; the decryptor committee is unchanged.
    pub fn join_clients(&mut self, count: usize) -> Result<Vec<u64>, SimError> {
        let first = self.clients.keys().next_back().copied().unwrap_or(0) + 1;
        let ids: Vec<u64> = (first..first + count as u64).collect();
        let fresh: BTreeMap<u64, ClientKeys<G>> =
            ids.iter().map(|&i| (i, ClientKeys::generate(i, &mut self.key_rng))).collect();
        let pre = PreRoundConfig {
            clients: self.template.clients + count,
            decryptors: self.template.decryptors,
            threshold: self.template.threshold,
            committee: self.server.access().cloned(),
            retain_dealers: self.cfg.retain_dealers,
        };
        self.net.begin(self.next_t, Phase::Join);
        self.setup_loop(fresh, &pre)?;
        self.template.clients += count;
        if let Selection::Static { n_t } = &mut self.template.selection {
            if *n_t == self.cfg.clients {
                *n_t = self.template.clients;
            }
        }
        self.cfg.clients = self.template.clients;
        Ok(ids)
    }

    /// Adds a decryptor level of existing clients. The level itself is public; every
    /// client extends its retained dealings to the new members only.
    pub fn join_decryptors(&mut self, level: &JoinLevel) -> Result<(), SimError> {
        if let Some(&u) = level.members.iter().find(|u| !self.clients.contains_key(u)) {
            return Err(Error::NotParticipant(u).into());
        }
        self.net.begin(self.next_t, Phase::Join);
        let mut updated = self.clients.clone();
        let mut outgoing = Vec::new();
        for (id, client) in updated.iter_mut() {
            outgoing.push((*id, client.extend_decryptors(level, &mut self.deal_rng)?));
        }
        self.clients = updated;
        self.server.apply_join_level(level)?;
        for dec in self.decs.values_mut() {
            dec.apply_join_level(level)?;
        }
        let mpk = *self.server.mpk().ok_or(Error::AccessDenied)?;
        for &u in &level.members {
            let dec = DecryptorState::joined(
                &self.clients[&u],
                mpk,
                self.server.aggregated_commitments().to_vec(),
                self.server.verify_keys().clone(),
            )?;
            self.decs.insert(u, dec);
        }
        for (id, msgs) in outgoing {
            for m in &msgs {
                self.send(id, SERVER, m);
            }
        }
        while let Some(ev) = self.net.pop_event() {
            let Payload::Msg { msg_type, bytes } = ev.payload else { continue };
            let m = SeedShareMsg::from_envelope(&bytes)?;
            match (ev.to, msg_type) {
                (SERVER, MsgType::SeedShare) => self.net.send(SERVER, m.to, bytes.clone()),
                (u, MsgType::SeedShare) => self.timed(Phase::Join, EntityKind::Decryptor, u, |s| {
                    s.decs.get_mut(&u).ok_or(Error::NotParticipant(u))?.on_seed_share(&s.clients[&u], &m)
                })?,
                _ => return Err(Error::Malformed("unexpected message during a join").into()),
            }
        }
        self.template.decryptors = self.decs.len();
        Ok(())
    }

    /// Runs collection iterations `next_iteration()..+iterations` with dropouts drawn
    /// at `rate`.
    pub fn run_session(
        &mut self,
        iterations: usize,
        rate: Rate,
        script: &AdversaryScript,
    ) -> Result<Vec<IterationReport<G>>, SimError> {
        (0..iterations)
            .map(|_| {
                let dropped = self.dropouts(self.next_t, rate)?;
                self.run_iteration(script, &dropped)
            })
            .collect()
    }

    /// One collection iteration. Clients in `dropped` receive the model but never report.
    pub fn run_iteration(
        &mut self,
        script: &AdversaryScript,
        dropped: &BTreeSet<u64>,
    ) -> Result<IterationReport<G>, SimError> {
        let t = self.next_t;
        self.next_t += 1;
        let cfg = self.round_config(t);
        let selected = cfg.selected()?;
        let inputs = self.inputs(t)?;
        let mut resp_rng = rng_for(self.cfg.seed, STREAM_RESPONSES + t);
        let deadline = 2 * self.net.max_delay_us() + 1_000;
        let ph = Phase::Collection;
        self.net.begin(t, ph);

        let mut report = IterationReport {
            t,
            digest: cfg.digest,
            outcome: Outcome::Abort,
            error: None,
            sum: None,
            expected: Vec::new(),
            selected: selected.clone(),
            survivors: Vec::new(),
            dropouts: Vec::new(),
            rounds: 0,
            reports: Vec::new(),
            responses: Vec::new(),
            quorum: Vec::new(),
            failed: Vec::new(),
            refused: Vec::new(),
        };
        for &i in &selected {
            let msg = ModelMsg { t, digest: script.digest_for(i, cfg.digest) };
            self.send(SERVER, i, &msg);
        }
        let mut stage = Stage::Reports;
        let mut generation = 1;
        self.net.timer(deadline, generation);

        let decryptors: Vec<u64> = self.decs.keys().copied().collect();
        let msk_holders: Vec<u64> =
            self.server.access().map(|a| a.levels()[0].members.iter().copied().collect()).unwrap_or_default();
        let mut views: BTreeMap<u64, RoundConfig> = BTreeMap::new();
        let mut requests: BTreeMap<u64, CheckReq> = BTreeMap::new();
        let mut reports: Vec<Report> = Vec::new();
        let mut parts: Vec<TssPart<G>> = Vec::new();
        let mut round: Option<RoundState> = None;

        while let Some(ev) = self.net.pop_event() {
            if stage == Stage::Done {
                continue;
            }
            let (msg_type, bytes) = match ev.payload {
                Payload::Timer(g) if g == generation => (None, None),
                Payload::Timer(_) => continue,
                Payload::Msg { msg_type, bytes } => (Some(msg_type), Some(bytes)),
            };
            let id = ev.to;
            let mut advance = msg_type.is_none();
            match (id, msg_type) {
                (SERVER, None) => {}
                (SERVER, Some(MsgType::Report)) if stage == Stage::Reports => {
                    let r = Report::from_envelope(bytes.as_deref().expect("message"))?;
                    reports.push(r);
                    advance = reports.len() == selected.len();
                }
                (SERVER, Some(MsgType::TssPart)) if stage == Stage::Parts => {
                    parts.push(TssPart::from_envelope(bytes.as_deref().expect("message"))?);
                    advance = parts.len() == msk_holders.len();
                }
                (SERVER, Some(MsgType::DecResp)) if stage == Stage::Responses => {
                    let r = DecResp::<G>::from_envelope(bytes.as_deref().expect("message"))?;
                    if !script.drops_response(r.from) {
                        report.responses.push(r);
                    }
                    advance = report.responses.len() == decryptors.len();
                }
                (SERVER, Some(_)) => {}
                (i, Some(MsgType::Model)) => {
                    if dropped.contains(&i) {
                        continue;
                    }
                    let m = ModelMsg::from_envelope(bytes.as_deref().expect("message"))?;
                    let view = self.template.for_iteration(m.t, m.digest);
                    let r = self.timed(ph, EntityKind::Client, i, |s| {
                        let client = s.clients.get(&i).ok_or(Error::NotParticipant(i))?;
                        client.report(&view, &inputs[&i])
                    })?;
                    views.insert(i, view);
                    self.send(i, SERVER, &r);
                }
                (u, Some(ty @ (MsgType::CheckReq | MsgType::TssReq))) => {
                    let bytes = bytes.expect("message");
                    let req = if ty == MsgType::CheckReq {
                        CheckReq::from_envelope(&bytes)?
                    } else {
                        TssReq::from_envelope(&bytes)?.0
                    };
                    let view = views.get(&u).cloned().unwrap_or_else(|| self.template.for_iteration(req.t, req.digest));
                    let out = self.timed(ph, EntityKind::Decryptor, u, |s| -> Result<Option<Vec<u8>>, Error> {
                        let dec = &s.decs[&u];
                        let client = &s.clients[&u];
                        if ty == MsgType::CheckReq {
                            return dec.respond(client, &view, &req, &mut resp_rng).map(|r| Some(r.to_envelope()));
                        }
                        if dec.msk_share().is_none() {
                            return dec.check_view(client, &view, &req).map(|_| None);
                        }
                        decryptor_tss_part(dec, client, &view, &req).map(|p| Some(p.to_envelope()))
                    });
                    match out {
                        Ok(env) => {
                            views.insert(u, view);
                            requests.insert(u, req);
                            if let Some(env) = env {
                                self.net.send(u, SERVER, Arc::new(env));
                            }
                        }
                        Err(Error::ConsistencyAbort(_)) => report.refused.push(u),
                        Err(e) => return Err(e.into()),
                    }
                }
                (u, Some(MsgType::TssFull)) => {
                    let full = TssFull::<G>::from_envelope(bytes.as_deref().expect("message"))?;
                    let Some(req) = requests.get(&u) else { continue };
                    let view = &views[&u];
                    let out = self.timed(ph, EntityKind::Decryptor, u, |s| {
                        decryptor_tss_finish(&s.decs[&u], &s.clients[&u], view, req, &full)
                    });
                    match out {
                        Ok(r) => self.send(u, SERVER, &r),
                        Err(Error::ConsistencyAbort(_)) => report.refused.push(u),
                        Err(e) => return Err(e.into()),
                    }
                }
                (_, _) => return Err(Error::Malformed("unexpected message at a client").into()),
            }
            if !advance {
                continue;
            }
            generation += 1;
            let next = self.timed(ph, EntityKind::Server, SERVER, |s| {
                s.server_step(stage, &cfg, script, &reports, &parts, &mut round, &mut report)
            })?;
            stage = next;
            if stage != Stage::Done {
                self.net.timer(deadline, generation);
            }
        }
        self.net.clear();

        let survivors: Vec<u64> = match &round {
            Some(r) => r.survivors.clone(),
            None => reports.iter().map(|r| r.id).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        let mut expected = vec![0u32; cfg.len];
        for i in &survivors {
            apply_masks(&mut expected, &inputs[i], 1);
        }
        report.expected = expected;
        report.rounds = self.net.rounds();
        report.reports = reports;
        if report.error.is_none() {
            report.outcome =
                if report.sum.as_ref() == Some(&report.expected) { Outcome::SumOk } else { Outcome::WrongSum };
        }
        self.net.metrics.set_outcome(t, ph, report.outcome.as_str());
        Ok(report)
    }

    /// Server action when a stage completes or times out. Returns the next stage.
    #[allow(clippy::too_many_arguments)]
    fn server_step(
        &mut self,
        stage: Stage,
        cfg: &RoundConfig,
        script: &AdversaryScript,
        reports: &[Report],
        parts: &[TssPart<G>],
        round: &mut Option<RoundState>,
        report: &mut IterationReport<G>,
    ) -> Result<Stage, SimError> {
        let abort = |report: &mut IterationReport<G>, e: Error| {
            report.error = Some(e.to_string());
            report.outcome = Outcome::Abort;
            Ok(Stage::Done)
        };
        match stage {
            Stage::Reports => {
                let r = match self.server.collect(cfg, reports) {
                    Ok(r) => r,
                    Err(e @ Error::RoundAbort(_)) => return abort(report, e),
                    Err(e) => return Err(e.into()),
                };
                report.survivors = r.survivors.clone();
                report.dropouts = r.dropouts.clone();
                let honest = r.check_request();
                let decryptors: Vec<u64> = self.decs.keys().copied().collect();
                for u in decryptors {
                    let view = script.view_for(u, &honest);
                    match cfg.mode {
                        Mode::OneRound => self.send(SERVER, u, &view),
                        Mode::Tss => self.send(SERVER, u, &TssReq(view)),
                    }
                }
                *round = Some(r);
                Ok(match cfg.mode {
                    Mode::OneRound => Stage::Responses,
                    Mode::Tss => Stage::Parts,
                })
            }
            Stage::Parts => {
                let r = round.as_ref().expect("collected");
                let full = match server_crosscheck_alt(&self.server, r, parts) {
                    Ok(f) => f,
                    Err(e @ (Error::CombineReject(_) | Error::InsufficientShares { .. })) => return abort(report, e),
                    Err(e) => return Err(e.into()),
                };
                let env = Arc::new(full.to_envelope());
                let decryptors: Vec<u64> = self.decs.keys().copied().collect();
                for u in decryptors {
                    self.net.send(SERVER, u, env.clone());
                }
                Ok(Stage::Responses)
            }
            Stage::Responses => {
                let r = round.as_ref().expect("collected");
                match self.server.unmask(cfg, r, &report.responses) {
                    Ok(agg) => {
                        report.sum = Some(agg.sum);
                        report.quorum = agg.quorum;
                        report.failed = agg.failed;
                        Ok(Stage::Done)
                    }
                    Err(e @ (Error::RoundAbort(_) | Error::AccessDenied)) => abort(report, e),
                    Err(e) => Err(e.into()),
                }
            }
            Stage::Done => Ok(Stage::Done),
        }
    }
}
