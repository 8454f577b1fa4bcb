use std::collections::BTreeMap;
use std::io::Write;

use secagg_core::wire::MsgType;

pub const CSV_HEADER: [&str; 10] =
    ["iter", "entity_kind", "entity_id", "phase", "msg_type", "bytes_sent", "bytes_recv", "cpu_us", "round", "outcome"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Client,
    Decryptor,
    Server,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Client => "client",
            EntityKind::Decryptor => "decryptor",
            EntityKind::Server => "server",
        }
    }

    /// Role of the sending side of a message.
    pub fn of_sender(from: u64, ty: MsgType) -> Self {
        match (from, ty) {
            (0, _) => EntityKind::Server,
            (_, MsgType::PkCommit | MsgType::Report | MsgType::SeedShare) => EntityKind::Client,
            _ => EntityKind::Decryptor,
        }
    }

    /// Role of the receiving side of a message.
    pub fn of_receiver(to: u64, ty: MsgType) -> Self {
        match (to, ty) {
            (0, _) => EntityKind::Server,
            (_, MsgType::RootSig | MsgType::Model) => EntityKind::Client,
            _ => EntityKind::Decryptor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    PreRound,
    Collection,
    Join,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreRound => "pre_round",
            Phase::Collection => "collection",
            Phase::Join => "join",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    SumOk,
    Abort,
    WrongSum,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::SumOk => "sum_ok",
            Outcome::Abort => "abort",
            Outcome::WrongSum => "wrong_sum",
        }
    }
}

/// One delivered (or scheduled) envelope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsgRecord {
    pub iter: u64,
    pub phase: Phase,
    pub from: u64,
    pub to: u64,
    pub msg_type: MsgType,
    pub bytes: usize,
    pub round: u32,
}

impl MsgRecord {
    pub fn sender_kind(&self) -> EntityKind {
        EntityKind::of_sender(self.from, self.msg_type)
    }

    pub fn receiver_kind(&self) -> EntityKind {
        EntityKind::of_receiver(self.to, self.msg_type)
    }
}

type EntityKey = (u64, Phase, EntityKind, u64);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub messages: Vec<MsgRecord>,
    cpu_us: BTreeMap<EntityKey, u64>,
    rounds: BTreeMap<(u64, Phase), u32>,
    outcomes: BTreeMap<(u64, Phase), String>,
}

/// Aggregated row per `(iter, entity, phase)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub iter: u64,
    pub entity_kind: EntityKind,
    pub entity_id: u64,
    pub phase: Phase,
    pub msg_types: Vec<MsgType>,
    pub bytes_sent: u64,
    pub bytes_recv: u64,
    pub msgs_sent: u64,
    pub msgs_recv: u64,
    pub cpu_us: u64,
    pub round: u32,
    pub outcome: String,
}

impl Metrics {
    pub fn record(&mut self, rec: MsgRecord) {
        let r = self.rounds.entry((rec.iter, rec.phase)).or_default();
        *r = (*r).max(rec.round);
        self.messages.push(rec);
    }

    pub fn add_cpu(&mut self, iter: u64, phase: Phase, kind: EntityKind, id: u64, us: u64) {
        *self.cpu_us.entry((iter, phase, kind, id)).or_default() += us;
    }

    pub fn set_outcome(&mut self, iter: u64, phase: Phase, outcome: &str) {
        self.outcomes.insert((iter, phase), outcome.to_string());
    }

    pub fn outcome(&self, iter: u64, phase: Phase) -> Option<&str> {
        self.outcomes.get(&(iter, phase)).map(String::as_str)
    }

    /// Logical rounds observed in a phase.
    pub fn rounds(&self, iter: u64, phase: Phase) -> u32 {
        self.rounds.get(&(iter, phase)).copied().unwrap_or(0)
    }

    pub fn messages_in(&self, iter: u64, phase: Phase) -> impl Iterator<Item = &MsgRecord> {
        self.messages.iter().filter(move |m| m.iter == iter && m.phase == phase)
    }

    pub fn rows(&self) -> Vec<Row> {
        let mut rows: BTreeMap<EntityKey, Row> = BTreeMap::new();
        let blank = |key: EntityKey| Row {
            iter: key.0,
            entity_kind: key.2,
            entity_id: key.3,
            phase: key.1,
            msg_types: Vec::new(),
            bytes_sent: 0,
            bytes_recv: 0,
            msgs_sent: 0,
            msgs_recv: 0,
            cpu_us: 0,
            round: self.rounds(key.0, key.1),
            outcome: self.outcome(key.0, key.1).unwrap_or("").to_string(),
        };
        for m in &self.messages {
            let sk = (m.iter, m.phase, m.sender_kind(), m.from);
            let s = rows.entry(sk).or_insert_with(|| blank(sk));
            s.bytes_sent += m.bytes as u64;
            s.msgs_sent += 1;
            if !s.msg_types.contains(&m.msg_type) {
                s.msg_types.push(m.msg_type);
            }
            let rk = (m.iter, m.phase, m.receiver_kind(), m.to);
            let r = rows.entry(rk).or_insert_with(|| blank(rk));
            r.bytes_recv += m.bytes as u64;
            r.msgs_recv += 1;
            if !r.msg_types.contains(&m.msg_type) {
                r.msg_types.push(m.msg_type);
            }
        }
        for (&key, &us) in &self.cpu_us {
            rows.entry(key).or_insert_with(|| blank(key)).cpu_us = us;
        }
        let mut out: Vec<Row> = rows.into_values().collect();
        for r in &mut out {
            r.msg_types.sort_by_key(|t| *t as u8);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in self.rows() {
            let types: Vec<&str> = r.msg_types.iter().map(|t| t.name()).collect();
            w.write_record([
                r.iter.to_string(),
                r.entity_kind.as_str().to_string(),
                r.entity_id.to_string(),
                r.phase.as_str().to_string(),
                types.join("+"),
                r.bytes_sent.to_string(),
                r.bytes_recv.to_string(),
                r.cpu_us.to_string(),
                r.round.to_string(),
                r.outcome,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
