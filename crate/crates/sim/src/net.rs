//! Event queue and message accounting. Node 0 is the server; clients use their ids.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use secagg_core::wire::{open, MsgType};

use crate::delay::DelayModel;
use crate::metrics::{Metrics, MsgRecord, Phase};

pub const SERVER: u64 = 0;

#[derive(Clone, Debug)]
pub enum Payload {
    Msg {
        msg_type: MsgType,
        bytes: Arc<Vec<u8>>,
    },
    /// Server-local deadline; stale timers carry an old generation number.
    Timer(u64),
}

#[derive(Clone, Debug)]
pub struct Event {
    pub time: u64,
    pub from: u64,
    pub to: u64,
    pub seq: u64,
    pub payload: Payload,
}

impl Event {
    fn key(&self) -> (u64, u64, u64, u64) {
        (self.time, self.from, self.to, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Counts alternations of direction: a server-to-client message sent after a
/// client-to-server message opens a new round.
#[derive(Clone, Debug, Default)]
pub struct RoundTracker {
    round: u32,
    last_up: Option<bool>,
}

impl RoundTracker {
    pub fn on_send(&mut self, up: bool) -> u32 {
        if self.round == 0 || (!up && self.last_up == Some(true)) {
            self.round += 1;
        }
        self.last_up = Some(up);
        self.round
    }

    pub fn rounds(&self) -> u32 {
        self.round
    }
}

#[derive(Debug)]
pub struct Net {
    queue: BinaryHeap<Reverse<Event>>,
    now: u64,
    seq: u64,
    delay: DelayModel,
    tracker: RoundTracker,
    iter: u64,
    phase: Phase,
    pub metrics: Metrics,
}

impl Net {
    pub fn new(delay: DelayModel) -> Self {
        Net {
            queue: BinaryHeap::new(),
            now: 0,
            seq: 0,
            delay,
            tracker: RoundTracker::default(),
            iter: 0,
            phase: Phase::PreRound,
            metrics: Metrics::default(),
        }
    }

    pub fn begin(&mut self, iter: u64, phase: Phase) {
        debug_assert!(self.queue.is_empty(), "previous phase left undelivered events");
        self.iter = iter;
        self.phase = phase;
        self.tracker = RoundTracker::default();
    }

    pub fn iter(&self) -> u64 {
        self.iter
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn rounds(&self) -> u32 {
        self.tracker.rounds()
    }

    pub fn max_delay_us(&self) -> u64 {
        self.delay.max_us()
    }

    /// Queues an envelope. The same `Arc` may be sent to many receivers.
    pub fn send(&mut self, from: u64, to: u64, bytes: Arc<Vec<u8>>) {
        let (msg_type, _) = open(&bytes).expect("locally built envelope");
        let round = self.tracker.on_send(to == SERVER);
        self.metrics.record(MsgRecord {
            iter: self.iter,
            phase: self.phase,
            from,
            to,
            msg_type,
            bytes: bytes.len(),
            round,
        });
        let time = self.now + self.delay.sample();
        self.push(Event { time, from, to, seq: 0, payload: Payload::Msg { msg_type, bytes } });
    }

    pub fn timer(&mut self, after_us: u64, generation: u64) {
        let time = self.now + after_us;
        self.push(Event { time, from: SERVER, to: SERVER, seq: 0, payload: Payload::Timer(generation) });
    }

    fn push(&mut self, mut ev: Event) {
        ev.seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(ev));
    }

    pub fn pop_event(&mut self) -> Option<Event> {
        let Reverse(ev) = self.queue.pop()?;
        self.now = self.now.max(ev.time);
        Some(ev)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    /// Drops anything still queued, e.g. after an abort.
    pub fn clear(&mut self) {
        self.queue.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use secagg_core::wire::seal;

    #[test]
    fn rounds_count_direction_changes() {
        let mut t = RoundTracker::default();
        assert_eq!(t.on_send(false), 1);
        assert_eq!(t.on_send(false), 1);
        assert_eq!(t.on_send(true), 1);
        assert_eq!(t.on_send(false), 2);
        assert_eq!(t.on_send(true), 2);
        assert_eq!(t.on_send(true), 2);
        assert_eq!(t.rounds(), 2);
        let mut up_first = RoundTracker::default();
        assert_eq!(up_first.on_send(true), 1);
        assert_eq!(up_first.on_send(false), 2);
    }

    #[test]
    fn events_come_out_in_time_then_sender_order() {
        let mut net = Net::new(DelayModel::new(10, 0, 0));
        let msg = Arc::new(seal(MsgType::Model, &[1, 2, 3]));
        net.send(SERVER, 5, msg.clone());
        net.send(SERVER, 2, msg.clone());
        net.send(7, SERVER, Arc::new(seal(MsgType::Report, &[])));
        net.timer(5_000, 1);
        let order: Vec<(u64, u64, u64)> =
            std::iter::from_fn(|| net.pop_event()).map(|e| (e.time, e.from, e.to)).collect();
        assert_eq!(order, vec![(5_000, 0, 0), (10_000, 0, 2), (10_000, 0, 5), (10_000, 7, 0)]);
        assert_eq!(net.metrics.messages.len(), 3);
        assert_eq!(net.metrics.messages[0].bytes, 8);
    }
}
