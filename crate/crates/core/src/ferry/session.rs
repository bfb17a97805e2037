//! Chunked, resumable transfer sessions between a MAP and a fixed site.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ferry::buffer::MessageBuffer;
use crate::model::{Message, MessageId, NodeId, Role};

/// Slack added before flooring `rate * dt` to whole bits, so that a step
/// landing exactly on a completion instant is not one bit short.
pub const BIT_EPSILON: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    Transferring,
    Suspended,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSession {
    pub session_id: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub message_id: MessageId,
    pub size_bits: u64,
    pub bits_sent: u64,
    pub state: SessionState,
}

impl TransferSession {
    pub fn new(session_id: u64, from: NodeId, to: NodeId, message: &Message) -> Self {
        Self {
            session_id,
            from,
            to,
            message_id: message.id,
            size_bits: message.size_bits,
            bits_sent: 0,
            state: SessionState::Open,
        }
    }

    /// Reopens a transfer from a previously suspended offset.
    pub fn resumed(session_id: u64, from: NodeId, to: NodeId, message: &Message, bits_sent: u64) -> Self {
        assert!(bits_sent <= message.size_bits);
        Self {
            bits_sent,
            ..Self::new(session_id, from, to, message)
        }
    }

    pub fn remaining_bits(&self) -> u64 {
        self.size_bits - self.bits_sent
    }

    pub fn is_complete(&self) -> bool {
        self.state == SessionState::Complete
    }

    /// Contact lost before completion. The offset is kept for resumption.
    pub fn suspend(&mut self) {
        if self.state != SessionState::Complete {
            self.state = SessionState::Suspended;
        }
    }
}

/// Advances a session by `dt` seconds at `rate_bps`, returning the number of
/// bits moved. Completed sessions are left untouched.
pub fn transfer_step(session: &mut TransferSession, dt: f64, rate_bps: f64) -> u64 {
    match session.state {
        SessionState::Complete => return 0,
        SessionState::Suspended => panic!("transfer_step on a suspended session"),
        SessionState::Open | SessionState::Transferring => {}
    }
    session.state = SessionState::Transferring;
    let raw = (rate_bps * dt + BIT_EPSILON).floor();
    let step = if raw >= session.remaining_bits() as f64 {
        session.remaining_bits()
    } else {
        raw as u64
    };
    session.bits_sent += step;
    if session.bits_sent == session.size_bits {
        session.state = SessionState::Complete;
    }
    step
}

/// Direction of a lane within one contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    /// Fixed site to MAP.
    Pickup,
    /// MAP to fixed site.
    Dropoff,
}

impl Lane {
    pub const BOTH: [Lane; 2] = [Lane::Pickup, Lane::Dropoff];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContactPair {
    pub map: NodeId,
    pub site: NodeId,
}

impl ContactPair {
    pub fn endpoints(&self, lane: Lane) -> (NodeId, NodeId) {
        match lane {
            Lane::Pickup => (self.site, self.map),
            Lane::Dropoff => (self.map, self.site),
        }
    }
}

/// Whether `message`, held by the sender of `lane`, may move across it.
///
/// At a kiosk the MAP collects everything the kiosk holds and delivers
/// messages addressed to that kiosk. At a DPC the MAP unloads everything not
/// bound for a kiosk and loads downlink traffic for kiosks on its route.
pub fn eligible(lane: Lane, site: NodeId, message: &Message, route_kiosks: &BTreeSet<NodeId>) -> bool {
    match (site.role, lane) {
        (Role::Kiosk, Lane::Pickup) => true,
        (Role::Kiosk, Lane::Dropoff) => {
            message.final_role == Role::Kiosk && message.destination == Some(site)
        }
        (Role::Dpc, Lane::Dropoff) => message.final_role != Role::Kiosk,
        (Role::Dpc, Lane::Pickup) => {
            message.final_role == Role::Kiosk
                && message.destination.is_some_and(|d| route_kiosks.contains(&d))
        }
        _ => false,
    }
}

/// Sessions the sender could open over `lane`, highest priority first.
///
/// `receiver_free_bits` of `None` means the receiver is a sink. Messages that
/// no longer fit are skipped and stay with the sender; `locked` messages are
/// already moving on another session.
pub fn open_sessions(
    pair: ContactPair,
    lane: Lane,
    sender: &MessageBuffer,
    receiver_free_bits: Option<u64>,
    route_kiosks: &BTreeSet<NodeId>,
    locked: &BTreeSet<MessageId>,
    next_session_id: &mut u64,
) -> Vec<TransferSession> {
    let (from, to) = pair.endpoints(lane);
    let mut free = receiver_free_bits;
    let mut out = Vec::new();
    for m in sender.iter() {
        if locked.contains(&m.id) || !eligible(lane, pair.site, m, route_kiosks) {
            continue;
        }
        if let Some(f) = free.as_mut() {
            if m.size_bits > *f {
                continue;
            }
            *f -= m.size_bits;
        }
        out.push(TransferSession::new(*next_session_id, from, to, m));
        *next_session_id += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MessageKind, SimTime};
    use proptest::prelude::*;

    fn msg(id: u64, size: u64, gravity: f64) -> Message {
        Message::new(
            MessageId(id),
            MessageKind::SensorBatch,
            size,
            NodeId::kiosk(1),
            Role::Dpc,
            SimTime::ZERO,
            gravity,
        )
    }

    fn session(size: u64) -> TransferSession {
        TransferSession::new(1, NodeId::kiosk(1), NodeId::map(1), &msg(1, size, 0.0))
    }

    #[test]
    fn complete_is_idempotent() {
        let mut s = session(100);
        transfer_step(&mut s, 1.0, 100.0);
        assert!(s.is_complete());
        assert_eq!(transfer_step(&mut s, 1.0, 100.0), 0);
        assert_eq!(s.bits_sent, 100);
    }

    #[test]
    fn two_window_resume() {
        let mut s = session(10_000_000);
        assert_eq!(transfer_step(&mut s, 1.0, 5e6), 5_000_000);
        s.suspend();
        assert_eq!(s.state, SessionState::Suspended);
        assert_eq!(s.bits_sent, 5_000_000);
        let mut s = TransferSession::resumed(2, s.from, s.to, &msg(1, 10_000_000, 0.0), s.bits_sent);
        assert_eq!(transfer_step(&mut s, 1.0, 5e6), 5_000_000);
        assert!(s.is_complete());
    }

    #[test]
    fn step_landing_on_completion() {
        let mut s = session(3_000_000);
        s.bits_sent = 1_000_000;
        assert_eq!(transfer_step(&mut s, 0.5, 4e6), 2_000_000);
        assert!(s.is_complete());
        assert_eq!(s.remaining_bits(), 0);
    }

    fn pair(site: NodeId) -> ContactPair {
        ContactPair {
            map: NodeId::map(1),
            site,
        }
    }

    #[test]
    fn nothing_to_send() {
        let kiosk = MessageBuffer::new(NodeId::kiosk(1), 1_000);
        let mut ids = 0;
        for lane in Lane::BOTH {
            assert!(open_sessions(pair(NodeId::kiosk(1)), lane, &kiosk, Some(1_000), &BTreeSet::new(), &BTreeSet::new(), &mut ids).is_empty());
        }
    }

    #[test]
    fn pickup_in_gravity_order() {
        let mut kiosk = MessageBuffer::new(NodeId::kiosk(1), 1_000);
        kiosk.insert(msg(1, 10, 0.9)).unwrap();
        kiosk.insert(msg(2, 10, 0.1)).unwrap();
        kiosk.insert(msg(3, 10, 0.5)).unwrap();
        let mut ids = 0;
        let s = open_sessions(pair(NodeId::kiosk(1)), Lane::Pickup, &kiosk, Some(100), &BTreeSet::new(), &BTreeSet::new(), &mut ids);
        let order: Vec<u64> = s.iter().map(|s| s.message_id.0).collect();
        assert_eq!(order, vec![1, 3, 2]);
        assert_eq!(s[0].from, NodeId::kiosk(1));
        assert_eq!(s[0].to, NodeId::map(1));
    }

    #[test]
    fn full_receiver_leaves_message_with_sender() {
        let mut kiosk = MessageBuffer::new(NodeId::kiosk(1), 1_000);
        kiosk.insert(msg(1, 50, 0.9)).unwrap();
        kiosk.insert(msg(2, 10, 0.1)).unwrap();
        let mut ids = 0;
        let s = open_sessions(pair(NodeId::kiosk(1)), Lane::Pickup, &kiosk, Some(20), &BTreeSet::new(), &BTreeSet::new(), &mut ids);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].message_id, MessageId(2));
        assert!(kiosk.contains(MessageId(1)));
    }

    #[test]
    fn response_dropped_at_its_kiosk_only() {
        let mut map = MessageBuffer::new(NodeId::map(1), 1_000_000);
        let resp = Message::new(
            MessageId(7),
            MessageKind::MedicalResponse,
            200,
            NodeId::hospital(1),
            Role::Kiosk,
            SimTime::ZERO,
            0.3,
        )
        .with_destination(NodeId::kiosk(2));
        map.insert(resp).unwrap();
        map.insert(msg(1, 10, 0.0)).unwrap();
        let mut ids = 0;
        let none = BTreeSet::new();
        let unlocked = BTreeSet::new();
        let at2 = open_sessions(pair(NodeId::kiosk(2)), Lane::Dropoff, &map, None, &none, &unlocked, &mut ids);
        assert_eq!(at2.len(), 1);
        assert_eq!(at2[0].message_id, MessageId(7));
        assert_eq!(at2[0].to, NodeId::kiosk(2));
        assert!(open_sessions(pair(NodeId::kiosk(1)), Lane::Dropoff, &map, None, &none, &unlocked, &mut ids).is_empty());
        let at_dpc = open_sessions(pair(NodeId::dpc(1)), Lane::Dropoff, &map, Some(1_000_000), &none, &unlocked, &mut ids);
        assert_eq!(at_dpc.len(), 1);
        assert_eq!(at_dpc[0].message_id, MessageId(1));
    }

    #[test]
    fn dpc_loads_downlink_for_route_kiosks() {
        let mut outbound = MessageBuffer::new(NodeId::dpc(1), 1_000_000);
        for (id, k) in [(1, 1), (2, 3)] {
            let m = Message::new(
                MessageId(id),
                MessageKind::LearningContent,
                100,
                NodeId::dpc(1),
                Role::Kiosk,
                SimTime::ZERO,
                0.0,
            )
            .with_destination(NodeId::kiosk(k));
            outbound.insert(m).unwrap();
        }
        let route: BTreeSet<_> = [NodeId::kiosk(1), NodeId::kiosk(2)].into();
        let mut ids = 0;
        let s = open_sessions(pair(NodeId::dpc(1)), Lane::Pickup, &outbound, Some(1_000), &route, &BTreeSet::new(), &mut ids);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].message_id, MessageId(1));
    }

    proptest! {
        /// However a transfer is chopped into steps and windows, exactly
        /// `size` bits are moved in total.
        #[test]
        fn resume_moves_exactly_size(
            size in 1u64..50_000_000,
            rate in 1e3f64..6e7,
            windows in prop::collection::vec(0.0f64..3.0, 1..12),
        ) {
            let m = msg(1, size, 0.0);
            let mut sent = 0u64;
            let mut total = 0u64;
            for (id, w) in windows.iter().chain(std::iter::once(&1e9)).enumerate() {
                let mut s = TransferSession::resumed(id as u64, NodeId::kiosk(1), NodeId::map(1), &m, sent);
                let mut left = *w;
                while left > 0.0 && !s.is_complete() {
                    let dt = if *w > 100.0 { left } else { left.min(0.37) };
                    total += transfer_step(&mut s, dt, rate);
                    left -= dt;
                }
                prop_assert!(s.bits_sent <= size);
                sent = s.bits_sent;
                if s.is_complete() {
                    break;
                }
                s.suspend();
            }
            prop_assert_eq!(sent, size);
            prop_assert_eq!(total, size);
        }
    }
}
