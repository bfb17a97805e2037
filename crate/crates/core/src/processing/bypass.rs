//! Emergency bypass: MAPs and DPCs call emergency services directly for
//! high-gravity data instead of waiting for the CDC/DCC path.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Message, MessageId, NodeId, Role, SimTime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergencyAlert {
    pub source: MessageId,
    pub gravity: f64,
    pub raised_at_node: NodeId,
    pub raised_at: SimTime,
    /// `raised_at` plus the direct-call latency.
    pub due_at: SimTime,
    pub delivered_at: Option<SimTime>,
}

/// Remembers which incidents already produced an alert.
#[derive(Debug, Clone, Default)]
pub struct AlertLedger {
    alerted: BTreeSet<MessageId>,
}

impl AlertLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_alert(&self, incident: MessageId) -> bool {
        self.alerted.contains(&incident)
    }

    pub fn len(&self) -> usize {
        self.alerted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alerted.is_empty()
    }
}

/// Called whenever a node takes custody of `message`. Raises at most one
/// alert per incident, and only from MAPs and DPCs.
pub fn emergency_bypass_check(
    ledger: &mut AlertLedger,
    message: &Message,
    threshold: f64,
    location: NodeId,
    now: SimTime,
    direct_latency_s: f64,
) -> Option<EmergencyAlert> {
    if !matches!(location.role, Role::Map | Role::Dpc) {
        return None;
    }
    if message.gravity < threshold || !ledger.alerted.insert(message.incident()) {
        return None;
    }
    Some(EmergencyAlert {
        source: message.id,
        gravity: message.gravity,
        raised_at_node: location,
        raised_at: now,
        due_at: now + direct_latency_s,
        delivered_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MessageKind;

    fn msg(id: u64, gravity: f64) -> Message {
        Message::new(
            MessageId(id),
            MessageKind::SensorBatch,
            1,
            NodeId::kiosk(1),
            Role::Dpc,
            SimTime::ZERO,
            gravity,
        )
    }

    #[test]
    fn threshold_boundary() {
        let mut l = AlertLedger::new();
        let t = SimTime::from_secs(10.0);
        let a = emergency_bypass_check(&mut l, &msg(1, 0.9), 0.8, NodeId::map(1), t, 120.0).unwrap();
        assert_eq!(a.due_at, SimTime::from_secs(130.0));
        assert!(emergency_bypass_check(&mut l, &msg(2, 0.79), 0.8, NodeId::map(1), t, 120.0).is_none());
        assert!(emergency_bypass_check(&mut l, &msg(3, 0.8), 0.8, NodeId::map(1), t, 120.0).is_some());
    }

    #[test]
    fn first_custody_point_wins() {
        let mut l = AlertLedger::new();
        let m = msg(1, 0.9);
        let first = emergency_bypass_check(&mut l, &m, 0.8, NodeId::map(2), SimTime::from_secs(5.0), 120.0);
        let second = emergency_bypass_check(&mut l, &m, 0.8, NodeId::dpc(1), SimTime::from_secs(50.0), 120.0);
        assert_eq!(first.unwrap().raised_at_node, NodeId::map(2));
        assert!(second.is_none());
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn kiosks_do_not_bypass() {
        let mut l = AlertLedger::new();
        assert!(emergency_bypass_check(&mut l, &msg(1, 1.0), 0.8, NodeId::kiosk(1), SimTime::ZERO, 120.0).is_none());
        assert!(!l.has_alert(MessageId(1)));
    }

    #[test]
    fn response_shares_request_incident() {
        let mut l = AlertLedger::new();
        let req = msg(1, 0.9);
        let mut resp = msg(2, 0.9);
        resp.in_reply_to = Some(MessageId(1));
        assert!(emergency_bypass_check(&mut l, &req, 0.8, NodeId::map(1), SimTime::ZERO, 1.0).is_some());
        assert!(emergency_bypass_check(&mut l, &resp, 0.8, NodeId::map(1), SimTime::ZERO, 1.0).is_none());
    }
}
