//! Domain entities shared across the simulator: time, geometry, node
//! identities and the message taxonomy.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;

/// Seconds since the start of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Panics on negative or non-finite input; simulation time never runs backwards
    /// past zero.
    pub fn from_secs(secs: f64) -> Self {
        assert!(secs.is_finite() && secs >= 0.0, "invalid sim time {secs}");
        SimTime(secs)
    }

    pub fn from_hours(hours: f64) -> Self {
        Self::from_secs(hours * 3600.0)
    }

    #[inline]
    pub fn secs(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: f64) -> SimTime {
        SimTime::from_secs(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;
    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}s", self.0)
    }
}

/// A point on the flat simulation plane, in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x_km: f64,
    pub y_km: f64,
}

impl GeoPoint {
    pub const fn new(x_km: f64, y_km: f64) -> Self {
        Self { x_km, y_km }
    }

    pub fn is_finite(&self) -> bool {
        self.x_km.is_finite() && self.y_km.is_finite()
    }

    /// Point a fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &GeoPoint, t: f64) -> GeoPoint {
        GeoPoint {
            x_km: self.x_km + (other.x_km - self.x_km) * t,
            y_km: self.y_km + (other.y_km - self.y_km) * t,
        }
    }
}

/// Euclidean distance in km.
pub fn distance(a: GeoPoint, b: GeoPoint) -> f64 {
    (a.x_km - b.x_km).hypot(a.y_km - b.y_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Kiosk,
    Map,
    Dpc,
    Cdc,
    Dcc,
    SensorField,
    Hospital,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Kiosk => "kiosk",
            Role::Map => "map",
            Role::Dpc => "dpc",
            Role::Cdc => "cdc",
            Role::Dcc => "dcc",
            Role::SensorField => "sensor_field",
            Role::Hospital => "hospital",
        }
    }
}

impl FromStr for Role {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "kiosk" => Role::Kiosk,
            "map" => Role::Map,
            "dpc" => Role::Dpc,
            "cdc" => Role::Cdc,
            "dcc" => Role::Dcc,
            "sensor_field" => Role::SensorField,
            "hospital" => Role::Hospital,
            other => return Err(ModelError::UnknownRole(other.to_string())),
        })
    }
}

/// Identity of a node. Indices are 1-based, so `kiosk:1` is the first kiosk
/// declared in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub role: Role,
    pub index: u16,
}

impl NodeId {
    pub const fn new(role: Role, index: u16) -> Self {
        Self { role, index }
    }

    pub const fn kiosk(index: u16) -> Self {
        Self::new(Role::Kiosk, index)
    }

    pub const fn map(index: u16) -> Self {
        Self::new(Role::Map, index)
    }

    pub const fn dpc(index: u16) -> Self {
        Self::new(Role::Dpc, index)
    }

    pub const fn hospital(index: u16) -> Self {
        Self::new(Role::Hospital, index)
    }

    pub const CDC: NodeId = NodeId::new(Role::Cdc, 1);
    pub const DCC: NodeId = NodeId::new(Role::Dcc, 1);

    /// Zero-based slot into the per-role node list, `None` for index 0.
    pub fn slot(&self) -> Option<usize> {
        (self.index as usize).checked_sub(1)
    }

    pub fn from_slot(role: Role, slot: usize) -> Self {
        Self::new(role, (slot + 1) as u16)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.role.as_str(), self.index)
    }
}

impl FromStr for NodeId {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (role, index) = s
            .split_once(':')
            .ok_or_else(|| ModelError::BadNodeId(s.to_string()))?;
        let role: Role = role.parse()?;
        let index: u16 = index
            .parse()
            .map_err(|_| ModelError::BadNodeId(s.to_string()))?;
        Ok(NodeId { role, index })
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    SensorBatch,
    ManualRecord,
    MedicalRequest,
    MedicalResponse,
    LearningContent,
    CommerceOrder,
    EmergencyAlert,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::SensorBatch,
        MessageKind::ManualRecord,
        MessageKind::MedicalRequest,
        MessageKind::MedicalResponse,
        MessageKind::LearningContent,
        MessageKind::CommerceOrder,
        MessageKind::EmergencyAlert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::SensorBatch => "sensor_batch",
            MessageKind::ManualRecord => "manual_record",
            MessageKind::MedicalRequest => "medical_request",
            MessageKind::MedicalResponse => "medical_response",
            MessageKind::LearningContent => "learning_content",
            MessageKind::CommerceOrder => "commerce_order",
            MessageKind::EmergencyAlert => "emergency_alert",
        }
    }

    /// Kinds that carry a measurement and are scored against peer DPCs.
    pub fn is_scored(self) -> bool {
        matches!(self, MessageKind::SensorBatch | MessageKind::ManualRecord)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Size of every emergency alert on the direct link.
pub const EMERGENCY_ALERT_BITS: u64 = 8_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u64);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A custody record: `node` took custody at `at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub node: NodeId,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub kind: MessageKind,
    pub size_bits: u64,
    pub origin: NodeId,
    pub final_role: Role,
    /// Concrete node for kiosk- and hospital-bound messages.
    pub destination: Option<NodeId>,
    pub created_at: SimTime,
    pub gravity: f64,
    hops: Vec<Hop>,
    pub metric: Option<String>,
    pub payload_value: Option<f64>,
    /// Request this message answers, for medical responses.
    pub in_reply_to: Option<MessageId>,
}

impl Message {
    pub fn new(
        id: MessageId,
        kind: MessageKind,
        size_bits: u64,
        origin: NodeId,
        final_role: Role,
        created_at: SimTime,
        gravity: f64,
    ) -> Self {
        debug_assert!((0.0..=1.0).contains(&gravity));
        Self {
            id,
            kind,
            size_bits,
            origin,
            final_role,
            destination: None,
            created_at,
            gravity,
            hops: vec![Hop {
                node: origin,
                at: created_at,
            }],
            metric: None,
            payload_value: None,
            in_reply_to: None,
        }
    }

    pub fn with_destination(mut self, dest: NodeId) -> Self {
        self.destination = Some(dest);
        self
    }

    pub fn with_measurement(mut self, metric: impl Into<String>, value: f64) -> Self {
        self.metric = Some(metric.into());
        self.payload_value = Some(value);
        self
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn current_holder(&self) -> NodeId {
        self.hops.last().expect("hops never empty").node
    }

    /// Appends a custody hop. Fails if `at` precedes the previous hop.
    pub fn push_hop(&mut self, node: NodeId, at: SimTime) -> Result<(), ModelError> {
        let last = self.hops.last().expect("hops never empty");
        if at < last.at {
            return Err(ModelError::HopOutOfOrder {
                message: self.id,
                last: last.at,
                next: at,
            });
        }
        self.hops.push(Hop { node, at });
        Ok(())
    }

    /// The incident this message belongs to; a response shares its request's.
    pub fn incident(&self) -> MessageId {
        self.in_reply_to.unwrap_or(self.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.0)), 0.0);
        assert_eq!(distance(GeoPoint::new(0.0, 0.0), GeoPoint::new(3.0, 4.0)), 5.0);
        // sqrt(3^2 + 4^2)
        assert_eq!(distance(GeoPoint::new(1.0, 1.0), GeoPoint::new(4.0, 5.0)), 5.0);
    }

    #[test]
    fn node_id_round_trip() {
        let id: NodeId = "kiosk:7".parse().unwrap();
        assert_eq!(id, NodeId::kiosk(7));
        assert_eq!(id.to_string(), "kiosk:7");
        assert!("kiosk".parse::<NodeId>().is_err());
        assert!("truck:1".parse::<NodeId>().is_err());
        assert_eq!(NodeId::kiosk(1).slot(), Some(0));
        assert_eq!(NodeId::kiosk(0).slot(), None);
    }

    #[test]
    fn hops_are_time_ordered() {
        let mut m = Message::new(
            MessageId(1),
            MessageKind::SensorBatch,
            10,
            NodeId::kiosk(1),
            Role::Dpc,
            SimTime::from_secs(5.0),
            0.0,
        );
        assert_eq!(m.hops()[0].node, NodeId::kiosk(1));
        m.push_hop(NodeId::map(1), SimTime::from_secs(5.0)).unwrap();
        assert!(m.push_hop(NodeId::dpc(1), SimTime::from_secs(4.0)).is_err());
        assert_eq!(m.hops().len(), 2);
        assert_eq!(m.current_holder(), NodeId::map(1));
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(x, y)| GeoPoint::new(x, y))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in point(), b in point(), c in point()) {
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert!(distance(a, a) == 0.0);
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        }
    }
}
