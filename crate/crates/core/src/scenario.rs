//! Scenario file schema.
//!
//! A scenario is a JSON document describing every node of the world, the
//! radio defaults and the workloads. Node references use `<role>:<index>`
//! with 1-based indices (`kiosk:1` is the first entry of `kiosks`). Keys the
//! schema does not know about are collected into [`ScenarioConfig::unknown_keys`]
//! and reported by validation rather than rejected by the parser.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::model::{GeoPoint, MessageKind, NodeId};
use crate::processing::dcc::{default_rule_table, Rule};
use crate::radio::{LinkProfile, RadioStandard, DEFAULT_EFFICIENCY};

pub const DEFAULT_BUFFER_BITS: u64 = 1_000_000_000;
pub const DEFAULT_DPC_INBOX_BITS: u64 = 10_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kiosks: Vec<KioskConfig>,
    pub maps: Vec<MapConfig>,
    pub dpcs: Vec<DpcConfig>,
    #[serde(default)]
    pub cdc: CdcConfig,
    #[serde(default)]
    pub dcc: DccConfig,
    #[serde(default)]
    pub hospitals: Vec<HospitalConfig>,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub workloads: WorkloadsConfig,
    #[serde(default = "defaults::gravity_threshold")]
    pub gravity_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::yes")]
    pub strict_counts: bool,
    /// Paths of keys present in the source document but not in the schema.
    #[serde(skip)]
    pub unknown_keys: Vec<String>,
}

impl ScenarioConfig {
    pub fn from_json_str(src: &str) -> Result<Self, ScenarioError> {
        let mut unknown = Vec::new();
        let mut de = serde_json::Deserializer::from_str(src);
        let mut cfg: ScenarioConfig =
            serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()))?;
        de.end()?;
        unknown.sort();
        cfg.unknown_keys = unknown;
        Ok(cfg)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, ScenarioError> {
        Self::from_json_str(&value.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let src = std::fs::read_to_string(path)?;
        Self::from_json_str(&src)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Radio profile used on every link of the given MAP.
    pub fn map_link_profile(&self, map_slot: usize) -> LinkProfile {
        match self.maps.get(map_slot).and_then(|m| m.radio.as_ref()) {
            Some(link) => link.profile(),
            None => self.radio.profile(),
        }
    }

    pub fn kiosk_pos(&self, id: NodeId) -> Option<GeoPoint> {
        id.slot().and_then(|s| self.kiosks.get(s)).map(|k| k.pos)
    }

    pub fn dpc_pos(&self, id: NodeId) -> Option<GeoPoint> {
        id.slot().and_then(|s| self.dpcs.get(s)).map(|d| d.pos)
    }

    /// Position of a kiosk or DPC; `None` for other roles or dangling ids.
    pub fn fixed_pos(&self, id: NodeId) -> Option<GeoPoint> {
        match id.role {
            crate::model::Role::Kiosk => self.kiosk_pos(id),
            crate::model::Role::Dpc => self.dpc_pos(id),
            _ => None,
        }
    }
}

mod defaults {
    pub fn yes() -> bool {
        true
    }
    pub fn gravity_threshold() -> f64 {
        0.8
    }
    pub fn buffer_bits() -> u64 {
        super::DEFAULT_BUFFER_BITS
    }
    pub fn dpc_inbox_bits() -> u64 {
        super::DEFAULT_DPC_INBOX_BITS
    }
    pub fn sensor_batch_bits() -> u64 {
        80_000
    }
    pub fn small_record_bits() -> u64 {
        40_000
    }
    pub fn medical_bits() -> u64 {
        200_000
    }
    pub fn learning_bits() -> u64 {
        400_000_000
    }
    pub fn flood_ramp() -> Vec<(f64, f64)> {
        vec![(8.0, 0.0), (10.0, 1.0)]
    }
    pub fn confidence_threshold() -> f64 {
        0.8
    }
    pub fn retry_limit() -> u32 {
        2
    }
    pub fn service_s() -> f64 {
        1.0
    }
    pub fn peer_sync_s() -> f64 {
        30.0
    }
    pub fn link_delay_s() -> f64 {
        30.0
    }
    pub fn agreement_tolerance() -> f64 {
        0.05
    }
    pub fn peer_window_s() -> f64 {
        3600.0
    }
    pub fn backhaul_delay_s() -> f64 {
        60.0
    }
    pub fn history_window_s() -> f64 {
        3600.0
    }
    pub fn direct_latency_s() -> f64 {
        120.0
    }
    pub fn manual_gravity() -> f64 {
        0.1
    }
    pub fn medical_gravity() -> f64 {
        0.3
    }
    pub fn severe_gravity() -> f64 {
        0.9
    }
    pub fn hospital_service_s() -> f64 {
        900.0
    }
    pub fn hospital() -> crate::model::NodeId {
        crate::model::NodeId::hospital(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KioskConfig {
    pub pos: GeoPoint,
    #[serde(default = "defaults::buffer_bits")]
    pub buffer_bits: u64,
    #[serde(default)]
    pub sensor_fields: Vec<SensorFieldConfig>,
}

/// Sensor network attached to a kiosk, reporting one metric periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFieldConfig {
    pub metric: String,
    pub base: f64,
    #[serde(default)]
    pub diurnal_amplitude: f64,
    #[serde(default)]
    pub noise_stddev: f64,
    pub period_s: f64,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default = "defaults::sensor_batch_bits")]
    pub size_bits: u64,
    /// Piecewise-linear `(value, gravity)` knots, ascending in value.
    #[serde(default = "defaults::flood_ramp")]
    pub gravity_ramp: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub route: RouteConfig,
    #[serde(default = "defaults::buffer_bits")]
    pub buffer_bits: u64,
    /// Overrides the scenario-wide radio for all links of this MAP.
    #[serde(default)]
    pub radio: Option<LinkConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteConfig {
    pub waypoints: Vec<WaypointConfig>,
    #[serde(default = "defaults::yes")]
    pub cyclic: bool,
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointConfig {
    pub node: NodeId,
    #[serde(default)]
    pub dwell_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpcConfig {
    pub pos: GeoPoint,
    #[serde(default = "defaults::confidence_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "defaults::retry_limit")]
    pub retry_limit: u32,
    #[serde(default)]
    pub peer_links: Vec<NodeId>,
    #[serde(default = "defaults::dpc_inbox_bits")]
    pub inbox_bits: u64,
    /// Per-record service time of the single FIFO processing server.
    #[serde(default = "defaults::service_s")]
    pub service_s: f64,
    /// Wait before peer values are re-requested for a failing record.
    #[serde(default = "defaults::peer_sync_s")]
    pub peer_sync_s: f64,
    /// Latency of the DPC-to-DPC network when relaying messages.
    #[serde(default = "defaults::link_delay_s")]
    pub link_delay_s: f64,
    /// Relative tolerance under which a peer value counts as agreeing.
    #[serde(default = "defaults::agreement_tolerance")]
    pub agreement_tolerance: f64,
    #[serde(default = "defaults::peer_window_s")]
    pub peer_window_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdcConfig {
    #[serde(default = "defaults::backhaul_delay_s")]
    pub backhaul_delay_s: f64,
    #[serde(default = "defaults::history_window_s")]
    pub history_window_s: f64,
}

impl Default for CdcConfig {
    fn default() -> Self {
        Self {
            backhaul_delay_s: defaults::backhaul_delay_s(),
            history_window_s: defaults::history_window_s(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DccConfig {
    /// Absent means the built-in table; an empty list disables decisions.
    #[serde(default)]
    pub rules: Option<Vec<Rule>>,
}

impl DccConfig {
    pub fn rule_table(&self) -> Vec<Rule> {
        self.rules.clone().unwrap_or_else(default_rule_table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalConfig {
    pub dpc: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    #[serde(default = "RadioConfig::default_standard")]
    pub standard: RadioStandard,
    #[serde(default)]
    pub range_km: Option<f64>,
    #[serde(default)]
    pub efficiency: Option<f64>,
    /// Latency of the long-range direct call used by emergency alerts.
    #[serde(default = "defaults::direct_latency_s")]
    pub direct_latency_s: f64,
}

impl RadioConfig {
    fn default_standard() -> RadioStandard {
        RadioStandard::Dot11B
    }

    pub fn profile(&self) -> LinkProfile {
        LinkConfig {
            standard: self.standard,
            range_km: self.range_km,
            efficiency: self.efficiency,
        }
        .profile()
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            standard: Self::default_standard(),
            range_km: None,
            efficiency: None,
            direct_latency_s: defaults::direct_latency_s(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub standard: RadioStandard,
    #[serde(default)]
    pub range_km: Option<f64>,
    #[serde(default)]
    pub efficiency: Option<f64>,
}

impl LinkConfig {
    pub fn profile(&self) -> LinkProfile {
        LinkProfile {
            standard: self.standard,
            range_km: self.range_km.unwrap_or(self.standard.default_range_km()),
            efficiency: self.efficiency.unwrap_or(DEFAULT_EFFICIENCY),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadsConfig {
    #[serde(default)]
    pub manual: Option<ManualWorkload>,
    #[serde(default)]
    pub medical: Option<MedicalWorkload>,
    #[serde(default)]
    pub commerce: Option<CommerceWorkload>,
    #[serde(default)]
    pub learning: Vec<LearningPushConfig>,
    #[serde(default)]
    pub scripted: Vec<ScriptedMessage>,
}

/// Manually entered kiosk records (demographic, health, agricultural data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualWorkload {
    pub rate_per_hour: f64,
    #[serde(default = "defaults::small_record_bits")]
    pub size_bits: u64,
    #[serde(default = "defaults::manual_gravity")]
    pub gravity: f64,
    /// When set, each record carries a value drawn from N(mean, stddev).
    #[serde(default)]
    pub metric: Option<String>,
    #[serde(default)]
    pub value_mean: f64,
    #[serde(default)]
    pub value_stddev: f64,
    /// Kiosks generating records; all kiosks when absent.
    #[serde(default)]
    pub kiosks: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedicalWorkload {
    pub rate_per_hour: f64,
    #[serde(default = "defaults::medical_bits")]
    pub size_bits: u64,
    #[serde(default = "defaults::medical_bits")]
    pub response_size_bits: u64,
    #[serde(default = "defaults::hospital")]
    pub hospital: NodeId,
    #[serde(default = "defaults::hospital_service_s")]
    pub service_s: f64,
    #[serde(default = "defaults::medical_gravity")]
    pub gravity: f64,
    /// Probability that a request is severe and carries `severe_gravity`.
    #[serde(default)]
    pub severe_fraction: f64,
    #[serde(default = "defaults::severe_gravity")]
    pub severe_gravity: f64,
    #[serde(default)]
    pub kiosks: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommerceWorkload {
    pub rate_per_hour: f64,
    #[serde(default = "defaults::small_record_bits")]
    pub size_bits: u64,
    #[serde(default)]
    pub kiosks: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPushConfig {
    pub dpc: NodeId,
    pub targets: Vec<NodeId>,
    #[serde(default = "defaults::learning_bits")]
    pub size_bits: u64,
    #[serde(default)]
    pub start_s: f64,
    /// Repeat interval; a single push when absent.
    #[serde(default)]
    pub period_s: Option<f64>,
}

/// A one-off message entered at a kiosk at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedMessage {
    pub at_s: f64,
    pub kiosk: NodeId,
    pub kind: MessageKind,
    pub gravity: f64,
    #[serde(default)]
    pub size_bits: Option<u64>,
    #[serde(default)]
    pub metric: Option<String>,
    #[serde(default)]
    pub value: Option<f64>,
    /// Target hospital for scripted medical requests.
    #[serde(default)]
    pub hospital: Option<NodeId>,
}

impl ScriptedMessage {
    pub fn resolved_size_bits(&self) -> u64 {
        self.size_bits.unwrap_or(match self.kind {
            MessageKind::SensorBatch => defaults::sensor_batch_bits(),
            MessageKind::MedicalRequest | MessageKind::MedicalResponse => defaults::medical_bits(),
            MessageKind::LearningContent => defaults::learning_bits(),
            _ => defaults::small_record_bits(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> serde_json::Value {
        json!({
            "kiosks": [{"pos": {"x_km": 0.0, "y_km": 0.0}}],
            "maps": [{"route": {"waypoints": [{"node": "kiosk:1", "dwell_s": 600}, {"node": "dpc:1"}], "speed_kmh": 20}}],
            "dpcs": [{"pos": {"x_km": 10.0, "y_km": 0.0}}]
        })
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_json_value(minimal()).unwrap();
        assert!(cfg.unknown_keys.is_empty());
        assert!(cfg.strict_counts);
        assert_eq!(cfg.gravity_threshold, 0.8);
        assert_eq!(cfg.kiosks[0].buffer_bits, DEFAULT_BUFFER_BITS);
        assert_eq!(cfg.dpcs[0].retry_limit, 2);
        assert_eq!(cfg.cdc.backhaul_delay_s, 60.0);
        assert_eq!(cfg.radio.direct_latency_s, 120.0);
        assert!(cfg.maps[0].route.cyclic);
        let p = cfg.map_link_profile(0);
        assert_eq!(p.standard, RadioStandard::Dot11B);
        assert_eq!(p.range_km, 0.10);
        assert_eq!(p.efficiency, 0.5);
        assert_eq!(cfg.dcc.rule_table().len(), 2);
    }

    #[test]
    fn unknown_keys_are_collected() {
        let mut v = minimal();
        v["colour"] = json!("blue");
        v["kiosks"][0]["name"] = json!("K1");
        let cfg = ScenarioConfig::from_json_value(v).unwrap();
        assert_eq!(cfg.unknown_keys, vec!["colour".to_string(), "kiosks.0.name".to_string()]);
    }

    #[test]
    fn radio_override_per_map() {
        let mut v = minimal();
        v["maps"][0]["radio"] = json!({"standard": "802.11a", "efficiency": 1.0});
        let cfg = ScenarioConfig::from_json_value(v).unwrap();
        let p = cfg.map_link_profile(0);
        assert_eq!(p.standard, RadioStandard::Dot11A);
        assert_eq!(p.range_km, 0.05);
        assert_eq!(p.efficiency, 1.0);
    }

    #[test]
    fn malformed_json_is_an_error() {
        assert!(ScenarioConfig::from_json_str("{\"kiosks\": ").is_err());
        assert!(ScenarioConfig::from_json_str("{\"kiosks\": [], \"maps\": [], \"dpcs\": [{\"pos\": 3}]}").is_err());
    }
}
