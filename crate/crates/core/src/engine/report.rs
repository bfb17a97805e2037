//! Run report: the JSON document written by `ruralmesh run`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{MessageId, MessageKind, NodeId};
use crate::processing::Decision;

/// Serializes `None` as the string `"n/a"`.
pub mod na {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Serialize, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => x.serialize(s),
            None => s.serialize_str("n/a"),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either<T> {
            Value(T),
            Text(String),
        }
        match Either::<T>::deserialize(d)? {
            Either::Value(v) => Ok(Some(v)),
            Either::Text(s) if s == "n/a" => Ok(None),
            Either::Text(s) => Err(serde::de::Error::custom(format!("expected a value or \"n/a\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub min_s: f64,
    pub mean_s: f64,
    /// Nearest-rank 95th percentile.
    pub p95_s: f64,
    pub max_s: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            count: n,
            min_s: sorted[0],
            mean_s: sorted.iter().sum::<f64>() / n as f64,
            p95_s: sorted[rank - 1],
            max_s: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub attempted: u64,
    pub delivered: u64,
    pub in_flight: u64,
    pub blocked: u64,
    #[serde(with = "na")]
    pub delivery_ratio: Option<f64>,
    #[serde(with = "na")]
    pub latency_s: Option<LatencyStats>,
}

/// Per-kind counters kept during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KindTally {
    pub attempted: u64,
    pub delivered: u64,
    pub blocked: u64,
    pub latencies: Vec<f64>,
}

impl KindTally {
    /// Fails when the conservation identity does not hold.
    pub fn stats(&self, in_flight: u64) -> Result<KindStats, String> {
        if self.attempted != self.delivered + in_flight + self.blocked {
            return Err(format!(
                "attempted {} != delivered {} + in flight {} + blocked {}",
                self.attempted, self.delivered, in_flight, self.blocked
            ));
        }
        Ok(KindStats {
            attempted: self.attempted,
            delivered: self.delivered,
            in_flight,
            blocked: self.blocked,
            delivery_ratio: (self.attempted > 0).then(|| self.delivered as f64 / self.attempted as f64),
            latency_s: LatencyStats::from_samples(&self.latencies),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripStats {
    pub requests: u64,
    pub completed: u64,
    pub incomplete: u64,
    #[serde(with = "na")]
    pub latency_s: Option<LatencyStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub source: MessageId,
    pub source_kind: MessageKind,
    pub gravity: f64,
    pub raised_at_node: NodeId,
    pub created_at_s: f64,
    pub raised_at_s: f64,
    pub due_at_s: f64,
    pub delivered_at_s: Option<f64>,
    /// When the same message reached the CDC through the normal pipeline.
    pub source_cdc_arrival_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferStats {
    pub contacts: u64,
    pub sessions_opened: u64,
    pub sessions_completed: u64,
    pub suspensions: u64,
    pub resumptions: u64,
    pub bits_transmitted: u64,
    /// Partial bits left behind when another pair carried the message.
    pub abandoned_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySample {
    pub t_s: f64,
    pub buffers_bits: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub seq: u64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub until_s: f64,
    pub events_executed: u64,
    pub messages: BTreeMap<String, KindStats>,
    pub medical_round_trips: RoundTripStats,
    pub buffer_peaks_bits: BTreeMap<String, u64>,
    pub alerts: Vec<AlertRecord>,
    #[serde(with = "na")]
    pub alert_latency_s: Option<LatencyStats>,
    pub dpc_retry_histogram: BTreeMap<u32, u64>,
    pub flagged_records: u64,
    pub decisions: Vec<Decision>,
    pub transfers: TransferStats,
    pub occupancy: Vec<OccupancySample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_log: Option<Vec<EventRecord>>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "n/a".to_string(),
    }
}

impl RunReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run length: {:.1} h ({} events)", self.until_s / 3600.0, self.events_executed);
        let _ = writeln!(
            out,
            "{:<18} {:>9} {:>9} {:>9} {:>7} {:>7} {:>12} {:>12}",
            "kind", "attempted", "delivered", "in_flight", "blocked", "ratio", "mean_lat_s", "p95_lat_s"
        );
        for (kind, s) in &self.messages {
            let _ = writeln!(
                out,
                "{:<18} {:>9} {:>9} {:>9} {:>7} {:>7} {:>12} {:>12}",
                kind,
                s.attempted,
                s.delivered,
                s.in_flight,
                s.blocked,
                fmt_opt(s.delivery_ratio),
                fmt_opt(s.latency_s.as_ref().map(|l| l.mean_s)),
                fmt_opt(s.latency_s.as_ref().map(|l| l.p95_s)),
            );
        }
        let rt = &self.medical_round_trips;
        let _ = writeln!(
            out,
            "medical round trips: {} requested, {} completed, mean {} s",
            rt.requests,
            rt.completed,
            fmt_opt(rt.latency_s.as_ref().map(|l| l.mean_s))
        );
        let delivered = self.alerts.iter().filter(|a| a.delivered_at_s.is_some()).count();
        let _ = writeln!(
            out,
            "emergency alerts: {} raised, {} delivered, mean latency {} s",
            self.alerts.len(),
            delivered,
            fmt_opt(self.alert_latency_s.as_ref().map(|l| l.mean_s))
        );
        let hist: Vec<String> = self
            .dpc_retry_histogram
            .iter()
            .map(|(r, n)| format!("{r}:{n}"))
            .collect();
        let _ = writeln!(out, "dpc retries: [{}], flagged {}", hist.join(" "), self.flagged_records);
        let _ = writeln!(out, "decisions: {}", self.decisions.len());
        for d in &self.decisions {
            let _ = writeln!(out, "  {:.1}s {} {} ({})", d.issued_at.secs(), d.area, d.action, d.metric);
        }
        let t = &self.transfers;
        let _ = writeln!(
            out,
            "transfers: {} contacts, {} sessions, {} suspended, {} resumed, {} bits",
            t.contacts, t.sessions_opened, t.suspensions, t.resumptions, t.bits_transmitted
        );
        let _ = writeln!(out, "buffer peaks (bits):");
        for (node, bits) in &self.buffer_peaks_bits {
            let _ = writeln!(out, "  {node:<16} {bits}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "kind,attempted,delivered,in_flight,blocked,delivery_ratio,latency_min_s,latency_mean_s,latency_p95_s,latency_max_s\n",
        );
        let num = |v: Option<f64>| v.map_or("n/a".to_string(), |x| x.to_string());
        for (kind, s) in &self.messages {
            let l = s.latency_s.as_ref();
            let _ = writeln!(
                out,
                "{kind},{},{},{},{},{},{},{},{},{}",
                s.attempted,
                s.delivered,
                s.in_flight,
                s.blocked,
                num(s.delivery_ratio),
                num(l.map(|l| l.min_s)),
                num(l.map(|l| l.mean_s)),
                num(l.map(|l| l.p95_s)),
                num(l.map(|l| l.max_s)),
            );
        }
        out
    }
}
