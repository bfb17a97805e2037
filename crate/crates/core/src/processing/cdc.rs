//! Central Data Center: per-area history of accepted measurements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{MessageId, NodeId, SimTime};
use crate::processing::dpc::{DpcRecord, RecordStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// When the record reached the CDC; the series is ordered by this.
    pub merged_at: SimTime,
    /// When the measurement was taken.
    pub observed_at: SimTime,
    pub value: f64,
    pub flagged: bool,
    pub message: MessageId,
}

/// Append-only, time-ordered measurement series keyed by (area, metric).
#[derive(Debug, Clone, Default)]
pub struct AreaHistory {
    series: BTreeMap<(NodeId, String), Vec<Sample>>,
}

impl AreaHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn series(&self, area: NodeId, metric: &str) -> &[Sample] {
        self.series
            .get(&(area, metric.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn areas(&self) -> impl Iterator<Item = (&NodeId, &str, &[Sample])> {
        self.series
            .iter()
            .map(|((area, metric), s)| (area, metric.as_str(), s.as_slice()))
    }

    fn append(&mut self, area: NodeId, metric: &str, sample: Sample) {
        let series = self.series.entry((area, metric.to_string())).or_default();
        if let Some(last) = series.last() {
            assert!(
                sample.merged_at >= last.merged_at,
                "area history must stay time-ordered"
            );
        }
        series.push(sample);
    }

    /// Snapshot of the series ending at `now`, keeping samples from the last
    /// `horizon_s` seconds.
    pub fn report(
        &self,
        area: NodeId,
        metric: &str,
        now: SimTime,
        window_s: f64,
        horizon_s: f64,
    ) -> AreaReport {
        let horizon = horizon_s.max(window_s);
        let samples: Vec<Sample> = self
            .series(area, metric)
            .iter()
            .filter(|s| now - s.merged_at <= horizon)
            .copied()
            .collect();
        let mut report = AreaReport {
            area,
            metric: metric.to_string(),
            at: now,
            window_s,
            latest: None,
            mean: None,
            count: 0,
            trend: 0,
            samples,
        };
        report.latest = report.latest_over(window_s);
        report.mean = report.mean_over(window_s);
        report.count = report.count_over(window_s);
        report.trend = report.trend_over(window_s);
        report
    }
}

/// Summary of one area's metric after a merge. Flagged samples are kept in
/// `samples` but excluded from every aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub area: NodeId,
    pub metric: String,
    pub at: SimTime,
    pub window_s: f64,
    pub latest: Option<f64>,
    pub mean: Option<f64>,
    pub count: usize,
    /// Sign of the least-squares slope of value against observation time.
    pub trend: i8,
    pub samples: Vec<Sample>,
}

impl AreaReport {
    pub fn accepted_in(&self, window_s: f64) -> impl Iterator<Item = &Sample> {
        let at = self.at;
        self.samples
            .iter()
            .filter(move |s| !s.flagged && at - s.merged_at <= window_s)
    }

    pub fn latest_over(&self, window_s: f64) -> Option<f64> {
        self.accepted_in(window_s).last().map(|s| s.value)
    }

    pub fn count_over(&self, window_s: f64) -> usize {
        self.accepted_in(window_s).count()
    }

    pub fn sum_over(&self, window_s: f64) -> Option<f64> {
        let mut it = self.accepted_in(window_s).peekable();
        it.peek()?;
        Some(it.map(|s| s.value).sum())
    }

    pub fn mean_over(&self, window_s: f64) -> Option<f64> {
        let n = self.count_over(window_s);
        self.sum_over(window_s).map(|s| s / n as f64)
    }

    pub fn trend_over(&self, window_s: f64) -> i8 {
        let pts: Vec<(f64, f64)> = self
            .accepted_in(window_s)
            .map(|s| (s.observed_at.secs(), s.value))
            .collect();
        if pts.len() < 2 {
            return 0;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return 0;
        }
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxy > 0.0 {
            1
        } else if sxy < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn triggering(&self, window_s: f64) -> Vec<MessageId> {
        self.accepted_in(window_s).map(|s| s.message).collect()
    }
}

/// Appends a forwarded record to its area's series and reports on it.
///
/// Returns `None` for records without a measurement (orders, plain records)
/// or that have not been forwarded.
pub fn cdc_merge(
    history: &mut AreaHistory,
    record: &DpcRecord,
    now: SimTime,
    window_s: f64,
    horizon_s: f64,
) -> Option<AreaReport> {
    if record.status != RecordStatus::Forwarded {
        return None;
    }
    let msg = &record.message;
    let (metric, value) = (msg.metric.as_deref()?, msg.payload_value?);
    history.append(
        msg.origin,
        metric,
        Sample {
            merged_at: now,
            observed_at: msg.created_at,
            value,
            flagged: record.low_confidence,
            message: msg.id,
        },
    );
    Some(history.report(msg.origin, metric, now, window_s, horizon_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Message, MessageKind, Role};
    use crate::processing::dpc::{dpc_process, forward_to_cdc};

    fn forwarded(id: u64, t: f64, value: f64, flagged: bool) -> DpcRecord {
        let msg = Message::new(
            MessageId(id),
            MessageKind::SensorBatch,
            1,
            NodeId::kiosk(1),
            Role::Dpc,
            SimTime::from_secs(t),
            0.0,
        )
        .with_measurement("water_level_m", value);
        let mut rec = DpcRecord::new(msg, SimTime::from_secs(t));
        if flagged {
            dpc_process(&mut rec, 0.0, 1.0, 0).unwrap();
        } else {
            dpc_process(&mut rec, 1.0, 0.0, 0).unwrap();
        }
        forward_to_cdc(&mut rec, SimTime::from_secs(t), 0.0).unwrap();
        rec
    }

    #[test]
    fn first_record() {
        let mut h = AreaHistory::new();
        let r = cdc_merge(&mut h, &forwarded(1, 10.0, 7.5, false), SimTime::from_secs(10.0), 3600.0, 3600.0)
            .unwrap();
        assert_eq!(r.mean, Some(7.5));
        assert_eq!(r.latest, Some(7.5));
        assert_eq!(r.trend, 0);
        assert_eq!(r.count, 1);
    }

    #[test]
    fn rising_series_has_positive_trend() {
        let mut h = AreaHistory::new();
        let mut last = None;
        for (i, v) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            let t = 100.0 * (i + 1) as f64;
            last = cdc_merge(&mut h, &forwarded(i as u64, t, v, false), SimTime::from_secs(t), 3600.0, 3600.0);
        }
        // Least squares over (100,1) (200,2) (300,3) (400,4): slope +0.01.
        let r = last.unwrap();
        assert_eq!(r.trend, 1);
        assert_eq!(r.mean, Some(2.5));
    }

    #[test]
    fn flagged_excluded_from_mean() {
        let mut h = AreaHistory::new();
        cdc_merge(&mut h, &forwarded(1, 1.0, 4.0, false), SimTime::from_secs(1.0), 3600.0, 3600.0);
        cdc_merge(&mut h, &forwarded(2, 2.0, 6.0, false), SimTime::from_secs(2.0), 3600.0, 3600.0);
        let r = cdc_merge(&mut h, &forwarded(3, 3.0, 100.0, true), SimTime::from_secs(3.0), 3600.0, 3600.0)
            .unwrap();
        assert_eq!(h.series(NodeId::kiosk(1), "water_level_m").len(), 3);
        assert!(h.series(NodeId::kiosk(1), "water_level_m")[2].flagged);
        assert_eq!(r.mean, Some(5.0));
        assert_eq!(r.count, 2);
    }

    #[test]
    fn window_drops_old_samples() {
        let mut h = AreaHistory::new();
        cdc_merge(&mut h, &forwarded(1, 0.0, 100.0, false), SimTime::from_secs(0.0), 60.0, 60.0);
        let r = cdc_merge(&mut h, &forwarded(2, 100.0, 2.0, false), SimTime::from_secs(100.0), 60.0, 60.0)
            .unwrap();
        assert_eq!(r.mean, Some(2.0));
    }

    #[test]
    fn unforwarded_or_unmeasured_records_are_not_merged() {
        let mut h = AreaHistory::new();
        let msg = Message::new(
            MessageId(1),
            MessageKind::CommerceOrder,
            1,
            NodeId::kiosk(1),
            Role::Dpc,
            SimTime::ZERO,
            0.0,
        );
        let mut rec = DpcRecord::new(msg, SimTime::ZERO);
        assert!(cdc_merge(&mut h, &rec, SimTime::ZERO, 1.0, 1.0).is_none());
        dpc_process(&mut rec, 1.0, 0.0, 0).unwrap();
        forward_to_cdc(&mut rec, SimTime::ZERO, 0.0).unwrap();
        assert!(cdc_merge(&mut h, &rec, SimTime::ZERO, 1.0, 1.0).is_none());
        assert_eq!(h.areas().count(), 0);
    }
}
