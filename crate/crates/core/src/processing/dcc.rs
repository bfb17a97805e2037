//! Decision and Command Center rule evaluation.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{MessageId, NodeId, SimTime};
use crate::processing::cdc::AreaReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "<")]
    Less,
}

impl Comparison {
    pub fn holds(self, observed: f64, threshold: f64) -> bool {
        match self {
            Comparison::Greater => observed > threshold,
            Comparison::Less => observed < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    FloodWarning,
    DispatchMedicalTeam,
    NoAction,
    Custom(String),
}

impl Action {
    pub fn label(&self) -> &str {
        match self {
            Action::FloodWarning => "flood_warning",
            Action::DispatchMedicalTeam => "dispatch_medical_team",
            Action::NoAction => "no_action",
            Action::Custom(s) => s,
        }
    }
}

impl From<&str> for Action {
    fn from(s: &str) -> Self {
        match s {
            "flood_warning" => Action::FloodWarning,
            "dispatch_medical_team" => Action::DispatchMedicalTeam,
            "no_action" => Action::NoAction,
            other => Action::Custom(other.to_string()),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Action::from(String::deserialize(d)?.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    Latest,
    Count,
    Sum,
    Trend,
}

/// One row of the rule table. `metric` is `<metric name>.<aggregate>`, e.g.
/// `water_level_m.mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub metric: String,
    pub op: Comparison,
    pub value: f64,
    pub window_s: f64,
    pub action: Action,
}

impl Rule {
    pub fn selector(&self) -> Result<(&str, Aggregate), String> {
        let (name, agg) = self
            .metric
            .rsplit_once('.')
            .ok_or_else(|| format!("metric `{}` lacks an `.aggregate` suffix", self.metric))?;
        let agg = match agg {
            "mean" => Aggregate::Mean,
            "latest" => Aggregate::Latest,
            "count" => Aggregate::Count,
            "sum" => Aggregate::Sum,
            "trend" => Aggregate::Trend,
            other => return Err(format!("unknown aggregate `{other}`")),
        };
        if name.is_empty() {
            return Err("empty metric name".into());
        }
        Ok((name, agg))
    }

    /// Observed aggregate if this rule applies to the report's metric.
    fn observe(&self, report: &AreaReport) -> Option<f64> {
        let (name, agg) = self.selector().ok()?;
        if name != report.metric {
            return None;
        }
        let w = self.window_s;
        match agg {
            Aggregate::Mean => report.mean_over(w),
            Aggregate::Latest => report.latest_over(w),
            Aggregate::Count => Some(report.count_over(w) as f64),
            Aggregate::Sum => report.sum_over(w),
            Aggregate::Trend => Some(report.trend_over(w) as f64),
        }
    }
}

pub const DEFAULT_FLOOD_LEVEL_M: f64 = 8.0;
pub const DEFAULT_OUTBREAK_REPORTS: f64 = 5.0;

/// Flood warning on high mean water level; medical team on a burst of
/// disease reports.
pub fn default_rule_table() -> Vec<Rule> {
    vec![
        Rule {
            metric: "water_level_m.mean".into(),
            op: Comparison::Greater,
            value: DEFAULT_FLOOD_LEVEL_M,
            window_s: 3600.0,
            action: Action::FloodWarning,
        },
        Rule {
            metric: "disease_report.count".into(),
            op: Comparison::Greater,
            value: DEFAULT_OUTBREAK_REPORTS,
            window_s: 86_400.0,
            action: Action::DispatchMedicalTeam,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub issued_at: SimTime,
    pub area: NodeId,
    pub action: Action,
    /// Rule metric that fired, empty for `NoAction`.
    pub metric: String,
    pub observed: Option<f64>,
    pub triggering: Vec<MessageId>,
}

/// First matching rule in table order wins; `NoAction` otherwise.
pub fn dcc_decide(report: &AreaReport, rules: &[Rule]) -> Decision {
    for rule in rules {
        let Some(observed) = rule.observe(report) else {
            continue;
        };
        if rule.op.holds(observed, rule.value) {
            return Decision {
                issued_at: report.at,
                area: report.area,
                action: rule.action.clone(),
                metric: rule.metric.clone(),
                observed: Some(observed),
                triggering: report.triggering(rule.window_s),
            };
        }
    }
    Decision {
        issued_at: report.at,
        area: report.area,
        action: Action::NoAction,
        metric: String::new(),
        observed: None,
        triggering: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processing::cdc::Sample;

    fn report(metric: &str, values: &[f64]) -> AreaReport {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample {
                merged_at: SimTime::from_secs(i as f64),
                observed_at: SimTime::from_secs(i as f64),
                value: v,
                flagged: false,
                message: MessageId(i as u64),
            })
            .collect();
        AreaReport {
            area: NodeId::kiosk(1),
            metric: metric.into(),
            at: SimTime::from_secs(values.len() as f64),
            window_s: 3600.0,
            latest: None,
            mean: None,
            count: 0,
            trend: 0,
            samples,
        }
    }

    #[test]
    fn flood_warning_fires() {
        let d = dcc_decide(&report("water_level_m", &[9.0, 9.0]), &default_rule_table());
        assert_eq!(d.action, Action::FloodWarning);
        assert_eq!(d.observed, Some(9.0));
        assert_eq!(d.triggering, vec![MessageId(0), MessageId(1)]);
    }

    #[test]
    fn below_thresholds_no_action() {
        let d = dcc_decide(&report("water_level_m", &[6.0, 7.0]), &default_rule_table());
        assert_eq!(d.action, Action::NoAction);
        let d = dcc_decide(&report("disease_report", &[1.0; 5]), &default_rule_table());
        assert_eq!(d.action, Action::NoAction);
        let d = dcc_decide(&report("disease_report", &[1.0; 6]), &default_rule_table());
        assert_eq!(d.action, Action::DispatchMedicalTeam);
    }

    #[test]
    fn first_rule_wins() {
        let mut rules = default_rule_table();
        rules.insert(
            0,
            Rule {
                metric: "water_level_m.latest".into(),
                op: Comparison::Greater,
                value: 5.0,
                window_s: 3600.0,
                action: Action::Custom("evacuate".into()),
            },
        );
        let d = dcc_decide(&report("water_level_m", &[9.0]), &rules);
        assert_eq!(d.action, Action::Custom("evacuate".into()));
    }

    #[test]
    fn empty_table_is_no_action() {
        let d = dcc_decide(&report("water_level_m", &[100.0]), &[]);
        assert_eq!(d.action, Action::NoAction);
    }

    #[test]
    fn rule_json_shape() {
        let rule: Rule = serde_json::from_str(
            r#"{"metric": "water_level_m.trend", "op": "<", "value": 0, "window_s": 600, "action": "drought_watch"}"#,
        )
        .unwrap();
        assert_eq!(rule.op, Comparison::Less);
        assert_eq!(rule.action, Action::Custom("drought_watch".into()));
        assert_eq!(rule.selector().unwrap(), ("water_level_m", Aggregate::Trend));
        let bad = Rule {
            metric: "water_level_m".into(),
            ..rule
        };
        assert!(bad.selector().is_err());
    }
}
