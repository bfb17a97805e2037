//! Scenario validation. Findings are the return value; callers refuse to run
//! a scenario that has any `Error` finding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{MessageKind, NodeId, Role};
use crate::processing::dcc::Rule;
use crate::scenario::{LinkConfig, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    /// `m <= n <= i` between DPC, kiosk and MAP counts, or an empty node list.
    CountConstraint,
    DanglingReference,
    UnknownKey,
    OutOfRange,
    EmptyRoute,
    RouteWithoutDpc,
    ZeroCycleRoute,
    UnservedKiosk,
    InvalidWorkload,
    InvalidRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}", self.message)
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

#[derive(Default)]
struct Findings(Vec<Finding>);

impl Findings {
    fn push(&mut self, severity: Severity, code: FindingCode, message: String) {
        self.0.push(Finding {
            severity,
            code,
            message,
        });
    }

    fn error(&mut self, code: FindingCode, message: String) {
        self.push(Severity::Error, code, message);
    }

    fn warn(&mut self, code: FindingCode, message: String) {
        self.push(Severity::Warning, code, message);
    }

    fn check(&mut self, ok: bool, code: FindingCode, message: impl FnOnce() -> String) {
        if !ok {
            self.error(code, message());
        }
    }

    fn unit(&mut self, value: f64, what: impl fmt::Display) {
        self.check((0.0..=1.0).contains(&value), FindingCode::OutOfRange, || {
            format!("{what} = {value} must lie in [0, 1]")
        });
    }

    fn non_negative(&mut self, value: f64, what: impl fmt::Display) {
        self.check(value.is_finite() && value >= 0.0, FindingCode::OutOfRange, || {
            format!("{what} = {value} must be finite and >= 0")
        });
    }

    fn positive(&mut self, value: f64, what: impl fmt::Display) {
        self.check(value.is_finite() && value > 0.0, FindingCode::OutOfRange, || {
            format!("{what} = {value} must be finite and > 0")
        });
    }

    fn reference(&mut self, id: NodeId, allowed: &[Role], cfg: &ScenarioConfig, ctx: &str) {
        if !allowed.contains(&id.role) {
            let roles: Vec<_> = allowed.iter().map(|r| r.as_str()).collect();
            self.error(
                FindingCode::DanglingReference,
                format!("{ctx}: {id} must reference a {}", roles.join(" or ")),
            );
        } else if !resolves(cfg, id) {
            self.error(
                FindingCode::DanglingReference,
                format!("{ctx}: dangling reference to {id}"),
            );
        }
    }
}

fn resolves(cfg: &ScenarioConfig, id: NodeId) -> bool {
    let Some(slot) = id.slot() else {
        return false;
    };
    match id.role {
        Role::Kiosk => slot < cfg.kiosks.len(),
        Role::Map => slot < cfg.maps.len(),
        Role::Dpc => slot < cfg.dpcs.len(),
        Role::Hospital => slot < cfg.hospitals.len(),
        Role::Cdc | Role::Dcc => slot == 0,
        Role::SensorField => false,
    }
}

/// Checks a parsed scenario. Empty result iff the scenario is runnable
/// without caveats; only `Error` findings make it unrunnable.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Vec<Finding> {
    let mut f = Findings::default();

    for key in &cfg.unknown_keys {
        f.error(FindingCode::UnknownKey, format!("unknown key `{key}`"));
    }

    check_counts(cfg, &mut f);

    f.unit(cfg.gravity_threshold, "gravity_threshold");
    check_link(&cfg.radio_link(), "radio", &mut f);
    f.non_negative(cfg.radio.direct_latency_s, "radio.direct_latency_s");

    for (i, k) in cfg.kiosks.iter().enumerate() {
        let id = NodeId::from_slot(Role::Kiosk, i);
        f.check(k.pos.is_finite(), FindingCode::OutOfRange, || {
            format!("{id}: position must be finite")
        });
        f.check(k.buffer_bits > 0, FindingCode::OutOfRange, || {
            format!("{id}: buffer_bits must be > 0")
        });
        for (j, s) in k.sensor_fields.iter().enumerate() {
            let ctx = format!("{id} sensor_fields[{j}]");
            f.check(!s.metric.is_empty(), FindingCode::InvalidWorkload, || {
                format!("{ctx}: metric name is empty")
            });
            f.positive(s.period_s, format!("{ctx}.period_s"));
            f.non_negative(s.start_s, format!("{ctx}.start_s"));
            f.non_negative(s.noise_stddev, format!("{ctx}.noise_stddev"));
            f.check(
                s.base.is_finite() && s.diurnal_amplitude.is_finite(),
                FindingCode::OutOfRange,
                || format!("{ctx}: base and diurnal_amplitude must be finite"),
            );
            f.check(s.size_bits > 0, FindingCode::OutOfRange, || {
                format!("{ctx}.size_bits must be > 0")
            });
            check_ramp(&s.gravity_ramp, &ctx, &mut f);
        }
    }

    for (i, m) in cfg.maps.iter().enumerate() {
        let id = NodeId::from_slot(Role::Map, i);
        check_route(cfg, i, &mut f);
        f.check(m.buffer_bits > 0, FindingCode::OutOfRange, || {
            format!("{id}: buffer_bits must be > 0")
        });
        if let Some(link) = &m.radio {
            check_link(link, &format!("{id}.radio"), &mut f);
        }
    }

    for (i, d) in cfg.dpcs.iter().enumerate() {
        let id = NodeId::from_slot(Role::Dpc, i);
        f.check(d.pos.is_finite(), FindingCode::OutOfRange, || {
            format!("{id}: position must be finite")
        });
        f.unit(d.confidence_threshold, format!("{id}.confidence_threshold"));
        f.check(d.inbox_bits > 0, FindingCode::OutOfRange, || {
            format!("{id}: inbox_bits must be > 0")
        });
        f.non_negative(d.service_s, format!("{id}.service_s"));
        f.non_negative(d.peer_sync_s, format!("{id}.peer_sync_s"));
        f.non_negative(d.link_delay_s, format!("{id}.link_delay_s"));
        f.non_negative(d.agreement_tolerance, format!("{id}.agreement_tolerance"));
        f.non_negative(d.peer_window_s, format!("{id}.peer_window_s"));
        for peer in &d.peer_links {
            f.reference(*peer, &[Role::Dpc], cfg, &format!("{id} peer_links"));
            f.check(*peer != id, FindingCode::DanglingReference, || {
                format!("{id}: peer link to itself")
            });
        }
    }

    f.non_negative(cfg.cdc.backhaul_delay_s, "cdc.backhaul_delay_s");
    f.positive(cfg.cdc.history_window_s, "cdc.history_window_s");
    for (i, rule) in cfg.dcc.rule_table().iter().enumerate() {
        check_rule(rule, i, &mut f);
    }

    for (i, h) in cfg.hospitals.iter().enumerate() {
        let id = NodeId::from_slot(Role::Hospital, i);
        f.reference(h.dpc, &[Role::Dpc], cfg, &format!("{id}"));
    }

    check_workloads(cfg, &mut f);
    check_service(cfg, &mut f);

    f.0
}

impl ScenarioConfig {
    fn radio_link(&self) -> LinkConfig {
        LinkConfig {
            standard: self.radio.standard,
            range_km: self.radio.range_km,
            efficiency: self.radio.efficiency,
        }
    }
}

fn check_counts(cfg: &ScenarioConfig, f: &mut Findings) {
    let n = cfg.kiosks.len();
    let i = cfg.maps.len();
    let m = cfg.dpcs.len();
    for (count, what) in [(n, "kiosk"), (i, "MAP"), (m, "DPC")] {
        if count == 0 {
            f.error(
                FindingCode::CountConstraint,
                format!("scenario needs at least one {what}"),
            );
        }
    }
    let severity = if cfg.strict_counts {
        Severity::Error
    } else {
        Severity::Warning
    };
    if i < n {
        f.push(
            severity,
            FindingCode::CountConstraint,
            format!("MAP count i = {i} is below kiosk count n = {n}; requires i >= n"),
        );
    }
    if n < m {
        f.push(
            severity,
            FindingCode::CountConstraint,
            format!("DPC count m = {m} exceeds kiosk count n = {n}; requires m <= n"),
        );
    }
}

fn check_link(link: &LinkConfig, ctx: &str, f: &mut Findings) {
    let p = link.profile();
    f.positive(p.range_km, format!("{ctx}.range_km"));
    f.check(
        p.efficiency > 0.0 && p.efficiency <= 1.0,
        FindingCode::OutOfRange,
        || format!("{ctx}.efficiency = {} must lie in (0, 1]", p.efficiency),
    );
}

fn check_ramp(ramp: &[(f64, f64)], ctx: &str, f: &mut Findings) {
    if ramp.is_empty() {
        f.error(
            FindingCode::InvalidWorkload,
            format!("{ctx}: gravity_ramp needs at least one knot"),
        );
        return;
    }
    for (value, gravity) in ramp {
        f.check(value.is_finite(), FindingCode::InvalidWorkload, || {
            format!("{ctx}: gravity_ramp value {value} is not finite")
        });
        f.unit(*gravity, format!("{ctx} gravity_ramp gravity"));
    }
    f.check(
        ramp.windows(2).all(|w| w[0].0 < w[1].0),
        FindingCode::InvalidWorkload,
        || format!("{ctx}: gravity_ramp knots must be strictly ascending in value"),
    );
}

fn check_route(cfg: &ScenarioConfig, slot: usize, f: &mut Findings) {
    let id = NodeId::from_slot(Role::Map, slot);
    let route = &cfg.maps[slot].route;
    f.positive(route.speed_kmh, format!("{id}.route.speed_kmh"));
    if route.waypoints.is_empty() {
        f.error(FindingCode::EmptyRoute, format!("{id}: route has no waypoints"));
        return;
    }
    let mut all_resolve = true;
    for wp in &route.waypoints {
        let before = f.0.len();
        f.reference(wp.node, &[Role::Kiosk, Role::Dpc], cfg, &format!("{id} route"));
        all_resolve &= f.0.len() == before;
        f.non_negative(wp.dwell_s, format!("{id} dwell at {}", wp.node));
    }
    if !route.waypoints.iter().any(|w| w.node.role == Role::Dpc) {
        f.warn(
            FindingCode::RouteWithoutDpc,
            format!("{id}: route never visits a DPC; collected data will not be delivered"),
        );
    }
    if route.cyclic && all_resolve {
        let dwell: f64 = route.waypoints.iter().map(|w| w.dwell_s.max(0.0)).sum();
        let pts: Vec<_> = route
            .waypoints
            .iter()
            .filter_map(|w| cfg.fixed_pos(w.node))
            .collect();
        let length: f64 = (0..pts.len())
            .map(|k| crate::model::distance(pts[k], pts[(k + 1) % pts.len()]))
            .sum();
        f.check(dwell + length > 0.0, FindingCode::ZeroCycleRoute, || {
            format!("{id}: cyclic route takes zero time per cycle")
        });
    }
}

fn check_rule(rule: &Rule, idx: usize, f: &mut Findings) {
    if let Err(e) = rule.selector() {
        f.error(FindingCode::InvalidRule, format!("dcc rule {idx}: {e}"));
    }
    f.check(
        rule.window_s.is_finite() && rule.window_s > 0.0,
        FindingCode::InvalidRule,
        || format!("dcc rule {idx}: window_s must be > 0"),
    );
    f.check(rule.value.is_finite(), FindingCode::InvalidRule, || {
        format!("dcc rule {idx}: threshold must be finite")
    });
}

fn check_kiosk_list(cfg: &ScenarioConfig, list: &Option<Vec<NodeId>>, ctx: &str, f: &mut Findings) {
    for k in list.iter().flatten() {
        f.reference(*k, &[Role::Kiosk], cfg, ctx);
    }
}

fn check_workloads(cfg: &ScenarioConfig, f: &mut Findings) {
    let w = &cfg.workloads;
    if let Some(m) = &w.manual {
        f.non_negative(m.rate_per_hour, "workloads.manual.rate_per_hour");
        f.check(m.size_bits > 0, FindingCode::InvalidWorkload, || {
            "workloads.manual.size_bits must be > 0".into()
        });
        f.unit(m.gravity, "workloads.manual.gravity");
        f.non_negative(m.value_stddev, "workloads.manual.value_stddev");
        check_kiosk_list(cfg, &m.kiosks, "workloads.manual.kiosks", f);
    }
    if let Some(m) = &w.medical {
        f.non_negative(m.rate_per_hour, "workloads.medical.rate_per_hour");
        f.check(
            m.size_bits > 0 && m.response_size_bits > 0,
            FindingCode::InvalidWorkload,
            || "workloads.medical sizes must be > 0".into(),
        );
        f.reference(m.hospital, &[Role::Hospital], cfg, "workloads.medical.hospital");
        f.non_negative(m.service_s, "workloads.medical.service_s");
        f.unit(m.gravity, "workloads.medical.gravity");
        f.unit(m.severe_fraction, "workloads.medical.severe_fraction");
        f.unit(m.severe_gravity, "workloads.medical.severe_gravity");
        check_kiosk_list(cfg, &m.kiosks, "workloads.medical.kiosks", f);
    }
    if let Some(c) = &w.commerce {
        f.non_negative(c.rate_per_hour, "workloads.commerce.rate_per_hour");
        f.check(c.size_bits > 0, FindingCode::InvalidWorkload, || {
            "workloads.commerce.size_bits must be > 0".into()
        });
        check_kiosk_list(cfg, &c.kiosks, "workloads.commerce.kiosks", f);
    }
    for (i, l) in w.learning.iter().enumerate() {
        let ctx = format!("workloads.learning[{i}]");
        f.reference(l.dpc, &[Role::Dpc], cfg, &ctx);
        for t in &l.targets {
            f.reference(*t, &[Role::Kiosk], cfg, &ctx);
        }
        f.check(l.size_bits > 0, FindingCode::InvalidWorkload, || {
            format!("{ctx}.size_bits must be > 0")
        });
        f.non_negative(l.start_s, format!("{ctx}.start_s"));
        if let Some(p) = l.period_s {
            f.positive(p, format!("{ctx}.period_s"));
        }
    }
    for (i, s) in w.scripted.iter().enumerate() {
        let ctx = format!("workloads.scripted[{i}]");
        f.reference(s.kiosk, &[Role::Kiosk], cfg, &ctx);
        f.non_negative(s.at_s, format!("{ctx}.at_s"));
        f.unit(s.gravity, format!("{ctx}.gravity"));
        f.check(s.resolved_size_bits() > 0, FindingCode::InvalidWorkload, || {
            format!("{ctx}.size_bits must be > 0")
        });
        match s.kind {
            MessageKind::EmergencyAlert => f.error(
                FindingCode::InvalidWorkload,
                format!("{ctx}: emergency alerts are raised by the bypass check, not by workloads"),
            ),
            MessageKind::MedicalResponse | MessageKind::LearningContent => f.error(
                FindingCode::InvalidWorkload,
                format!("{ctx}: {} cannot originate at a kiosk", s.kind),
            ),
            MessageKind::MedicalRequest => {
                let hospital = s
                    .hospital
                    .or(w.medical.as_ref().map(|m| m.hospital))
                    .unwrap_or(NodeId::hospital(1));
                f.reference(hospital, &[Role::Hospital], cfg, &ctx);
            }
            _ => {}
        }
    }
}

/// Warns about kiosks no MAP ever visits.
fn check_service(cfg: &ScenarioConfig, f: &mut Findings) {
    for i in 0..cfg.kiosks.len() {
        let id = NodeId::from_slot(Role::Kiosk, i);
        let served = cfg
            .maps
            .iter()
            .any(|m| m.route.waypoints.iter().any(|w| w.node == id));
        if !served {
            f.warn(
                FindingCode::UnservedKiosk,
                format!("{id} is not on any MAP route"),
            );
        }
    }
}
