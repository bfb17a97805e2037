//! The discrete-event world: kiosks, ferries, DPCs, CDC and DCC driven by a
//! single `(time, seq)` ordered queue.
//!
//! Contact windows are solved analytically when a ferry starts a dwell or a
//! travel leg, so contact events land on exact geometric instants. Transfers
//! progress lazily: a site's sessions are settled whenever the number of
//! sessions sharing it changes, and a completion event is scheduled per
//! session. A per-site epoch invalidates completion events made stale by a
//! rate change.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use log::{debug, trace};

use crate::engine::queue::EventQueue;
use crate::engine::report::{
    AlertRecord, EventRecord, KindTally, LatencyStats, OccupancySample, RoundTripStats, RunReport,
    TransferStats,
};
use crate::error::SimError;
use crate::ferry::{
    eligible, phase_contact_window, transfer_step, ContactPair, FerryState, Lane, MessageBuffer,
    RouteGeometry, SessionState, TransferSession,
};
use crate::model::{Message, MessageId, MessageKind, NodeId, Role, SimTime};
use crate::processing::{
    cdc_merge, compute_confidence, dcc_decide, emergency_bypass_check, Action, AlertLedger,
    AreaHistory, AreaReport, Decision, DpcParams, DpcPipeline, DpcRecord, EmergencyAlert, Rule,
    Transition,
};
use crate::radio::{effective_rate, LinkProfile};
use crate::scenario::ScenarioConfig;
use crate::validate::{has_errors, validate_scenario};
use crate::workloads::{
    gen_commerce_order, gen_learning_push, gen_manual_record, gen_medical_request, medical_response,
    poisson_gap_s, scripted_message, Generator, GeneratorId, SensorFieldModel,
};

/// Contact edges closer than this to a phase boundary are treated as on it.
const TIME_EPS: f64 = 1e-9;
const DEFAULT_HOSPITAL_SERVICE_S: f64 = 900.0;
const DEFAULT_RESPONSE_BITS: u64 = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub until: SimTime,
    pub event_log: bool,
    /// Interval of occupancy samples and periodic custody audits.
    pub sample_interval_s: f64,
    /// Audit custody after every event instead of at each sample.
    pub audit_every_event: bool,
}

impl RunOptions {
    pub fn until(until: SimTime) -> Self {
        Self {
            until,
            event_log: false,
            sample_interval_s: 3600.0,
            audit_every_event: false,
        }
    }

    pub fn with_event_log(mut self, on: bool) -> Self {
        self.event_log = on;
        self
    }
}

#[derive(Debug, Clone)]
enum Event {
    WorkloadFire(usize),
    FerryMove(usize),
    ContactBegin { map: usize, site: NodeId },
    ContactEnd { map: usize, site: NodeId },
    TransferProgress { site: NodeId, epoch: u64, session: u64 },
    DpcService { dpc: usize, id: MessageId },
    PeerSyncDone { dpc: usize, id: MessageId },
    CdcArrival(Box<DpcRecord>),
    DccEvaluate(Box<AreaReport>),
    AlertDelivered(usize),
    MetricsSample,
    HospitalReply { dpc: usize, request: Box<Message> },
    RelayArrival { id: MessageId },
}

impl Event {
    fn name(&self) -> &'static str {
        match self {
            Event::WorkloadFire(_) => "WorkloadFire",
            Event::FerryMove(_) => "FerryMove",
            Event::ContactBegin { .. } => "ContactBegin",
            Event::ContactEnd { .. } => "ContactEnd",
            Event::TransferProgress { .. } => "TransferProgress",
            Event::DpcService { .. } => "DpcService",
            Event::PeerSyncDone { .. } => "PeerSyncDone",
            Event::CdcArrival(_) => "CdcArrival",
            Event::DccEvaluate(_) => "DccEvaluate",
            Event::AlertDelivered(_) => "AlertDelivered",
            Event::MetricsSample => "MetricsSample",
            Event::HospitalReply { .. } => "HospitalReply",
            Event::RelayArrival { .. } => "RelayArrival",
        }
    }
}

/// Where an undelivered message currently sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Place {
    Kiosk(usize),
    Map(usize),
    DpcInbox(usize),
    DpcOutbound(usize),
    Link,
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Kiosk(i) => write!(f, "{}", NodeId::from_slot(Role::Kiosk, *i)),
            Place::Map(i) => write!(f, "{}", NodeId::from_slot(Role::Map, *i)),
            Place::DpcInbox(i) => write!(f, "{} inbox", NodeId::from_slot(Role::Dpc, *i)),
            Place::DpcOutbound(i) => write!(f, "{} outbound", NodeId::from_slot(Role::Dpc, *i)),
            Place::Link => f.write_str("dpc link"),
        }
    }
}

enum Source {
    Sensor { model: SensorFieldModel, fired: u64 },
    Manual { kiosk: NodeId },
    Medical { kiosk: NodeId },
    Commerce { kiosk: NodeId },
    Learning { push: usize, fired: u64 },
    Scripted { index: usize },
}

struct Workload {
    source: Source,
    generator: Generator,
}

struct Ferry {
    geom: RouteGeometry,
    profile: LinkProfile,
    state: FerryState,
    route_kiosks: BTreeSet<NodeId>,
    /// Sites the ferry is (or is scheduled to remain) in contact with at the
    /// end of the currently planned phase.
    planned: BTreeSet<NodeId>,
}

struct Dpc {
    pipeline: DpcPipeline,
    outbound: MessageBuffer,
    observations: Vec<Observation>,
    peer_links: Vec<usize>,
    link_delay_s: f64,
    peer_window_s: f64,
    inbox_peak: u64,
}

struct Observation {
    origin: NodeId,
    metric: String,
    created_at: SimTime,
    value: f64,
}

struct Active {
    session: TransferSession,
    map: usize,
    site: NodeId,
    lane: Lane,
    rate: f64,
    last_update: SimTime,
}

#[derive(Default)]
struct ContactSlot {
    pickup: Option<u64>,
    dropoff: Option<u64>,
}

impl ContactSlot {
    fn lane_mut(&mut self, lane: Lane) -> &mut Option<u64> {
        match lane {
            Lane::Pickup => &mut self.pickup,
            Lane::Dropoff => &mut self.dropoff,
        }
    }
}

/// Transfer history of one message over one sender/receiver pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HopTransfer {
    pub bits: u64,
    pub sessions: u32,
    pub suspensions: u32,
}

struct RoundTrip {
    requested_at: SimTime,
    completed_at: Option<SimTime>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    opts: RunOptions,
    rules: Vec<Rule>,
    rule_horizon_s: f64,
    queue: EventQueue<Event>,
    now: SimTime,
    events_executed: u64,
    log: Vec<EventRecord>,

    workloads: Vec<Workload>,
    kiosks: Vec<MessageBuffer>,
    ferries: Vec<Ferry>,
    dpcs: Vec<Dpc>,
    hospital_dpc: Vec<usize>,
    link: BTreeMap<MessageId, (Message, usize)>,
    place: BTreeMap<MessageId, Place>,

    contacts: BTreeMap<(NodeId, usize), ContactSlot>,
    sessions: BTreeMap<u64, Active>,
    next_session: u64,
    locked: BTreeSet<MessageId>,
    suspended: BTreeMap<(MessageId, NodeId, NodeId), u64>,
    site_epoch: BTreeMap<NodeId, u64>,
    dirty: BTreeSet<NodeId>,
    hops: BTreeMap<(MessageId, NodeId, NodeId), HopTransfer>,

    history: AreaHistory,
    ledger: AlertLedger,
    alerts: Vec<(EmergencyAlert, MessageKind, SimTime)>,
    cdc_arrivals: BTreeMap<MessageId, SimTime>,
    delivered_at: BTreeMap<MessageId, SimTime>,
    decisions: Vec<Decision>,
    tallies: BTreeMap<MessageKind, KindTally>,
    round_trips: BTreeMap<MessageId, RoundTrip>,
    retry_histogram: BTreeMap<u32, u64>,
    flagged: u64,
    transfers: TransferStats,
    occupancy: Vec<OccupancySample>,
}

fn invariant(at: SimTime, detail: impl Into<String>) -> SimError {
    SimError::Invariant {
        at,
        detail: detail.into(),
    }
}

fn slot(id: NodeId) -> usize {
    id.slot().expect("validated node id")
}

impl Simulation {
    /// Builds the initial world. Refuses scenarios with validation errors.
    pub fn new(cfg: ScenarioConfig, opts: RunOptions) -> Result<Self, SimError> {
        let findings = validate_scenario(&cfg);
        if has_errors(&findings) {
            return Err(SimError::InvalidScenario(findings));
        }
        let rules = cfg.dcc.rule_table();
        let rule_horizon_s = rules
            .iter()
            .map(|r| r.window_s)
            .fold(cfg.cdc.history_window_s, f64::max);

        let kiosks = cfg
            .kiosks
            .iter()
            .enumerate()
            .map(|(i, k)| MessageBuffer::new(NodeId::from_slot(Role::Kiosk, i), k.buffer_bits))
            .collect();

        let ferries = cfg
            .maps
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let id = NodeId::from_slot(Role::Map, i);
                let geom = RouteGeometry::from_config(&m.route, &cfg).expect("validated route");
                Ferry {
                    profile: cfg.map_link_profile(i),
                    state: FerryState::new(id, &geom, m.buffer_bits),
                    route_kiosks: geom.kiosks(),
                    geom,
                    planned: BTreeSet::new(),
                }
            })
            .collect();

        let dpcs = cfg
            .dpcs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let id = NodeId::from_slot(Role::Dpc, i);
                Dpc {
                    pipeline: DpcPipeline::new(id, DpcParams::from(d)),
                    outbound: MessageBuffer::new(id, d.inbox_bits),
                    observations: Vec::new(),
                    peer_links: d.peer_links.iter().map(|p| slot(*p)).collect(),
                    link_delay_s: d.link_delay_s,
                    peer_window_s: d.peer_window_s,
                    inbox_peak: 0,
                }
            })
            .collect();

        let hospital_dpc = cfg.hospitals.iter().map(|h| slot(h.dpc)).collect();
        let workloads = build_workloads(&cfg);

        let mut tallies = BTreeMap::new();
        for kind in MessageKind::ALL {
            tallies.insert(kind, KindTally::default());
        }

        let mut sim = Self {
            rules,
            rule_horizon_s,
            queue: EventQueue::new(),
            now: SimTime::ZERO,
            events_executed: 0,
            log: Vec::new(),
            workloads,
            kiosks,
            ferries,
            dpcs,
            hospital_dpc,
            link: BTreeMap::new(),
            place: BTreeMap::new(),
            contacts: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_session: 0,
            locked: BTreeSet::new(),
            suspended: BTreeMap::new(),
            site_epoch: BTreeMap::new(),
            dirty: BTreeSet::new(),
            hops: BTreeMap::new(),
            history: AreaHistory::new(),
            ledger: AlertLedger::new(),
            alerts: Vec::new(),
            cdc_arrivals: BTreeMap::new(),
            delivered_at: BTreeMap::new(),
            decisions: Vec::new(),
            tallies,
            round_trips: BTreeMap::new(),
            retry_histogram: BTreeMap::new(),
            flagged: 0,
            transfers: TransferStats::default(),
            occupancy: Vec::new(),
            cfg,
            opts,
        };
        sim.initialize()?;
        Ok(sim)
    }

    fn schedule(&mut self, at: SimTime, event: Event) -> Result<(), SimError> {
        self.queue.schedule(at, event).map(|_| ()).map_err(|now| {
            invariant(now, format!("event scheduled at {at}, before the current time {now}"))
        })
    }

    fn initialize(&mut self) -> Result<(), SimError> {
        for m in 0..self.ferries.len() {
            self.plan_phase(m)?;
        }
        for w in 0..self.workloads.len() {
            if let Some(first) = self.first_fire(w) {
                self.schedule(first, Event::WorkloadFire(w))?;
            }
        }
        self.schedule(SimTime::ZERO, Event::MetricsSample)
    }

    fn first_fire(&mut self, w: usize) -> Option<SimTime> {
        let cfg = &self.cfg;
        let wl = &mut self.workloads[w];
        match &wl.source {
            Source::Sensor { model, .. } => Some(SimTime::from_secs(model.start_s)),
            Source::Manual { .. } => {
                let rate = cfg.workloads.manual.as_ref()?.rate_per_hour;
                poisson_gap_s(rate, wl.generator.rng()).map(SimTime::from_secs)
            }
            Source::Medical { .. } => {
                let rate = cfg.workloads.medical.as_ref()?.rate_per_hour;
                poisson_gap_s(rate, wl.generator.rng()).map(SimTime::from_secs)
            }
            Source::Commerce { .. } => {
                let rate = cfg.workloads.commerce.as_ref()?.rate_per_hour;
                poisson_gap_s(rate, wl.generator.rng()).map(SimTime::from_secs)
            }
            Source::Learning { push, .. } => Some(SimTime::from_secs(cfg.workloads.learning[*push].start_s)),
            Source::Scripted { index } => Some(SimTime::from_secs(cfg.workloads.scripted[*index].at_s)),
        }
    }

    /// Executes every event strictly before `until`.
    pub fn run(&mut self) -> Result<(), SimError> {
        let until = self.opts.until;
        while let Some(t) = self.queue.peek_time() {
            if t >= until {
                break;
            }
            let scheduled = self.queue.pop().expect("peeked");
            if scheduled.time < self.now {
                return Err(invariant(scheduled.time, "event queue went backwards"));
            }
            self.now = scheduled.time;
            if let Event::TransferProgress { site, epoch, .. } = &scheduled.event {
                if self.site_epoch.get(site) != Some(epoch) {
                    continue;
                }
            }
            self.events_executed += 1;
            if self.opts.event_log {
                self.log.push(EventRecord {
                    t: scheduled.time.secs(),
                    seq: scheduled.seq,
                    kind: scheduled.event.name().to_string(),
                    detail: self.describe(&scheduled.event),
                });
            }
            trace!("{} {}", scheduled.time, scheduled.event.name());
            self.handle(scheduled.event)?;
            self.process_dirty()?;
            if self.opts.audit_every_event {
                self.audit()?;
            }
        }
        Ok(())
    }

    fn describe(&self, event: &Event) -> String {
        match event {
            Event::WorkloadFire(w) => format!("{:?}", self.workloads[*w].generator.id),
            Event::FerryMove(m) => {
                let f = &self.ferries[*m];
                format!("{} {:?}", f.state.map_id, f.state.motion.leg)
            }
            Event::ContactBegin { map, site } | Event::ContactEnd { map, site } => {
                format!("{} {}", NodeId::from_slot(Role::Map, *map), site)
            }
            Event::TransferProgress { site, session, .. } => match self.sessions.get(session) {
                Some(a) => format!(
                    "{} -> {} message {} at {}",
                    a.session.from, a.session.to, a.session.message_id.0, site
                ),
                None => format!("session {session} at {site}"),
            },
            Event::DpcService { dpc, id } | Event::PeerSyncDone { dpc, id } => {
                format!("{} message {}", NodeId::from_slot(Role::Dpc, *dpc), id.0)
            }
            Event::CdcArrival(rec) => format!("message {}", rec.message.id.0),
            Event::DccEvaluate(r) => format!("{} {}", r.area, r.metric),
            Event::AlertDelivered(i) => format!("alert for message {}", self.alerts[*i].0.source.0),
            Event::MetricsSample => String::new(),
            Event::HospitalReply { dpc, request } => {
                format!("{} request {}", NodeId::from_slot(Role::Dpc, *dpc), request.id.0)
            }
            Event::RelayArrival { id } => format!("message {}", id.0),
        }
    }

    fn handle(&mut self, event: Event) -> Result<(), SimError> {
        match event {
            Event::WorkloadFire(w) => self.fire_workload(w),
            Event::FerryMove(m) => {
                let f = &mut self.ferries[m];
                f.state.motion = f.state.motion.next_phase(&f.geom);
                self.plan_phase(m)
            }
            Event::ContactBegin { map, site } => {
                self.transfers.contacts += 1;
                self.contacts.insert((site, map), ContactSlot::default());
                self.dirty.insert(site);
                Ok(())
            }
            Event::ContactEnd { map, site } => self.end_contact(map, site),
            Event::TransferProgress { site, session, .. } => {
                let mut done = self.settle(site);
                if let Some(a) = self.sessions.get_mut(&session) {
                    if !a.session.is_complete() {
                        // Due now: any residue is float rounding, not missing time.
                        let rest = a.session.remaining_bits();
                        a.session.bits_sent = a.session.size_bits;
                        a.session.state = SessionState::Complete;
                        self.account_bits(session, rest);
                        done.push(session);
                    }
                }
                for s in done {
                    self.finish_session(s)?;
                }
                self.dirty.insert(site);
                Ok(())
            }
            Event::DpcService { dpc, id } => self.dpc_service(dpc, id),
            Event::PeerSyncDone { dpc, id } => {
                self.dpcs[dpc]
                    .pipeline
                    .requeue(id)
                    .map_err(|e| invariant(self.now, e.to_string()))?;
                self.kick_dpc(dpc)
            }
            Event::CdcArrival(rec) => {
                self.cdc_arrivals.insert(rec.message.id, self.now);
                let w = self.cfg.cdc.history_window_s;
                if let Some(report) = cdc_merge(&mut self.history, &rec, self.now, w, self.rule_horizon_s) {
                    self.schedule(self.now, Event::DccEvaluate(Box::new(report)))?;
                }
                Ok(())
            }
            Event::DccEvaluate(report) => {
                let decision = dcc_decide(&report, &self.rules);
                if decision.action != Action::NoAction {
                    debug!("{} decision {} for {}", self.now, decision.action, decision.area);
                    self.decisions.push(decision);
                }
                Ok(())
            }
            Event::AlertDelivered(i) => {
                self.alerts[i].0.delivered_at = Some(self.now);
                Ok(())
            }
            Event::MetricsSample => {
                self.sample_occupancy();
                self.audit()?;
                let next = self.now + self.opts.sample_interval_s;
                self.schedule(next, Event::MetricsSample)
            }
            Event::HospitalReply { dpc, request } => {
                let hospital = request.destination.expect("request addressed to a hospital");
                let size = self
                    .cfg
                    .workloads
                    .medical
                    .as_ref()
                    .map_or(DEFAULT_RESPONSE_BITS, |m| m.response_size_bits);
                let resp = medical_response(&request, hospital, size, self.now);
                self.tally(resp.kind).attempted += 1;
                self.place_downlink(dpc, resp, false)
            }
            Event::RelayArrival { id } => {
                let (mut msg, to) = self
                    .link
                    .remove(&id)
                    .ok_or_else(|| invariant(self.now, format!("relay of unknown message {}", id.0)))?;
                self.move_place(id, Some(Place::Link), None)?;
                self.hop(&mut msg, NodeId::from_slot(Role::Dpc, to))?;
                if msg.final_role == Role::Kiosk {
                    self.place_downlink(to, msg, true)
                } else {
                    self.arrive_at_dpc(to, msg)
                }
            }
        }
    }

    // ---- workloads -------------------------------------------------------

    fn fire_workload(&mut self, w: usize) -> Result<(), SimError> {
        let now = self.now;
        let cfg = &self.cfg;
        let wl = &mut self.workloads[w];
        let mut next = None;
        let mut at_kiosk = None;
        let mut pushed = Vec::new();
        match &mut wl.source {
            Source::Sensor { model, fired } => {
                let id = wl.generator.next_message_id();
                at_kiosk = Some(model.gen_sensor_batch(id, now, wl.generator.rng()));
                *fired += 1;
                next = Some(SimTime::from_secs(model.start_s + *fired as f64 * model.period_s));
            }
            Source::Manual { kiosk } => {
                let spec = cfg.workloads.manual.as_ref().expect("manual workload");
                let id = wl.generator.next_message_id();
                at_kiosk = Some(gen_manual_record(*kiosk, spec, id, now, wl.generator.rng()));
                next = poisson_gap_s(spec.rate_per_hour, wl.generator.rng()).map(|g| now + g);
            }
            Source::Medical { kiosk } => {
                let spec = cfg.workloads.medical.as_ref().expect("medical workload");
                let id = wl.generator.next_message_id();
                at_kiosk = Some(gen_medical_request(*kiosk, spec, id, now, wl.generator.rng()));
                next = poisson_gap_s(spec.rate_per_hour, wl.generator.rng()).map(|g| now + g);
            }
            Source::Commerce { kiosk } => {
                let spec = cfg.workloads.commerce.as_ref().expect("commerce workload");
                let id = wl.generator.next_message_id();
                at_kiosk = Some(gen_commerce_order(*kiosk, spec, id, now));
                next = poisson_gap_s(spec.rate_per_hour, wl.generator.rng()).map(|g| now + g);
            }
            Source::Learning { push, fired } => {
                let spec = &cfg.workloads.learning[*push];
                pushed = gen_learning_push(spec, &mut wl.generator, now);
                *fired += 1;
                next = spec
                    .period_s
                    .map(|p| SimTime::from_secs(spec.start_s + *fired as f64 * p));
            }
            Source::Scripted { index } => {
                let spec = &cfg.workloads.scripted[*index];
                let id = wl.generator.next_message_id();
                let hospital = cfg
                    .workloads
                    .medical
                    .as_ref()
                    .map_or(NodeId::hospital(1), |m| m.hospital);
                at_kiosk = Some(scripted_message(spec, id, hospital));
            }
        }
        if let Some(at) = next {
            self.schedule(at, Event::WorkloadFire(w))?;
        }
        if let Some(msg) = at_kiosk {
            self.admit_at_kiosk(msg)?;
        }
        for msg in pushed {
            self.tally(msg.kind).attempted += 1;
            let dpc = slot(msg.origin);
            self.place_downlink(dpc, msg, false)?;
        }
        Ok(())
    }

    fn admit_at_kiosk(&mut self, msg: Message) -> Result<(), SimError> {
        let k = slot(msg.origin);
        let (id, kind) = (msg.id, msg.kind);
        self.tally(kind).attempted += 1;
        if self.kiosks[k].insert(msg).is_err() {
            self.tally(kind).blocked += 1;
            return Ok(());
        }
        if kind == MessageKind::MedicalRequest {
            self.round_trips.insert(
                id,
                RoundTrip {
                    requested_at: self.now,
                    completed_at: None,
                },
            );
        }
        self.move_place(id, None, Some(Place::Kiosk(k)))?;
        self.dirty.insert(NodeId::from_slot(Role::Kiosk, k));
        Ok(())
    }

    fn tally(&mut self, kind: MessageKind) -> &mut KindTally {
        self.tallies.entry(kind).or_default()
    }

    // ---- custody bookkeeping ---------------------------------------------

    fn move_place(&mut self, id: MessageId, from: Option<Place>, to: Option<Place>) -> Result<(), SimError> {
        let current = self.place.get(&id).copied();
        if current != from {
            return Err(invariant(
                self.now,
                format!("message {} expected at {:?} but found at {:?}", id.0, from, current),
            ));
        }
        match to {
            Some(p) => self.place.insert(id, p),
            None => self.place.remove(&id),
        };
        Ok(())
    }

    fn hop(&self, msg: &mut Message, node: NodeId) -> Result<(), SimError> {
        msg.push_hop(node, self.now)
            .map_err(|e| invariant(self.now, e.to_string()))
    }

    fn deliver(&mut self, msg: &Message) {
        let latency = self.now - msg.created_at;
        let t = self.tally(msg.kind);
        t.delivered += 1;
        t.latencies.push(latency);
        self.delivered_at.insert(msg.id, self.now);
        if msg.kind == MessageKind::MedicalResponse {
            if let Some(rt) = msg.in_reply_to.and_then(|r| self.round_trips.get_mut(&r)) {
                rt.completed_at = Some(self.now);
            }
        }
    }

    fn bypass(&mut self, msg: &Message, at: NodeId) -> Result<(), SimError> {
        let alert = emergency_bypass_check(
            &mut self.ledger,
            msg,
            self.cfg.gravity_threshold,
            at,
            self.now,
            self.cfg.radio.direct_latency_s,
        );
        if let Some(alert) = alert {
            debug!("{} emergency alert for message {} at {}", self.now, msg.id.0, at);
            let due = alert.due_at;
            self.alerts.push((alert, msg.kind, msg.created_at));
            self.schedule(due, Event::AlertDelivered(self.alerts.len() - 1))?;
        }
        Ok(())
    }

    // ---- ferry movement and contacts -------------------------------------

    fn plan_phase(&mut self, m: usize) -> Result<(), SimError> {
        let now = self.now;
        let sites: Vec<(NodeId, crate::model::GeoPoint)> = self
            .cfg
            .kiosks
            .iter()
            .enumerate()
            .map(|(i, k)| (NodeId::from_slot(Role::Kiosk, i), k.pos))
            .chain(
                self.cfg
                    .dpcs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| (NodeId::from_slot(Role::Dpc, i), d.pos)),
            )
            .collect();
        let f = &self.ferries[m];
        let motion = f.state.motion;
        let duration = motion.time_to_next_phase(&f.geom).unwrap_or(f64::INFINITY);
        let mut planned = f.planned.clone();
        let mut out = Vec::new();
        for (site, pos) in sites {
            let window = phase_contact_window(&motion, &f.geom, pos, f.profile.range_km);
            let mut inside = planned.contains(&site);
            match window {
                None => {
                    if inside {
                        out.push((0.0, Event::ContactEnd { map: m, site }));
                        inside = false;
                    }
                }
                Some((a, b)) => {
                    if inside && a > TIME_EPS {
                        out.push((0.0, Event::ContactEnd { map: m, site }));
                        inside = false;
                    }
                    let reaches_end = b >= duration - TIME_EPS;
                    if !inside {
                        if b - a <= TIME_EPS && !reaches_end {
                            // Tangential graze.
                            continue;
                        }
                        out.push((a, Event::ContactBegin { map: m, site }));
                        inside = true;
                    }
                    if !reaches_end {
                        out.push((b, Event::ContactEnd { map: m, site }));
                        inside = false;
                    }
                }
            }
            if inside {
                planned.insert(site);
            } else {
                planned.remove(&site);
            }
        }
        self.ferries[m].planned = planned;
        for (offset, ev) in out {
            self.schedule(now + offset, ev)?;
        }
        if duration.is_finite() {
            self.schedule(now + duration, Event::FerryMove(m))?;
        }
        Ok(())
    }

    fn end_contact(&mut self, map: usize, site: NodeId) -> Result<(), SimError> {
        let done = self.settle(site);
        for s in done {
            self.finish_session(s)?;
        }
        let Some(slot) = self.contacts.remove(&(site, map)) else {
            return Err(invariant(self.now, format!("contact end without begin at {site}")));
        };
        for sid in [slot.pickup, slot.dropoff].into_iter().flatten() {
            let a = self.sessions.remove(&sid).expect("slot session exists");
            let mut session = a.session;
            session.suspend();
            self.locked.remove(&session.message_id);
            self.release_receiver(&a.site, a.map, a.lane, session.size_bits);
            self.suspended
                .insert((session.message_id, session.from, session.to), session.bits_sent);
            self.transfers.suspensions += 1;
            self.hops
                .entry((session.message_id, session.from, session.to))
                .or_default()
                .suspensions += 1;
        }
        self.dirty.insert(site);
        Ok(())
    }

    // ---- transfers -------------------------------------------------------

    fn account_bits(&mut self, session: u64, bits: u64) {
        let a = &self.sessions[&session];
        let key = (a.session.message_id, a.session.from, a.session.to);
        self.hops.entry(key).or_default().bits += bits;
        self.transfers.bits_transmitted += bits;
    }

    /// Brings every session at `site` up to the current time. Returns the
    /// sessions that completed.
    fn settle(&mut self, site: NodeId) -> Vec<u64> {
        let now = self.now;
        let ids: Vec<u64> = self
            .sessions
            .iter()
            .filter(|(_, a)| a.site == site)
            .map(|(id, _)| *id)
            .collect();
        let mut done = Vec::new();
        for id in ids {
            let a = self.sessions.get_mut(&id).expect("listed");
            let dt = now - a.last_update;
            let bits = transfer_step(&mut a.session, dt, a.rate);
            a.last_update = now;
            let complete = a.session.is_complete();
            self.account_bits(id, bits);
            if complete {
                done.push(id);
            }
        }
        done
    }

    fn contact_sites_of(&self, map: usize) -> Vec<NodeId> {
        self.contacts
            .keys()
            .filter(|(_, m)| *m == map)
            .map(|(s, _)| *s)
            .collect()
    }

    fn release_receiver(&mut self, site: &NodeId, map: usize, lane: Lane, bits: u64) {
        match (lane, site.role) {
            (Lane::Pickup, _) => self.ferries[map].state.buffer.release(bits),
            (Lane::Dropoff, Role::Dpc) => self.dpcs[slot(*site)].pipeline.release(bits),
            (Lane::Dropoff, _) => {}
        }
    }

    /// Drops partial transfers of `id` left by pairs that will never resume.
    fn abandon_partials(&mut self, id: MessageId) {
        let stale: Vec<_> = self
            .suspended
            .range((id, NodeId::new(Role::Kiosk, 0), NodeId::new(Role::Kiosk, 0))..)
            .take_while(|((m, _, _), _)| *m == id)
            .map(|(k, bits)| (*k, *bits))
            .collect();
        for (key, bits) in stale {
            self.suspended.remove(&key);
            self.transfers.abandoned_bits += bits;
        }
    }

    fn finish_session(&mut self, sid: u64) -> Result<(), SimError> {
        let a = self
            .sessions
            .remove(&sid)
            .ok_or_else(|| invariant(self.now, format!("finishing unknown session {sid}")))?;
        if let Some(slot) = self.contacts.get_mut(&(a.site, a.map)) {
            *slot.lane_mut(a.lane) = None;
        }
        let id = a.session.message_id;
        self.locked.remove(&id);
        self.transfers.sessions_completed += 1;
        self.abandon_partials(id);
        let map_id = NodeId::from_slot(Role::Map, a.map);
        for s in self.contact_sites_of(a.map) {
            self.dirty.insert(s);
        }
        self.dirty.insert(a.site);
        match a.lane {
            Lane::Pickup => {
                let (mut msg, from) = match a.site.role {
                    Role::Kiosk => {
                        let k = slot(a.site);
                        (self.kiosks[k].remove(id), Place::Kiosk(k))
                    }
                    _ => {
                        let d = slot(a.site);
                        (self.dpcs[d].outbound.remove(id), Place::DpcOutbound(d))
                    }
                };
                let mut msg = msg
                    .take()
                    .ok_or_else(|| invariant(self.now, format!("message {} vanished from {}", id.0, a.site)))?;
                self.hop(&mut msg, map_id)?;
                self.move_place(id, Some(from), Some(Place::Map(a.map)))?;
                self.bypass(&msg, map_id)?;
                self.ferries[a.map]
                    .state
                    .buffer
                    .insert_reserved(msg)
                    .map_err(|e| invariant(self.now, e.to_string()))?;
            }
            Lane::Dropoff => {
                let mut msg = self.ferries[a.map]
                    .state
                    .buffer
                    .remove(id)
                    .ok_or_else(|| invariant(self.now, format!("message {} vanished from {map_id}", id.0)))?;
                self.hop(&mut msg, a.site)?;
                self.move_place(id, Some(Place::Map(a.map)), None)?;
                match a.site.role {
                    Role::Kiosk => self.deliver(&msg),
                    _ => {
                        let d = slot(a.site);
                        self.dpcs[d].pipeline.release(msg.size_bits);
                        self.arrive_at_dpc(d, msg)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Opens at most one session per idle lane of every contact at `site`.
    fn open_lanes(&mut self, site: NodeId) -> Result<(), SimError> {
        let maps: Vec<usize> = self
            .contacts
            .keys()
            .filter(|(s, _)| *s == site)
            .map(|(_, m)| *m)
            .collect();
        for map in maps {
            for lane in Lane::BOTH {
                let busy = self.contacts[&(site, map)].pickup.is_some() && lane == Lane::Pickup
                    || self.contacts[&(site, map)].dropoff.is_some() && lane == Lane::Dropoff;
                if !busy {
                    self.try_open(site, map, lane)?;
                }
            }
        }
        Ok(())
    }

    fn try_open(&mut self, site: NodeId, map: usize, lane: Lane) -> Result<(), SimError> {
        let pair = ContactPair {
            map: NodeId::from_slot(Role::Map, map),
            site,
        };
        let (from, to) = pair.endpoints(lane);
        let free = match (lane, site.role) {
            (Lane::Pickup, _) => Some(self.ferries[map].state.buffer.free_bits()),
            (Lane::Dropoff, Role::Dpc) => Some(self.dpcs[slot(site)].pipeline.free_bits()),
            (Lane::Dropoff, _) => None,
        };
        let route_kiosks = &self.ferries[map].route_kiosks;
        let sender: &MessageBuffer = match (lane, site.role) {
            (Lane::Pickup, Role::Kiosk) => &self.kiosks[slot(site)],
            (Lane::Pickup, _) => &self.dpcs[slot(site)].outbound,
            (Lane::Dropoff, _) => &self.ferries[map].state.buffer,
        };
        let pick = sender.iter().find(|m| {
            !self.locked.contains(&m.id)
                && eligible(lane, site, m, route_kiosks)
                && free.is_none_or(|f| m.size_bits <= f)
        });
        let Some(msg) = pick else {
            return Ok(());
        };
        let offset = self.suspended.remove(&(msg.id, from, to)).unwrap_or(0);
        let mut session = TransferSession::resumed(self.next_session, from, to, msg, offset);
        session.state = SessionState::Transferring;
        let (id, size) = (msg.id, msg.size_bits);
        if offset > 0 {
            self.transfers.resumptions += 1;
        }
        let reserved = match (lane, site.role) {
            (Lane::Pickup, _) => self.ferries[map].state.buffer.reserve(size),
            (Lane::Dropoff, Role::Dpc) => self.dpcs[slot(site)].pipeline.reserve(size),
            (Lane::Dropoff, _) => true,
        };
        if !reserved {
            return Err(invariant(self.now, format!("reservation for message {} failed", id.0)));
        }
        let sid = self.next_session;
        self.next_session += 1;
        self.transfers.sessions_opened += 1;
        self.hops.entry((id, from, to)).or_default().sessions += 1;
        self.locked.insert(id);
        self.sessions.insert(
            sid,
            Active {
                session,
                map,
                site,
                lane,
                rate: 0.0,
                last_update: self.now,
            },
        );
        *self
            .contacts
            .get_mut(&(site, map))
            .expect("contact exists")
            .lane_mut(lane) = Some(sid);
        Ok(())
    }

    /// Recomputes per-session rates at `site` and schedules completions.
    fn reschedule(&mut self, site: NodeId) -> Result<(), SimError> {
        let epoch = {
            let e = self.site_epoch.entry(site).or_insert(0);
            *e += 1;
            *e
        };
        let ids: Vec<u64> = self
            .sessions
            .iter()
            .filter(|(_, a)| a.site == site)
            .map(|(id, _)| *id)
            .collect();
        let k = ids.len() as u32;
        let mut pending = Vec::new();
        for id in ids {
            let profile = self.ferries[self.sessions[&id].map].profile;
            let a = self.sessions.get_mut(&id).expect("listed");
            a.rate = effective_rate(&profile, k);
            let eta = a.session.remaining_bits() as f64 / a.rate;
            pending.push((eta, id));
        }
        for (eta, id) in pending {
            self.schedule(
                self.now + eta,
                Event::TransferProgress {
                    site,
                    epoch,
                    session: id,
                },
            )?;
        }
        Ok(())
    }

    fn process_dirty(&mut self) -> Result<(), SimError> {
        while let Some(site) = self.dirty.pop_first() {
            let done = self.settle(site);
            for s in done {
                self.finish_session(s)?;
            }
            self.dirty.remove(&site);
            self.open_lanes(site)?;
            self.reschedule(site)?;
        }
        Ok(())
    }

    // ---- DPC side --------------------------------------------------------

    fn arrive_at_dpc(&mut self, d: usize, msg: Message) -> Result<(), SimError> {
        let dpc_id = NodeId::from_slot(Role::Dpc, d);
        self.bypass(&msg, dpc_id)?;
        if msg.kind == MessageKind::MedicalRequest {
            let hospital = msg
                .destination
                .ok_or_else(|| invariant(self.now, "medical request without hospital"))?;
            let target = *self
                .hospital_dpc
                .get(slot(hospital))
                .ok_or_else(|| invariant(self.now, format!("unknown hospital {hospital}")))?;
            if target == d {
                self.deliver(&msg);
                let service = self
                    .cfg
                    .workloads
                    .medical
                    .as_ref()
                    .map_or(DEFAULT_HOSPITAL_SERVICE_S, |m| m.service_s);
                return self.schedule(
                    self.now + service,
                    Event::HospitalReply {
                        dpc: d,
                        request: Box::new(msg),
                    },
                );
            }
            return self.relay(d, target, msg);
        }
        if msg.final_role == Role::Kiosk {
            return self.place_downlink(d, msg, false);
        }
        if let (Some(metric), Some(value)) = (&msg.metric, msg.payload_value) {
            self.dpcs[d].observations.push(Observation {
                origin: msg.origin,
                metric: metric.clone(),
                created_at: msg.created_at,
                value,
            });
        }
        let id = msg.id;
        let dpc = &mut self.dpcs[d];
        dpc.pipeline
            .ingest(msg, self.now)
            .map_err(|e| invariant(self.now, e.to_string()))?;
        dpc.inbox_peak = dpc.inbox_peak.max(dpc.pipeline.used_bits());
        self.move_place(id, None, Some(Place::DpcInbox(d)))?;
        self.kick_dpc(d)
    }

    fn relay(&mut self, from: usize, to: usize, msg: Message) -> Result<(), SimError> {
        let id = msg.id;
        let delay = self.dpcs[from].link_delay_s;
        self.link.insert(id, (msg, to));
        self.move_place(id, None, Some(Place::Link))?;
        self.schedule(self.now + delay, Event::RelayArrival { id })
    }

    /// DPC that should hold downlink traffic for `kiosk`: `d` itself when one
    /// of its ferries serves the kiosk, else the first DPC that does.
    fn downlink_dpc(&self, d: usize, kiosk: NodeId) -> usize {
        let serves = |dpc: usize| {
            let dpc_id = NodeId::from_slot(Role::Dpc, dpc);
            self.ferries
                .iter()
                .any(|f| f.geom.nodes.contains(&dpc_id) && f.route_kiosks.contains(&kiosk))
        };
        if serves(d) {
            return d;
        }
        (0..self.dpcs.len()).find(|&e| serves(e)).unwrap_or(d)
    }

    /// Queues kiosk-bound traffic at a DPC, relaying it first if another DPC
    /// is better placed. `reserved` marks a relay arrival whose space was
    /// held when it left.
    fn place_downlink(&mut self, d: usize, mut msg: Message, reserved: bool) -> Result<(), SimError> {
        let dpc_id = NodeId::from_slot(Role::Dpc, d);
        let kiosk = msg
            .destination
            .ok_or_else(|| invariant(self.now, "downlink message without destination"))?;
        let target = self.downlink_dpc(d, kiosk);
        if msg.current_holder() != dpc_id {
            self.hop(&mut msg, dpc_id)?;
        }
        if target != d && !reserved {
            if !self.dpcs[target].outbound.reserve(msg.size_bits) {
                self.tally(msg.kind).blocked += 1;
                return Ok(());
            }
            self.bypass(&msg, dpc_id)?;
            return self.relay(d, target, msg);
        }
        let id = msg.id;
        let kind = msg.kind;
        let gravity_check = msg.clone();
        let outbound = &mut self.dpcs[d].outbound;
        let stored = if reserved {
            outbound.insert_reserved(msg)
        } else {
            outbound.insert(msg)
        };
        match stored {
            Ok(()) => {
                self.move_place(id, None, Some(Place::DpcOutbound(d)))?;
                self.bypass(&gravity_check, dpc_id)?;
                self.dirty.insert(dpc_id);
                Ok(())
            }
            Err(_) if !reserved => {
                self.tally(kind).blocked += 1;
                Ok(())
            }
            Err(e) => Err(invariant(self.now, e.to_string())),
        }
    }

    fn kick_dpc(&mut self, d: usize) -> Result<(), SimError> {
        if let Some((id, service)) = self.dpcs[d].pipeline.start_next() {
            self.schedule(self.now + service, Event::DpcService { dpc: d, id })?;
        }
        Ok(())
    }

    fn peer_values(&self, d: usize, msg: &Message) -> Vec<f64> {
        let (Some(metric), Some(_)) = (&msg.metric, msg.payload_value) else {
            return Vec::new();
        };
        let window = self.dpcs[d].peer_window_s;
        let mut out = Vec::new();
        for &p in &self.dpcs[d].peer_links {
            for o in &self.dpcs[p].observations {
                if o.origin == msg.origin
                    && &o.metric == metric
                    && (o.created_at - msg.created_at).abs() <= window
                {
                    out.push(o.value);
                }
            }
        }
        out
    }

    fn dpc_service(&mut self, d: usize, id: MessageId) -> Result<(), SimError> {
        let rec = self.dpcs[d]
            .pipeline
            .record(id)
            .ok_or_else(|| invariant(self.now, format!("service of unknown record {}", id.0)))?;
        let peers = self.peer_values(d, &rec.message);
        let tolerance = self.dpcs[d].pipeline.params.tolerance;
        let confidence = compute_confidence(rec, &peers, tolerance);
        let transition = self.dpcs[d]
            .pipeline
            .finish_service(id, confidence)
            .map_err(|e| invariant(self.now, e.to_string()))?;
        match transition {
            Transition::Retry { .. } => {
                let wait = self.dpcs[d].pipeline.params.peer_sync_s;
                self.schedule(self.now + wait, Event::PeerSyncDone { dpc: d, id })?;
            }
            Transition::Passed | Transition::Flagged => {
                if transition == Transition::Flagged {
                    self.flagged += 1;
                }
                let backhaul = self.cfg.cdc.backhaul_delay_s;
                let (rec, arrival) = self.dpcs[d]
                    .pipeline
                    .forward(id, self.now, backhaul)
                    .map_err(|e| invariant(self.now, e.to_string()))?;
                *self.retry_histogram.entry(rec.retries).or_default() += 1;
                self.move_place(id, Some(Place::DpcInbox(d)), None)?;
                self.deliver(&rec.message);
                self.schedule(arrival, Event::CdcArrival(Box::new(rec)))?;
                self.dirty.insert(NodeId::from_slot(Role::Dpc, d));
            }
        }
        self.kick_dpc(d)
    }

    // ---- metrics and audit -----------------------------------------------

    fn buffers(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for (i, k) in self.kiosks.iter().enumerate() {
            out.insert(NodeId::from_slot(Role::Kiosk, i).to_string(), k.used_bits());
        }
        for (i, f) in self.ferries.iter().enumerate() {
            out.insert(NodeId::from_slot(Role::Map, i).to_string(), f.state.buffer.used_bits());
        }
        for (i, d) in self.dpcs.iter().enumerate() {
            let id = NodeId::from_slot(Role::Dpc, i);
            out.insert(id.to_string(), d.pipeline.used_bits());
            out.insert(format!("{id}/outbound"), d.outbound.used_bits());
        }
        out
    }

    fn sample_occupancy(&mut self) {
        let sample = OccupancySample {
            t_s: self.now.secs(),
            buffers_bits: self.buffers(),
        };
        self.occupancy.push(sample);
    }

    /// Every undelivered message sits in exactly one container, and that
    /// container agrees with the custody index.
    pub fn audit(&self) -> Result<(), SimError> {
        self.audit_custody().map_err(|d| invariant(self.now, d))
    }

    fn audit_custody(&self) -> Result<(), String> {
        let mut seen: BTreeMap<MessageId, Place> = BTreeMap::new();
        let mut record = |id: MessageId, p: Place| -> Result<(), String> {
            match seen.insert(id, p) {
                Some(prev) => Err(format!("message {} held by both {prev} and {p}", id.0)),
                None => Ok(()),
            }
        };
        let buffers = self
            .kiosks
            .iter()
            .enumerate()
            .map(|(i, k)| (k, Place::Kiosk(i)))
            .chain(self.ferries.iter().enumerate().map(|(i, f)| (&f.state.buffer, Place::Map(i))))
            .chain(self.dpcs.iter().enumerate().map(|(i, d)| (&d.outbound, Place::DpcOutbound(i))));
        for (buf, p) in buffers {
            buf.audit()?;
            for id in buf.ids() {
                record(id, p)?;
            }
        }
        for (i, d) in self.dpcs.iter().enumerate() {
            for rec in d.pipeline.records() {
                record(rec.id(), Place::DpcInbox(i))?;
            }
        }
        for id in self.link.keys() {
            record(*id, Place::Link)?;
        }
        if seen != self.place {
            return Err(format!(
                "custody index ({} entries) disagrees with containers ({} messages)",
                self.place.len(),
                seen.len()
            ));
        }
        if let Some(id) = self.locked.iter().find(|id| !self.place.contains_key(id)) {
            return Err(format!("locked message {} is not held anywhere", id.0));
        }
        Ok(())
    }

    fn in_flight_by_kind(&self) -> BTreeMap<MessageKind, u64> {
        let mut out = BTreeMap::new();
        let mut add = |m: &Message| *out.entry(m.kind).or_insert(0) += 1;
        for k in &self.kiosks {
            k.iter().for_each(&mut add);
        }
        for f in &self.ferries {
            f.state.buffer.iter().for_each(&mut add);
        }
        for d in &self.dpcs {
            d.outbound.iter().for_each(&mut add);
            d.pipeline.records().for_each(|r| add(&r.message));
        }
        self.link.values().for_each(|(m, _)| add(m));
        out
    }

    /// Builds the report, checking per-kind conservation.
    pub fn collect_metrics(&self) -> Result<RunReport, SimError> {
        self.audit()?;
        let in_flight = self.in_flight_by_kind();
        let mut messages = BTreeMap::new();
        for (kind, tally) in &self.tallies {
            let stats = if *kind == MessageKind::EmergencyAlert {
                self.alert_tally().stats(self.alerts.iter().filter(|a| a.0.delivered_at.is_none()).count() as u64)
            } else {
                tally.stats(in_flight.get(kind).copied().unwrap_or(0))
            };
            let stats = stats.map_err(|e| invariant(self.now, format!("conservation violated for {kind}: {e}")))?;
            messages.insert(kind.as_str().to_string(), stats);
        }

        let rt_latencies: Vec<f64> = self
            .round_trips
            .values()
            .filter_map(|r| r.completed_at.map(|c| c - r.requested_at))
            .collect();
        let completed = rt_latencies.len() as u64;
        let requests = self.round_trips.len() as u64;

        let mut peaks = BTreeMap::new();
        for (i, k) in self.kiosks.iter().enumerate() {
            peaks.insert(NodeId::from_slot(Role::Kiosk, i).to_string(), k.peak_bits());
        }
        for (i, f) in self.ferries.iter().enumerate() {
            peaks.insert(NodeId::from_slot(Role::Map, i).to_string(), f.state.buffer.peak_bits());
        }
        for (i, d) in self.dpcs.iter().enumerate() {
            let id = NodeId::from_slot(Role::Dpc, i);
            peaks.insert(id.to_string(), d.inbox_peak);
            peaks.insert(format!("{id}/outbound"), d.outbound.peak_bits());
        }

        let alerts: Vec<AlertRecord> = self
            .alerts
            .iter()
            .map(|(a, kind, created)| AlertRecord {
                source: a.source,
                source_kind: *kind,
                gravity: a.gravity,
                raised_at_node: a.raised_at_node,
                created_at_s: created.secs(),
                raised_at_s: a.raised_at.secs(),
                due_at_s: a.due_at.secs(),
                delivered_at_s: a.delivered_at.map(SimTime::secs),
                source_cdc_arrival_s: self.cdc_arrivals.get(&a.source).map(|t| t.secs()),
            })
            .collect();

        Ok(RunReport {
            until_s: self.opts.until.secs(),
            events_executed: self.events_executed,
            messages,
            medical_round_trips: RoundTripStats {
                requests,
                completed,
                incomplete: requests - completed,
                latency_s: LatencyStats::from_samples(&rt_latencies),
            },
            buffer_peaks_bits: peaks,
            alerts,
            alert_latency_s: LatencyStats::from_samples(&self.alert_tally().latencies),
            dpc_retry_histogram: self.retry_histogram.clone(),
            flagged_records: self.flagged,
            decisions: self.decisions.clone(),
            transfers: self.transfers.clone(),
            occupancy: self.occupancy.clone(),
            event_log: self.opts.event_log.then(|| self.log.clone()),
        })
    }

    /// Alert latency runs from the source message's creation to delivery.
    fn alert_tally(&self) -> KindTally {
        let latencies: Vec<f64> = self
            .alerts
            .iter()
            .filter_map(|(a, _, created)| a.delivered_at.map(|t| t - *created))
            .collect();
        KindTally {
            attempted: self.alerts.len() as u64,
            delivered: latencies.len() as u64,
            blocked: 0,
            latencies,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn delivered_at(&self, id: MessageId) -> Option<SimTime> {
        self.delivered_at.get(&id).copied()
    }

    pub fn cdc_arrival(&self, id: MessageId) -> Option<SimTime> {
        self.cdc_arrivals.get(&id).copied()
    }

    /// Per `(message, from, to)` transfer accounting.
    pub fn hop_transfers(&self) -> &BTreeMap<(MessageId, NodeId, NodeId), HopTransfer> {
        &self.hops
    }

    pub fn alerts(&self) -> impl Iterator<Item = &EmergencyAlert> {
        self.alerts.iter().map(|(a, _, _)| a)
    }

    pub fn area_history(&self) -> &AreaHistory {
        &self.history
    }
}

fn build_workloads(cfg: &ScenarioConfig) -> Vec<Workload> {
    let seed = cfg.seed;
    let mut out = Vec::new();
    let mut push = |id: GeneratorId, source: Source| {
        out.push(Workload {
            source,
            generator: Generator::new(id, seed),
        })
    };
    let selected = |list: &Option<Vec<NodeId>>, k: NodeId| list.as_ref().is_none_or(|l| l.contains(&k));
    for (i, k) in cfg.kiosks.iter().enumerate() {
        let kiosk = NodeId::from_slot(Role::Kiosk, i);
        for (j, field) in k.sensor_fields.iter().enumerate() {
            push(
                GeneratorId::Sensor {
                    kiosk: kiosk.index,
                    field: j as u16,
                },
                Source::Sensor {
                    model: SensorFieldModel::from_config(kiosk, field),
                    fired: 0,
                },
            );
        }
        if let Some(m) = &cfg.workloads.manual {
            if selected(&m.kiosks, kiosk) {
                push(GeneratorId::Manual { kiosk: kiosk.index }, Source::Manual { kiosk });
            }
        }
        if let Some(m) = &cfg.workloads.medical {
            if selected(&m.kiosks, kiosk) {
                push(GeneratorId::Medical { kiosk: kiosk.index }, Source::Medical { kiosk });
            }
        }
        if let Some(c) = &cfg.workloads.commerce {
            if selected(&c.kiosks, kiosk) {
                push(GeneratorId::Commerce { kiosk: kiosk.index }, Source::Commerce { kiosk });
            }
        }
    }
    for p in 0..cfg.workloads.learning.len() {
        push(
            GeneratorId::Learning { push: p as u16 },
            Source::Learning { push: p, fired: 0 },
        );
    }
    for s in 0..cfg.workloads.scripted.len() {
        push(
            GeneratorId::Scripted { index: s as u16 },
            Source::Scripted { index: s },
        );
    }
    out
}

/// Validates, runs to `opts.until` and collects the report.
pub fn run_with(cfg: ScenarioConfig, opts: RunOptions) -> Result<RunReport, SimError> {
    let mut sim = Simulation::new(cfg, opts)?;
    sim.run()?;
    sim.collect_metrics()
}

pub fn run(cfg: &ScenarioConfig, until: SimTime) -> Result<RunReport, SimError> {
    run_with(cfg.clone(), RunOptions::until(until))
}
