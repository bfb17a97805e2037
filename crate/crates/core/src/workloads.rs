//! Traffic generators: sensor batches, manual records, e-medicine requests
//! and responses, e-learning pushes and e-commerce orders.
//!
//! Every generator draws from its own ChaCha8 stream derived from the
//! scenario seed and the generator's identity, so adding or removing one
//! generator never shifts the draws of another.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::model::{Message, MessageId, MessageKind, NodeId, Role, SimTime};
use crate::scenario::{
    CommerceWorkload, LearningPushConfig, ManualWorkload, MedicalWorkload, ScriptedMessage,
    SensorFieldConfig,
};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Set on a response id to derive it from its request id.
pub const RESPONSE_ID_BIT: u64 = 1 << 63;

/// Piecewise-linear map from a measured value to gravity, flat outside the
/// first and last knots.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityRamp {
    knots: Vec<(f64, f64)>,
}

impl GravityRamp {
    pub fn new(knots: Vec<(f64, f64)>) -> Self {
        assert!(!knots.is_empty(), "gravity ramp needs a knot");
        Self { knots }
    }

    pub fn gravity(&self, value: f64) -> f64 {
        let k = &self.knots;
        let g = if value <= k[0].0 {
            k[0].1
        } else if value >= k[k.len() - 1].0 {
            k[k.len() - 1].1
        } else {
            let i = k.windows(2).position(|w| value < w[1].0).expect("value inside knots");
            let ((x0, g0), (x1, g1)) = (k[i], k[i + 1]);
            g0 + (g1 - g0) * (value - x0) / (x1 - x0)
        };
        g.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorId {
    Sensor { kiosk: u16, field: u16 },
    Manual { kiosk: u16 },
    Medical { kiosk: u16 },
    Commerce { kiosk: u16 },
    Learning { push: u16 },
    Scripted { index: u16 },
}

impl GeneratorId {
    fn parts(&self) -> (u64, u64, u64) {
        match *self {
            GeneratorId::Sensor { kiosk, field } => (1, kiosk as u64, field as u64),
            GeneratorId::Manual { kiosk } => (2, kiosk as u64, 0),
            GeneratorId::Medical { kiosk } => (3, kiosk as u64, 0),
            GeneratorId::Commerce { kiosk } => (4, kiosk as u64, 0),
            GeneratorId::Learning { push } => (5, push as u64, 0),
            GeneratorId::Scripted { index } => (6, index as u64, 0),
        }
    }

    pub fn stream(&self) -> u64 {
        let (class, a, b) = self.parts();
        class << 48 | a << 16 | b
    }

    /// Message ids are `class:8 | a:16 | b:8 | counter:32`.
    fn id_base(&self) -> u64 {
        let (class, a, b) = self.parts();
        class << 56 | a << 40 | (b & 0xff) << 32
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A generator's private random stream and id counter.
#[derive(Debug, Clone)]
pub struct Generator {
    pub id: GeneratorId,
    rng: ChaCha8Rng,
    issued: u32,
}

impl Generator {
    pub fn new(id: GeneratorId, seed: u64) -> Self {
        Self {
            id,
            rng: stream_rng(seed, id.stream()),
            issued: 0,
        }
    }

    pub fn next_message_id(&mut self) -> MessageId {
        let id = MessageId(self.id.id_base() | self.issued as u64);
        self.issued = self.issued.checked_add(1).expect("generator id space exhausted");
        id
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Sensor field attached to a kiosk: a noisy diurnal sinusoid sampled
/// periodically.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFieldModel {
    pub kiosk: NodeId,
    pub metric: String,
    pub base: f64,
    pub diurnal_amplitude: f64,
    pub noise_stddev: f64,
    pub period_s: f64,
    pub start_s: f64,
    pub size_bits: u64,
    pub ramp: GravityRamp,
}

impl SensorFieldModel {
    pub fn from_config(kiosk: NodeId, cfg: &SensorFieldConfig) -> Self {
        Self {
            kiosk,
            metric: cfg.metric.clone(),
            base: cfg.base,
            diurnal_amplitude: cfg.diurnal_amplitude,
            noise_stddev: cfg.noise_stddev,
            period_s: cfg.period_s,
            start_s: cfg.start_s,
            size_bits: cfg.size_bits,
            ramp: GravityRamp::new(cfg.gravity_ramp.clone()),
        }
    }

    pub fn expected_value(&self, now: SimTime) -> f64 {
        self.base + self.diurnal_amplitude * (TAU * now.secs() / SECONDS_PER_DAY).sin()
    }

    /// No draw is taken when the noise is zero.
    pub fn sample_value<R: Rng + ?Sized>(&self, now: SimTime, rng: &mut R) -> f64 {
        let clean = self.expected_value(now);
        if self.noise_stddev > 0.0 {
            let noise = Normal::new(0.0, self.noise_stddev).expect("validated stddev");
            clean + noise.sample(rng)
        } else {
            clean
        }
    }

    pub fn gen_sensor_batch<R: Rng + ?Sized>(&self, id: MessageId, now: SimTime, rng: &mut R) -> Message {
        let value = self.sample_value(now, rng);
        Message::new(
            id,
            MessageKind::SensorBatch,
            self.size_bits,
            self.kiosk,
            Role::Dpc,
            now,
            self.ramp.gravity(value),
        )
        .with_measurement(self.metric.clone(), value)
    }
}

/// Exponential inter-arrival time for a Poisson process; `None` at rate 0.
pub fn poisson_gap_s<R: Rng + ?Sized>(rate_per_hour: f64, rng: &mut R) -> Option<f64> {
    if rate_per_hour <= 0.0 {
        return None;
    }
    let exp = Exp::new(rate_per_hour / 3600.0).expect("positive rate");
    Some(exp.sample(rng))
}

/// Arrival instants of a Poisson process in `[from, until)`.
pub fn poisson_arrivals<R: Rng + ?Sized>(
    rate_per_hour: f64,
    from: SimTime,
    until: SimTime,
    rng: &mut R,
) -> Vec<SimTime> {
    let mut out = Vec::new();
    let mut t = from.secs();
    while let Some(gap) = poisson_gap_s(rate_per_hour, rng) {
        t += gap;
        if t >= until.secs() {
            break;
        }
        out.push(SimTime::from_secs(t));
    }
    out
}

pub fn gen_manual_record<R: Rng + ?Sized>(
    kiosk: NodeId,
    spec: &ManualWorkload,
    id: MessageId,
    now: SimTime,
    rng: &mut R,
) -> Message {
    let msg = Message::new(
        id,
        MessageKind::ManualRecord,
        spec.size_bits,
        kiosk,
        Role::Dpc,
        now,
        spec.gravity,
    );
    match &spec.metric {
        Some(metric) => {
            let value = if spec.value_stddev > 0.0 {
                Normal::new(spec.value_mean, spec.value_stddev)
                    .expect("validated stddev")
                    .sample(rng)
            } else {
                spec.value_mean
            };
            msg.with_measurement(metric.clone(), value)
        }
        None => msg,
    }
}

/// All manual records a kiosk enters in `[from, until)`.
pub fn gen_manual_records(
    kiosk: NodeId,
    spec: &ManualWorkload,
    from: SimTime,
    until: SimTime,
    generator: &mut Generator,
) -> Vec<Message> {
    let times = poisson_arrivals(spec.rate_per_hour, from, until, generator.rng());
    times
        .into_iter()
        .map(|t| {
            let id = generator.next_message_id();
            gen_manual_record(kiosk, spec, id, t, generator.rng())
        })
        .collect()
}

pub fn gen_commerce_order(kiosk: NodeId, spec: &CommerceWorkload, id: MessageId, now: SimTime) -> Message {
    Message::new(
        id,
        MessageKind::CommerceOrder,
        spec.size_bits,
        kiosk,
        Role::Dpc,
        now,
        0.0,
    )
}

/// A request bound for the workload's hospital; with probability
/// `severe_fraction` it carries the severe gravity.
pub fn gen_medical_request<R: Rng + ?Sized>(
    kiosk: NodeId,
    spec: &MedicalWorkload,
    id: MessageId,
    now: SimTime,
    rng: &mut R,
) -> Message {
    let severe = spec.severe_fraction > 0.0 && rng.random_bool(spec.severe_fraction.min(1.0));
    let gravity = if severe { spec.severe_gravity } else { spec.gravity };
    Message::new(
        id,
        MessageKind::MedicalRequest,
        spec.size_bits,
        kiosk,
        Role::Hospital,
        now,
        gravity,
    )
    .with_destination(spec.hospital)
}

/// The hospital's answer, addressed back to the requesting kiosk.
pub fn medical_response(request: &Message, hospital: NodeId, size_bits: u64, now: SimTime) -> Message {
    let mut resp = Message::new(
        MessageId(request.id.0 | RESPONSE_ID_BIT),
        MessageKind::MedicalResponse,
        size_bits,
        hospital,
        Role::Kiosk,
        now,
        request.gravity,
    )
    .with_destination(request.origin);
    resp.in_reply_to = Some(request.id);
    resp
}

/// One content message per target kiosk, queued at the pushing DPC.
pub fn gen_learning_push(spec: &LearningPushConfig, generator: &mut Generator, now: SimTime) -> Vec<Message> {
    spec.targets
        .iter()
        .map(|&kiosk| {
            Message::new(
                generator.next_message_id(),
                MessageKind::LearningContent,
                spec.size_bits,
                spec.dpc,
                Role::Kiosk,
                now,
                0.0,
            )
            .with_destination(kiosk)
        })
        .collect()
}

pub fn scripted_message(spec: &ScriptedMessage, id: MessageId, default_hospital: NodeId) -> Message {
    let final_role = match spec.kind {
        MessageKind::MedicalRequest => Role::Hospital,
        _ => Role::Dpc,
    };
    let mut msg = Message::new(
        id,
        spec.kind,
        spec.resolved_size_bits(),
        spec.kiosk,
        final_role,
        SimTime::from_secs(spec.at_s),
        spec.gravity,
    );
    if spec.kind == MessageKind::MedicalRequest {
        msg = msg.with_destination(spec.hospital.unwrap_or(default_hospital));
    }
    if let (Some(metric), Some(value)) = (&spec.metric, spec.value) {
        msg = msg.with_measurement(metric.clone(), value);
    }
    msg
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flood_field(noise: f64) -> SensorFieldModel {
        SensorFieldModel {
            kiosk: NodeId::kiosk(1),
            metric: "water_level_m".into(),
            base: 6.0,
            diurnal_amplitude: 1.0,
            noise_stddev: noise,
            period_s: 900.0,
            start_s: 0.0,
            size_bits: 80_000,
            ramp: GravityRamp::new(vec![(8.0, 0.0), (10.0, 1.0)]),
        }
    }

    fn manual(rate: f64) -> ManualWorkload {
        ManualWorkload {
            rate_per_hour: rate,
            size_bits: 40_000,
            gravity: 0.1,
            metric: None,
            value_mean: 0.0,
            value_stddev: 0.0,
            kiosks: None,
        }
    }

    #[test]
    fn noiseless_sensor_is_exact() {
        let f = flood_field(0.0);
        let mut rng = stream_rng(1, 1);
        let t = SimTime::from_secs(21_600.0);
        // A quarter day puts the sinusoid at its peak.
        let m = f.gen_sensor_batch(MessageId(1), t, &mut rng);
        assert_eq!(m.payload_value, Some(7.0));
        assert_eq!(m.origin, NodeId::kiosk(1));
        assert_eq!(m.final_role, Role::Dpc);
    }

    #[test]
    fn flood_ramp_midway() {
        let ramp = GravityRamp::new(vec![(8.0, 0.0), (10.0, 1.0)]);
        assert_abs_diff_eq!(ramp.gravity(9.5), 0.75, epsilon = 1e-12);
        assert_eq!(ramp.gravity(7.0), 0.0);
        assert_eq!(ramp.gravity(12.0), 1.0);
    }

    #[test]
    fn seeded_sequences_repeat() {
        let f = flood_field(0.2);
        let run = || {
            let mut g = Generator::new(GeneratorId::Sensor { kiosk: 1, field: 0 }, 42);
            (0..20)
                .map(|i| {
                    let id = g.next_message_id();
                    f.gen_sensor_batch(id, SimTime::from_secs(900.0 * i as f64), g.rng())
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_rate_generates_nothing() {
        let mut g = Generator::new(GeneratorId::Manual { kiosk: 1 }, 7);
        let out = gen_manual_records(NodeId::kiosk(1), &manual(0.0), SimTime::ZERO, SimTime::from_hours(10.0), &mut g);
        assert!(out.is_empty());
    }

    #[test]
    fn manual_poisson_count() {
        let spec = manual(2.0);
        let count = |seed: u64| {
            let mut g = Generator::new(GeneratorId::Manual { kiosk: 1 }, seed);
            gen_manual_records(NodeId::kiosk(1), &spec, SimTime::ZERO, SimTime::from_hours(10.0), &mut g).len()
        };
        // The count for a seed equals an independent replay of the same stream.
        let mut rng = stream_rng(5, GeneratorId::Manual { kiosk: 1 }.stream());
        let exp = Exp::new(2.0 / 3600.0).unwrap();
        let mut t = 0.0;
        let mut expected = 0;
        loop {
            t += exp.sample(&mut rng);
            if t >= 36_000.0 {
                break;
            }
            expected += 1;
        }
        assert_eq!(count(5), expected);
        let mean = (0..1000).map(count).sum::<usize>() as f64 / 1000.0;
        assert!((mean - 20.0).abs() <= 1.0, "mean {mean}");
    }

    #[test]
    fn manual_record_construction() {
        let mut rng = stream_rng(0, 0);
        let m = gen_manual_record(NodeId::kiosk(3), &manual(1.0), MessageId(9), SimTime::ZERO, &mut rng);
        assert_eq!(m.kind, MessageKind::ManualRecord);
        assert_eq!(m.origin, NodeId::kiosk(3));
        assert_eq!(m.final_role, Role::Dpc);
        assert_eq!(m.gravity, 0.1);
    }

    #[test]
    fn commerce_examples() {
        let spec = CommerceWorkload {
            rate_per_hour: 3.0,
            size_bits: 40_000,
            kiosks: None,
        };
        let m = gen_commerce_order(NodeId::kiosk(2), &spec, MessageId(1), SimTime::ZERO);
        assert_eq!(m.kind, MessageKind::CommerceOrder);
        assert_eq!(m.final_role, Role::Dpc);
        assert_eq!(m.gravity, 0.0);
        let mut rng = stream_rng(1, 9);
        assert!(poisson_gap_s(0.0, &mut rng).is_none());
        let mean = (0..1000)
            .map(|s| poisson_arrivals(3.0, SimTime::ZERO, SimTime::from_hours(10.0), &mut stream_rng(s, 4)).len())
            .sum::<usize>() as f64
            / 1000.0;
        assert!((mean - 30.0).abs() <= 1.5, "mean {mean}");
    }

    #[test]
    fn learning_push_per_target() {
        let mut g = Generator::new(GeneratorId::Learning { push: 1 }, 0);
        let mut spec = LearningPushConfig {
            dpc: NodeId::dpc(1),
            targets: vec![NodeId::kiosk(1), NodeId::kiosk(2), NodeId::kiosk(3)],
            size_bits: 400_000_000,
            start_s: 0.0,
            period_s: None,
        };
        let msgs = gen_learning_push(&spec, &mut g, SimTime::ZERO);
        assert_eq!(msgs.len(), 3);
        assert!(msgs.iter().all(|m| m.final_role == Role::Kiosk && m.gravity == 0.0));
        assert_eq!(msgs[2].destination, Some(NodeId::kiosk(3)));
        // 400 Mbit at 5.5 Mbps needs 72.7 s of contact.
        assert_abs_diff_eq!(400e6 / 5.5e6, 72.727, epsilon = 1e-3);
        spec.targets.clear();
        assert!(gen_learning_push(&spec, &mut g, SimTime::ZERO).is_empty());
    }

    #[test]
    fn response_inherits_request() {
        let mut rng = stream_rng(0, 0);
        let spec = MedicalWorkload {
            rate_per_hour: 1.0,
            size_bits: 200_000,
            response_size_bits: 200_000,
            hospital: NodeId::hospital(1),
            service_s: 0.0,
            gravity: 0.3,
            severe_fraction: 1.0,
            severe_gravity: 0.9,
            kiosks: None,
        };
        let req = gen_medical_request(NodeId::kiosk(2), &spec, MessageId(5), SimTime::ZERO, &mut rng);
        assert_eq!(req.gravity, 0.9);
        assert_eq!(req.final_role, Role::Hospital);
        let resp = medical_response(&req, NodeId::hospital(1), 200_000, SimTime::from_secs(10.0));
        assert_eq!(resp.destination, Some(NodeId::kiosk(2)));
        assert_eq!(resp.final_role, Role::Kiosk);
        assert_eq!(resp.gravity, 0.9);
        assert_eq!(resp.incident(), req.id);
    }

    #[test]
    fn generator_ids_are_disjoint() {
        let mut a = Generator::new(GeneratorId::Sensor { kiosk: 1, field: 0 }, 0);
        let mut b = Generator::new(GeneratorId::Manual { kiosk: 1 }, 0);
        let mut c = Generator::new(GeneratorId::Sensor { kiosk: 1, field: 1 }, 0);
        let ids: std::collections::BTreeSet<_> =
            (0..100).flat_map(|_| [a.next_message_id(), b.next_message_id(), c.next_message_id()]).collect();
        assert_eq!(ids.len(), 300);
    }

    proptest! {
        #[test]
        fn ramp_is_monotone_and_bounded(a in -5.0f64..20.0, b in -5.0f64..20.0) {
            let ramp = GravityRamp::new(vec![(8.0, 0.0), (10.0, 1.0)]);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ramp.gravity(lo) <= ramp.gravity(hi));
            prop_assert!((0.0..=1.0).contains(&ramp.gravity(a)));
        }

        #[test]
        fn sensor_gravity_in_unit_interval(seed in any::<u64>(), t in 0.0f64..1e6) {
            let f = flood_field(3.0);
            let m = f.gen_sensor_batch(MessageId(1), SimTime::from_secs(t), &mut stream_rng(seed, 1));
            prop_assert!((0.0..=1.0).contains(&m.gravity));
        }
    }
}
