#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruralmesh_core::ScenarioConfig;
use serde_json::{json, Value};

pub fn tiny() -> ScenarioConfig {
    ScenarioConfig::from_json_str(include_str!("../fixtures/tiny.json")).unwrap()
}

pub fn district() -> ScenarioConfig {
    ScenarioConfig::from_json_str(include_str!("../../../../scenarios/rural_district.json")).unwrap()
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, options: &[T]) -> T {
    *options.choose(rng).unwrap()
}

fn pos(rng: &mut ChaCha8Rng) -> Value {
    json!({"x_km": rng.random_range(-10.0..10.0), "y_km": rng.random_range(-10.0..10.0)})
}

/// A valid scenario with up to 5 kiosks, 3 MAPs and 2 DPCs, drawn from `seed`.
pub fn random_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_kiosks = rng.random_range(1..=5usize);
    let n_maps = rng.random_range(1..=3usize);
    let n_dpcs = rng.random_range(1..=2usize);
    let kiosk_ids: Vec<String> = (1..=n_kiosks).map(|k| format!("kiosk:{k}")).collect();
    let dpc_ids: Vec<String> = (1..=n_dpcs).map(|d| format!("dpc:{d}")).collect();

    let kiosks: Vec<Value> = (0..n_kiosks)
        .map(|_| {
            let mut k = json!({
                "pos": pos(&mut rng),
                "buffer_bits": pick(&mut rng, &[400_000u64, 4_000_000, 1_000_000_000]),
            });
            if rng.random_bool(0.8) {
                k["sensor_fields"] = json!([{
                    "metric": "water_level_m",
                    "base": rng.random_range(4.0..9.0),
                    "diurnal_amplitude": rng.random_range(0.0..2.0),
                    "noise_stddev": rng.random_range(0.0..0.5),
                    "period_s": rng.random_range(300.0..3600.0),
                    "start_s": rng.random_range(0.0..600.0),
                }]);
            }
            k
        })
        .collect();

    let maps: Vec<Value> = (0..n_maps)
        .map(|_| {
            let count = rng.random_range(1..=n_kiosks);
            let mut stops: Vec<&String> = kiosk_ids
                .choose_multiple(&mut rng, count)
                .collect();
            stops.push(dpc_ids.choose(&mut rng).unwrap());
            let waypoints: Vec<Value> = stops
                .iter()
                .map(|n| json!({"node": n, "dwell_s": pick(&mut rng, &[0.0, 60.0, 300.0, 900.0])}))
                .collect();
            let mut m = json!({
                "route": {
                    "waypoints": waypoints,
                    "cyclic": rng.random_bool(0.85),
                    "speed_kmh": rng.random_range(10.0..60.0),
                },
                "buffer_bits": pick(&mut rng, &[2_000_000u64, 50_000_000, 1_000_000_000]),
            });
            if rng.random_bool(0.5) {
                m["radio"] = json!({
                    "standard": pick(&mut rng, &["802.11b", "802.11g", "802.11a"]),
                    "range_km": rng.random_range(0.05..0.5),
                    "efficiency": rng.random_range(0.2..1.0),
                });
            }
            m
        })
        .collect();

    let dpcs: Vec<Value> = (0..n_dpcs)
        .map(|d| {
            let peers: Vec<&String> = dpc_ids.iter().filter(|p| **p != dpc_ids[d]).collect();
            json!({
                "pos": pos(&mut rng),
                "peer_links": peers,
                "retry_limit": rng.random_range(0..4),
                "inbox_bits": pick(&mut rng, &[1_000_000u64, 10_000_000_000]),
                "service_s": rng.random_range(0.5..20.0),
            })
        })
        .collect();

    let hospital_dpc = dpc_ids.choose(&mut rng).unwrap();
    let target = kiosk_ids.choose(&mut rng).unwrap();
    let v = json!({
        "kiosks": kiosks,
        "maps": maps,
        "dpcs": dpcs,
        "hospitals": [{"dpc": hospital_dpc}],
        "strict_counts": false,
        "workloads": {
            "manual": {"rate_per_hour": rng.random_range(0.0..4.0)},
            "medical": {"rate_per_hour": rng.random_range(0.0..1.5), "severe_fraction": 0.2, "service_s": rng.random_range(0.0..1800.0)},
            "commerce": {"rate_per_hour": rng.random_range(0.0..2.0)},
            "learning": [{
                "dpc": dpc_ids.choose(&mut rng).unwrap(),
                "targets": [target],
                "size_bits": pick(&mut rng, &[1_000_000u64, 50_000_000, 400_000_000]),
                "start_s": rng.random_range(0.0..20_000.0),
                "period_s": 43_200.0,
            }],
            "scripted": [{
                "at_s": rng.random_range(0.0..7200.0),
                "kiosk": target,
                "kind": "sensor_batch",
                "gravity": 0.95,
                "metric": "water_level_m",
                "value": 9.9,
            }],
        },
        "seed": seed,
    });
    ScenarioConfig::from_json_value(v).unwrap()
}
