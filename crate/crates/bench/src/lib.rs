//! Shared inputs for the benchmarks.

use ruralmesh_core::ScenarioConfig;

pub const DISTRICT: &str = include_str!("../../../scenarios/rural_district.json");
pub const TINY: &str = include_str!("../../core/tests/fixtures/tiny.json");

pub fn district() -> ScenarioConfig {
    ScenarioConfig::from_json_str(DISTRICT).expect("shipped scenario parses")
}

pub fn tiny() -> ScenarioConfig {
    ScenarioConfig::from_json_str(TINY).expect("fixture parses")
}

/// The district scenario with every workload rate multiplied by `factor`.
pub fn district_scaled(factor: f64) -> ScenarioConfig {
    let mut cfg = district();
    let w = &mut cfg.workloads;
    if let Some(m) = w.manual.as_mut() {
        m.rate_per_hour *= factor;
    }
    if let Some(m) = w.medical.as_mut() {
        m.rate_per_hour *= factor;
    }
    if let Some(c) = w.commerce.as_mut() {
        c.rate_per_hour *= factor;
    }
    for k in &mut cfg.kiosks {
        for f in &mut k.sensor_fields {
            f.period_s /= factor;
        }
    }
    cfg
}
