//! Wi-Fi link abstraction: range, nominal rate, non-overlapping channel
//! count, fair-share contention and transfer-time arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::RadioError;
use crate::model::{distance, GeoPoint};

pub const DEFAULT_EFFICIENCY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadioStandard {
    #[serde(rename = "802.11b")]
    Dot11B,
    #[serde(rename = "802.11g")]
    Dot11G,
    #[serde(rename = "802.11a")]
    Dot11A,
}

impl RadioStandard {
    /// Nominal PHY rate in bits per second.
    pub fn nominal_bps(self) -> f64 {
        match self {
            RadioStandard::Dot11B => 11_000_000.0,
            RadioStandard::Dot11G | RadioStandard::Dot11A => 54_000_000.0,
        }
    }

    /// Non-overlapping channels available at one site.
    pub fn channels(self) -> u32 {
        match self {
            RadioStandard::Dot11B | RadioStandard::Dot11G => 3,
            RadioStandard::Dot11A => 12,
        }
    }

    /// 5 GHz 802.11a reaches less far than the 2.4 GHz standards.
    pub fn default_range_km(self) -> f64 {
        match self {
            RadioStandard::Dot11B | RadioStandard::Dot11G => 0.10,
            RadioStandard::Dot11A => 0.05,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RadioStandard::Dot11B => "802.11b",
            RadioStandard::Dot11G => "802.11g",
            RadioStandard::Dot11A => "802.11a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub standard: RadioStandard,
    pub range_km: f64,
    /// Fraction of the nominal rate achieved as goodput, in (0, 1].
    pub efficiency: f64,
}

impl LinkProfile {
    pub fn new(standard: RadioStandard) -> Self {
        Self {
            standard,
            range_km: standard.default_range_km(),
            efficiency: DEFAULT_EFFICIENCY,
        }
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Self {
        self.efficiency = efficiency;
        self
    }

    pub fn with_range(mut self, range_km: f64) -> Self {
        self.range_km = range_km;
        self
    }

    /// Upper bound on summed goodput across all sessions at one site.
    pub fn site_capacity_bps(&self) -> f64 {
        self.efficiency * self.standard.nominal_bps() * self.standard.channels() as f64
    }
}

/// Boundary distance counts as in range.
pub fn in_range(a: GeoPoint, b: GeoPoint, profile: &LinkProfile) -> bool {
    distance(a, b) <= profile.range_km
}

/// Per-session goodput when `concurrent_sessions` share one fixed site.
///
/// Sessions up to the channel count each get a full channel; beyond that the
/// channels are shared fairly.
pub fn effective_rate(profile: &LinkProfile, concurrent_sessions: u32) -> f64 {
    let k = concurrent_sessions.max(1);
    let channels = profile.standard.channels();
    let share = if k <= channels {
        1.0
    } else {
        channels as f64 / k as f64
    };
    profile.efficiency * profile.standard.nominal_bps() * share
}

pub fn transfer_time(size_bits: u64, rate_bps: f64) -> Result<f64, RadioError> {
    if rate_bps <= 0.0 {
        return Err(RadioError::ZeroRate);
    }
    Ok(size_bits as f64 / rate_bps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ideal(standard: RadioStandard) -> LinkProfile {
        LinkProfile::new(standard).with_efficiency(1.0)
    }

    #[test]
    fn range_examples() {
        let p = LinkProfile::new(RadioStandard::Dot11B);
        let origin = GeoPoint::new(0.0, 0.0);
        assert!(in_range(origin, origin, &p));
        assert!(in_range(origin, GeoPoint::new(0.10, 0.0), &p));
        assert!(!in_range(origin, GeoPoint::new(0.12, 0.0), &p));
        assert!(
            RadioStandard::Dot11A.default_range_km() < RadioStandard::Dot11B.default_range_km()
        );
        assert!(
            RadioStandard::Dot11A.default_range_km() < RadioStandard::Dot11G.default_range_km()
        );
    }

    #[test]
    fn rate_examples() {
        let b = LinkProfile::new(RadioStandard::Dot11B);
        assert_eq!(effective_rate(&b, 1), 5_500_000.0);

        // 3 channels x 11 Mbps shared by 5 sessions
        let b1 = ideal(RadioStandard::Dot11B);
        assert_eq!(effective_rate(&b1, 5), 6_600_000.0);
        assert!((5.0 * effective_rate(&b1, 5) - 33_000_000.0).abs() < 1e-6);

        let a1 = ideal(RadioStandard::Dot11A);
        assert_eq!(effective_rate(&a1, 5), 54_000_000.0);
    }

    #[test]
    fn transfer_time_examples() {
        assert_eq!(transfer_time(0, 1.0).unwrap(), 0.0);
        assert_eq!(transfer_time(8_250_000, 5_500_000.0).unwrap(), 1.5);
        let b1 = ideal(RadioStandard::Dot11B);
        assert_eq!(transfer_time(11_000_000, effective_rate(&b1, 1)).unwrap(), 1.0);
        assert_eq!(transfer_time(10, 0.0), Err(RadioError::ZeroRate));
    }

    fn profile() -> impl Strategy<Value = LinkProfile> {
        (
            prop_oneof![
                Just(RadioStandard::Dot11A),
                Just(RadioStandard::Dot11B),
                Just(RadioStandard::Dot11G)
            ],
            0.01f64..=1.0,
            0.01f64..5.0,
        )
            .prop_map(|(s, e, r)| LinkProfile::new(s).with_efficiency(e).with_range(r))
    }

    proptest! {
        #[test]
        fn rate_non_increasing_and_capped(p in profile(), k in 1u32..64) {
            prop_assert!(effective_rate(&p, k + 1) <= effective_rate(&p, k));
            prop_assert!(effective_rate(&p, k) <= effective_rate(&p, 1));
            prop_assert!(k as f64 * effective_rate(&p, k) <= p.site_capacity_bps() * (1.0 + 1e-12));
        }

        #[test]
        fn range_is_symmetric(p in profile(), ax in -1.0f64..1.0, ay in -1.0f64..1.0, bx in -1.0f64..1.0, by in -1.0f64..1.0) {
            let a = GeoPoint::new(ax, ay);
            let b = GeoPoint::new(bx, by);
            prop_assert_eq!(in_range(a, b, &p), in_range(b, a, &p));
        }

        #[test]
        fn dot11a_wins_under_heavy_contention(e in 0.01f64..=1.0, k in 4u32..64) {
            let agg = |s| k as f64 * effective_rate(&LinkProfile::new(s).with_efficiency(e), k);
            prop_assert!(agg(RadioStandard::Dot11A) > agg(RadioStandard::Dot11B));
            prop_assert!(agg(RadioStandard::Dot11A) > agg(RadioStandard::Dot11G));
        }
    }
}
