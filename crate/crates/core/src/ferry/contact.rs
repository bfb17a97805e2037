//! Contact windows between moving MAPs and fixed sites.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ferry::{LegState, Motion, RouteGeometry};
use crate::model::{distance, GeoPoint, NodeId};

/// Fractions `[s0, s1]` of the segment `a -> b` lying within `range_km` of
/// `center`, boundary inclusive.
pub fn segment_contact_window(
    a: GeoPoint,
    b: GeoPoint,
    center: GeoPoint,
    range_km: f64,
) -> Option<(f64, f64)> {
    let (dx, dy) = (b.x_km - a.x_km, b.y_km - a.y_km);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (distance(a, center) <= range_km).then_some((0.0, 1.0));
    }
    let (fx, fy) = (a.x_km - center.x_km, a.y_km - center.y_km);
    // Closest approach of the infinite line, then the half-chord around it.
    let s_star = -(fx * dx + fy * dy) / len2;
    let (px, py) = (fx + s_star * dx, fy + s_star * dy);
    let miss2 = px * px + py * py;
    let r2 = range_km * range_km;
    if miss2 > r2 {
        return None;
    }
    let half = ((r2 - miss2) / len2).sqrt();
    let mut s0 = (s_star - half).max(0.0);
    let mut s1 = (s_star + half).min(1.0);
    // Endpoints that are in range by direct measurement pin the window.
    if distance(a, center) <= range_km {
        s0 = 0.0;
    }
    if distance(b, center) <= range_km {
        s1 = 1.0;
    }
    (s0 <= s1).then_some((s0, s1))
}

/// In-range interval of the ferry's current phase, in seconds from the
/// phase start. The end is infinite for a parked ferry.
pub fn phase_contact_window(
    motion: &Motion,
    geom: &RouteGeometry,
    site: GeoPoint,
    range_km: f64,
) -> Option<(f64, f64)> {
    match motion.leg {
        LegState::Dwell { remaining_s, .. } => {
            (distance(motion.position, site) <= range_km).then_some((0.0, remaining_s))
        }
        LegState::Parked { .. } => {
            (distance(motion.position, site) <= range_km).then_some((0.0, f64::INFINITY))
        }
        LegState::Travel { .. } => {
            let duration = motion.time_to_next_phase(geom).unwrap_or(0.0);
            let (a, b) = motion.phase_path(geom);
            segment_contact_window(a, b, site, range_km).map(|(s0, s1)| (s0 * duration, s1 * duration))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Begin,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEdge {
    pub map: NodeId,
    pub site: NodeId,
    pub edge: Edge,
}

/// Snapshot contact detection: compares current positions against the set
/// of pairs in contact and emits one edge per change, updating `active`.
///
/// `ferries` holds `(map, position, range_km)`.
pub fn detect_contacts(
    ferries: &[(NodeId, GeoPoint, f64)],
    fixed: &[(NodeId, GeoPoint)],
    active: &mut BTreeSet<(NodeId, NodeId)>,
) -> Vec<ContactEdge> {
    let mut edges = Vec::new();
    for &(map, pos, range) in ferries {
        for &(site, site_pos) in fixed {
            let near = distance(pos, site_pos) <= range;
            let was = active.contains(&(map, site));
            if near && !was {
                active.insert((map, site));
                edges.push(ContactEdge {
                    map,
                    site,
                    edge: Edge::Begin,
                });
            } else if !near && was {
                active.remove(&(map, site));
                edges.push(ContactEdge {
                    map,
                    site,
                    edge: Edge::End,
                });
            }
        }
    }
    edges
}
