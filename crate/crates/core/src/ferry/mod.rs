//! MAP mobility along fixed routes, contact detection and the resumable
//! store-and-forward transfer protocol.

pub mod buffer;
pub mod contact;
pub mod session;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{distance, GeoPoint, NodeId, Role};
use crate::scenario::{RouteConfig, ScenarioConfig};

pub use buffer::{MessageBuffer, PriorityKey};
pub use contact::{detect_contacts, phase_contact_window, segment_contact_window, ContactEdge, Edge};
pub use session::{
    eligible, open_sessions, transfer_step, ContactPair, Lane, SessionState, TransferSession,
    BIT_EPSILON,
};

/// A route resolved against node positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteGeometry {
    pub nodes: Vec<NodeId>,
    pub points: Vec<GeoPoint>,
    pub dwell_s: Vec<f64>,
    pub cyclic: bool,
    pub speed_kmh: f64,
}

impl RouteGeometry {
    /// `None` if any waypoint does not resolve to a kiosk or DPC.
    pub fn from_config(route: &RouteConfig, cfg: &ScenarioConfig) -> Option<Self> {
        let mut points = Vec::with_capacity(route.waypoints.len());
        for wp in &route.waypoints {
            points.push(cfg.fixed_pos(wp.node)?);
        }
        if points.is_empty() {
            return None;
        }
        Some(Self {
            nodes: route.waypoints.iter().map(|w| w.node).collect(),
            points,
            dwell_s: route.waypoints.iter().map(|w| w.dwell_s).collect(),
            cyclic: route.cyclic,
            speed_kmh: route.speed_kmh,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn next_waypoint(&self, i: usize) -> Option<usize> {
        if i + 1 < self.len() {
            Some(i + 1)
        } else if self.cyclic {
            Some(0)
        } else {
            None
        }
    }

    /// Travel time from waypoint `from` to the next one.
    pub fn leg_duration_s(&self, from: usize) -> f64 {
        match self.next_waypoint(from) {
            Some(to) => distance(self.points[from], self.points[to]) / self.speed_kmh * 3600.0,
            None => 0.0,
        }
    }

    pub fn cycle_time_s(&self) -> f64 {
        (0..self.len())
            .map(|i| self.dwell_s[i] + self.leg_duration_s(i))
            .sum()
    }

    pub fn kiosks(&self) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .copied()
            .filter(|n| n.role == Role::Kiosk)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LegState {
    Dwell { waypoint: usize, remaining_s: f64 },
    /// `progress` is the fraction of the leg from `from` to its successor.
    Travel { from: usize, progress: f64 },
    /// End of a non-cyclic route.
    Parked { waypoint: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub position: GeoPoint,
    pub leg: LegState,
}

impl Motion {
    pub fn start(geom: &RouteGeometry) -> Self {
        Self {
            position: geom.points[0],
            leg: LegState::Dwell {
                waypoint: 0,
                remaining_s: geom.dwell_s[0],
            },
        }
    }

    /// Seconds until the current dwell or leg ends; `None` once parked.
    pub fn time_to_next_phase(&self, geom: &RouteGeometry) -> Option<f64> {
        match self.leg {
            LegState::Dwell { remaining_s, .. } => Some(remaining_s),
            LegState::Travel { from, progress } => {
                Some((1.0 - progress) * geom.leg_duration_s(from))
            }
            LegState::Parked { .. } => None,
        }
    }

    /// Jumps to the start of the following phase.
    pub fn next_phase(&self, geom: &RouteGeometry) -> Motion {
        match self.leg {
            LegState::Dwell { waypoint, .. } => match geom.next_waypoint(waypoint) {
                Some(_) => Motion {
                    position: geom.points[waypoint],
                    leg: LegState::Travel {
                        from: waypoint,
                        progress: 0.0,
                    },
                },
                None => Motion {
                    position: geom.points[waypoint],
                    leg: LegState::Parked { waypoint },
                },
            },
            LegState::Travel { from, .. } => {
                let to = geom.next_waypoint(from).expect("travel leg has a successor");
                Motion {
                    position: geom.points[to],
                    leg: LegState::Dwell {
                        waypoint: to,
                        remaining_s: geom.dwell_s[to],
                    },
                }
            }
            LegState::Parked { .. } => *self,
        }
    }

    /// Start and end points of the current phase's path.
    pub fn phase_path(&self, geom: &RouteGeometry) -> (GeoPoint, GeoPoint) {
        match self.leg {
            LegState::Travel { from, .. } => {
                let to = geom.next_waypoint(from).expect("travel leg has a successor");
                (self.position, geom.points[to])
            }
            _ => (self.position, self.position),
        }
    }
}

/// Moves a ferry forward by `dt` seconds: dwell time is consumed first, then
/// straight-line travel at the route speed; cyclic routes wrap around.
pub fn advance_position(motion: Motion, dt: f64, geom: &RouteGeometry) -> Motion {
    assert!(dt >= 0.0, "negative time step");
    let mut m = motion;
    let mut left = dt;
    if geom.cyclic && geom.cycle_time_s() <= 0.0 {
        return m;
    }
    while left > 0.0 {
        let Some(phase) = m.time_to_next_phase(geom) else {
            break;
        };
        if left < phase {
            match &mut m.leg {
                LegState::Dwell { remaining_s, .. } => *remaining_s -= left,
                LegState::Travel { from, progress } => {
                    let to = geom.next_waypoint(*from).expect("travel leg has a successor");
                    *progress += left / geom.leg_duration_s(*from);
                    m.position = geom.points[*from].lerp(&geom.points[to], *progress);
                }
                LegState::Parked { .. } => unreachable!(),
            }
            break;
        }
        left -= phase;
        m = m.next_phase(geom);
    }
    m
}

/// A MAP's mobile state: where it is and what it carries.
#[derive(Debug, Clone)]
pub struct FerryState {
    pub map_id: NodeId,
    pub motion: Motion,
    pub buffer: MessageBuffer,
}

impl FerryState {
    pub fn new(map_id: NodeId, geom: &RouteGeometry, capacity_bits: u64) -> Self {
        Self {
            map_id,
            motion: Motion::start(geom),
            buffer: MessageBuffer::new(map_id, capacity_bits),
        }
    }

    pub fn position(&self) -> GeoPoint {
        self.motion.position
    }
}
