//! Point-mass aircraft at constant speed with a turn-rate limit, and the
//! leg planning that keeps each cell occupied for one cell time.

mod legs;
mod path;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use legs::{leg_book, relative_exit_angle, LegBook};
pub use path::{Leg, Segment};

use crate::error::GuidanceError;
use crate::geometry::{wrap_pi, wrap_tau, Pose, Vec2};
use crate::lattice::{self, direction_between, direction_heading, AirspaceConfig, CellId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub speed_mps: f64,
    pub turn_rate_radps: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self { speed_mps: 44.4, turn_rate_radps: 6.5f64.to_radians() }
    }
}

impl KinematicLimits {
    pub fn turn_radius(&self) -> f64 {
        self.speed_mps / self.turn_rate_radps
    }

    /// Time to cross one cell: spacing over speed.
    pub fn cell_time(&self, spacing: f64) -> f64 {
        spacing / self.speed_mps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub position: Vec2,
    /// Radians, 0 = +x, counter-clockwise positive.
    pub heading: f64,
    pub speed_mps: f64,
    pub flown_distance_m: f64,
    pub active: bool,
    /// Distance flown along the current leg when following one.
    pub leg_progress_m: f64,
}

impl AircraftState {
    pub fn new(position: Vec2, heading: f64, speed_mps: f64) -> Self {
        Self { position, heading, speed_mps, flown_distance_m: 0.0, active: true, leg_progress_m: 0.0 }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.heading)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_heading(self.heading) * self.speed_mps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnSense {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuidanceCommand {
    HoldHeading,
    TurnToHeading { target: f64, sense: TurnSense },
    FollowLeg(Arc<Leg>),
}

/// Advances `state` by `dt` seconds under `cmd`.
pub fn integrate(
    state: &AircraftState,
    cmd: &GuidanceCommand,
    dt: f64,
    limits: &KinematicLimits,
) -> AircraftState {
    let mut next = *state;
    if !state.active {
        return next;
    }
    let dist = state.speed_mps * dt;
    next.flown_distance_m += dist;
    match cmd {
        GuidanceCommand::HoldHeading => {
            next.position = state.position + Vec2::from_heading(state.heading) * dist;
        }
        GuidanceCommand::TurnToHeading { target, sense } => {
            let remaining = match sense {
                TurnSense::Ccw => wrap_tau(target - state.heading),
                TurnSense::Cw => wrap_tau(state.heading - target),
            };
            let max_turn = limits.turn_rate_radps * dt;
            let (turn, heading) = if remaining <= 1e-12 || remaining >= std::f64::consts::TAU - 1e-12 {
                (0.0, state.heading)
            } else if remaining <= max_turn {
                (remaining, *target)
            } else {
                let signed = if *sense == TurnSense::Ccw { max_turn } else { -max_turn };
                (max_turn, state.heading + signed)
            };
            let turn_len = (turn / limits.turn_rate_radps) * state.speed_mps;
            let sweep = if *sense == TurnSense::Ccw { turn } else { -turn };
            let radius = state.speed_mps / limits.turn_rate_radps;
            let after_turn = Segment::Arc { radius, sweep }.end(state.pose());
            next.position = after_turn.pos + Vec2::from_heading(heading) * (dist - turn_len);
            next.heading = wrap_pi(heading);
        }
        GuidanceCommand::FollowLeg(leg) => {
            next.leg_progress_m = state.leg_progress_m + dist;
            let pose = leg.pose_at(next.leg_progress_m);
            next.position = pose.pos;
            next.heading = wrap_pi(pose.heading);
        }
    }
    next
}

/// Shorter-way turn toward `target`. Keeps the heading when already within
/// 1° or when the target sits inside the turn circle on the turning side.
pub fn direct_to(state: &AircraftState, target: Vec2, limits: &KinematicLimits) -> GuidanceCommand {
    let to = target - state.position;
    if to.norm() < 1e-9 {
        return GuidanceCommand::HoldHeading;
    }
    let bearing = to.angle();
    let diff = wrap_pi(bearing - state.heading);
    if diff.abs() <= 1f64.to_radians() {
        return GuidanceCommand::HoldHeading;
    }
    let sense = if diff > 0.0 { TurnSense::Ccw } else { TurnSense::Cw };
    let r = state.speed_mps / limits.turn_rate_radps;
    let side = if sense == TurnSense::Ccw { 1.0 } else { -1.0 };
    let center = state.position + Vec2::from_heading(state.heading).perp() * (side * r);
    if center.distance(target) < r {
        return GuidanceCommand::HoldHeading;
    }
    GuidanceCommand::TurnToHeading { target: wrap_pi(bearing), sense }
}

/// A leg through one cell together with its occupation time.
#[derive(Debug, Clone)]
pub struct PlannedLeg {
    pub leg: Leg,
    pub cell: CellId,
    pub next: CellId,
    pub occupation_s: f64,
}

/// Leg across `from_cell` toward `to_cell` starting at `entry`, which must be
/// either the centroid (a departure) or the midpoint of a border crossed
/// along a lattice direction. `to_cell == from_cell` plans a holding loop.
pub fn plan_leg(
    entry: Pose,
    from_cell: CellId,
    to_cell: CellId,
    airspace: &AirspaceConfig,
    limits: &KinematicLimits,
) -> Result<PlannedLeg, GuidanceError> {
    let spacing = airspace.centroid_spacing_m;
    let book = leg_book(limits, spacing)?;
    let c = lattice::centroid(from_cell, airspace);
    let k_out = if to_cell == from_cell {
        None
    } else {
        Some(direction_between(from_cell, to_cell).ok_or(GuidanceError::NotAdjacent {
            from: from_cell,
            to: to_cell,
        })?)
    };
    let leg = if entry.pos.distance(c) < 1.0 {
        match k_out {
            Some(k) => book.departure(c, direction_heading(k)),
            None => book.origin_hold(c, entry.heading),
        }
    } else {
        let inward = c - entry.pos;
        if (inward.norm() - spacing / 2.0).abs() > 1.0 {
            return Err(GuidanceError::BadEntry(from_cell));
        }
        let k_in = (0..6)
            .find(|&k| wrap_pi(inward.angle() - direction_heading(k)).abs() < 1e-3)
            .ok_or(GuidanceError::BadEntry(from_cell))?;
        let h = direction_heading(k_in);
        match k_out {
            Some(k) => book.transit(c, h, (k + 6 - k_in) % 6),
            None => book.hold_entry(c, h),
        }
    };
    let occupation_s = leg.length() / limits.speed_mps;
    Ok(PlannedLeg { leg, cell: from_cell, next: to_cell, occupation_s })
}
