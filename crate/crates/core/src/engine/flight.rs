//! Leg sequencing for aircraft that fly cell by cell.
//!
//! The leg across a cell depends on which cell comes next, so each leg is
//! built when the following cell is granted. Grants arrive one cell ahead of
//! the aircraft and legs are chained end to end.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::kinematics::{AircraftState, Leg, LegBook};
use crate::lattice::{direction_between, direction_heading, Airspace, CellId};

/// Where the aircraft will be when it starts the next unbuilt leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Anchor {
    /// At the centroid of its origin, not yet moving.
    Centroid { cell: CellId, frame: usize },
    /// Entering `cell` across a border while travelling along direction `k_in`.
    Border { cell: CellId, k_in: usize },
    /// At the decision pose of a holding loop laid out along direction `frame`.
    Hold { cell: CellId, frame: usize },
}

impl Anchor {
    pub fn cell(self) -> CellId {
        match self {
            Anchor::Centroid { cell, .. } | Anchor::Border { cell, .. } | Anchor::Hold { cell, .. } => cell,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CellFlight {
    pub anchor: Anchor,
    legs: VecDeque<(Arc<Leg>, &'static str)>,
    /// Legs finished so far; with a plan and no holds this is the index of
    /// the cell being flown.
    pub legs_done: usize,
    pub destination: CellId,
    /// Destination granted; nothing left to request.
    pub complete: bool,
}

impl CellFlight {
    pub fn new(origin: CellId, destination: CellId, air: &Airspace) -> Self {
        // Frame for a possible first hold: toward the best neighbor.
        let toward = air
            .neighbors(origin)
            .iter()
            .min_by_key(|&&c| (air.distance(c, destination), c))
            .and_then(|&c| direction_between(origin, c))
            .unwrap_or(0);
        Self {
            anchor: Anchor::Centroid { cell: origin, frame: toward },
            legs: VecDeque::new(),
            legs_done: 0,
            destination,
            complete: false,
        }
    }

    pub fn current_leg(&self) -> Option<&Arc<Leg>> {
        self.legs.front().map(|(l, _)| l)
    }

    /// Kind of the leg being flown, for traces.
    pub fn current_kind(&self) -> &'static str {
        self.legs.front().map_or("none", |&(_, k)| k)
    }

    /// Builds the leg through the anchor cell toward `next` (the same cell
    /// for a hold). Returns false when `next` is not a neighbor.
    pub fn apply_grant(&mut self, next: CellId, book: &LegBook, air: &Airspace) -> bool {
        let cell = self.anchor.cell();
        let c = air.centroid(cell);
        if next == cell {
            let (leg, frame) = match self.anchor {
                Anchor::Centroid { frame, .. } => (book.origin_hold(c, direction_heading(frame)), frame),
                Anchor::Border { k_in, .. } => (book.hold_entry(c, direction_heading(k_in)), k_in),
                Anchor::Hold { frame, .. } => (book.hold_loop(c, direction_heading(frame)), frame),
            };
            self.legs.push_back((Arc::new(leg), "hold"));
            self.anchor = Anchor::Hold { cell, frame };
            return true;
        }
        let Some(k_out) = direction_between(cell, next).filter(|_| air.contains(next)) else {
            return false;
        };
        let (leg, kind) = match self.anchor {
            Anchor::Centroid { .. } => (book.departure(c, direction_heading(k_out)), "depart"),
            Anchor::Border { k_in, .. } => {
                (book.transit(c, direction_heading(k_in), (k_out + 6 - k_in) % 6), "transit")
            }
            Anchor::Hold { frame, .. } => {
                (book.hold_exit(c, direction_heading(frame), (k_out + 6 - frame) % 6), "hold_exit")
            }
        };
        self.legs.push_back((Arc::new(leg), kind));
        self.anchor = Anchor::Border { cell: next, k_in: k_out };
        if next == self.destination {
            self.legs.push_back((Arc::new(book.arrival(air.centroid(next), direction_heading(k_out))), "arrive"));
            self.complete = true;
        }
        true
    }

    /// Moves onto following legs once the current one is used up, carrying
    /// the excess distance over. Returns false if the aircraft ran out of
    /// legs (it then continues straight).
    pub fn settle(&mut self, state: &mut AircraftState) -> bool {
        while let Some((front, _)) = self.legs.front() {
            if state.leg_progress_m < front.length() - 1e-9 {
                break;
            }
            if self.legs.len() == 1 {
                return self.complete;
            }
            state.leg_progress_m -= front.length();
            self.legs.pop_front();
            self.legs_done += 1;
            let pose = self.legs[0].0.pose_at(state.leg_progress_m);
            state.position = pose.pos;
            state.heading = crate::geometry::wrap_pi(pose.heading);
        }
        true
    }

    /// Start heading of the first leg, for pointing the aircraft at departure.
    pub fn start_heading(&self) -> Option<f64> {
        self.legs.front().map(|(l, _)| l.start().heading)
    }
}
