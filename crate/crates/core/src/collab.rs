//! Collaborative allocation: aircraft reserve their next neighbor cell for
//! one cell time, negotiating in ascending id order.
//!
//! Grants are immutable. A cell stays blocked after its owner's last
//! reservation ends until that owner reserves somewhere else (or arrives),
//! so an aircraft that finds every neighbor taken can always loop in place.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lattice::{Airspace, CellId};

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub cell: CellId,
    pub owner: usize,
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// Destination reservation: the owner leaves the airspace inside it.
    pub terminal: bool,
}

impl Reservation {
    pub fn duration(&self) -> f64 {
        self.t_end_s - self.t_start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrantKind {
    Transit,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub reservation: Reservation,
    pub kind: GrantKind,
}

/// One aircraft asking for the cell after its latest reservation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub owner: usize,
    pub current: Reservation,
    pub destination: CellId,
    /// Tried before the distance-ordered neighbors (a strategic plan's next cell).
    pub preferred: Option<CellId>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReservationLedger {
    cells: BTreeMap<CellId, Vec<Reservation>>,
    last: BTreeMap<usize, Reservation>,
    departed: Vec<usize>,
}

enum Verdict {
    Free,
    /// Blocked only because the owner of its latest reservation has not
    /// yet moved on; that owner may still do so this tick.
    Parked(usize),
    Taken,
}

impl ReservationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, r: Reservation) {
        let list = self.cells.entry(r.cell).or_default();
        let at = list.partition_point(|x| x.t_start_s <= r.t_start_s);
        list.insert(at, r);
        let newer = self.last.get(&r.owner).is_none_or(|l| r.t_end_s >= l.t_end_s);
        if newer {
            self.last.insert(r.owner, r);
        }
    }

    pub fn last_of(&self, owner: usize) -> Option<&Reservation> {
        self.last.get(&owner)
    }

    fn verdict(&self, cell: CellId, t_start: f64, requester: usize) -> Verdict {
        let Some(list) = self.cells.get(&cell) else { return Verdict::Free };
        let mut parked = None;
        for r in list.iter().filter(|r| r.owner != requester) {
            if r.t_end_s > t_start + EPS {
                return Verdict::Taken;
            }
            let is_last = self.last.get(&r.owner) == Some(r);
            if is_last && !r.terminal && !self.departed.contains(&r.owner) {
                parked = Some(r.owner);
            }
        }
        match parked {
            Some(o) => Verdict::Parked(o),
            None => Verdict::Free,
        }
    }

    /// Whether `cell` may be reserved by `requester` from `t_start` on.
    pub fn is_free(&self, cell: CellId, t_start: f64, requester: usize) -> bool {
        matches!(self.verdict(cell, t_start, requester), Verdict::Free) && !self.is_swap(cell, t_start, requester)
    }

    // Moving into a cell whose owner is moving into ours at the same instant.
    fn is_swap(&self, cell: CellId, t: f64, requester: usize) -> bool {
        let Some(mine) = self.last.get(&requester) else { return false };
        let Some(theirs) = self.cells.get(&mine.cell) else { return false };
        theirs.iter().any(|r| {
            r.owner != requester
                && (r.t_start_s - t).abs() <= EPS
                && self
                    .cells
                    .get(&cell)
                    .is_some_and(|l| l.iter().any(|x| x.owner == r.owner && (x.t_end_s - t).abs() <= EPS))
        })
    }

    /// Cell owner at time `t`, if any.
    pub fn owner_at(&self, cell: CellId, t: f64) -> Option<usize> {
        self.cells
            .get(&cell)?
            .iter()
            .find(|r| r.t_start_s - EPS <= t && t < r.t_end_s - EPS)
            .map(|r| r.owner)
    }

    /// Flat dump, ordered by cell then start time.
    pub fn rows(&self) -> Vec<Reservation> {
        self.cells.values().flatten().copied().collect()
    }

    pub fn reservations_of(&self, owner: usize) -> Vec<Reservation> {
        let mut out: Vec<Reservation> = self.rows().into_iter().filter(|r| r.owner == owner).collect();
        out.sort_by(|a, b| a.t_start_s.total_cmp(&b.t_start_s));
        out
    }

    /// Handles all requests raised at one tick. Lower ids choose first; a
    /// request whose better candidate waits on another pending aircraft is
    /// retried after the others.
    pub fn process_requests(&mut self, requests: &[Request], air: &Airspace, t_cell: f64) -> Vec<Grant> {
        let mut pending: Vec<Request> = requests.to_vec();
        pending.sort_by_key(|r| r.owner);
        let mut grants = Vec::with_capacity(pending.len());
        while !pending.is_empty() {
            let mut progress = true;
            while progress {
                progress = false;
                let mut i = 0;
                while i < pending.len() {
                    let waiting: Vec<usize> = pending.iter().map(|r| r.owner).collect();
                    match self.evaluate(&pending[i], air, &waiting) {
                        Some(cell) => {
                            grants.push(self.grant(&pending[i], cell, t_cell));
                            pending.remove(i);
                            progress = true;
                        }
                        None => i += 1,
                    }
                }
            }
            if let Some(req) = pending.first().copied() {
                // Nobody can move: the first in line gives up on waiting.
                let cell = self.evaluate(&req, air, &[]).expect("no waiting means a decision");
                grants.push(self.grant(&req, cell, t_cell));
                pending.remove(0);
            }
        }
        grants
    }

    fn candidates(req: &Request, air: &Airspace) -> Vec<CellId> {
        let cur = req.current.cell;
        let mut out: Vec<CellId> = Vec::with_capacity(7);
        if let Some(p) = req.preferred.filter(|p| air.neighbors(cur).contains(p)) {
            out.push(p);
        }
        let mut rest: Vec<CellId> =
            air.neighbors(cur).iter().copied().filter(|c| Some(*c) != req.preferred).collect();
        rest.sort_by_key(|&c| (air.distance(c, req.destination), c));
        out.extend(rest);
        out
    }

    // Chosen cell (the current one for a hold), or None to wait this round.
    fn evaluate(&self, req: &Request, air: &Airspace, waiting: &[usize]) -> Option<CellId> {
        let t = req.current.t_end_s;
        for c in Self::candidates(req, air) {
            match self.verdict(c, t, req.owner) {
                Verdict::Free if !self.is_swap(c, t, req.owner) => return Some(c),
                Verdict::Parked(o) if waiting.contains(&o) && o != req.owner => return None,
                _ => {}
            }
        }
        Some(req.current.cell)
    }

    fn grant(&mut self, req: &Request, cell: CellId, t_cell: f64) -> Grant {
        let t = req.current.t_end_s;
        let r = Reservation {
            cell,
            owner: req.owner,
            t_start_s: t,
            t_end_s: t + t_cell,
            terminal: cell == req.destination,
        };
        self.insert(r);
        let kind = if cell == req.current.cell { GrantKind::Hold } else { GrantKind::Transit };
        Grant { reservation: r, kind }
    }

    /// Frees everything `owner` holds from `now` on.
    pub fn release_on_arrival(&mut self, owner: usize, now: f64) {
        for list in self.cells.values_mut() {
            list.retain(|r| r.owner != owner || r.t_start_s < now - EPS);
            for r in list.iter_mut().filter(|r| r.owner == owner && r.t_end_s > now) {
                r.t_end_s = now;
            }
        }
        self.last.remove(&owner);
        if !self.departed.contains(&owner) {
            self.departed.push(owner);
        }
    }
}

/// Single request on its own: best free neighbor toward the destination,
/// else a holding loop in the current cell.
pub fn request_next_cell(
    own: usize,
    current: &Reservation,
    destination: CellId,
    ledger: &mut ReservationLedger,
    air: &Airspace,
    t_cell: f64,
) -> Grant {
    let req = Request { owner: own, current: *current, destination, preferred: None };
    ledger.process_requests(&[req], air, t_cell)[0]
}

/// One entry attempt at `now`: succeeds when nobody holds or has claimed the
/// origin from `now` on (so it could be held indefinitely), and then
/// reserves the half cell time to the border.
pub fn try_intruder_entry(
    intr: usize,
    origin: CellId,
    ledger: &mut ReservationLedger,
    now: f64,
    t_cell: f64,
) -> Option<Reservation> {
    if !ledger.is_free(origin, now, intr) {
        return None;
    }
    let r = Reservation { cell: origin, owner: intr, t_start_s: now, t_end_s: now + t_cell / 2.0, terminal: false };
    ledger.insert(r);
    Some(r)
}

/// Retries every `retry_s` against a fixed ledger until `timeout_s`.
pub fn intruder_entry(
    intr: usize,
    origin: CellId,
    ledger: &mut ReservationLedger,
    now: f64,
    retry_s: f64,
    timeout_s: f64,
    t_cell: f64,
) -> Option<(f64, Reservation)> {
    let mut t = now;
    while t < timeout_s {
        if let Some(r) = try_intruder_entry(intr, origin, ledger, t, t_cell) {
            return Some((t, r));
        }
        t += retry_s;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::AirspaceConfig;

    const T: f64 = 4000.0 / 44.4;

    fn air() -> Airspace {
        Airspace::new(AirspaceConfig::default())
    }

    fn res(cell: u32, owner: usize, a: f64, b: f64) -> Reservation {
        Reservation { cell: CellId(cell), owner, t_start_s: a, t_end_s: b, terminal: false }
    }

    #[test]
    fn lone_aircraft_heads_for_destination() {
        let air = air();
        let mut l = ReservationLedger::new();
        let start = res(7, 0, 0.0, T / 2.0);
        l.insert(start);
        let g = request_next_cell(0, &start, CellId(13), &mut l, &air, T);
        assert_eq!(g.kind, GrantKind::Transit);
        assert_eq!(g.reservation.cell, CellId(1));
        assert!((g.reservation.t_start_s - T / 2.0).abs() < 1e-12);
        assert!((g.reservation.duration() - T).abs() < 1e-12);
    }

    #[test]
    fn lower_id_wins_contention() {
        let air = air();
        let mut l = ReservationLedger::new();
        // cells 1 and 3 both border cell 2; both aim at the far side
        let a = res(1, 0, 0.0, T / 2.0);
        let b = res(3, 1, 0.0, T / 2.0);
        l.insert(a);
        l.insert(b);
        let reqs = [
            Request { owner: 1, current: b, destination: CellId(2), preferred: None },
            Request { owner: 0, current: a, destination: CellId(2), preferred: None },
        ];
        let grants = l.process_requests(&reqs, &air, T);
        let g0 = grants.iter().find(|g| g.reservation.owner == 0).unwrap();
        let g1 = grants.iter().find(|g| g.reservation.owner == 1).unwrap();
        assert_eq!(g0.reservation.cell, CellId(2));
        assert_ne!(g1.reservation.cell, CellId(2));
        assert_eq!(g1.kind, GrantKind::Transit);
    }

    #[test]
    fn saturated_neighborhood_holds() {
        let air = air();
        let mut l = ReservationLedger::new();
        // corner 7 has neighbors 1, 8 and 18
        let me = res(7, 0, 0.0, T / 2.0);
        l.insert(me);
        for (i, c) in [1, 8, 18].into_iter().enumerate() {
            l.insert(res(c, i + 1, 0.0, 2.0 * T));
        }
        let g = request_next_cell(0, &me, CellId(13), &mut l, &air, T);
        assert_eq!(g.kind, GrantKind::Hold);
        assert_eq!(g.reservation.cell, CellId(7));
        // the loop itself stays exclusive
        assert!(!l.is_free(CellId(7), T / 2.0, 5));
    }

    #[test]
    fn parked_owner_blocks_until_it_moves() {
        let air = air();
        let mut l = ReservationLedger::new();
        let a = res(0, 0, 0.0, T);
        l.insert(a);
        assert!(!l.is_free(CellId(0), T, 1));
        let g = request_next_cell(0, &a, CellId(13), &mut l, &air, T);
        assert_eq!(g.kind, GrantKind::Transit);
        assert!(l.is_free(CellId(0), T, 1));
    }

    #[test]
    fn follower_enters_once_leader_commits_same_tick() {
        let air = air();
        let mut l = ReservationLedger::new();
        // id 0 follows id 1 along 0 -> 1 -> 7; id 0 asks first
        let lead = res(1, 1, 0.0, T);
        let follow = res(0, 0, 0.0, T);
        l.insert(lead);
        l.insert(follow);
        let reqs = [
            Request { owner: 0, current: follow, destination: CellId(7), preferred: Some(CellId(1)) },
            Request { owner: 1, current: lead, destination: CellId(7), preferred: None },
        ];
        let grants = l.process_requests(&reqs, &air, T);
        let g0 = grants.iter().find(|g| g.reservation.owner == 0).unwrap();
        assert_eq!(g0.reservation.cell, CellId(1));
    }

    #[test]
    fn release_frees_destination() {
        let air = air();
        let mut l = ReservationLedger::new();
        let mut d = res(13, 0, 0.0, T);
        d.terminal = true;
        l.insert(d);
        l.insert(res(13, 0, T, 2.0 * T));
        l.release_on_arrival(0, T / 2.0);
        assert!(l.is_free(CellId(13), T / 2.0, 1));
        assert_eq!(l.reservations_of(0).len(), 1);
        assert_eq!(l.owner_at(CellId(13), T / 4.0), Some(0));
        assert_eq!(l.owner_at(CellId(13), T / 2.0 + 1.0), None);
        let _ = air;
    }

    #[test]
    fn intruder_retries_every_40_seconds() {
        let mut l = ReservationLedger::new();
        assert_eq!(intruder_entry(3, CellId(7), &mut l, 30.0, 40.0, 1000.0, T).unwrap().0, 30.0);

        let mut l = ReservationLedger::new();
        let mut passing = res(7, 0, 0.0, 60.0);
        passing.terminal = true;
        l.insert(passing);
        let (t, r) = intruder_entry(3, CellId(7), &mut l, 30.0, 40.0, 1000.0, T).unwrap();
        assert_eq!(t, 70.0);
        assert!((r.t_end_s - (70.0 + T / 2.0)).abs() < 1e-9);

        let mut l = ReservationLedger::new();
        l.insert(res(7, 0, 0.0, 5000.0));
        assert!(intruder_entry(3, CellId(7), &mut l, 30.0, 40.0, 1000.0, T).is_none());
    }
}
