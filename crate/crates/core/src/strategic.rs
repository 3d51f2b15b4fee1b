//! Exact strategic allocation: conflict-free cell sequences, one cell per
//! aircraft per step, minimizing the sum of arrival steps.
//!
//! The search is iterative deepening on the total cost. For each candidate
//! total, aircraft are routed one after another in id order by a
//! depth-first search over neighbor cells in ascending index, pruned by
//! the remaining budget and by the lattice distance to go. The first plan
//! found at the smallest feasible total is therefore also the
//! lexicographically smallest one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::geometry::Vec2;
use crate::lattice::{Airspace, AirspaceConfig, CellId};

/// Extra steps beyond the longest mission allowed by default.
pub const DEFAULT_HORIZON_SLACK: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub airspace: AirspaceConfig,
    /// (aircraft id, origin, destination)
    pub missions: Vec<(usize, CellId, CellId)>,
    pub horizon_steps: u32,
}

impl AllocationProblem {
    /// Problem with the default horizon: longest mission plus slack.
    pub fn new(airspace: AirspaceConfig, missions: Vec<(usize, CellId, CellId)>) -> Self {
        let air = Airspace::new(airspace);
        let longest = missions.iter().map(|&(_, o, d)| air.distance(o, d)).max().unwrap_or(0);
        Self { airspace, missions, horizon_steps: longest + DEFAULT_HORIZON_SLACK }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyPlan {
    /// Cells per aircraft at steps 0, 1, ...; same order as the missions.
    pub paths: Vec<Vec<CellId>>,
    pub objective: u32,
}

impl OccupancyPlan {
    pub fn legs(&self, i: usize) -> usize {
        self.paths[i].len().saturating_sub(1)
    }

    /// Flat (aircraft, step, cell) rows.
    pub fn rows(&self) -> Vec<(usize, usize, CellId)> {
        self.paths
            .iter()
            .enumerate()
            .flat_map(|(a, p)| p.iter().enumerate().map(move |(s, &c)| (a, s, c)))
            .collect()
    }
}

fn occupant(path: &[CellId], step: usize) -> Option<CellId> {
    path.get(step).copied()
}

struct Search<'a> {
    air: &'a Airspace,
    missions: &'a [(usize, CellId, CellId)],
    horizon: usize,
    placed: Vec<Vec<CellId>>,
    /// Σ distances of missions i.. (lower bound of what is still to come)
    tail_bound: Vec<u32>,
}

impl Search<'_> {
    fn free(&self, from: CellId, to: CellId, step: usize) -> bool {
        // moving from `from` at `step` to `to` at `step + 1`
        self.placed.iter().all(|p| {
            let later = occupant(p, step + 1);
            if later == Some(to) {
                return false;
            }
            !(occupant(p, step) == Some(to) && later == Some(from))
        })
    }

    fn route(&mut self, agent: usize, budget: u32) -> bool {
        if agent == self.missions.len() {
            return true;
        }
        let (_, origin, dest) = self.missions[agent];
        let own_budget = budget - self.tail_bound[agent + 1];
        let mut path = vec![origin];
        if origin == dest {
            return self.commit(agent, path, budget);
        }
        self.extend(agent, &mut path, own_budget, budget)
    }

    fn commit(&mut self, agent: usize, path: Vec<CellId>, budget: u32) -> bool {
        let cost = (path.len() - 1) as u32;
        self.placed.push(path);
        if self.route(agent + 1, budget - cost) {
            return true;
        }
        self.placed.pop();
        false
    }

    fn extend(&mut self, agent: usize, path: &mut Vec<CellId>, own_budget: u32, budget: u32) -> bool {
        let (_, _, dest) = self.missions[agent];
        let cur = *path.last().expect("path starts at the origin");
        let step = path.len() - 1;
        for &next in self.air.neighbors(cur) {
            let steps = step as u32 + 1;
            if steps as usize > self.horizon || steps + self.air.distance(next, dest) > own_budget {
                continue;
            }
            if !self.free(cur, next, step) {
                continue;
            }
            path.push(next);
            let done = if next == dest {
                self.commit(agent, path.clone(), budget)
            } else {
                self.extend(agent, path, own_budget, budget)
            };
            path.pop();
            if done {
                return true;
            }
        }
        false
    }
}

fn check_problem(p: &AllocationProblem, air: &Airspace) -> Result<(), SolveError> {
    for (i, &(_, o, d)) in p.missions.iter().enumerate() {
        if !air.contains(o) || !air.contains(d) {
            return Err(SolveError::InvalidProblem(format!("mission {i} leaves the airspace")));
        }
        if p.missions[..i].iter().any(|&(_, o2, _)| o2 == o) {
            return Err(SolveError::InvalidProblem(format!("origin {o} used twice")));
        }
    }
    Ok(())
}

/// Minimum total arrival step allocation, or an explicit infeasibility.
pub fn solve(p: &AllocationProblem) -> Result<OccupancyPlan, SolveError> {
    let air = Airspace::new(p.airspace);
    check_problem(p, &air)?;
    let n = p.missions.len();
    let mut tail_bound = vec![0; n + 1];
    for i in (0..n).rev() {
        let (_, o, d) = p.missions[i];
        tail_bound[i] = tail_bound[i + 1] + air.distance(o, d);
    }
    if p.missions.iter().any(|&(_, o, d)| air.distance(o, d) > p.horizon_steps) {
        return Err(SolveError::Infeasible { horizon: p.horizon_steps });
    }
    let mut search = Search {
        air: &air,
        missions: &p.missions,
        horizon: p.horizon_steps as usize,
        placed: Vec::with_capacity(n),
        tail_bound,
    };
    let lower = search.tail_bound[0];
    let upper = p.horizon_steps * n as u32;
    for total in lower..=upper {
        search.placed.clear();
        if search.route(0, total) {
            return Ok(OccupancyPlan { paths: search.placed, objective: total });
        }
    }
    Err(SolveError::Infeasible { horizon: p.horizon_steps })
}

/// Centroid waypoints for each aircraft, origin to destination.
pub fn plan_to_waypoints(plan: &OccupancyPlan, cfg: &AirspaceConfig) -> Vec<Vec<Vec2>> {
    let air = Airspace::new(*cfg);
    plan.paths.iter().map(|p| p.iter().map(|&c| air.centroid(c)).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    WrongOrigin,
    WrongDestination,
    NotAdjacent,
    EarlyArrival,
    OverHorizon,
    OccupancyClash,
    Swap,
    Objective,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::WrongOrigin => "wrong origin",
            ViolationKind::WrongDestination => "wrong destination",
            ViolationKind::NotAdjacent => "non-adjacent move",
            ViolationKind::EarlyArrival => "destination visited before the end",
            ViolationKind::OverHorizon => "beyond horizon",
            ViolationKind::OccupancyClash => "occupancy clash",
            ViolationKind::Swap => "swap",
            ViolationKind::Objective => "objective mismatch",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanViolation {
    pub kind: ViolationKind,
    pub aircraft: usize,
    pub step: usize,
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (aircraft {}, step {})", self.kind, self.aircraft, self.step)
    }
}

/// Every plan invariant, reported rather than asserted.
pub fn validate_plan(plan: &OccupancyPlan, p: &AllocationProblem) -> Result<(), Vec<PlanViolation>> {
    let air = Airspace::new(p.airspace);
    let mut out = Vec::new();
    let mut v = |kind, aircraft, step| out.push(PlanViolation { kind, aircraft, step });
    if plan.paths.len() != p.missions.len() {
        v(ViolationKind::Objective, 0, 0);
    }
    for (a, (path, &(_, o, d))) in plan.paths.iter().zip(&p.missions).enumerate() {
        if path.first() != Some(&o) {
            v(ViolationKind::WrongOrigin, a, 0);
        }
        if path.last() != Some(&d) {
            v(ViolationKind::WrongDestination, a, path.len().saturating_sub(1));
        }
        if let Some(i) = path[..path.len().saturating_sub(1)].iter().position(|&c| c == d) {
            v(ViolationKind::EarlyArrival, a, i);
        }
        if path.len().saturating_sub(1) > p.horizon_steps as usize {
            v(ViolationKind::OverHorizon, a, path.len() - 1);
        }
        for (s, w) in path.windows(2).enumerate() {
            if !air.neighbors(w[0]).contains(&w[1]) {
                v(ViolationKind::NotAdjacent, a, s + 1);
            }
        }
    }
    for a in 0..plan.paths.len() {
        for b in a + 1..plan.paths.len() {
            let (pa, pb) = (&plan.paths[a], &plan.paths[b]);
            for s in 0..pa.len().min(pb.len()) {
                if pa[s] == pb[s] {
                    v(ViolationKind::OccupancyClash, b, s);
                }
                if s + 1 < pa.len().min(pb.len()) && pa[s] == pb[s + 1] && pa[s + 1] == pb[s] {
                    v(ViolationKind::Swap, b, s + 1);
                }
            }
        }
    }
    let total: usize = plan.paths.iter().map(|p| p.len().saturating_sub(1)).sum();
    if total != plan.objective as usize {
        v(ViolationKind::Objective, 0, 0);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r1() -> AirspaceConfig {
        AirspaceConfig { radius_rings: 1, centroid_spacing_m: 4000.0 }
    }

    #[test]
    fn single_aircraft_shortest_path() {
        let p = AllocationProblem::new(AirspaceConfig::default(), vec![(0, CellId(7), CellId(13))]);
        let plan = solve(&p).unwrap();
        assert_eq!(plan.objective, 4);
        assert_eq!(plan.paths[0].len(), 5);
        validate_plan(&plan, &p).unwrap();
    }

    #[test]
    fn exchange_across_radius_one() {
        // cells 1 and 4 sit opposite each other
        let p = AllocationProblem::new(r1(), vec![(0, CellId(1), CellId(4)), (1, CellId(4), CellId(1))]);
        let plan = solve(&p).unwrap();
        assert_eq!(plan.objective, 5);
        let mut lens = [plan.legs(0), plan.legs(1)];
        lens.sort();
        assert_eq!(lens, [2, 3]);
        validate_plan(&plan, &p).unwrap();
    }

    #[test]
    fn shared_destination_costs_one_detour() {
        // two corners equally far from the bottom corner
        let air = Airspace::new(AirspaceConfig::default());
        let d = CellId(13);
        let (o1, o2) = (CellId(7), CellId(17));
        assert_eq!(air.distance(o1, d), air.distance(o2, d));
        let dist = air.distance(o1, d);
        let p = AllocationProblem::new(AirspaceConfig::default(), vec![(0, o1, d), (1, o2, d)]);
        let plan = solve(&p).unwrap();
        assert_eq!(plan.objective, 2 * dist + 1);
        let mut legs = [plan.legs(0) as u32, plan.legs(1) as u32];
        legs.sort();
        assert_eq!(legs, [dist, dist + 1]);
        validate_plan(&plan, &p).unwrap();
    }

    #[test]
    fn validation_flags_clash_and_swap() {
        let p = AllocationProblem::new(r1(), vec![(0, CellId(1), CellId(4)), (1, CellId(2), CellId(5))]);
        let clash = OccupancyPlan {
            paths: vec![vec![CellId(1), CellId(0), CellId(4)], vec![CellId(2), CellId(0), CellId(5)]],
            objective: 4,
        };
        let errs = validate_plan(&clash, &p).unwrap_err();
        assert!(errs.iter().any(|e| e.kind == ViolationKind::OccupancyClash));
        assert!(errs.iter().any(|e| e.to_string().starts_with("occupancy clash")));

        let p = AllocationProblem::new(r1(), vec![(0, CellId(1), CellId(0)), (1, CellId(0), CellId(1))]);
        let swap = OccupancyPlan { paths: vec![vec![CellId(1), CellId(0)], vec![CellId(0), CellId(1)]], objective: 2 };
        let errs = validate_plan(&swap, &p).unwrap_err();
        assert!(errs.iter().any(|e| e.kind == ViolationKind::Swap));
    }

    #[test]
    fn infeasible_is_reported() {
        let mut p = AllocationProblem::new(AirspaceConfig::default(), vec![(0, CellId(7), CellId(13))]);
        p.horizon_steps = 3;
        assert_eq!(solve(&p), Err(SolveError::Infeasible { horizon: 3 }));
        // two aircraft swapping neighbors on a 2-cell corridor can't pass
        let tight = AllocationProblem {
            airspace: r1(),
            missions: vec![(0, CellId(0), CellId(1)), (1, CellId(1), CellId(0))],
            horizon_steps: 1,
        };
        assert!(matches!(solve(&tight), Err(SolveError::Infeasible { .. })));
    }

    #[test]
    fn waypoints_follow_cells() {
        let p = AllocationProblem::new(AirspaceConfig::default(), vec![(0, CellId(7), CellId(13))]);
        let plan = solve(&p).unwrap();
        let wps = plan_to_waypoints(&plan, &p.airspace);
        assert_eq!(wps[0].len(), 5);
        let stay = OccupancyPlan { paths: vec![vec![CellId(3)]], objective: 0 };
        assert_eq!(plan_to_waypoints(&stay, &p.airspace)[0].len(), 1);
    }
}
