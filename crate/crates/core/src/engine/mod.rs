//! Deterministic single-scenario simulation for every coordination mode.
//!
//! Each tick of `dt_integration_s` runs, in order: arrivals (and ledger
//! releases), intruder entry, cell requests in ascending id, DAA decisions
//! in ascending id (every `hold_s`), metric sampling (every `dt_metric_s`),
//! then integration to the next tick.

mod flight;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collab::{try_intruder_entry, GrantKind, Request, Reservation, ReservationLedger};
use crate::daa::{daa_step, heading_clear, resume_target, DaaConfig, DaaDirective, DaaMode};
use crate::error::DomainError;
use crate::geometry::{wrap_pi, Vec2};
use crate::kinematics::{direct_to, integrate, leg_book, AircraftState, GuidanceCommand, KinematicLimits, LegBook, TurnSense};
use crate::lattice::{Airspace, AirspaceConfig, CellId};
use crate::scenario::{Mission, ScenarioConfig};
use crate::strategic::{solve, validate_plan, AllocationProblem, OccupancyPlan};

use flight::CellFlight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Tactical only: everyone flies direct with DAA.
    DaaU,
    /// Exact plan flown as legs, no DAA.
    StrategicU,
    /// Planned regulars plus a direct-flying intruder, DAA on everyone.
    DaaRec,
    /// Planned regulars handed over to the ledger when the intruder appears.
    CollabRec,
    /// Everyone allocates through the ledger from the start.
    CollabU,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::DaaU, Mode::StrategicU, Mode::DaaRec, Mode::CollabRec, Mode::CollabU];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::DaaU => "daa_u",
            Mode::StrategicU => "strategic_u",
            Mode::DaaRec => "daa_rec",
            Mode::CollabRec => "collab_rec",
            Mode::CollabU => "collab_u",
        }
    }

    pub fn is_recovery(self) -> bool {
        matches!(self, Mode::DaaRec | Mode::CollabRec)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = DomainError;

    /// Accepts mode names and the short method names (daa, strategic, collab).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "daa_u" | "daa" => Ok(Mode::DaaU),
            "strategic_u" | "strategic" => Ok(Mode::StrategicU),
            "daa_rec" => Ok(Mode::DaaRec),
            "collab_rec" => Ok(Mode::CollabRec),
            "collab_u" | "collab" => Ok(Mode::CollabU),
            other => Err(DomainError::Invalid(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub dt_integration_s: f64,
    pub dt_metric_s: f64,
    pub timeout_s: f64,
    pub excursion_radius_m: f64,
    pub hmd_violation_m: f64,
    pub astm_los_m: f64,
    pub capture_radius_m: f64,
    /// Wait between intruder entry attempts in collaborative recovery.
    pub intruder_retry_s: f64,
    /// How long before entering a cell the request for the one after it is made.
    pub request_margin_s: f64,
    pub daa: DaaConfig,
    pub limits: KinematicLimits,
    pub airspace: AirspaceConfig,
}

impl EngineConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            dt_integration_s: 0.5,
            dt_metric_s: 2.0,
            timeout_s: 1000.0,
            excursion_radius_m: 10_400.0,
            hmd_violation_m: 1219.2,
            astm_los_m: 609.6,
            capture_radius_m: 100.0,
            intruder_retry_s: 40.0,
            request_margin_s: 1.0,
            daa: DaaConfig::default(),
            limits: KinematicLimits::default(),
            airspace: AirspaceConfig::default(),
        }
    }

    pub fn cell_time(&self) -> f64 {
        self.limits.cell_time(self.airspace.centroid_spacing_m)
    }

    fn ratio(&self, period: f64) -> Option<u64> {
        let r = period / self.dt_integration_s;
        (r >= 1.0 - 1e-9 && (r - r.round()).abs() < 1e-9).then_some(r.round() as u64)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: &str| Err(DomainError::Invalid(m.to_string()));
        if !(self.dt_integration_s > 0.0) {
            return bad("integration step must be positive");
        }
        if self.ratio(self.dt_metric_s).is_none() {
            return bad("metric step must be a whole multiple of the integration step");
        }
        if self.ratio(self.daa.hold_s).is_none() {
            return bad("DAA hold time must be a whole multiple of the integration step");
        }
        if !(self.limits.speed_mps > 0.0 && self.limits.turn_rate_radps > 0.0) {
            return bad("speed and turn rate must be positive");
        }
        if !(self.request_margin_s >= self.dt_integration_s) {
            return bad("request margin must cover one integration step");
        }
        self.airspace.validate().map_err(|e| DomainError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpaRecord {
    pub aircraft: usize,
    pub other: usize,
    pub min_distance_m: f64,
    pub t_s: f64,
    pub own_position: Vec2,
    pub other_position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftResult {
    pub id: usize,
    pub mission: Mission,
    pub intruder: bool,
    pub entry_time_s: Option<f64>,
    /// From entry to capture of the destination centroid; None if unfinished.
    pub flight_time_s: Option<f64>,
    pub flown_distance_m: f64,
    /// Straight distance between the origin and destination centroids.
    pub direct_distance_m: f64,
    pub holds: u32,
    pub cpa: Option<CpaRecord>,
}

impl AircraftResult {
    pub fn finished(&self) -> bool {
        self.flight_time_s.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSet {
    pub hmd_violation: bool,
    pub astm_los: bool,
    pub excursion: bool,
    pub timeout: bool,
}

impl EventSet {
    pub fn any(&self) -> bool {
        self.hmd_violation || self.astm_los || self.excursion || self.timeout
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario_id: u64,
    pub mode: Mode,
    pub aircraft: Vec<AircraftResult>,
    /// Smallest sampled pairwise distance; None if no two aircraft ever flew together.
    pub actual_hmd_m: Option<f64>,
    pub events: EventSet,
    pub anomalies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub aircraft: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
    pub mode_tag: String,
    /// -1 outside the airspace.
    pub cell_index: i64,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub reservations: Vec<Reservation>,
    pub plan: Option<OccupancyPlan>,
}

/// Updates `events` from one metric sample: the closest pair distance among
/// active aircraft and the largest distance of any of them from the center.
pub fn classify_events(events: &mut EventSet, min_pair_m: Option<f64>, max_center_m: f64, ec: &EngineConfig) {
    if let Some(d) = min_pair_m {
        events.hmd_violation |= d < ec.hmd_violation_m;
        events.astm_los |= d < ec.astm_los_m;
    }
    events.excursion |= max_center_m > ec.excursion_radius_m;
}

enum Nav {
    /// Leg following, cell by cell.
    Cells(CellFlight),
    /// Avoidance turn, held until the next DAA decision changes it.
    Turn { target: f64, sense: TurnSense },
    /// Direct flight to the centroid of `path[idx]`, or to the destination.
    Direct { idx: Option<usize> },
}

struct Agent {
    id: usize,
    mission: Mission,
    intruder: bool,
    state: AircraftState,
    entry_time: Option<f64>,
    next_attempt: f64,
    flight_time: Option<f64>,
    /// Tick at which the aircraft was captured at its destination.
    arrived_at: Option<f64>,
    nav: Nav,
    daa_mode: DaaMode,
    /// Alerts have cleared but the way back is not yet free: the path index
    /// to resume toward once it is.
    pending_resume: Option<Option<usize>>,
    /// Strategic path, for regulars that have one.
    plan: Option<Vec<CellId>>,
    /// Index into `plan` of the latest granted cell while on it.
    plan_pos: usize,
    on_plan: bool,
    /// Path cells left behind, for resuming after an avoidance.
    passed: usize,
    uses_ledger: bool,
    grants: Vec<Reservation>,
    holds: u32,
    cpa: Option<CpaRecord>,
}

impl Agent {
    fn last(&self) -> Option<&Reservation> {
        self.grants.last()
    }

    fn started(&self) -> bool {
        self.entry_time.is_some()
    }

    /// Cell the ledger is asked for first.
    fn preferred(&self, air: &Airspace) -> Option<CellId> {
        let plan = self.plan.as_ref()?;
        let cur = self.last()?.cell;
        if self.on_plan {
            return plan.get(self.plan_pos + 1).copied();
        }
        let nbrs = air.neighbors(cur);
        plan[self.plan_pos..].iter().rev().find(|c| nbrs.contains(c)).copied()
    }

    fn note_grant(&mut self, cell: CellId) {
        let Some(plan) = &self.plan else { return };
        if self.on_plan && plan.get(self.plan_pos) == Some(&cell) {
            return;
        }
        match plan.iter().enumerate().skip(self.plan_pos + 1).find(|&(_, &c)| c == cell) {
            Some((j, _)) => {
                self.plan_pos = j;
                self.on_plan = true;
            }
            None => self.on_plan = false,
        }
    }
}

struct Sim<'a> {
    sc: &'a ScenarioConfig,
    ec: &'a EngineConfig,
    /// DAA settings with the aircraft's own turn rate.
    daa_cfg: DaaConfig,
    air: Airspace,
    book: Arc<LegBook>,
    t_cell: f64,
    agents: Vec<Agent>,
    ledger: ReservationLedger,
    ledger_live: bool,
    anomalies: Vec<String>,
    min_pair: Option<f64>,
    events: EventSet,
    trace: Option<Trace>,
}

pub fn run_scenario(sc: &ScenarioConfig, ec: &EngineConfig) -> ScenarioResult {
    run(sc, ec, false).0
}

/// Same as [`run_scenario`], also recording every aircraft at every tick.
pub fn run_scenario_traced(sc: &ScenarioConfig, ec: &EngineConfig) -> (ScenarioResult, Trace) {
    let (r, t) = run(sc, ec, true);
    (r, t.unwrap_or_default())
}

fn aborted(sc: &ScenarioConfig, ec: &EngineConfig, why: String) -> ScenarioResult {
    let air = Airspace::new(ec.airspace);
    ScenarioResult {
        scenario_id: sc.scenario_id,
        mode: ec.mode,
        aircraft: sc
            .missions
            .iter()
            .enumerate()
            .map(|(id, m)| AircraftResult {
                id,
                mission: *m,
                intruder: sc.intruder_index == Some(id),
                entry_time_s: None,
                flight_time_s: None,
                flown_distance_m: 0.0,
                direct_distance_m: direct_distance(m, &air),
                holds: 0,
                cpa: None,
            })
            .collect(),
        actual_hmd_m: None,
        events: EventSet::default(),
        anomalies: vec![why],
    }
}

fn direct_distance(m: &Mission, air: &Airspace) -> f64 {
    if air.contains(m.origin) && air.contains(m.destination) {
        air.centroid(m.origin).distance(air.centroid(m.destination))
    } else {
        f64::NAN
    }
}

fn run(sc: &ScenarioConfig, ec: &EngineConfig, traced: bool) -> (ScenarioResult, Option<Trace>) {
    if let Err(e) = ec.validate() {
        return (aborted(sc, ec, format!("config: {e}")), None);
    }
    let air = Airspace::new(ec.airspace);
    if let Some(m) = sc.missions.iter().find(|m| !air.contains(m.origin) || !air.contains(m.destination)) {
        return (aborted(sc, ec, format!("mission {}->{} outside airspace", m.origin, m.destination)), None);
    }
    let book = match leg_book(&ec.limits, ec.airspace.centroid_spacing_m) {
        Ok(b) => b,
        Err(e) => return (aborted(sc, ec, format!("guidance: {e}")), None),
    };
    let mut sim = Sim {
        sc,
        ec,
        daa_cfg: DaaConfig { turn_rate_radps: ec.limits.turn_rate_radps, ..ec.daa },
        t_cell: ec.cell_time(),
        air,
        book,
        agents: Vec::new(),
        ledger: ReservationLedger::new(),
        ledger_live: ec.mode == Mode::CollabU,
        anomalies: Vec::new(),
        min_pair: None,
        events: EventSet::default(),
        trace: traced.then(Trace::default),
    };
    if let Err(why) = sim.setup() {
        return (aborted(sc, ec, why), None);
    }
    sim.run_loop();
    sim.finish()
}

impl Sim<'_> {
    fn intruder(&self) -> Option<usize> {
        if self.ec.mode.is_recovery() {
            self.sc.intruder_index
        } else {
            None
        }
    }

    fn setup(&mut self) -> Result<(), String> {
        let mode = self.ec.mode;
        let intruder = self.intruder();
        let planned = matches!(mode, Mode::StrategicU | Mode::DaaRec | Mode::CollabRec);
        let mut plans: Vec<Option<Vec<CellId>>> = vec![None; self.sc.missions.len()];
        if planned {
            let regulars: Vec<(usize, CellId, CellId)> = self
                .sc
                .missions
                .iter()
                .enumerate()
                .filter(|&(i, _)| Some(i) != intruder)
                .map(|(i, m)| (i, m.origin, m.destination))
                .collect();
            let problem = AllocationProblem::new(self.ec.airspace, regulars.clone());
            let plan = solve(&problem).map_err(|e| format!("strategic: {e}"))?;
            if let Err(v) = validate_plan(&plan, &problem) {
                return Err(format!("strategic plan invalid: {}", v[0].kind));
            }
            for (k, &(i, _, _)) in regulars.iter().enumerate() {
                plans[i] = Some(plan.paths[k].clone());
            }
            if let Some(t) = self.trace.as_mut() {
                t.plan = Some(plan);
            }
        }
        for (id, m) in self.sc.missions.iter().enumerate() {
            let is_intruder = intruder == Some(id);
            let pos = self.air.centroid(m.origin);
            let heading = (self.air.centroid(m.destination) - pos).angle();
            let mut state = AircraftState::new(pos, heading, self.ec.limits.speed_mps);
            state.active = false;
            let direct = mode == Mode::DaaU || (mode == Mode::DaaRec && is_intruder);
            let nav = if direct {
                Nav::Direct { idx: None }
            } else {
                Nav::Cells(CellFlight::new(m.origin, m.destination, &self.air))
            };
            self.agents.push(Agent {
                id,
                mission: *m,
                intruder: is_intruder,
                state,
                entry_time: None,
                next_attempt: if is_intruder { self.sc.intruder_entry_s } else { 0.0 },
                flight_time: None,
                arrived_at: None,
                nav,
                daa_mode: DaaMode::Cruise,
                pending_resume: None,
                plan: plans[id].take(),
                plan_pos: 0,
                on_plan: true,
                passed: 0,
                uses_ledger: matches!(mode, Mode::CollabU) || (mode == Mode::CollabRec && is_intruder),
                grants: Vec::new(),
                holds: 0,
                cpa: None,
            });
        }
        Ok(())
    }

    fn run_loop(&mut self) {
        let dt = self.ec.dt_integration_s;
        let metric_every = self.ec.ratio(self.ec.dt_metric_s).unwrap_or(1);
        let daa_every = self.ec.ratio(self.ec.daa.hold_s).unwrap_or(1);
        let mut n: u64 = 0;
        loop {
            let t = n as f64 * dt;
            self.arrivals(t);
            self.entries(t);
            self.requests(t);
            if n.is_multiple_of(daa_every) {
                self.daa(t);
            }
            if n.is_multiple_of(metric_every) {
                self.sample(t);
            }
            if self.trace.is_some() {
                self.record(t);
            }
            if self.agents.iter().all(|a| a.flight_time.is_some()) || t >= self.ec.timeout_s - 1e-9 {
                break;
            }
            self.step(t, dt);
            n += 1;
        }
    }

    fn arrivals(&mut self, t: f64) {
        for a in &mut self.agents {
            if !a.state.active {
                continue;
            }
            let dest = self.air.centroid(a.mission.destination);
            let d = a.state.position.distance(dest);
            if d <= self.ec.capture_radius_m {
                a.state.flown_distance_m += d;
                a.state.position = dest;
                a.state.active = false;
                let start = a.entry_time.unwrap_or(0.0);
                a.flight_time = Some(t - start + d / a.state.speed_mps);
                a.arrived_at = Some(t);
                if a.uses_ledger {
                    self.ledger.release_on_arrival(a.id, t);
                }
            }
        }
    }

    fn entries(&mut self, t: f64) {
        let mode = self.ec.mode;
        // Recovery hand-over: regulars' commitments move into the ledger.
        if mode == Mode::CollabRec && !self.ledger_live && t >= self.sc.intruder_entry_s - 1e-9 {
            self.ledger_live = true;
            for a in self.agents.iter_mut().filter(|a| !a.intruder) {
                if a.flight_time.is_none() {
                    for r in &a.grants {
                        self.ledger.insert(*r);
                    }
                }
                a.uses_ledger = true;
            }
        }
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            if a.started() || t < a.next_attempt - 1e-9 {
                continue;
            }
            let origin = a.mission.origin;
            if a.uses_ledger {
                let r = try_intruder_entry(a.id, origin, &mut self.ledger, t, self.t_cell);
                let a = &mut self.agents[i];
                match r {
                    Some(r) => a.grants.push(r),
                    None => {
                        a.next_attempt += self.ec.intruder_retry_s;
                        continue;
                    }
                }
            } else if matches!(self.agents[i].nav, Nav::Cells(_)) {
                let r = Reservation {
                    cell: origin,
                    owner: i,
                    t_start_s: t,
                    t_end_s: t + self.t_cell / 2.0,
                    terminal: false,
                };
                self.agents[i].grants.push(r);
            }
            let a = &mut self.agents[i];
            a.entry_time = Some(t);
            a.state.active = true;
        }
    }

    fn requests(&mut self, t: f64) {
        let margin = self.ec.request_margin_s;
        let due: Vec<usize> = self
            .agents
            .iter()
            .filter(|a| a.state.active)
            .filter(|a| matches!(&a.nav, Nav::Cells(f) if !f.complete))
            .filter(|a| a.last().is_some_and(|r| t >= r.t_start_s - margin - 1e-9))
            .map(|a| a.id)
            .collect();
        if due.is_empty() {
            return;
        }
        let mut decided: Vec<(usize, CellId, GrantKind, Reservation)> = Vec::new();
        let mut via_ledger = Vec::new();
        for &i in &due {
            let a = &self.agents[i];
            let last = *a.last().expect("checked");
            if a.uses_ledger {
                via_ledger.push(Request {
                    owner: i,
                    current: last,
                    destination: a.mission.destination,
                    preferred: a.preferred(&self.air),
                });
            } else if let Some(plan) = &a.plan {
                let Some(&next) = plan.get(a.plan_pos + 1) else { continue };
                let r = Reservation {
                    cell: next,
                    owner: i,
                    t_start_s: last.t_end_s,
                    t_end_s: last.t_end_s + self.t_cell,
                    terminal: next == a.mission.destination,
                };
                decided.push((i, next, GrantKind::Transit, r));
            }
        }
        if !via_ledger.is_empty() {
            for g in self.ledger.process_requests(&via_ledger, &self.air, self.t_cell) {
                let r = g.reservation;
                decided.push((r.owner, r.cell, g.kind, r));
            }
        }
        decided.sort_by_key(|d| d.0);
        for (i, cell, kind, r) in decided {
            let a = &mut self.agents[i];
            let first = a.grants.len() == 1;
            let Nav::Cells(f) = &mut a.nav else { continue };
            if !f.apply_grant(cell, &self.book, &self.air) {
                self.anomalies.push(format!("aircraft {i}: granted non-neighbor cell {cell}"));
                continue;
            }
            if first {
                if let Some(h) = f.start_heading() {
                    a.state.heading = wrap_pi(h);
                }
            }
            if kind == GrantKind::Hold {
                a.holds += 1;
            }
            a.grants.push(r);
            if a.plan.is_some() {
                if a.uses_ledger {
                    a.note_grant(cell);
                } else {
                    a.plan_pos += 1;
                }
            }
        }
    }

    fn daa_armed(&self, t: f64) -> bool {
        match self.ec.mode {
            Mode::DaaU => true,
            Mode::DaaRec => t >= self.sc.intruder_entry_s - 1e-9,
            _ => false,
        }
    }

    fn daa(&mut self, t: f64) {
        if !self.daa_armed(t) {
            return;
        }
        let states: Vec<AircraftState> = self.agents.iter().map(|a| a.state).collect();
        for i in 0..self.agents.len() {
            if !states[i].active {
                continue;
            }
            let (directive, mode) = daa_step(self.agents[i].daa_mode, i, &states, &self.daa_cfg, t);
            let a = &mut self.agents[i];
            a.daa_mode = mode;
            match directive {
                DaaDirective::Continue => {}
                DaaDirective::TurnToHeading { target, sense } => {
                    if let Nav::Cells(f) = &a.nav {
                        a.passed = a.passed.max(f.legs_done);
                    }
                    a.nav = Nav::Turn { target, sense };
                    a.pending_resume = None;
                }
                DaaDirective::Resume => {
                    let cell = self.air.locate(a.state.position).cell();
                    let rt = resume_target(cell, a.plan.as_deref(), a.passed, a.mission.destination, &self.air);
                    a.pending_resume = Some(rt.path_index);
                }
            }
            // Leave the avoidance heading only once the way back is clear.
            if let Some(mut idx) = a.pending_resume {
                let target = direct_target(
                    a.plan.as_deref(),
                    &mut idx,
                    &mut a.passed,
                    &a.state,
                    a.mission.destination,
                    &self.air,
                    self.ec.capture_radius_m,
                    self.ec.limits.turn_radius(),
                );
                let to = target - a.state.position;
                let others: Vec<AircraftState> =
                    states.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| *s).collect();
                if to.norm() <= self.ec.capture_radius_m || heading_clear(&a.state, &others, to.angle(), &self.daa_cfg) {
                    a.nav = Nav::Direct { idx };
                    a.pending_resume = None;
                }
            }
        }
    }

    fn sample(&mut self, t: f64) {
        let active: Vec<usize> = (0..self.agents.len()).filter(|&i| self.agents[i].state.active).collect();
        let center = self.air.centroid(CellId(0));
        let mut min_pair: Option<f64> = None;
        let mut max_center: f64 = 0.0;
        for (k, &i) in active.iter().enumerate() {
            let pi = self.agents[i].state.position;
            max_center = max_center.max(pi.distance(center));
            for &j in &active[k + 1..] {
                let pj = self.agents[j].state.position;
                let d = pi.distance(pj);
                min_pair = Some(min_pair.map_or(d, |m: f64| m.min(d)));
                for (own, other, po, pt) in [(i, j, pi, pj), (j, i, pj, pi)] {
                    let a = &mut self.agents[own];
                    if a.cpa.is_none_or(|c| d < c.min_distance_m) {
                        a.cpa = Some(CpaRecord {
                            aircraft: own,
                            other,
                            min_distance_m: d,
                            t_s: t,
                            own_position: po,
                            other_position: pt,
                        });
                    }
                }
            }
        }
        if let Some(d) = min_pair {
            self.min_pair = Some(self.min_pair.map_or(d, |m| m.min(d)));
        }
        classify_events(&mut self.events, min_pair, max_center, self.ec);
    }

    fn record(&mut self, t: f64) {
        let Some(trace) = self.trace.as_mut() else { return };
        // an aircraft captured this tick gets one last row at its centroid
        for a in self.agents.iter().filter(|a| a.state.active || a.arrived_at == Some(t)) {
            let tag = match &a.nav {
                _ if !a.state.active => "arrived",
                Nav::Cells(f) => f.current_kind(),
                Nav::Turn { .. } if a.pending_resume.is_some() => "wait",
                Nav::Turn { .. } => "avoid",
                Nav::Direct { .. } if a.daa_mode == DaaMode::Resuming => "resume",
                Nav::Direct { .. } => "direct",
            };
            trace.rows.push(TraceRow {
                t_s: t,
                aircraft: a.id,
                x_m: a.state.position.x,
                y_m: a.state.position.y,
                heading_deg: a.state.heading.to_degrees(),
                mode_tag: tag.to_string(),
                cell_index: self.air.locate(a.state.position).cell().map_or(-1, |c| c.0 as i64),
            });
        }
    }

    fn step(&mut self, t: f64, dt: f64) {
        let limits = self.ec.limits;
        let turn_radius = limits.turn_radius();
        for a in self.agents.iter_mut().filter(|a| a.state.active) {
            let cmd = match &mut a.nav {
                Nav::Cells(f) => match f.current_leg() {
                    Some(leg) => GuidanceCommand::FollowLeg(Arc::clone(leg)),
                    None => GuidanceCommand::HoldHeading,
                },
                Nav::Turn { target, sense } => GuidanceCommand::TurnToHeading { target: *target, sense: *sense },
                Nav::Direct { idx } => {
                    let target = direct_target(a.plan.as_deref(), idx, &mut a.passed, &a.state, a.mission.destination, &self.air, self.ec.capture_radius_m, turn_radius);
                    direct_to(&a.state, target, &limits)
                }
            };
            a.state = integrate(&a.state, &cmd, dt, &limits);
            if let Nav::Cells(f) = &mut a.nav {
                if !f.settle(&mut a.state) {
                    let msg = format!("aircraft {}: ran out of legs at t={:.1}", a.id, t + dt);
                    if !self.anomalies.contains(&msg) {
                        self.anomalies.push(msg);
                    }
                }
            }
        }
    }

    fn finish(mut self) -> (ScenarioResult, Option<Trace>) {
        self.events.timeout = self.agents.iter().any(|a| a.flight_time.is_none());
        let aircraft = self
            .agents
            .iter()
            .map(|a| AircraftResult {
                id: a.id,
                mission: a.mission,
                intruder: a.intruder,
                entry_time_s: a.entry_time,
                flight_time_s: a.flight_time,
                flown_distance_m: a.state.flown_distance_m,
                direct_distance_m: direct_distance(&a.mission, &self.air),
                holds: a.holds,
                cpa: a.cpa,
            })
            .collect();
        if let Some(trace) = self.trace.as_mut() {
            trace.reservations = self.ledger.rows();
            if trace.reservations.is_empty() {
                trace.reservations = self.agents.iter().flat_map(|a| a.grants.iter().copied()).collect();
            }
        }
        let result = ScenarioResult {
            scenario_id: self.sc.scenario_id,
            mode: self.ec.mode,
            aircraft,
            actual_hmd_m: self.min_pair,
            events: self.events,
            anomalies: self.anomalies,
        };
        (result, self.trace)
    }
}

/// Current direct-flight target, advancing along the path when the
/// waypoint is reached or can no longer be captured without circling.
#[allow(clippy::too_many_arguments)]
fn direct_target(
    plan: Option<&[CellId]>,
    idx: &mut Option<usize>,
    passed: &mut usize,
    state: &AircraftState,
    destination: CellId,
    air: &Airspace,
    capture: f64,
    turn_radius: f64,
) -> Vec2 {
    let (Some(path), Some(j)) = (plan, idx.as_mut()) else {
        return air.centroid(destination);
    };
    while *j + 1 < path.len() {
        let wp = air.centroid(path[*j]);
        let d = state.position.distance(wp);
        let off = wrap_pi((wp - state.position).angle() - state.heading).abs();
        if d < capture || (d < 2.0 * turn_radius && off > std::f64::consts::FRAC_PI_2) {
            *passed = (*passed).max(*j);
            *j += 1;
        } else {
            break;
        }
    }
    air.centroid(path[*j])
}

#[cfg(test)]
mod tests;
