//! Mission sets: every combination of outer-ring origins and destinations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::lattice::{Airspace, AirspaceConfig, CellId};

/// Shortest admissible mission, in cell steps (three cells in between).
pub const MIN_MISSION_DISTANCE: u32 = 4;
pub const DEFAULT_INTRUDER_ENTRY_S: f64 = 30.0;
pub const AIRCRAFT_PER_SCENARIO: usize = 4;
pub const RECOVERY_RULE: &str = "unperturbed-set x intruder-role";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mission {
    pub origin: CellId,
    pub destination: CellId,
}

impl Mission {
    pub fn new(origin: u32, destination: u32) -> Self {
        Self { origin: CellId(origin), destination: CellId(destination) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario_id: u64,
    /// Index in this list is the aircraft id (and its priority).
    pub missions: Vec<Mission>,
    pub intruder_index: Option<usize>,
    pub intruder_entry_s: f64,
}

impl ScenarioConfig {
    pub fn new(scenario_id: u64, missions: Vec<Mission>) -> Self {
        Self { scenario_id, missions, intruder_index: None, intruder_entry_s: DEFAULT_INTRUDER_ENTRY_S }
    }

    pub fn with_intruder(mut self, index: usize) -> Self {
        self.intruder_index = Some(index);
        self
    }

    /// Missions sorted by (origin, destination); the intruder follows its mission.
    pub fn canonicalize(&self) -> ScenarioConfig {
        let mut order: Vec<usize> = (0..self.missions.len()).collect();
        order.sort_by_key(|&i| (self.missions[i], i));
        let mut out = self.clone();
        out.missions = order.iter().map(|&i| self.missions[i]).collect();
        out.intruder_index = self.intruder_index.and_then(|x| order.iter().position(|&i| i == x));
        out
    }

    pub fn is_canonical(&self) -> bool {
        self.missions.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn validate(&self, air: &Airspace) -> Result<(), DomainError> {
        for (i, m) in self.missions.iter().enumerate() {
            if !air.contains(m.origin) || !air.contains(m.destination) {
                return Err(DomainError::Invalid(format!("mission {i} leaves the airspace")));
            }
            if air.distance(m.origin, m.destination) < MIN_MISSION_DISTANCE {
                return Err(DomainError::Invalid(format!("mission {i} is too short")));
            }
            if self.missions[..i].iter().any(|o| o.origin == m.origin) {
                return Err(DomainError::Invalid(format!("origin {} shared", m.origin)));
            }
        }
        if self.intruder_index.is_some_and(|x| x >= self.missions.len()) {
            return Err(DomainError::Invalid("intruder index out of range".into()));
        }
        Ok(())
    }
}

/// Outer-ring pairs at least [`MIN_MISSION_DISTANCE`] apart, sorted.
pub fn valid_missions(cfg: &AirspaceConfig) -> Vec<Mission> {
    let air = Airspace::new(*cfg);
    let ring = air.outer_ring();
    let mut out = Vec::new();
    for &o in &ring {
        for &d in &ring {
            if air.distance(o, d) >= MIN_MISSION_DISTANCE {
                out.push(Mission { origin: o, destination: d });
            }
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Unperturbed,
    Recovery,
}

/// Enumerated scenario set with random access by scenario id.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    kind: SetKind,
    missions: Vec<Mission>,
    combos: Vec<[u16; AIRCRAFT_PER_SCENARIO]>,
    intruder_entry_s: f64,
}

impl ScenarioSet {
    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn missions(&self) -> &[Mission] {
        &self.missions
    }

    pub fn len(&self) -> usize {
        match self.kind {
            SetKind::Unperturbed => self.combos.len(),
            SetKind::Recovery => self.combos.len() * AIRCRAFT_PER_SCENARIO,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<ScenarioConfig> {
        let id_us = usize::try_from(id).ok()?;
        let (base, intruder) = match self.kind {
            SetKind::Unperturbed => (id_us, None),
            SetKind::Recovery => (id_us / AIRCRAFT_PER_SCENARIO, Some(id_us % AIRCRAFT_PER_SCENARIO)),
        };
        let combo = self.combos.get(base)?;
        Some(ScenarioConfig {
            scenario_id: id,
            missions: combo.iter().map(|&i| self.missions[i as usize]).collect(),
            intruder_index: intruder,
            intruder_entry_s: self.intruder_entry_s,
        })
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = ScenarioConfig> + '_ {
        (0..self.len()).map(|i| self.get(i as u64).expect("id within range"))
    }
}

fn combos(missions: &[Mission]) -> Vec<[u16; AIRCRAFT_PER_SCENARIO]> {
    fn rec(ms: &[Mission], from: usize, cur: &mut Vec<u16>, out: &mut Vec<[u16; AIRCRAFT_PER_SCENARIO]>) {
        if cur.len() == AIRCRAFT_PER_SCENARIO {
            out.push([cur[0], cur[1], cur[2], cur[3]]);
            return;
        }
        for i in from..ms.len() {
            if cur.iter().any(|&j| ms[j as usize].origin == ms[i].origin) {
                continue;
            }
            cur.push(i as u16);
            rec(ms, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(missions, 0, &mut Vec::with_capacity(AIRCRAFT_PER_SCENARIO), &mut out);
    out
}

/// Every 4-set of missions with distinct origins, in lexicographic order.
/// Since missions are sorted, each scenario is already canonical.
pub fn gen_unperturbed(cfg: &AirspaceConfig) -> ScenarioSet {
    let missions = valid_missions(cfg);
    ScenarioSet {
        kind: SetKind::Unperturbed,
        combos: combos(&missions),
        missions,
        intruder_entry_s: DEFAULT_INTRUDER_ENTRY_S,
    }
}

/// Each unperturbed scenario once per choice of intruder;
/// id = base id * 4 + intruder index.
pub fn gen_recovery(cfg: &AirspaceConfig) -> ScenarioSet {
    ScenarioSet { kind: SetKind::Recovery, ..gen_unperturbed(cfg) }
}

/// Stratified sample: one uniformly chosen id from each of `k` equal slices
/// of the enumeration order.
pub fn sample(set: &ScenarioSet, k: usize, seed: u64) -> Result<Vec<ScenarioConfig>, DomainError> {
    Ok(sample_ids(set.len(), k, seed)?
        .into_iter()
        .map(|id| set.get(id).expect("id within range"))
        .collect())
}

/// Positions drawn by [`sample`] from a stream of `n` items, ascending.
pub fn sample_ids(n: usize, k: usize, seed: u64) -> Result<Vec<u64>, DomainError> {
    if k > n {
        return Err(DomainError::SampleTooLarge { k, len: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|i| rng.random_range(i * n / k..(i + 1) * n / k) as u64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_eight_missions_of_length_four() {
        let cfg = AirspaceConfig::default();
        let air = Airspace::new(cfg);
        let ms = valid_missions(&cfg);
        assert_eq!(ms.len(), 48);
        for m in &ms {
            assert_eq!(air.distance(m.origin, m.destination), 4);
            assert_ne!(m.origin, m.destination);
        }
        // corners offer 5 destinations, edge cells 3
        for o in air.outer_ring() {
            let n = ms.iter().filter(|m| m.origin == o).count();
            let corner = (o.0 - 7) % 2 == 0;
            assert_eq!(n, if corner { 5 } else { 3 }, "origin {o}");
        }
    }

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn unperturbed_count_matches_closed_form() {
        let expected: u64 = (0..=4).map(|k| binom(6, k) * binom(6, 4 - k) * 5u64.pow(k as u32) * 3u64.pow(4 - k as u32)).sum();
        assert_eq!(expected, 122_415);
        let set = gen_unperturbed(&AirspaceConfig::default());
        assert_eq!(set.len(), 122_415);
        assert_eq!(gen_recovery(&AirspaceConfig::default()).len(), 489_660);
    }

    #[test]
    fn recovery_ids_decompose() {
        let cfg = AirspaceConfig::default();
        let u = gen_unperturbed(&cfg);
        let r = gen_recovery(&cfg);
        let s = r.get(4 * 1234 + 3).unwrap();
        assert_eq!(s.missions, u.get(1234).unwrap().missions);
        assert_eq!(s.intruder_index, Some(3));
        assert_eq!(s.intruder_entry_s, 30.0);
        assert!(r.get(489_660).is_none());
    }

    #[test]
    fn sampling() {
        let set = gen_unperturbed(&AirspaceConfig::default());
        assert!(matches!(sample(&set, set.len() + 1, 1), Err(DomainError::SampleTooLarge { .. })));
        let a = sample(&set, 100, 7).unwrap();
        assert_eq!(a, sample(&set, 100, 7).unwrap());
        assert_ne!(sample(&set, 100, 1).unwrap(), sample(&set, 100, 2).unwrap());
        let ids: Vec<u64> = a.iter().map(|s| s.scenario_id).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));

        let small = ScenarioSet { combos: set.combos[..50].to_vec(), ..set.clone() };
        let all: Vec<u64> = sample(&small, 50, 3).unwrap().iter().map(|s| s.scenario_id).collect();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn canonicalize_tracks_intruder() {
        let s = ScenarioConfig::new(0, vec![Mission::new(13, 7), Mission::new(7, 13), Mission::new(9, 15)])
            .with_intruder(0);
        let c = s.canonicalize();
        assert_eq!(c.missions[0], Mission::new(7, 13));
        assert_eq!(c.intruder_index, Some(2));
        assert_eq!(c.canonicalize(), c);
    }
}
