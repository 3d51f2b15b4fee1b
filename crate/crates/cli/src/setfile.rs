//! Scenario-set CSV: one row per scenario, four (origin, destination)
//! column pairs, the intruder index (-1 for none) and its entry time.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use hexatm_core::scenario::AIRCRAFT_PER_SCENARIO;
use hexatm_core::{Mission, ScenarioConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    scenario_id: u64,
    o0: u32,
    d0: u32,
    o1: u32,
    d1: u32,
    o2: u32,
    d2: u32,
    o3: u32,
    d3: u32,
    intruder_idx: i64,
    intruder_entry_s: f64,
}

impl Row {
    fn from_config(sc: &ScenarioConfig) -> Result<Self, CliError> {
        if sc.missions.len() != AIRCRAFT_PER_SCENARIO {
            return Err(CliError::data(format!("scenario {} has {} aircraft", sc.scenario_id, sc.missions.len())));
        }
        let m = |i: usize| (sc.missions[i].origin.0, sc.missions[i].destination.0);
        Ok(Row {
            scenario_id: sc.scenario_id,
            o0: m(0).0,
            d0: m(0).1,
            o1: m(1).0,
            d1: m(1).1,
            o2: m(2).0,
            d2: m(2).1,
            o3: m(3).0,
            d3: m(3).1,
            intruder_idx: sc.intruder_index.map_or(-1, |i| i as i64),
            intruder_entry_s: sc.intruder_entry_s,
        })
    }

    fn into_config(self) -> Result<ScenarioConfig, CliError> {
        let intruder_index = match self.intruder_idx {
            -1 => None,
            i if (0..AIRCRAFT_PER_SCENARIO as i64).contains(&i) => Some(i as usize),
            i => return Err(CliError::data(format!("scenario {}: bad intruder index {i}", self.scenario_id))),
        };
        Ok(ScenarioConfig {
            scenario_id: self.scenario_id,
            missions: vec![
                Mission::new(self.o0, self.d0),
                Mission::new(self.o1, self.d1),
                Mission::new(self.o2, self.d2),
                Mission::new(self.o3, self.d3),
            ],
            intruder_index,
            intruder_entry_s: self.intruder_entry_s,
        })
    }
}

pub fn write_set(path: &Path, scenarios: impl Iterator<Item = ScenarioConfig>) -> Result<usize, CliError> {
    let file = File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut n = 0;
    for sc in scenarios {
        w.serialize(Row::from_config(&sc)?).map_err(CliError::data)?;
        n += 1;
    }
    w.flush().map_err(CliError::data)?;
    Ok(n)
}

/// A loaded set and the SHA-256 of the file it came from.
pub struct LoadedSet {
    pub scenarios: Vec<ScenarioConfig>,
    pub sha256: String,
}

pub fn read_set(path: &Path) -> Result<LoadedSet, CliError> {
    let mut bytes = Vec::new();
    File::open(path)
        .map(BufReader::new)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let mut scenarios = Vec::new();
    for (n, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CliError::data(format!("{}: row {}: {e}", path.display(), n + 1)))?;
        scenarios.push(row.into_config()?);
    }
    let mut ids: Vec<u64> = scenarios.iter().map(|s| s.scenario_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::data(format!("{}: duplicate scenario ids", path.display())));
    }
    Ok(LoadedSet { scenarios, sha256 })
}
