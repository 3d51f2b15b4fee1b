//! Scenario and sweep statistics.
//!
//! Aircraft that never reached their destination count toward the timeout
//! rate but are left out of the extra-distance and equity figures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{AircraftResult, ScenarioResult};
use crate::error::DomainError;
use crate::lattice::{Airspace, AirspaceConfig};
use crate::scenario::Mission;

pub const DEFAULT_BIN_WIDTH_M: f64 = 50.0;
pub const UNFINISHED_RULE: &str = "unfinished aircraft excluded from extra distance and equity";

/// Centroid-to-centroid distance of a mission.
pub fn unimpeded_distance(mission: &Mission, cfg: &AirspaceConfig) -> f64 {
    let air = Airspace::new(*cfg);
    air.centroid(mission.origin).distance(air.centroid(mission.destination))
}

/// Flown distance beyond the straight line between origin and destination.
pub fn extra_distance(ar: &AircraftResult) -> f64 {
    ar.flown_distance_m - ar.direct_distance_m
}

/// Sample standard deviation (n - 1); None for fewer than two values.
pub fn equity_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

/// Extra distances of the aircraft that finished.
pub fn finished_extras(r: &ScenarioResult) -> Vec<f64> {
    r.aircraft.iter().filter(|a| a.finished()).map(extra_distance).collect()
}

pub fn scenario_equity(r: &ScenarioResult) -> Option<f64> {
    equity_std(&finished_extras(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low_m: f64,
    pub bin_high_m: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub scenario_count: u64,
    pub mean_actual_hmd_m: Option<f64>,
    pub min_actual_hmd_m: Option<f64>,
    pub rate_hmd_violation: f64,
    pub rate_astm_los: f64,
    pub rate_excursion: f64,
    pub rate_timeout: f64,
    pub mean_extra_distance_m: Option<f64>,
    pub mean_equity_std_m: Option<f64>,
    pub bin_width_m: f64,
    pub hmd_histogram: Vec<HistogramBin>,
    /// Scenarios in which no two aircraft were ever airborne together.
    pub undefined_hmd_count: u64,
    pub unfinished_aircraft: u64,
}

/// Running totals; partitions can be folded separately and merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    bin_width_m: f64,
    count: u64,
    hmd_sum: f64,
    hmd_n: u64,
    hmd_min: Option<f64>,
    hmd_violation: u64,
    astm_los: u64,
    excursion: u64,
    timeout: u64,
    extra_sum: f64,
    extra_n: u64,
    equity_sum: f64,
    equity_n: u64,
    bins: BTreeMap<u64, u64>,
    undefined: u64,
    unfinished: u64,
}

impl MetricsAccumulator {
    pub fn new(bin_width_m: f64) -> Self {
        Self {
            bin_width_m,
            count: 0,
            hmd_sum: 0.0,
            hmd_n: 0,
            hmd_min: None,
            hmd_violation: 0,
            astm_los: 0,
            excursion: 0,
            timeout: 0,
            extra_sum: 0.0,
            extra_n: 0,
            equity_sum: 0.0,
            equity_n: 0,
            bins: BTreeMap::new(),
            undefined: 0,
            unfinished: 0,
        }
    }

    pub fn push(&mut self, r: &ScenarioResult) {
        self.count += 1;
        match r.actual_hmd_m {
            Some(h) => {
                self.hmd_sum += h;
                self.hmd_n += 1;
                self.hmd_min = Some(self.hmd_min.map_or(h, |m| m.min(h)));
                *self.bins.entry((h / self.bin_width_m).floor().max(0.0) as u64).or_default() += 1;
            }
            None => self.undefined += 1,
        }
        self.hmd_violation += r.events.hmd_violation as u64;
        self.astm_los += r.events.astm_los as u64;
        self.excursion += r.events.excursion as u64;
        self.timeout += r.events.timeout as u64;
        self.unfinished += r.aircraft.iter().filter(|a| !a.finished()).count() as u64;
        let extras = finished_extras(r);
        if !extras.is_empty() {
            self.extra_sum += extras.iter().sum::<f64>() / extras.len() as f64;
            self.extra_n += 1;
        }
        if let Some(s) = equity_std(&extras) {
            self.equity_sum += s;
            self.equity_n += 1;
        }
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.count += other.count;
        self.hmd_sum += other.hmd_sum;
        self.hmd_n += other.hmd_n;
        self.hmd_min = match (self.hmd_min, other.hmd_min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.hmd_violation += other.hmd_violation;
        self.astm_los += other.astm_los;
        self.excursion += other.excursion;
        self.timeout += other.timeout;
        self.extra_sum += other.extra_sum;
        self.extra_n += other.extra_n;
        self.equity_sum += other.equity_sum;
        self.equity_n += other.equity_n;
        for (k, v) in &other.bins {
            *self.bins.entry(*k).or_default() += v;
        }
        self.undefined += other.undefined;
        self.unfinished += other.unfinished;
    }

    pub fn finish(&self) -> Result<AggregateStats, DomainError> {
        if self.count == 0 {
            return Err(DomainError::EmptyStream);
        }
        let n = self.count as f64;
        let mean = |sum: f64, k: u64| (k > 0).then(|| sum / k as f64);
        let top = self.bins.keys().next_back().copied();
        let hmd_histogram = top
            .map(|top| {
                (0..=top)
                    .map(|k| HistogramBin {
                        bin_low_m: k as f64 * self.bin_width_m,
                        bin_high_m: (k + 1) as f64 * self.bin_width_m,
                        count: self.bins.get(&k).copied().unwrap_or(0),
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(AggregateStats {
            scenario_count: self.count,
            mean_actual_hmd_m: mean(self.hmd_sum, self.hmd_n),
            min_actual_hmd_m: self.hmd_min,
            rate_hmd_violation: self.hmd_violation as f64 / n,
            rate_astm_los: self.astm_los as f64 / n,
            rate_excursion: self.excursion as f64 / n,
            rate_timeout: self.timeout as f64 / n,
            mean_extra_distance_m: mean(self.extra_sum, self.extra_n),
            mean_equity_std_m: mean(self.equity_sum, self.equity_n),
            bin_width_m: self.bin_width_m,
            hmd_histogram,
            undefined_hmd_count: self.undefined,
            unfinished_aircraft: self.unfinished,
        })
    }
}

/// Folds a stream of results into sweep statistics.
pub fn aggregate<'a>(
    results: impl IntoIterator<Item = &'a ScenarioResult>,
    bin_width_m: f64,
) -> Result<AggregateStats, DomainError> {
    if !(bin_width_m > 0.0) {
        return Err(DomainError::Invalid("histogram bin width must be positive".into()));
    }
    let mut acc = MetricsAccumulator::new(bin_width_m);
    for r in results {
        acc.push(r);
    }
    acc.finish()
}
