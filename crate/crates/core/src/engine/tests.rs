use super::*;
use crate::scenario::gen_unperturbed;

fn cfg(mode: Mode) -> EngineConfig {
    EngineConfig::new(mode)
}

fn one(o: u32, d: u32) -> ScenarioConfig {
    ScenarioConfig::new(0, vec![Mission::new(o, d)])
}

#[test]
fn lone_corner_to_corner_is_four_cell_times() {
    let ec = cfg(Mode::StrategicU);
    let r = run_scenario(&one(7, 13), &ec);
    assert!(r.anomalies.is_empty(), "{:?}", r.anomalies);
    let a = &r.aircraft[0];
    let t = a.flight_time_s.unwrap();
    assert!((t - 4.0 * ec.cell_time()).abs() < 1e-6, "flight time {t}");
    assert!((a.flown_distance_m - a.direct_distance_m).abs() < 1.0);
    assert!(!r.events.any());
    assert_eq!(r.actual_hmd_m, None);
}

#[test]
fn config_validation() {
    let mut ec = cfg(Mode::DaaU);
    ec.dt_metric_s = 0.75;
    assert!(ec.validate().is_err());
    let r = run_scenario(&one(7, 13), &ec);
    assert_eq!(r.anomalies.len(), 1);
    assert!("nonsense".parse::<Mode>().is_err());
    for m in Mode::ALL {
        assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
    }
    assert_eq!("collab".parse::<Mode>().unwrap(), Mode::CollabU);
}

#[test]
fn event_thresholds() {
    let ec = cfg(Mode::DaaU);
    let mut e = EventSet::default();
    classify_events(&mut e, Some(1200.0), 9000.0, &ec);
    assert!(e.hmd_violation && !e.astm_los && !e.excursion);
    let mut e = EventSet::default();
    classify_events(&mut e, Some(1725.0 * 0.3048), 10_000.0, &ec);
    assert!(e.hmd_violation && e.astm_los && !e.excursion);
    let mut e = EventSet::default();
    classify_events(&mut e, None, 10_401.0, &ec);
    assert!(e.excursion && !e.hmd_violation);
}

#[test]
fn excursion_recorded_past_radius() {
    // two aircraft flying straight out past a reduced radius
    let mut ec = cfg(Mode::DaaU);
    ec.excursion_radius_m = 6000.0;
    let sc = ScenarioConfig::new(0, vec![Mission::new(1, 7), Mission::new(4, 13)]);
    let r = run_scenario(&sc, &ec);
    assert!(r.events.excursion);
    assert!(r.aircraft.iter().all(|a| a.finished()));
}

fn flight_legs(sc: &ScenarioConfig, ec: &EngineConfig) -> Vec<usize> {
    let (_, trace) = run_scenario_traced(sc, ec);
    let plan = trace.plan.unwrap();
    (0..plan.paths.len()).map(|i| plan.legs(i)).collect()
}

#[test]
fn strategic_sample_is_safe_and_on_time() {
    let set = gen_unperturbed(&AirspaceConfig::default());
    let ec = cfg(Mode::StrategicU);
    for id in (0..set.len() as u64).step_by(9973) {
        let sc = set.get(id).unwrap();
        let r = run_scenario(&sc, &ec);
        assert!(r.anomalies.is_empty(), "{id}: {:?}", r.anomalies);
        assert!(!r.events.hmd_violation && !r.events.excursion && !r.events.timeout, "{id}: {:?}", r.events);
        let legs = flight_legs(&sc, &ec);
        for (a, n) in r.aircraft.iter().zip(legs) {
            let t = a.flight_time_s.unwrap();
            let want = n as f64 * ec.cell_time();
            assert!((t - want).abs() <= 0.02 * want, "{id}/{}: {t} vs {want}", a.id);
        }
    }
}

/// Entry and exit times of every cell visit, from a fine trace.
fn visits(trace: &Trace, aircraft: usize) -> Vec<(i64, f64, f64)> {
    let mut out: Vec<(i64, f64, f64)> = Vec::new();
    for row in trace.rows.iter().filter(|r| r.aircraft == aircraft) {
        match out.last_mut() {
            Some(v) if v.0 == row.cell_index => v.2 = row.t_s,
            _ => out.push((row.cell_index, row.t_s, row.t_s)),
        }
    }
    out
}

fn check_occupation(sc: &ScenarioConfig, mode: Mode) {
    let mut ec = cfg(mode);
    ec.dt_integration_s = 0.1;
    ec.request_margin_s = 1.0;
    let (r, trace) = run_scenario_traced(sc, &ec);
    assert!(r.anomalies.is_empty(), "{:?}", r.anomalies);
    let t_cell = ec.cell_time();
    for a in &r.aircraft {
        let v = visits(&trace, a.id);
        // skip origin and destination visits
        for &(cell, t0, t1) in &v[1..v.len().saturating_sub(1)] {
            let d = t1 - t0;
            let holds_here = (d / t_cell).round().max(1.0);
            assert!(
                (d - holds_here * t_cell).abs() <= 2.0,
                "aircraft {} cell {cell}: {d:.2}s",
                a.id
            );
        }
    }
}

#[test]
fn constant_occupation_in_cell_modes() {
    let set = gen_unperturbed(&AirspaceConfig::default());
    for id in [0u64, 4242, 77_777, 122_414] {
        let sc = set.get(id).unwrap();
        check_occupation(&sc, Mode::StrategicU);
        check_occupation(&sc, Mode::CollabU);
    }
}

#[test]
fn collab_exclusive_occupancy() {
    let set = gen_unperturbed(&AirspaceConfig::default());
    let ec = cfg(Mode::CollabU);
    for id in (0..set.len() as u64).step_by(12_011) {
        let sc = set.get(id).unwrap();
        let (r, trace) = run_scenario_traced(&sc, &ec);
        assert!(r.anomalies.is_empty());
        assert!(!r.events.hmd_violation && !r.events.timeout, "{id}: {:?} {:?}", r.events, r.actual_hmd_m);
        let mut by_t: std::collections::BTreeMap<u64, Vec<i64>> = Default::default();
        for row in &trace.rows {
            by_t.entry((row.t_s * 2.0) as u64).or_default().push(row.cell_index);
        }
        for cells in by_t.values() {
            let mut c = cells.clone();
            c.sort();
            c.dedup();
            assert_eq!(c.len(), cells.len(), "{id}: shared cell");
        }
    }
}

#[test]
fn recovery_modes_run_clean() {
    let set = crate::scenario::gen_recovery(&AirspaceConfig::default());
    for mode in [Mode::DaaRec, Mode::CollabRec] {
        let ec = cfg(mode);
        for id in (0..set.len() as u64).step_by(48_611) {
            let sc = set.get(id).unwrap();
            let r = run_scenario(&sc, &ec);
            assert!(r.anomalies.is_empty(), "{mode} {id}: {:?}", r.anomalies);
            let intr = &r.aircraft[sc.intruder_index.unwrap()];
            assert!(intr.intruder);
            assert!(intr.entry_time_s.unwrap() >= 30.0);
            if mode == Mode::CollabRec {
                assert!(!r.events.timeout && !r.events.excursion, "{id}: {:?}", r.events);
            }
        }
    }
}

#[test]
fn deterministic() {
    let set = crate::scenario::gen_recovery(&AirspaceConfig::default());
    let sc = set.get(31_337).unwrap();
    for mode in Mode::ALL {
        let ec = cfg(mode);
        let (a, ta) = run_scenario_traced(&sc, &ec);
        let (b, tb) = run_scenario_traced(&sc, &ec);
        assert_eq!(a, b);
        assert_eq!(ta.rows, tb.rows);
        assert_eq!(a, run_scenario(&sc, &ec));
    }
}

#[test]
fn arrival_removes_aircraft_from_samples() {
    let set = gen_unperturbed(&AirspaceConfig::default());
    let sc = set.get(500).unwrap();
    let (r, trace) = run_scenario_traced(&sc, &cfg(Mode::StrategicU));
    for a in &r.aircraft {
        let done = a.flight_time_s.unwrap();
        assert!(trace.rows.iter().filter(|row| row.aircraft == a.id).all(|row| row.t_s <= done + 1e-9));
        if let Some(c) = a.cpa {
            assert!(c.t_s <= done);
            assert!((c.own_position.distance(c.other_position) - c.min_distance_m).abs() < 1e-6);
        }
    }
}

#[test]
fn one_extra_leg_costs_one_spacing() {
    let set = gen_unperturbed(&AirspaceConfig::default());
    let ec = cfg(Mode::StrategicU);
    let spacing = ec.airspace.centroid_spacing_m;
    let mut found = 0;
    for id in (0..set.len() as u64).step_by(101) {
        let sc = set.get(id).unwrap();
        let (r, trace) = run_scenario_traced(&sc, &ec);
        let plan = trace.plan.unwrap();
        for a in &r.aircraft {
            // corner to opposite corner, flown with a single detour
            if (a.direct_distance_m - 4.0 * spacing).abs() < 1e-6 && plan.legs(a.id) == 5 {
                let extra = a.flown_distance_m - a.direct_distance_m;
                assert!((extra - spacing).abs() <= 1.0, "{id}/{}: extra {extra}", a.id);
                found += 1;
            }
        }
    }
    assert!(found > 0);
}
