use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hexatm_core::daa::{heading_bands, DaaConfig};
use hexatm_core::geometry::Vec2;
use hexatm_core::strategic::{solve, AllocationProblem};
use hexatm_core::{gen_recovery, gen_unperturbed, run_scenario, AircraftState, AirspaceConfig, EngineConfig, Mode};

fn bench_solve(c: &mut Criterion) {
    let cfg = AirspaceConfig::default();
    let set = gen_unperturbed(&cfg);
    let mut g = c.benchmark_group("solve");
    for id in [0u64, 61_207, 122_414] {
        let sc = set.get(id).unwrap();
        let p = AllocationProblem::new(
            cfg,
            sc.missions.iter().enumerate().map(|(i, m)| (i, m.origin, m.destination)).collect(),
        );
        g.bench_with_input(BenchmarkId::from_parameter(id), &p, |b, p| b.iter(|| solve(black_box(p)).unwrap()));
    }
    g.finish();
}

fn bench_run(c: &mut Criterion) {
    let cfg = AirspaceConfig::default();
    let unperturbed = gen_unperturbed(&cfg).get(4242).unwrap();
    let recovery = gen_recovery(&cfg).get(4242 * 4 + 1).unwrap();
    let mut g = c.benchmark_group("run_scenario");
    g.sample_size(20);
    for mode in Mode::ALL {
        let sc = if mode.is_recovery() { &recovery } else { &unperturbed };
        let ec = EngineConfig::new(mode);
        g.bench_function(mode.as_str(), |b| b.iter(|| run_scenario(black_box(sc), &ec)));
    }
    g.finish();
}

fn bench_bands(c: &mut Criterion) {
    let cfg = DaaConfig::default();
    let own = AircraftState::new(Vec2::new(0.0, 0.0), 0.0, 44.4);
    let intruders = [
        AircraftState::new(Vec2::new(6000.0, 200.0), std::f64::consts::PI, 44.4),
        AircraftState::new(Vec2::new(3000.0, -4000.0), 1.6, 44.4),
        AircraftState::new(Vec2::new(-2000.0, 5000.0), -1.2, 44.4),
    ];
    c.bench_function("heading_bands/3_intruders", |b| b.iter(|| heading_bands(black_box(&own), &intruders, &cfg)));
}

criterion_group!(benches, bench_solve, bench_run, bench_bands);
criterion_main!(benches);
