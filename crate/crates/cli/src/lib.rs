//! `hexatm` command-line front end: scenario sets, parallel sweeps,
//! aggregation and single-scenario traces.

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hexatm_core::engine::Trace;
use hexatm_core::metrics::{self, AggregateStats, DEFAULT_BIN_WIDTH_M, UNFINISHED_RULE};
use hexatm_core::scenario::{sample_ids, RECOVERY_RULE};
use hexatm_core::{
    gen_recovery, gen_unperturbed, run_scenario, run_scenario_traced, AirspaceConfig, EngineConfig, Mode,
    ScenarioConfig, ScenarioResult,
};
use rayon::prelude::*;
use serde::Serialize;

pub mod params;
pub mod results;
pub mod setfile;

use params::Params;
use results::{read_results, ResultsWriter, RunManifest};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ANOMALY: i32 = 3;

/// Scenarios simulated per parallel batch before writing.
const BATCH: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: m.to_string() }
    }

    pub fn data(m: impl fmt::Display) -> Self {
        Self { code: EXIT_DATA, message: m.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "hexatm", version, about = "Hexagonal-cell airspace traffic coordination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SetArg {
    Unperturbed,
    Recovery,
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Coordination method: daa, strategic, collab, daa_rec or collab_rec.
    method: Mode,
    /// Scenario-set CSV written by `generate`.
    #[arg(long)]
    set: PathBuf,
    /// DAA distance threshold in nautical miles.
    #[arg(long)]
    dthr_nmi: Option<f64>,
    /// File of key=value lines overriding constants.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a constant; repeatable, wins over the config file.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl EngineArgs {
    fn params(&self) -> Result<Params, CliError> {
        let mut p = Params::new(EngineConfig::new(self.method));
        if let Some(f) = &self.config {
            p.load_file(f)?;
        }
        for kv in &self.params {
            p.assign(kv)?;
        }
        if let Some(nmi) = self.dthr_nmi {
            p.set("dthr_nmi", &nmi.to_string())?;
        }
        p.check()?;
        Ok(p)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write every scenario of a set as CSV.
    Generate {
        set: SetArg,
        #[arg(long, default_value_t = 2)]
        radius: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a set (or a sample of it) and write JSON-lines results.
    Run {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Stratified sample size.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Keep only the first N scenarios after sampling.
        #[arg(long)]
        limit: Option<usize>,
        /// Also write a trajectory trace per scenario here.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Summarize one or more results files from the same run configuration.
    Analyze {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_M)]
        hist_bin_m: f64,
    },
    /// Trace a single scenario; CPA, reservation and plan tables go to sibling files.
    Trace {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        id: u64,
        #[arg(long)]
        out: PathBuf,
        /// Keep every integration step instead of metric-step samples.
        #[arg(long)]
        every_tick: bool,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let out = match cli.command {
        Command::Generate { set, radius, out } => generate(set, radius, &out),
        Command::Run { engine, out, workers, sample, seed, limit, trace_dir } => {
            run(&engine, &out, workers, sample, seed, limit, trace_dir.as_deref())
        }
        Command::Analyze { results, out, hist_bin_m } => analyze(&results, &out, hist_bin_m),
        Command::Trace { engine, id, out, every_tick } => trace(&engine, id, &out, every_tick),
    };
    match out {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hexatm: {e}");
            e.code
        }
    }
}

fn generate(set: SetArg, radius: u32, out: &Path) -> Result<(), CliError> {
    let cfg = AirspaceConfig { radius_rings: radius, ..AirspaceConfig::default() };
    cfg.validate().map_err(CliError::usage)?;
    let s = match set {
        SetArg::Unperturbed => gen_unperturbed(&cfg),
        SetArg::Recovery => gen_recovery(&cfg),
    };
    let n = setfile::write_set(out, s.iter())?;
    println!("{n}");
    Ok(())
}

/// Loads the set and picks the scenarios to run, sorted by id.
fn select(
    engine: &EngineArgs,
    p: &Params,
    sample: Option<usize>,
    seed: u64,
    limit: Option<usize>,
) -> Result<(Vec<ScenarioConfig>, RunManifest), CliError> {
    let loaded = setfile::read_set(&engine.set)?;
    let set_len = loaded.scenarios.len();
    let mut chosen = match sample {
        Some(k) => {
            let ids = sample_ids(set_len, k, seed).map_err(CliError::usage)?;
            ids.into_iter().map(|i| loaded.scenarios[i as usize].clone()).collect()
        }
        None => loaded.scenarios,
    };
    chosen.sort_by_key(|s| s.scenario_id);
    if let Some(n) = limit {
        chosen.truncate(n);
    }
    check_scenarios(&mut chosen, p)?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        engine: p.engine,
        set_sha256: loaded.sha256,
        set_len,
        sample_k: sample,
        seed: sample.map(|_| seed),
        limit,
        intruder_entry_s: p.intruder_entry_s,
        unfinished_rule: UNFINISHED_RULE.to_string(),
        recovery_rule: RECOVERY_RULE.to_string(),
    };
    Ok((chosen, manifest))
}

fn check_scenarios(scenarios: &mut [ScenarioConfig], p: &Params) -> Result<(), CliError> {
    let air = hexatm_core::Airspace::new(p.engine.airspace);
    for sc in scenarios {
        if let Some(t) = p.intruder_entry_s {
            sc.intruder_entry_s = t;
        }
        sc.validate(&air).map_err(|e| CliError::data(format!("scenario {}: {e}", sc.scenario_id)))?;
        if p.engine.mode.is_recovery() && sc.intruder_index.is_none() {
            return Err(CliError::data(format!(
                "scenario {} has no intruder; {} needs a recovery set",
                sc.scenario_id, p.engine.mode
            )));
        }
    }
    Ok(())
}

fn run(
    engine: &EngineArgs,
    out: &Path,
    workers: usize,
    sample: Option<usize>,
    seed: u64,
    limit: Option<usize>,
    trace_dir: Option<&Path>,
) -> Result<(), CliError> {
    let p = engine.params()?;
    let (scenarios, manifest) = select(engine, &p, sample, seed, limit)?;
    if let Some(d) = trace_dir {
        fs::create_dir_all(d).map_err(|e| CliError::data(format!("{}: {e}", d.display())))?;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(CliError::usage)?;
    let ec = p.engine;
    let mut w = ResultsWriter::create(out, &manifest)?;
    let mut anomalous = 0usize;
    for batch in scenarios.chunks(BATCH) {
        let results: Vec<Result<ScenarioResult, CliError>> = pool.install(|| {
            batch
                .par_iter()
                .map(|sc| match trace_dir {
                    Some(d) => {
                        let (r, t) = run_scenario_traced(sc, &ec);
                        let path = d.join(format!("{}_{}.csv", ec.mode, sc.scenario_id));
                        write_trace(&path, &t, &r, ec.dt_metric_s, false)?;
                        Ok(r)
                    }
                    None => Ok(run_scenario(sc, &ec)),
                })
                .collect()
        });
        for r in results {
            let r = r?;
            anomalous += (!r.anomalies.is_empty()) as usize;
            w.push(&r)?;
        }
    }
    let n = w.finish()?;
    println!("{n} scenarios, {anomalous} anomalous");
    if n > 0 && anomalous as f64 / n as f64 > p.anomaly_threshold {
        return Err(CliError {
            code: EXIT_ANOMALY,
            message: format!("{anomalous} of {n} scenarios anomalous (threshold {})", p.anomaly_threshold),
        });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    manifest: RunManifest,
    records: usize,
    /// Scenarios left out of the statistics because the run aborted them.
    anomalous_excluded: usize,
    unfinished_rule: &'static str,
    stats: AggregateStats,
}

fn analyze(paths: &[PathBuf], out: &Path, bin: f64) -> Result<(), CliError> {
    if !(bin > 0.0) {
        return Err(CliError::usage("--hist-bin-m must be positive"));
    }
    let mut manifest: Option<RunManifest> = None;
    let mut all = Vec::new();
    for path in paths {
        let (m, records) = read_results(path)?;
        match &manifest {
            Some(first) if *first != m => {
                return Err(CliError::data(format!("{}: manifest differs from {}", path.display(), paths[0].display())))
            }
            _ => manifest = Some(m),
        }
        all.extend(records);
    }
    all.sort_by_key(|r| r.scenario_id);
    if all.windows(2).any(|w| w[0].scenario_id == w[1].scenario_id) {
        return Err(CliError::data("a scenario id appears more than once"));
    }
    let records = all.len();
    let clean: Vec<&ScenarioResult> = all.iter().filter(|r| r.anomalies.is_empty()).collect();
    let stats = metrics::aggregate(clean.iter().copied(), bin).map_err(CliError::data)?;
    let summary = Summary {
        manifest: manifest.expect("at least one results file"),
        records,
        anomalous_excluded: records - clean.len(),
        unfinished_rule: UNFINISHED_RULE,
        stats,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(CliError::data)?;
    text.push('\n');
    fs::write(out, text).map_err(|e| CliError::data(format!("{}: {e}", out.display())))
}

fn trace(engine: &EngineArgs, id: u64, out: &Path, every_tick: bool) -> Result<(), CliError> {
    let p = engine.params()?;
    let loaded = setfile::read_set(&engine.set)?;
    let mut sc = loaded
        .scenarios
        .into_iter()
        .find(|s| s.scenario_id == id)
        .ok_or_else(|| CliError::data(format!("scenario {id} is not in {}", engine.set.display())))?;
    check_scenarios(std::slice::from_mut(&mut sc), &p)?;
    let (r, t) = run_scenario_traced(&sc, &p.engine);
    write_trace(out, &t, &r, p.engine.dt_metric_s, every_tick)?;
    println!("{} rows", t.rows.len());
    Ok(())
}

/// Sibling path: `trace.csv` becomes `trace.<what>.csv`.
pub fn sibling(path: &Path, what: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{what}.csv"))
}

fn on_grid(t: f64, step: f64) -> bool {
    let k = (t / step).round();
    (t - k * step).abs() < 1e-6
}

fn write_trace(path: &Path, t: &Trace, r: &ScenarioResult, dt_metric: f64, every_tick: bool) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in t.rows.iter().filter(|row| every_tick || on_grid(row.t_s, dt_metric)) {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::data)?;

    let cpa_path = sibling(path, "cpa");
    let mut f = BufWriter::new(File::create(&cpa_path).map_err(CliError::data)?);
    let mut lines = vec![
        "aircraft,intruder,finished,flight_time_s,flown_distance_m,extra_distance_m,cpa_other,cpa_t_s,cpa_distance_m,own_x_m,own_y_m,other_x_m,other_y_m"
            .to_string(),
    ];
    for a in &r.aircraft {
        let ft = a.flight_time_s.map_or(String::new(), |v| v.to_string());
        let cpa = a.cpa.map_or(",,,,,,".to_string(), |c| {
            format!(
                "{},{},{},{},{},{},{}",
                c.other, c.t_s, c.min_distance_m, c.own_position.x, c.own_position.y, c.other_position.x, c.other_position.y
            )
        });
        lines.push(format!(
            "{},{},{},{ft},{},{},{cpa}",
            a.id,
            a.intruder,
            a.finished(),
            a.flown_distance_m,
            metrics::extra_distance(a)
        ));
    }
    for l in lines {
        writeln!(f, "{l}").map_err(CliError::data)?;
    }
    f.flush().map_err(CliError::data)?;

    let mut w = csv::Writer::from_path(sibling(path, "reservations")).map_err(csv_err)?;
    w.write_record(["cell", "owner", "t_start_s", "t_end_s", "terminal"]).map_err(csv_err)?;
    for res in &t.reservations {
        w.write_record([
            res.cell.0.to_string(),
            res.owner.to_string(),
            res.t_start_s.to_string(),
            res.t_end_s.to_string(),
            res.terminal.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CliError::data)?;

    if let Some(plan) = &t.plan {
        let mut w = csv::Writer::from_path(sibling(path, "plan")).map_err(csv_err)?;
        w.write_record(["aircraft", "step", "cell"]).map_err(csv_err)?;
        for (a, step, cell) in plan.rows() {
            w.write_record([a.to_string(), step.to_string(), cell.0.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(CliError::data)?;
    }
    Ok(())
}
