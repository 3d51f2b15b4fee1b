//! Results files: a manifest line, one JSON record per scenario sorted by
//! id, and a trailer holding the record count and digest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use hexatm_core::{EngineConfig, ScenarioResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub engine: EngineConfig,
    pub set_sha256: String,
    pub set_len: usize,
    pub sample_k: Option<usize>,
    pub seed: Option<u64>,
    pub limit: Option<usize>,
    pub intruder_entry_s: Option<f64>,
    pub unfinished_rule: String,
    pub recovery_rule: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    manifest: RunManifest,
}

#[derive(Debug, Serialize, Deserialize)]
struct Trailer {
    records: u64,
    records_sha256: String,
}

/// Streams records to disk while hashing them.
pub struct ResultsWriter {
    out: BufWriter<File>,
    hasher: Sha256,
    records: u64,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::data(format!("{}: {e}", path.display()))
}

impl ResultsWriter {
    pub fn create(path: &Path, manifest: &RunManifest) -> Result<Self, CliError> {
        let mut out = BufWriter::new(File::create(path).map_err(io(path))?);
        let header = serde_json::to_string(&Header { manifest: manifest.clone() }).map_err(CliError::data)?;
        writeln!(out, "{header}").map_err(io(path))?;
        Ok(Self { out, hasher: Sha256::new(), records: 0 })
    }

    pub fn push(&mut self, r: &ScenarioResult) -> Result<(), CliError> {
        let mut line = serde_json::to_string(r).map_err(CliError::data)?;
        line.push('\n');
        self.hasher.update(line.as_bytes());
        self.out.write_all(line.as_bytes()).map_err(CliError::data)?;
        self.records += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64, CliError> {
        let t = Trailer { records: self.records, records_sha256: hex::encode(self.hasher.finalize()) };
        let line = serde_json::to_string(&t).map_err(CliError::data)?;
        writeln!(self.out, "{line}").map_err(CliError::data)?;
        self.out.flush().map_err(CliError::data)?;
        Ok(self.records)
    }
}

/// Reads a results file, rejecting it unless the manifest is present and
/// the trailer digest matches the records.
pub fn read_results(path: &Path) -> Result<(RunManifest, Vec<ScenarioResult>), CliError> {
    let bad = |what: String| CliError::data(format!("{}: {what}", path.display()));
    let mut lines = BufReader::new(File::open(path).map_err(io(path))?).lines();
    let first = lines.next().transpose().map_err(io(path))?.ok_or_else(|| bad("empty file".into()))?;
    let header: Header = serde_json::from_str(&first).map_err(|e| bad(format!("missing manifest: {e}")))?;
    let mut hasher = Sha256::new();
    let mut records = Vec::new();
    let mut trailer = None;
    for line in lines {
        let line = line.map_err(io(path))?;
        if trailer.is_some() {
            return Err(bad("data after the trailer".into()));
        }
        if let Ok(t) = serde_json::from_str::<Trailer>(&line) {
            trailer = Some(t);
            continue;
        }
        let r: ScenarioResult =
            serde_json::from_str(&line).map_err(|e| bad(format!("record {}: {e}", records.len() + 1)))?;
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
        records.push(r);
    }
    let trailer = trailer.ok_or_else(|| bad("truncated: no trailer".into()))?;
    if trailer.records != records.len() as u64 || trailer.records_sha256 != hex::encode(hasher.finalize()) {
        return Err(bad("records do not match the manifest digest".into()));
    }
    if let Some(r) = records.iter().find(|r| r.mode != header.manifest.engine.mode) {
        return Err(bad(format!("scenario {} was run in mode {}", r.scenario_id, r.mode)));
    }
    Ok((header.manifest, records))
}
