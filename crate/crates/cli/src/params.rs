//! Tunable constants: `key = value` lines from a file, then `-p key=value` flags.

use std::fs;
use std::path::Path;

use hexatm_core::daa::dthr_from_nmi;
use hexatm_core::EngineConfig;

use crate::CliError;

/// Fraction of anomalous scenarios above which `run` exits with code 3.
pub const DEFAULT_ANOMALY_THRESHOLD: f64 = 0.05;

pub const KEYS: &[&str] = &[
    "dthr_nmi",
    "dthr_m",
    "lookahead_s",
    "daa_hold_s",
    "band_step_deg",
    "max_band_search_deg",
    "dt_integration_s",
    "dt_metric_s",
    "timeout_s",
    "excursion_radius_m",
    "hmd_violation_m",
    "astm_los_m",
    "capture_radius_m",
    "intruder_retry_s",
    "request_margin_s",
    "intruder_entry_s",
    "speed_mps",
    "turn_rate_deg_s",
    "radius_rings",
    "centroid_spacing_m",
    "anomaly_threshold",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub engine: EngineConfig,
    pub anomaly_threshold: f64,
    /// Overrides the entry time stored in the set file.
    pub intruder_entry_s: Option<f64>,
}

impl Params {
    pub fn new(engine: EngineConfig) -> Self {
        Self { engine, anomaly_threshold: DEFAULT_ANOMALY_THRESHOLD, intruder_entry_s: None }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{key}: '{value}' is not a number")))?;
        let e = &mut self.engine;
        match key.trim() {
            "dthr_nmi" => e.daa.dthr_m = dthr_from_nmi(v),
            "dthr_m" => e.daa.dthr_m = v,
            "lookahead_s" => e.daa.lookahead_s = v,
            "daa_hold_s" => e.daa.hold_s = v,
            "band_step_deg" => e.daa.band_step_deg = v,
            "max_band_search_deg" => e.daa.max_band_search_deg = v,
            "dt_integration_s" => e.dt_integration_s = v,
            "dt_metric_s" => e.dt_metric_s = v,
            "timeout_s" => e.timeout_s = v,
            "excursion_radius_m" => e.excursion_radius_m = v,
            "hmd_violation_m" => e.hmd_violation_m = v,
            "astm_los_m" => e.astm_los_m = v,
            "capture_radius_m" => e.capture_radius_m = v,
            "intruder_retry_s" => e.intruder_retry_s = v,
            "request_margin_s" => e.request_margin_s = v,
            "intruder_entry_s" => self.intruder_entry_s = Some(v),
            "speed_mps" => e.limits.speed_mps = v,
            "turn_rate_deg_s" => {
                e.limits.turn_rate_radps = v.to_radians();
                e.daa.turn_rate_radps = v.to_radians();
            }
            "radius_rings" => {
                if v.fract() != 0.0 || v < 1.0 {
                    return Err(CliError::usage(format!("radius_rings: '{value}' is not a positive integer")));
                }
                e.airspace.radius_rings = v as u32;
            }
            "centroid_spacing_m" => e.airspace.centroid_spacing_m = v,
            "anomaly_threshold" => self.anomaly_threshold = v,
            other => return Err(CliError::usage(format!("unknown parameter '{other}' (known: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Applies one `key=value` assignment.
    pub fn assign(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("expected key=value, got '{kv}'")))?;
        self.set(k, v)
    }

    /// Reads a config file; blank lines and `#` comments are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line)
                .map_err(|e| CliError::usage(format!("{}:{}: {}", path.display(), n + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), CliError> {
        self.engine.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.anomaly_threshold) {
            return Err(CliError::usage("anomaly_threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hexatm_core::Mode;

    #[test]
    fn file_then_flags() {
        let dir = std::env::temp_dir().join(format!("hexatm-params-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let f = dir.join("cfg.txt");
        fs::write(&f, "# sweep\ntimeout_s = 600\ndthr_nmi=1.0\n\n").unwrap();
        let mut p = Params::new(EngineConfig::new(Mode::DaaU));
        p.load_file(&f).unwrap();
        assert_eq!(p.engine.timeout_s, 600.0);
        assert_eq!(p.engine.daa.dthr_m, 1852.0);
        p.assign("timeout_s=800").unwrap();
        assert_eq!(p.engine.timeout_s, 800.0);
        assert_eq!(p.assign("bogus=1").unwrap_err().code, 1);
        assert_eq!(p.assign("timeout_s").unwrap_err().code, 1);
        fs::remove_dir_all(dir).ok();
    }
}
