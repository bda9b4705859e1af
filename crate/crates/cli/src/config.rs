//! Run configuration: defaults, `key=value` files and command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Configuration error; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Fully resolved settings of one run. Every JSON report embeds a copy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub system: String,
    pub metric: Option<String>,
    #[serde(rename = "I")]
    pub inertia_i: f64,
    #[serde(rename = "J")]
    pub inertia_j: f64,
    /// Initial point for `simulate`; the registry base point when absent.
    pub q0: Option<Vec<f64>>,
    pub v0: Vec<f64>,
    #[serde(rename = "T")]
    pub duration: f64,
    pub steps: usize,
    pub grid: usize,
    pub radius: Option<f64>,
    /// Per-axis half-widths of the `expmap-grid` box.
    pub extent: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub from: Option<Vec<f64>>,
    pub to: Vec<f64>,
    pub nodes: usize,
    pub amplitude: f64,
    pub mode: usize,
    /// Magnitude of seeded random node jitter added to the initial curve.
    pub jitter: f64,
    pub objective: String,
    pub max_iters: usize,
    pub probe_points: usize,
    pub geodesic_steps: usize,
}

impl RunConfig {
    pub fn defaults(command: &str) -> Self {
        Self {
            command: command.to_string(),
            system: "particle".into(),
            metric: None,
            inertia_i: 1.0,
            inertia_j: 1.0,
            q0: None,
            v0: vec![1.0, 1.0],
            duration: 1.0,
            steps: 1000,
            grid: 21,
            radius: None,
            extent: None,
            tol: None,
            seed: 0,
            out: PathBuf::from("out"),
            from: None,
            to: vec![1.0, 1.0],
            nodes: 21,
            amplitude: 0.1,
            mode: 1,
            jitter: 0.0,
            objective: "length".into(),
            max_iters: 5000,
            probe_points: 5,
            geodesic_steps: 40,
        }
    }

    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "system" => self.system = value.to_string(),
            "metric" => self.metric = Some(value.to_string()),
            "I" => self.inertia_i = parse_f64(key, value)?,
            "J" => self.inertia_j = parse_f64(key, value)?,
            "q0" => self.q0 = Some(parse_list(key, value)?),
            "v0" => self.v0 = parse_list(key, value)?,
            "T" => self.duration = parse_f64(key, value)?,
            "steps" => self.steps = parse_usize(key, value)?,
            "grid" => self.grid = parse_usize(key, value)?,
            "radius" => self.radius = Some(parse_f64(key, value)?),
            "extent" => self.extent = Some(parse_list(key, value)?),
            "tol" => self.tol = Some(parse_f64(key, value)?),
            "seed" => {
                self.seed = value.parse().or_else(|_| {
                    err(format!("`seed` expects an unsigned integer, got `{value}`"))
                })?
            }
            "out" => self.out = PathBuf::from(value),
            "from" => self.from = Some(parse_list(key, value)?),
            "to" => self.to = parse_list(key, value)?,
            "nodes" => self.nodes = parse_usize(key, value)?,
            "amplitude" => self.amplitude = parse_f64(key, value)?,
            "mode" => self.mode = parse_usize(key, value)?,
            "jitter" => self.jitter = parse_f64(key, value)?,
            "objective" => self.objective = value.to_string(),
            "max_iters" => self.max_iters = parse_usize(key, value)?,
            "probe_points" => self.probe_points = parse_usize(key, value)?,
            "geodesic_steps" => self.geodesic_steps = parse_usize(key, value)?,
            other => return err(format!("unknown configuration key `{other}`")),
        }
        Ok(())
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(
        command: &str,
        file: Option<&Path>,
        flags: &[(&str, String)],
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(command);
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .or_else(|e| err(format!("cannot read config file {}: {e}", path.display())))?;
            for (key, value) in parse_key_values(&text)? {
                cfg.apply(&key, &value)?;
            }
        }
        for (key, value) in flags {
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return err("`tol` must be positive");
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return err("`radius` must be positive");
            }
        }
        for (name, n) in [
            ("grid", self.grid),
            ("nodes", self.nodes),
            ("probe_points", self.probe_points),
        ] {
            if n < 2 {
                return err(format!("`{name}` must be at least 2"));
            }
        }
        for (name, n) in [
            ("steps", self.steps),
            ("geodesic_steps", self.geodesic_steps),
            ("mode", self.mode),
        ] {
            if n < 1 {
                return err(format!("`{name}` must be at least 1"));
            }
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return err("`T` must be a non-negative number");
        }
        if !(self.inertia_i > 0.0 && self.inertia_j > 0.0) {
            return err("`I` and `J` must be positive");
        }
        if self.jitter.is_nan() || self.jitter < 0.0 || !self.amplitude.is_finite() {
            return err("`jitter` must be non-negative and `amplitude` finite");
        }
        if let Some(e) = &self.extent {
            if e.iter().any(|&x| x.is_nan() || x <= 0.0) {
                return err("`extent` entries must be positive");
            }
        }
        if !matches!(self.objective.as_str(), "length" | "energy") {
            return err(format!(
                "`objective` must be length or energy, got `{}`",
                self.objective
            ));
        }
        Ok(())
    }
}

/// Parses a flat `key=value` file. Blank lines and lines starting with `#`
/// are skipped; later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!(
                "config line {}: expected key=value, got `{line}`",
                n + 1
            ));
        };
        let key = key.trim();
        if key.is_empty() {
            return err(format!("config line {}: empty key", n + 1));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    match value.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("`{key}` expects a finite number, got `{value}`")),
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().or_else(|_| {
        err(format!(
            "`{key}` expects a non-negative integer, got `{value}`"
        ))
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.is_empty() {
        return err(format!("`{key}` expects a comma-separated list of numbers"));
    }
    value.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_parsing_skips_comments() {
        let kv = parse_key_values("# comment\n\nsystem = disk\nv0=1, 2\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("system".into(), "disk".into()),
                ("v0".into(), "1, 2".into())
            ]
        );
        assert!(parse_key_values("novalue").is_err());
        assert!(parse_key_values("=3").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "steps=200\ngrid=7\nsystem=disk\n").unwrap();
        let cfg = RunConfig::resolve("simulate", Some(&path), &[("steps", "300".into())]).unwrap();
        assert_eq!(cfg.steps, 300);
        assert_eq!(cfg.grid, 7);
        assert_eq!(cfg.system, "disk");
        assert_eq!(cfg.nodes, 21);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut cfg = RunConfig::defaults("simulate");
        assert!(cfg.apply("steps", "-3").is_err());
        assert!(cfg.apply("v0", "1,x").is_err());
        assert!(cfg.apply("colour", "red").is_err());
        assert!(RunConfig::resolve("x", None, &[("tol", "0".into())]).is_err());
        assert!(RunConfig::resolve("x", None, &[("grid", "1".into())]).is_err());
        assert!(RunConfig::resolve("x", None, &[("objective", "area".into())]).is_err());
    }
}
