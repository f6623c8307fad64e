//! Experiment configuration: `key=value` lines with `#` comments.
//!
//! [`ExperimentConfig::to_text`] emits every key in a fixed order with all
//! defaults filled in, and parsing that text reproduces the config exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::defect::StructureKind;
use crate::error::{Error, Result};
use crate::measure::{parse_measure, AtomicMeasure};
use crate::torus::TorusPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    ScanN,
    Lyapunov,
    Stable,
    Nonrandom,
    Defect,
    Orbit,
    Equidist,
    Smoothing,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Verify,
        Command::ScanN,
        Command::Lyapunov,
        Command::Stable,
        Command::Nonrandom,
        Command::Defect,
        Command::Orbit,
        Command::Equidist,
        Command::Smoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::ScanN => "scan-n",
            Command::Lyapunov => "lyapunov",
            Command::Stable => "stable",
            Command::Nonrandom => "nonrandom",
            Command::Defect => "defect",
            Command::Orbit => "orbit",
            Command::Equidist => "equidist",
            Command::Smoothing => "smoothing",
        }
    }

    /// Verdicts an `expect=` key may name for this command.
    pub fn verdicts(self) -> &'static [&'static str] {
        match self {
            Command::Verify | Command::ScanN => &["found", "notfound"],
            Command::Lyapunov => &["positive", "nonpositive"],
            Command::Stable => &["direction"],
            Command::Nonrandom => &["nonrandom", "random"],
            Command::Defect => &["invariant", "noninvariant"],
            Command::Orbit => &["finite", "infinite"],
            Command::Equidist => &["equidistributing", "suspicious"],
            Command::Smoothing => &["visible", "invisible"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
            Error::range(
                "command",
                format!("unknown command `{s}`, expected one of {}", names.join(", ")),
            )
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Auto,
    Exact,
    Mc,
}

impl ModeChoice {
    fn name(self) -> &'static str {
        match self {
            ModeChoice::Auto => "auto",
            ModeChoice::Exact => "exact",
            ModeChoice::Mc => "mc",
        }
    }
}

/// Every key, in emission order.
pub const KEYS: &[&str] = &[
    "command",
    "measure",
    "master_seed",
    "workers",
    "output",
    "formats",
    "expect",
    "N_max",
    "C",
    "nx",
    "ny",
    "ntheta",
    "mode",
    "budget",
    "samples",
    "certify",
    "x0",
    "theta0",
    "n_steps",
    "n_batches",
    "n",
    "n_omegas",
    "tolerance",
    "kind",
    "degree",
    "test_points",
    "starts",
    "orbit_len",
    "F",
    "tol",
    "g",
];

/// Keys that do not influence any reported number.
pub const EXECUTION_KEYS: &[&str] = &["workers", "output"];

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Canonical measure text: presets verbatim, files inlined as atom lines.
    pub measure_text: String,
    pub measure: AtomicMeasure,
    pub master_seed: u64,
    pub workers: usize,
    pub output: Option<String>,
    pub formats: Vec<Format>,
    pub expect: Option<String>,
    pub n_max: usize,
    pub threshold: f64,
    pub nx: usize,
    pub ny: usize,
    pub ntheta: usize,
    pub mode: ModeChoice,
    pub budget: u128,
    pub samples: usize,
    pub certify: bool,
    pub x0: TorusPoint,
    pub theta0: f64,
    pub n_steps: usize,
    pub n_batches: usize,
    pub n: usize,
    pub n_omegas: usize,
    pub tolerance: f64,
    pub kind: StructureKind,
    pub degree: usize,
    pub test_points: usize,
    pub starts: usize,
    pub orbit_len: usize,
    pub f: usize,
    pub tol: f64,
    pub g: usize,
}

/// Raw `key → (value, line)` pairs before resolution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    /// Reads `key=value` lines; `#` starts a comment. Line numbers are
    /// 1-based.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(lineno, "empty key"));
            }
            if !KEYS.contains(&key) {
                return Err(Error::UnknownKey(key.to_string()));
            }
            if raw.entries.contains_key(key) {
                return Err(Error::parse(lineno, format!("duplicate key `{key}`")));
            }
            raw.entries.insert(key.to_string(), (value.trim().to_string(), lineno));
        }
        Ok(raw)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::parse(0, format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), (value.trim().to_string(), 0));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(_, l)| *l)
    }

    fn value<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::parse(self.line_of(key), format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    /// Integer count; also accepts integral scientific notation like `1e6`.
    fn count(&self, key: &str, default: u128) -> Result<u128> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<u128>().or_else(|_| {
                let f: f64 = v
                    .parse()
                    .map_err(|_| Error::parse(self.line_of(key), format!("`{key}`: cannot parse `{v}`")))?;
                if f >= 0.0 && f.fract() == 0.0 && f < 1e38 {
                    Ok(f as u128)
                } else {
                    Err(Error::range(key, format!("`{v}` is not a non-negative integer")))
                }
            }),
        }
    }

    fn usize_at_least(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        let v = self.count(key, default as u128)?;
        if v < min as u128 || v > usize::MAX as u128 {
            return Err(Error::range(key, format!("must be at least {min}, got {v}")));
        }
        Ok(v as usize)
    }

    fn finite(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.value(key, default)?;
        if !v.is_finite() {
            return Err(Error::range(key, "must be finite"));
        }
        Ok(v)
    }
}

fn parse_point(key: &str, v: &str) -> Result<TorusPoint> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let coords: Vec<f64> = parts.iter().filter_map(|p| p.parse().ok()).collect();
    if parts.len() != 2 || coords.len() != 2 || coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::range(key, format!("expected `x,y`, got `{v}`")));
    }
    Ok(TorusPoint::new(coords[0], coords[1]))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::range(key, format!("expected true or false, got `{v}`"))),
    }
}

fn resolve_measure(text: &str) -> Result<(String, AtomicMeasure)> {
    if let Some(path) = text.strip_prefix("file:") {
        let content = std::fs::read_to_string(path.trim())?;
        let measure = parse_measure(&content)?;
        let content = content.trim();
        let canonical = if content.starts_with("preset:") && !content.contains('\n') {
            content.to_string()
        } else {
            measure.to_literal().lines().collect::<Vec<_>>().join(" | ")
        };
        return Ok((canonical, measure));
    }
    Ok((text.to_string(), parse_measure(text)?))
}

impl ExperimentConfig {
    /// Parses and resolves a config file.
    pub fn parse(text: &str) -> Result<Self> {
        Self::resolve(&RawConfig::parse(text)?)
    }

    /// Fills defaults and checks ranges.
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let command: Command = raw
            .get("command")
            .ok_or_else(|| Error::parse(0, "missing required key `command`"))?
            .parse()?;
        let measure_src = raw
            .get("measure")
            .ok_or_else(|| Error::parse(0, "missing required key `measure`"))?;
        let (measure_text, measure) = resolve_measure(measure_src)?;

        let mut formats = Vec::new();
        for f in raw.get("formats").unwrap_or("json,csv,svg").split(',') {
            let f = match f.trim() {
                "json" => Format::Json,
                "csv" => Format::Csv,
                "svg" => Format::Svg,
                "" => continue,
                other => return Err(Error::range("formats", format!("unknown format `{other}`"))),
            };
            if !formats.contains(&f) {
                formats.push(f);
            }
        }
        formats.sort();

        let expect = raw.get("expect").filter(|v| !v.is_empty()).map(str::to_string);
        if let Some(e) = &expect {
            if !command.verdicts().contains(&e.as_str()) {
                return Err(Error::range(
                    "expect",
                    format!(
                        "`{e}` is not a verdict of {command}; expected one of {}",
                        command.verdicts().join(", ")
                    ),
                ));
            }
        }

        let mode = match raw.get("mode").unwrap_or("auto") {
            "auto" => ModeChoice::Auto,
            "exact" => ModeChoice::Exact,
            "mc" | "monte_carlo" => ModeChoice::Mc,
            other => {
                return Err(Error::range(
                    "mode",
                    format!("expected auto, exact or mc, got `{other}`"),
                ))
            }
        };

        let tolerance = raw.finite("tolerance", 1e-3)?;
        if tolerance < 0.0 {
            return Err(Error::range("tolerance", "must be non-negative"));
        }
        let tol = raw.finite("tol", 1e-9)?;
        if tol <= 0.0 {
            return Err(Error::range("tol", "must be positive"));
        }
        let n_batches = raw.usize_at_least("n_batches", 20, 2)?;
        let n_steps = raw.usize_at_least("n_steps", 100_000, 2)?;
        if n_steps < n_batches {
            return Err(Error::range("n_steps", "must be at least n_batches"));
        }
        let orbit_len = raw.usize_at_least("orbit_len", 100_000, 1)?;
        if command == Command::Orbit && orbit_len < 10 {
            return Err(Error::range(
                "orbit_len",
                "finite-orbit detection needs at least 10 points",
            ));
        }
        let output = raw.get("output").filter(|v| !v.is_empty()).map(str::to_string);

        Ok(ExperimentConfig {
            command,
            measure_text,
            measure,
            master_seed: raw.value("master_seed", 0u64)?,
            workers: raw.usize_at_least("workers", 1, 1)?,
            output,
            formats,
            expect,
            n_max: raw.usize_at_least("N_max", 8, 1)?,
            threshold: raw.finite("C", crate::expansion::DEFAULT_THRESHOLD)?,
            nx: raw.usize_at_least("nx", 32, 1)?,
            ny: raw.usize_at_least("ny", 32, 1)?,
            ntheta: raw.usize_at_least("ntheta", 64, 1)?,
            mode,
            budget: {
                let b = raw.count("budget", crate::expansion::DEFAULT_BUDGET)?;
                if b == 0 {
                    return Err(Error::range("budget", "must be at least 1"));
                }
                b
            },
            samples: raw.usize_at_least("samples", crate::expansion::DEFAULT_SAMPLES, 1)?,
            certify: parse_bool("certify", raw.get("certify").unwrap_or("false"))?,
            x0: parse_point("x0", raw.get("x0").unwrap_or("0.3,0.7"))?,
            theta0: raw.finite("theta0", 0.0)?,
            n_steps,
            n_batches,
            n: raw.usize_at_least("n", 200, 1)?,
            n_omegas: raw.usize_at_least("n_omegas", 20, 2)?,
            tolerance,
            kind: raw.get("kind").unwrap_or("line_field").parse()?,
            degree: {
                let d = raw.usize_at_least("degree", 0, 0)?;
                if d > 16 {
                    return Err(Error::range("degree", "must be at most 16"));
                }
                d
            },
            test_points: raw.usize_at_least("test_points", crate::defect::DEFAULT_TEST_POINTS, 1)?,
            starts: raw.usize_at_least("starts", crate::defect::DEFAULT_STARTS, 1)?,
            orbit_len,
            f: raw.usize_at_least("F", 5, 1)?,
            tol,
            g: raw.usize_at_least("g", 64, 1)?,
        })
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "command" => self.command.name().to_string(),
            "measure" => self.measure_text.clone(),
            "master_seed" => self.master_seed.to_string(),
            "workers" => self.workers.to_string(),
            "output" => self.output.clone().unwrap_or_default(),
            "formats" => self.formats.iter().map(|f| f.name()).collect::<Vec<_>>().join(","),
            "expect" => self.expect.clone().unwrap_or_default(),
            "N_max" => self.n_max.to_string(),
            "C" => self.threshold.to_string(),
            "nx" => self.nx.to_string(),
            "ny" => self.ny.to_string(),
            "ntheta" => self.ntheta.to_string(),
            "mode" => self.mode.name().to_string(),
            "budget" => self.budget.to_string(),
            "samples" => self.samples.to_string(),
            "certify" => self.certify.to_string(),
            "x0" => format!("{},{}", self.x0.x(), self.x0.y()),
            "theta0" => self.theta0.to_string(),
            "n_steps" => self.n_steps.to_string(),
            "n_batches" => self.n_batches.to_string(),
            "n" => self.n.to_string(),
            "n_omegas" => self.n_omegas.to_string(),
            "tolerance" => self.tolerance.to_string(),
            "kind" => self.kind.name().to_string(),
            "degree" => self.degree.to_string(),
            "test_points" => self.test_points.to_string(),
            "starts" => self.starts.to_string(),
            "orbit_len" => self.orbit_len.to_string(),
            "F" => self.f.to_string(),
            "tol" => self.tol.to_string(),
            "g" => self.g.to_string(),
            _ => unreachable!("unlisted key {key}"),
        }
    }

    /// Every key with its resolved value, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|&k| (k, self.value_of(k))).collect()
    }

    /// The resolved config as parseable text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Entries that determine the results, i.e. all but [`EXECUTION_KEYS`].
    pub fn result_entries(&self) -> Vec<(&'static str, String)> {
        self.entries()
            .into_iter()
            .filter(|(k, _)| !EXECUTION_KEYS.contains(k))
            .collect()
    }

    /// SHA-256 of the result-determining entries, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.result_entries() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> crate::expansion::BundleGrid {
        crate::expansion::BundleGrid {
            nx: self.nx,
            ny: self.ny,
            ntheta: self.ntheta,
        }
    }

    pub fn mode_policy(&self) -> crate::expansion::ModePolicy {
        use crate::expansion::ModePolicy;
        match self.mode {
            ModeChoice::Auto => ModePolicy::Auto {
                budget: self.budget,
                samples: self.samples,
            },
            ModeChoice::Exact => ModePolicy::Exact { budget: self.budget },
            ModeChoice::Mc => ModePolicy::MonteCarlo { samples: self.samples },
        }
    }
}
