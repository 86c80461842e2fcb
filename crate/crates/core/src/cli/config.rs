use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EXPERIMENTS: [&str; 4] = [
    "heat-logconvexity",
    "parabolic-backward",
    "controllability",
    "tamed-nse",
];

/// Full experiment description. Every key has a default except the
/// per-experiment required ones, which are `Option`s checked by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub nse: NseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    pub seed: u64,
    pub replicates: u64,
    /// Paths per replicate for parabolic-backward.
    pub paths: u64,
    pub out: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            replicates: 1,
            paths: 20,
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(rename = "J")]
    pub modes: usize,
    pub decay_p: f64,
    /// Master seed for the Brownian paths; `run.seed` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma: None,
            modes: 4,
            decay_p: 1.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub horizon: f64,
    /// Sine coefficients of the first initial datum: Σ c_k sin kξ.
    pub initial: Vec<f64>,
    /// Sine coefficients of the second initial datum (parabolic-backward).
    pub initial2: Vec<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            name: None,
            horizon: 1.0,
            initial: vec![1.0],
            initial2: vec![0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub dt: f64,
    pub t0: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { dt: 1e-3, t0: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    /// Sine coefficients of the target state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    pub reg: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            target: None,
            reg: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NseSection {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(rename = "N_tame")]
    pub n_tame: f64,
    pub nu: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub paths: u64,
    pub eps: f64,
    pub taming: bool,
    /// Amplitude of the Taylor–Green datum X₁(0).
    pub amplitude: f64,
    /// Size of the cos 3x perturbation in X₂(0).
    pub delta: f64,
    pub diag_stride: usize,
    pub test_times: Vec<f64>,
}

impl Default for NseSection {
    fn default() -> Self {
        Self {
            k: None,
            n_tame: 10.0,
            nu: 1.0,
            dt: 5e-4,
            horizon: 0.5,
            paths: 200,
            eps: 1e-8,
            taming: true,
            amplitude: 4.0,
            delta: 0.5,
            diag_stride: 10,
            test_times: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: SweepValues,
}

/// Either a TOML array or a comma/space separated string of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValues {
    List(Vec<f64>),
    Text(String),
}

impl SweepValues {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            SweepValues::List(v) => {
                if v.is_empty() {
                    return Err(Error::Config("`sweep.values` is empty".into()));
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Config(format!(
                        "`sweep.values` entry {bad} is not finite"
                    )));
                }
                Ok(v.clone())
            }
            SweepValues::Text(s) => parse_sweep_values(s),
        }
    }
}

/// Parses "1e-3, 5e-4 2.5e-4" into finite numbers.
pub fn parse_sweep_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, tok) in text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
    {
        let v: f64 = tok.parse().map_err(|_| {
            Error::Config(format!(
                "`sweep.values` entry {} ({tok:?}) is not a number",
                i + 1
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::Config(format!(
                "`sweep.values` entry {} ({tok:?}) is not finite",
                i + 1
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Config("`sweep.values` is empty".into()));
    }
    Ok(out)
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Line on which `section.key` is assigned, if it appears in the text.
fn locate(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    /// Strict parse: unknown sections or keys and type mismatches are errors
    /// carrying the line number.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => Error::Config(format!("line {}: {msg}", line_of(text, span.start))),
                None => Error::Config(msg),
            }
        })
    }

    /// Parse, apply the command-line experiment override and validate.
    pub fn load(text: &str, experiment: Option<&str>) -> Result<Self> {
        let mut cfg = Self::parse(text)?;
        if let Some(e) = experiment {
            cfg.run.experiment = Some(e.to_string());
        }
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => {
                let key = msg.split('`').nth(1).unwrap_or("");
                match locate(text, key) {
                    Some(line) => Error::Config(format!("line {line}: {msg}")),
                    None => Error::Config(msg),
                }
            }
            other => other,
        })?;
        if let Some(sweep) = &mut cfg.sweep {
            sweep.values = SweepValues::List(sweep.values.resolve()?);
        }
        Ok(cfg)
    }

    /// Seed all paths derive from: `noise.seed` if set, else `run.seed`.
    pub fn master_seed(&self) -> u64 {
        self.noise.seed.unwrap_or(self.run.seed)
    }

    pub fn experiment(&self) -> &str {
        self.run.experiment.as_deref().unwrap_or("")
    }

    /// Checks required keys (first missing one is named) and ranges.
    pub fn validate(&self) -> Result<()> {
        let missing = |key: &str| Err(Error::Config(format!("missing required key `{key}`")));
        let Some(exp) = self.run.experiment.as_deref() else {
            return missing("run.experiment");
        };
        if !EXPERIMENTS.contains(&exp) {
            return Err(Error::Config(format!(
                "unknown experiment `run.experiment` = {exp:?}; expected one of {}",
                EXPERIMENTS.join(", ")
            )));
        }
        match exp {
            "heat-logconvexity" => {
                if self.problem.name.is_none() {
                    return missing("problem.name");
                }
            }
            "parabolic-backward" => {
                if self.problem.name.is_none() {
                    return missing("problem.name");
                }
                if self.noise.sigma.is_none() {
                    return missing("noise.sigma");
                }
            }
            "controllability" => {
                if self.problem.name.is_none() {
                    return missing("problem.name");
                }
                if self.control.target.is_none() {
                    return missing("control.target");
                }
            }
            _ => {
                if self.nse.k.is_none() {
                    return missing("nse.K");
                }
            }
        }
        let bad = |key: &str, why: String| Err(Error::Config(format!("`{key}` {why}")));
        if let Some(name) = &self.problem.name {
            if !crate::coeffs::LIBRARY.contains(&name.as_str()) {
                return bad(
                    "problem.name",
                    format!(
                        "= {name:?} is not one of {}",
                        crate::coeffs::LIBRARY.join(", ")
                    ),
                );
            }
            if exp == "controllability" {
                let p = crate::coeffs::ParabolicProblem::library(name, 1.0)?;
                if p.psi_r_bound().is_none() {
                    return bad(
                        "problem.name",
                        format!("= {name:?} has an unbounded ψ_r, which controllability excludes"),
                    );
                }
            }
        }
        if let Some(s) = self.noise.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return bad("noise.sigma", format!("= {s} must be finite and >= 0"));
            }
        }
        if !(self.noise.decay_p >= 0.0) || !self.noise.decay_p.is_finite() {
            return bad(
                "noise.decay_p",
                format!("= {} must be finite and >= 0", self.noise.decay_p),
            );
        }
        if self.noise.modes == 0 {
            return bad("noise.J", "must be at least 1".into());
        }
        if self.grid.n < 8 {
            return bad("grid.n", format!("= {} must be at least 8", self.grid.n));
        }
        if !(self.problem.horizon > 0.0) || !self.problem.horizon.is_finite() {
            return bad(
                "problem.horizon",
                format!("= {} must be positive", self.problem.horizon),
            );
        }
        if !(self.time.dt > 0.0) || self.time.dt > self.problem.horizon {
            return bad(
                "time.dt",
                format!("= {} must lie in (0, problem.horizon]", self.time.dt),
            );
        }
        let steps = self.problem.horizon / self.time.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps {
            return bad(
                "time.dt",
                format!(
                    "= {} must divide problem.horizon = {}",
                    self.time.dt, self.problem.horizon
                ),
            );
        }
        if !(self.time.t0 >= 0.0 && self.time.t0 < self.problem.horizon) {
            return bad(
                "time.t0",
                format!("= {} must lie in [0, problem.horizon)", self.time.t0),
            );
        }
        for (key, v) in [
            ("problem.initial", &self.problem.initial),
            ("problem.initial2", &self.problem.initial2),
        ] {
            if v.iter().any(|c| !c.is_finite()) {
                return bad(key, "has a non-finite coefficient".into());
            }
        }
        if let Some(t) = &self.control.target {
            if t.is_empty() || t.iter().any(|c| !c.is_finite()) {
                return bad(
                    "control.target",
                    "must be a non-empty list of finite coefficients".into(),
                );
            }
        }
        if !(self.control.reg >= 0.0) {
            return bad(
                "control.reg",
                format!("= {} must be >= 0", self.control.reg),
            );
        }
        if self.run.replicates == 0 {
            return bad("run.replicates", "must be at least 1".into());
        }
        if self.run.paths == 0 {
            return bad("run.paths", "must be at least 1".into());
        }
        if exp == "tamed-nse" {
            let n = &self.nse;
            if n.k == Some(0) {
                return bad("nse.K", "must be at least 1".into());
            }
            if !(n.nu > 0.0) {
                return bad("nse.nu", format!("= {} must be positive", n.nu));
            }
            if !(n.n_tame >= 1.0) {
                return bad("nse.N_tame", format!("= {} must be >= 1", n.n_tame));
            }
            if !(n.eps > 0.0) {
                return bad("nse.eps", format!("= {} must be positive", n.eps));
            }
            if n.paths == 0 || n.diag_stride == 0 {
                return bad("nse.paths", "and nse.diag_stride must be positive".into());
            }
            if !(n.dt > 0.0) || !(n.horizon >= n.dt) {
                return bad("nse.dt", format!("= {} must lie in (0, nse.T]", n.dt));
            }
            let s = n.horizon / n.dt;
            if (s - s.round()).abs() > 1e-6 * s {
                return bad(
                    "nse.dt",
                    format!("= {} must divide nse.T = {}", n.dt, n.horizon),
                );
            }
            let stride_t = n.dt * n.diag_stride as f64;
            for &t in &n.test_times {
                let r = t / stride_t;
                if !(t >= 0.0 && t <= n.horizon + 1e-12) || (r - r.round()).abs() > 1e-6 {
                    return bad(
                        "nse.test_times",
                        format!("entry {t} must be a diagnostic node (multiple of nse.dt * nse.diag_stride) in [0, nse.T]"),
                    );
                }
            }
        }
        if let Some(s) = &self.sweep {
            s.values.resolve()?;
            check_sweep_parameter(self, &s.parameter)?;
        }
        Ok(())
    }

    /// Canonical text form. Parsing it back and re-serialising gives the
    /// same bytes.
    /// Sweep values are written as a list whatever form they were read in.
    pub fn normal_form(&self) -> String {
        let mut canonical = self.clone();
        if let Some(s) = &mut canonical.sweep {
            if let Ok(v) = s.values.resolve() {
                s.values = SweepValues::List(v);
            }
        }
        toml::to_string(&canonical).expect("config is always serialisable")
    }
}

fn lookup<'a>(table: &'a toml::Table, dotted: &str) -> Option<&'a toml::Value> {
    let (section, key) = dotted.split_once('.')?;
    table.get(section)?.as_table()?.get(key)
}

fn check_sweep_parameter(cfg: &ExperimentConfig, parameter: &str) -> Result<()> {
    let mut resolved = cfg.clone();
    resolved.sweep = None;
    fill_required(&mut resolved);
    let table = toml::Table::try_from(&resolved).expect("config is always serialisable");
    match lookup(&table, parameter) {
        Some(toml::Value::Float(_)) | Some(toml::Value::Integer(_))
            if !parameter.starts_with("sweep.") =>
        {
            Ok(())
        }
        _ => Err(Error::Config(format!(
            "`sweep.parameter` = {parameter:?} is not a known numeric key"
        ))),
    }
}

/// Puts placeholder values into unset optional numeric keys so they are
/// visible to the sweep-parameter lookup.
fn fill_required(cfg: &mut ExperimentConfig) {
    cfg.noise.sigma.get_or_insert(0.0);
    cfg.nse.k.get_or_insert(1);
}

/// One config per sweep value, with `parameter` overwritten.
pub fn sweep_configs(
    base: &ExperimentConfig,
    parameter: &str,
    values: &[f64],
) -> Result<Vec<ExperimentConfig>> {
    let mut base = base.clone();
    base.sweep = None;
    check_sweep_parameter(&base, parameter)?;
    let (section, key) = parameter.split_once('.').expect("checked above");
    let mut filled = base.clone();
    fill_required(&mut filled);
    let table = toml::Table::try_from(&base).expect("config is always serialisable");
    let integral = matches!(
        lookup(
            &toml::Table::try_from(&filled).expect("serialisable"),
            parameter
        ),
        Some(toml::Value::Integer(_))
    );
    values
        .iter()
        .map(|&v| {
            let mut t = table.clone();
            let value = if integral {
                if v.fract() != 0.0 || !(v >= 0.0) || v > i64::MAX as f64 {
                    return Err(Error::Config(format!(
                        "sweep value {v} for integer key `{parameter}` must be a non-negative integer"
                    )));
                }
                toml::Value::Integer(v as i64)
            } else {
                toml::Value::Float(v)
            };
            t.entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .expect("sections are tables")
                .insert(key.to_string(), value);
            let cfg: ExperimentConfig = t
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("sweep value {v}: {}", e.message())))?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}
