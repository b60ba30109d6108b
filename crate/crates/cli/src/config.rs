//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, keys carry a section prefix
//! (`objective.`, `ts.`, `campaign.`, `output.`). Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gpts::bench::{f1_objective, f2_objective, f_beta_objective, Objective};
use gpts::engine::TsConfig;
use gpts::Domain;

use crate::CliError;

/// Noise levels swept by `emit-plots` when none are configured.
pub const DEFAULT_SIGMA_SWEEP: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    F1,
    F2,
    FBeta,
}

impl ObjectiveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveKind::F1 => "f1",
            ObjectiveKind::F2 => "f2",
            ObjectiveKind::FBeta => "f_beta",
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f1" => Ok(ObjectiveKind::F1),
            "f2" => Ok(ObjectiveKind::F2),
            "f_beta" => Ok(ObjectiveKind::FBeta),
            other => Err(format!("unknown objective {other:?} (expected f1, f2 or f_beta)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveKind,
    pub beta: f64,
    pub noise_sigma: f64,
    /// Box overrides; `None` keeps the objective's own `[0, 10]^d`.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub ts: TsConfig,
    pub replicas: usize,
    pub sigmas: Vec<f64>,
    pub out_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            objective: ObjectiveKind::F1,
            beta: 1.0,
            noise_sigma: 0.1,
            lower: None,
            upper: None,
            ts: TsConfig::default(),
            replicas: 1,
            sigmas: DEFAULT_SIGMA_SWEEP.to_vec(),
            out_dir: PathBuf::from("gpts-out"),
            emit_plots: false,
        }
    }
}

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "objective.name",
    "objective.beta",
    "objective.noise_sigma",
    "objective.lower",
    "objective.upper",
    "ts.xi",
    "ts.batch_size",
    "ts.m_star",
    "ts.stop_window",
    "ts.stop_tolerance",
    "ts.max_stages",
    "ts.seed",
    "ts.anchors",
    "ts.fit_points",
    "ts.refit_every_stage_until",
    "ts.refit_period",
    "ts.fit_budget_cold",
    "ts.fit_budget_warm",
    "ts.candidates",
    "ts.local_starts",
    "campaign.replicas",
    "campaign.sigmas",
    "output.dir",
    "output.emit_plots",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value.parse().map_err(|e| CliError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| parse::<f64>(key, v.trim())).collect()
}

impl ExperimentConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "objective.name" => self.objective = v.parse().map_err(|e| CliError::Config(format!("{key}: {e}")))?,
            "objective.beta" => self.beta = parse(key, v)?,
            "objective.noise_sigma" => self.noise_sigma = parse(key, v)?,
            "objective.lower" => self.lower = Some(parse(key, v)?),
            "objective.upper" => self.upper = Some(parse(key, v)?),
            "ts.xi" => self.ts.xi = parse(key, v)?,
            "ts.batch_size" => self.ts.batch_size = parse(key, v)?,
            "ts.m_star" => self.ts.m_star = parse(key, v)?,
            "ts.stop_window" => self.ts.stop_window = parse(key, v)?,
            "ts.stop_tolerance" => self.ts.stop_tolerance = parse(key, v)?,
            "ts.max_stages" => self.ts.max_stages = parse(key, v)?,
            "ts.seed" => self.ts.seed = parse(key, v)?,
            "ts.anchors" => self.ts.anchors = parse(key, v)?,
            "ts.fit_points" => self.ts.fit_points = parse(key, v)?,
            "ts.refit_every_stage_until" => self.ts.refit_every_stage_until = parse(key, v)?,
            "ts.refit_period" => self.ts.refit_period = parse(key, v)?,
            "ts.fit_budget_cold" => self.ts.fit_budget_cold = parse(key, v)?,
            "ts.fit_budget_warm" => self.ts.fit_budget_warm = parse(key, v)?,
            "ts.candidates" => self.ts.candidates = parse(key, v)?,
            "ts.local_starts" => self.ts.local_starts = parse(key, v)?,
            "campaign.replicas" => self.replicas = parse(key, v)?,
            "campaign.sigmas" => self.sigmas = parse_list(key, v)?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            "output.emit_plots" => self.emit_plots = parse(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses the text of a config file.
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        for (key, value) in parse_pairs(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Checks the cross-field constraints and builds the objective.
    pub fn validate(&self) -> Result<Objective, CliError> {
        if self.replicas == 0 {
            return Err(CliError::Config("campaign.replicas: must be at least 1".into()));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(CliError::Config("campaign.sigmas: need a non-empty list of non-negative values".into()));
        }
        self.ts.validate().map_err(|e| CliError::Config(format!("ts.{}", strip_prefix(&e))))?;
        self.objective_with_noise(self.noise_sigma)
    }

    /// The configured objective at noise level `sigma`.
    pub fn objective_with_noise(&self, sigma: f64) -> Result<Objective, CliError> {
        let base = match self.objective {
            ObjectiveKind::F1 => f1_objective(),
            ObjectiveKind::F2 => f2_objective(),
            ObjectiveKind::FBeta => {
                f_beta_objective(self.beta).map_err(|e| CliError::Config(format!("objective.beta: {}", strip_prefix(&e))))?
            }
        };
        let mut obj =
            base.with_noise(sigma).map_err(|e| CliError::Config(format!("objective.noise_sigma: {}", strip_prefix(&e))))?;
        if self.lower.is_some() || self.upper.is_some() {
            let d = obj.dim();
            let lo = self.lower.unwrap_or(obj.domain().lower()[0]);
            let hi = self.upper.unwrap_or(obj.domain().upper()[0]);
            let dom = Domain::cube(lo, hi, d)
                .map_err(|e| CliError::Config(format!("objective.lower/upper: {}", strip_prefix(&e))))?;
            obj = obj.with_domain(dom).map_err(|e| CliError::Config(format!("objective.lower/upper: {}", strip_prefix(&e))))?;
        }
        Ok(obj)
    }

    /// Canonical `key=value` rendering, one key per line, in [`KEYS`] order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("objective.name", self.objective.as_str().into());
        put("objective.beta", self.beta.to_string());
        put("objective.noise_sigma", self.noise_sigma.to_string());
        if let Some(lo) = self.lower {
            put("objective.lower", lo.to_string());
        }
        if let Some(hi) = self.upper {
            put("objective.upper", hi.to_string());
        }
        let ts = &self.ts;
        put("ts.xi", ts.xi.to_string());
        put("ts.batch_size", ts.batch_size.to_string());
        put("ts.m_star", ts.m_star.to_string());
        put("ts.stop_window", ts.stop_window.to_string());
        put("ts.stop_tolerance", ts.stop_tolerance.to_string());
        put("ts.max_stages", ts.max_stages.to_string());
        put("ts.seed", ts.seed.to_string());
        put("ts.anchors", ts.anchors.to_string());
        put("ts.fit_points", ts.fit_points.to_string());
        put("ts.refit_every_stage_until", ts.refit_every_stage_until.to_string());
        put("ts.refit_period", ts.refit_period.to_string());
        put("ts.fit_budget_cold", ts.fit_budget_cold.to_string());
        put("ts.fit_budget_warm", ts.fit_budget_warm.to_string());
        put("ts.candidates", ts.candidates.to_string());
        put("ts.local_starts", ts.local_starts.to_string());
        put("campaign.replicas", self.replicas.to_string());
        put("campaign.sigmas", self.sigmas.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        put("output.dir", self.out_dir.display().to_string());
        put("output.emit_plots", self.emit_plots.to_string());
        out
    }
}

fn strip_prefix(e: &gpts::Error) -> String {
    match e {
        gpts::Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Splits config text into `(key, value)` pairs; later duplicates win when
/// applied in order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1)));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
        }
        if let Some(prev) = seen.insert(k.to_string(), lineno + 1) {
            return Err(CliError::Config(format!("line {}: key {k:?} already set on line {prev}", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
