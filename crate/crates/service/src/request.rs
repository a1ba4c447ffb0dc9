//! Request bodies and the normalized configurations echoed into run records.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use gridshed::contingency::ScreeningConfig;
use gridshed::ga::{GAConfig, StageConfig};
use gridshed::grid::Network;
use gridshed::powerflow::SolverOptions;
use gridshed::report::run_id;
use gridshed::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binary,
    #[default]
    Partial,
    Multistep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Binary => "binary",
            Mode::Partial => "partial",
            Mode::Multistep => "multistep",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Mode::Binary),
            "partial" => Ok(Mode::Partial),
            "multistep" => Ok(Mode::Multistep),
            other => Err(format!("unknown mode `{other}` (expected binary, partial or multistep)")),
        }
    }
}

/// Body of `POST /cases/{id}/optimize`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeRequest {
    /// Line ids taken out of service. Empty optimizes the intact case.
    pub outage: Vec<usize>,
    pub mode: Mode,
    pub ga: GAConfig,
    /// Overrides `ga.seed`.
    pub seed: Option<u64>,
    /// Overrides `ga.saturate`.
    pub saturate: Option<usize>,
    /// Single-threshold shorthand for `stages` in multistep mode.
    pub threshold: Option<f64>,
    pub stages: Option<StageConfig>,
    /// Load id to importance; replaces the case-file value for that load.
    pub importance: BTreeMap<usize, f64>,
    pub solver: SolverOptions,
}

/// Body of `POST /cases/{id}/screen`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenRequest {
    pub mode: Mode,
    pub ga: GAConfig,
    pub seed: Option<u64>,
    pub saturate: Option<usize>,
    pub threshold: Option<f64>,
    pub stages: Option<StageConfig>,
    pub importance: BTreeMap<usize, f64>,
    pub solver: SolverOptions,
}

/// Normalized optimize request. Its JSON form is the run's config echo and
/// determines the run id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub outage: Vec<usize>,
    pub mode: Mode,
    pub ga: GAConfig,
    pub stages: Option<StageConfig>,
    pub importance: BTreeMap<usize, f64>,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub mode: Mode,
    pub ga: GAConfig,
    pub stages: Option<StageConfig>,
    pub importance: BTreeMap<usize, f64>,
    pub solver: SolverOptions,
}

struct Common<'a> {
    mode: Mode,
    ga: &'a GAConfig,
    seed: Option<u64>,
    saturate: Option<usize>,
    threshold: Option<f64>,
    stages: &'a Option<StageConfig>,
    importance: &'a BTreeMap<usize, f64>,
    solver: &'a SolverOptions,
}

fn normalize_common(c: Common<'_>, net: &Network) -> Result<(GAConfig, Option<StageConfig>)> {
    let mut ga = c.ga.clone();
    if let Some(seed) = c.seed {
        ga.seed = seed;
    }
    if let Some(s) = c.saturate {
        ga.saturate = Some(s);
    }
    match c.mode {
        Mode::Binary => ga.gene_step = 1.0,
        Mode::Partial | Mode::Multistep if ga.gene_step >= 1.0 => {
            return Err(Error::Config(format!("{} mode needs ga.gene_step below 1", c.mode)));
        }
        _ => {}
    }
    ga.validate()?;
    c.solver.validate()?;

    let stages = match (c.mode, c.threshold, c.stages) {
        (Mode::Multistep, Some(_), Some(_)) => {
            return Err(Error::Config("give either threshold or stages, not both".into()));
        }
        (Mode::Multistep, Some(t), None) => Some(StageConfig::with_threshold(t)),
        (Mode::Multistep, None, Some(s)) => Some(s.clone()),
        (Mode::Multistep, None, None) => Some(StageConfig::default()),
        (_, None, None) => None,
        (mode, _, _) => {
            return Err(Error::Config(format!("threshold and stages need mode multistep, got {mode}")));
        }
    };
    if let Some(s) = &stages {
        s.validate()?;
    }

    for (&load, &value) in c.importance {
        if load >= net.n_loads() {
            return Err(Error::Config(format!(
                "importance override for load {load}, but the case has {} loads",
                net.n_loads()
            )));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Config(format!("importance of load {load} is {value}, outside [0, 1]")));
        }
    }
    Ok((ga, stages))
}

impl OptimizeRequest {
    pub fn normalize(&self, net: &Network) -> Result<OptimizeConfig> {
        let (ga, stages) = normalize_common(
            Common {
                mode: self.mode,
                ga: &self.ga,
                seed: self.seed,
                saturate: self.saturate,
                threshold: self.threshold,
                stages: &self.stages,
                importance: &self.importance,
                solver: &self.solver,
            },
            net,
        )?;
        let mut outage = self.outage.clone();
        outage.sort_unstable();
        outage.dedup();
        for &id in &outage {
            net.line(id).ok_or(Error::UnknownLine(id))?;
        }
        Ok(OptimizeConfig {
            outage,
            mode: self.mode,
            ga,
            stages,
            importance: self.importance.clone(),
            solver: self.solver,
        })
    }
}

impl ScreenRequest {
    pub fn normalize(&self, net: &Network) -> Result<ScreenConfig> {
        let (ga, stages) = normalize_common(
            Common {
                mode: self.mode,
                ga: &self.ga,
                seed: self.seed,
                saturate: self.saturate,
                threshold: self.threshold,
                stages: &self.stages,
                importance: &self.importance,
                solver: &self.solver,
            },
            net,
        )?;
        Ok(ScreenConfig {
            mode: self.mode,
            ga,
            stages,
            importance: self.importance.clone(),
            solver: self.solver,
        })
    }
}

impl OptimizeConfig {
    pub fn run_id(&self, case_id: &str) -> Result<String> {
        Ok(run_id("optimize", case_id, &serde_json::to_value(self)?))
    }
}

impl ScreenConfig {
    pub fn run_id(&self, case_id: &str) -> Result<String> {
        Ok(run_id("screening", case_id, &serde_json::to_value(self)?))
    }

    pub fn screening(&self) -> ScreeningConfig {
        ScreeningConfig::new(self.ga.clone(), self.stages.clone(), self.solver)
    }
}

/// Copy of `net` with importance overrides applied.
pub fn apply_importance(net: &Network, overrides: &BTreeMap<usize, f64>) -> Result<Network> {
    if overrides.is_empty() {
        return Ok(net.clone());
    }
    let mut importance: Vec<f64> = net.loads().iter().map(|l| l.importance).collect();
    for (&load, &value) in overrides {
        *importance.get_mut(load).ok_or_else(|| Error::Config(format!("unknown load {load}")))? = value;
    }
    net.with_importance(&importance)
}

/// Why a request body was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum BodyError {
    /// Not JSON at all.
    Syntax(String),
    /// Well-formed JSON with a missing, unknown or mistyped field.
    Invalid { path: String, message: String },
}

/// Parses a JSON body; an empty body means `{}`.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> std::result::Result<T, BodyError> {
    let bytes = if bytes.iter().all(u8::is_ascii_whitespace) {
        b"{}".as_slice()
    } else {
        bytes
    };
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            BodyError::Invalid {
                path,
                message: inner.to_string(),
            }
        } else {
            BodyError::Syntax(inner.to_string())
        }
    })
}
