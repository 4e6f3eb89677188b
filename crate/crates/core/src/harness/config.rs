//! Experiment descriptions: JSON config files, command-line overrides and defaults.
//!
//! A field is taken from the command line if given there, else from the
//! config file, else from its default. The master seed additionally falls
//! back to the `CL_LAB_SEED` environment variable before its default.

use super::scenario::{Scenario, ScenarioKind};
use super::HarnessError;
use crate::ordering::Objective;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const SEED_ENV: &str = "CL_LAB_SEED";
pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_TASKS: usize = 8;
pub const DEFAULT_SAMPLES: usize = 50;
pub const DEFAULT_RUNS: usize = 300;
pub const DEFAULT_SWEEP_P: [usize; 5] = [60, 100, 200, 400, 1000];
pub const DEFAULT_SWEEP_SIGMA: [f64; 3] = [0.1, 0.3, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Theory,
    Simulate,
    SweepP,
    OrderSearch,
    Validate,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Theory => "theory",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::SweepP => "sweep-p",
            ExperimentKind::OrderSearch => "order-search",
            ExperimentKind::Validate => "validate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A `p` grid: one value, a list, or an inclusive range `a:b:step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PValues {
    One(usize),
    List(Vec<usize>),
    Range(String),
}

impl PValues {
    pub fn expand(&self) -> Result<Vec<usize>, HarnessError> {
        let values = match self {
            PValues::One(p) => vec![*p],
            PValues::List(v) => v.clone(),
            PValues::Range(s) => return parse_p(s),
        };
        check_p(values)
    }
}

fn check_p(values: Vec<usize>) -> Result<Vec<usize>, HarnessError> {
    if values.is_empty() || values.contains(&0) {
        return Err(HarnessError::BadInput("p values must be positive and nonempty".into()));
    }
    Ok(values)
}

/// Parse `100`, `60,100,200` or `60:1000:20`.
pub fn parse_p(text: &str) -> Result<Vec<usize>, HarnessError> {
    let bad = |why: &str| HarnessError::BadInput(format!("bad p specification '{text}': {why}"));
    let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("not an integer"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range must be a:b:step"));
        }
        let (a, b, step) = (int(parts[0])?, int(parts[1])?, int(parts[2])?);
        if step == 0 || a > b {
            return Err(bad("range needs a <= b and step > 0"));
        }
        return check_p((a..=b).step_by(step).collect());
    }
    check_p(text.split(',').map(int).collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaValues {
    One(f64),
    List(Vec<f64>),
}

impl SigmaValues {
    pub fn expand(&self) -> Result<Vec<f64>, HarnessError> {
        let v = match self {
            SigmaValues::One(s) => vec![*s],
            SigmaValues::List(v) => v.clone(),
        };
        check_sigma(v)
    }
}

fn check_sigma(values: Vec<f64>) -> Result<Vec<f64>, HarnessError> {
    if values.is_empty() || values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(HarnessError::BadInput(
            "sigma values must be finite, nonnegative and nonempty".into(),
        ));
    }
    Ok(values)
}

pub fn parse_sigma(text: &str) -> Result<Vec<f64>, HarnessError> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::BadInput(format!("bad sigma '{s}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_sigma(values)
}

/// Every optional experiment field; used for both config files and command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kind: Option<ExperimentKind>,
    pub scenario: Option<ScenarioKind>,
    #[serde(alias = "T")]
    pub tasks: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<PValues>,
    pub sigma: Option<SigmaValues>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub objective: Option<Objective>,
    pub support: Option<usize>,
    pub cross_distance: Option<f64>,
    pub special_position: Option<usize>,
    pub tasks_per_category: Option<Vec<usize>>,
    pub geometry_file: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::BadInput(format!("{}: {e}", path.display())))
    }

    /// Fields of `self`, falling back to `other`.
    pub fn or(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            kind: self.kind.or(other.kind),
            scenario: self.scenario.or(other.scenario),
            tasks: self.tasks.or(other.tasks),
            n: self.n.or(other.n),
            p: self.p.or(other.p),
            sigma: self.sigma.or(other.sigma),
            runs: self.runs.or(other.runs),
            seed: self.seed.or(other.seed),
            workers: self.workers.or(other.workers),
            out: self.out.or(other.out),
            objective: self.objective.or(other.objective),
            support: self.support.or(other.support),
            cross_distance: self.cross_distance.or(other.cross_distance),
            special_position: self.special_position.or(other.special_position),
            tasks_per_category: self.tasks_per_category.or(other.tasks_per_category),
            geometry_file: self.geometry_file.or(other.geometry_file),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: Scenario,
    pub tasks: usize,
    pub n: usize,
    pub sigmas: Vec<f64>,
    pub ps: Vec<usize>,
    pub runs: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub objective: Objective,
}

impl ExperimentSpec {
    /// Merge command-line values, an optional config file and the seed environment variable.
    pub fn resolve(
        kind: ExperimentKind,
        cli: ConfigFile,
        file: Option<ConfigFile>,
        env_seed: Option<&str>,
    ) -> Result<Self, HarnessError> {
        let c = cli.or(file.unwrap_or_default());
        let env_seed = env_seed
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| HarnessError::BadInput(format!("{SEED_ENV}='{s}' is not a u64")))
            })
            .transpose()?;
        let default_scenario = match kind {
            ExperimentKind::OrderSearch => ScenarioKind::Categories,
            _ => ScenarioKind::Identical,
        };
        let mut scenario = Scenario::new(c.scenario.unwrap_or(default_scenario));
        if let Some(s) = c.support {
            scenario.support = s;
        }
        if let Some(d) = c.cross_distance {
            if !(d.is_finite() && d > 0.0) {
                return Err(HarnessError::BadInput(format!("cross distance must be positive, got {d}")));
            }
            scenario.cross_distance = d;
        }
        if let Some(k) = c.special_position {
            scenario.special_position = k;
        }
        scenario.tasks_per_category = c.tasks_per_category;
        scenario.geometry_file = c.geometry_file;
        if scenario.kind == ScenarioKind::CustomGeometry {
            match &scenario.geometry_file {
                Some(path) if path.is_file() => {}
                Some(path) => {
                    return Err(HarnessError::BadInput(format!(
                        "geometry file {} does not exist",
                        path.display()
                    )))
                }
                None => return Err(HarnessError::BadInput("custom-geometry needs geometry_file".into())),
            }
        }

        let ps = match &c.p {
            Some(p) => p.expand()?,
            None if kind == ExperimentKind::SweepP => DEFAULT_SWEEP_P.to_vec(),
            None => vec![100],
        };
        let sigmas = match &c.sigma {
            Some(s) => s.expand()?,
            None if kind == ExperimentKind::SweepP => DEFAULT_SWEEP_SIGMA.to_vec(),
            None => vec![0.1],
        };
        let runs = match kind {
            ExperimentKind::Simulate | ExperimentKind::SweepP => c.runs.unwrap_or(DEFAULT_RUNS),
            _ => 0,
        };
        // without an explicit T, take it from whatever already fixes the task count
        let implied = match scenario.kind {
            ScenarioKind::Categories => scenario.tasks_per_category.as_ref().map(|s| s.iter().sum()),
            ScenarioKind::CustomGeometry => match &scenario.geometry_file {
                Some(path) => Some(super::scenario::GeometryFile::load(path)?.tasks()),
                None => None,
            },
            _ => None,
        };
        let tasks = c.tasks.or(implied).unwrap_or(match kind {
            ExperimentKind::OrderSearch => 4,
            _ => DEFAULT_TASKS,
        });
        let n = c.n.unwrap_or(DEFAULT_SAMPLES);
        if runs == 0 && matches!(kind, ExperimentKind::Simulate | ExperimentKind::SweepP) {
            return Err(HarnessError::BadInput(format!("{kind} needs at least one run")));
        }
        if tasks == 0 || n == 0 {
            return Err(HarnessError::BadInput("T and n must be positive".into()));
        }
        Ok(Self {
            kind,
            scenario,
            tasks,
            n,
            sigmas,
            ps,
            runs,
            master_seed: c.seed.or(env_seed).unwrap_or(DEFAULT_SEED),
            workers: c.workers.unwrap_or(0),
            output: c.out,
            objective: c.objective.unwrap_or(Objective::Forgetting),
        })
    }
}

impl FromStr for PValues {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(PValues::List(parse_p(s)?))
    }
}

impl FromStr for SigmaValues {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(SigmaValues::List(parse_sigma(s)?))
    }
}
