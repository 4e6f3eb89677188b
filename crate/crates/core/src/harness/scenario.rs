//! Ground-truth constructions for the standard experiments.

use super::HarnessError;
use crate::ordering::{one_vs_many_geometry, CategoryScenario};
use crate::task::{TaskEnsemble, TaskGeometry};
use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Nonzero coordinates of the shared vector in the identical scenario.
pub const DEFAULT_SUPPORT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Identical,
    Orthogonal,
    OneVsMany,
    Categories,
    CustomGeometry,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Identical => "identical",
            ScenarioKind::Orthogonal => "orthogonal",
            ScenarioKind::OneVsMany => "one-vs-many",
            ScenarioKind::Categories => "categories",
            ScenarioKind::CustomGeometry => "custom-geometry",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identical" => Ok(ScenarioKind::Identical),
            "orthogonal" => Ok(ScenarioKind::Orthogonal),
            "one-vs-many" => Ok(ScenarioKind::OneVsMany),
            "categories" => Ok(ScenarioKind::Categories),
            "custom-geometry" | "custom-geometry-file" => Ok(ScenarioKind::CustomGeometry),
            other => Err(format!(
                "unknown scenario '{other}' (identical|orthogonal|one-vs-many|categories|custom-geometry)"
            )),
        }
    }
}

/// On-disk form of a custom geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub norms_sq: Vec<f64>,
    pub dist_sq: Vec<Vec<f64>>,
}

impl GeometryFile {
    pub fn load(path: &Path) -> Result<TaskGeometry, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let file: GeometryFile = serde_json::from_str(&text)
            .map_err(|e| HarnessError::BadInput(format!("{}: {e}", path.display())))?;
        Ok(TaskGeometry::from_parts(file.norms_sq, file.dist_sq)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub support: usize,
    /// Squared distance between the special task and the rest, or between categories.
    pub cross_distance: f64,
    /// 1-based position of the special task.
    pub special_position: usize,
    /// Category sizes; `None` splits `T` into two equal halves.
    pub tasks_per_category: Option<Vec<usize>>,
    pub geometry_file: Option<PathBuf>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            support: DEFAULT_SUPPORT,
            cross_distance: 1.0,
            special_position: 1,
            tasks_per_category: None,
            geometry_file: None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    pub fn categories(&self, tasks: usize) -> Result<CategoryScenario, HarnessError> {
        let sizes = match &self.tasks_per_category {
            Some(sizes) => sizes.clone(),
            None if tasks.is_multiple_of(2) && tasks > 0 => vec![tasks / 2; 2],
            None => {
                return Err(HarnessError::BadInput(format!(
                    "T = {tasks} does not split into two equal categories; give tasks_per_category"
                )))
            }
        };
        if sizes.iter().sum::<usize>() != tasks {
            return Err(HarnessError::BadInput(format!(
                "category sizes {sizes:?} do not sum to T = {tasks}"
            )));
        }
        Ok(CategoryScenario::new(sizes).with_cross_distance(self.cross_distance))
    }

    /// Exact norms and distances of the scenario.
    pub fn geometry(&self, tasks: usize) -> Result<TaskGeometry, HarnessError> {
        if tasks == 0 {
            return Err(HarnessError::BadInput("T must be positive".into()));
        }
        let constant = |d: f64| {
            let dist = (0..tasks)
                .map(|i| (0..tasks).map(|j| if i == j { 0.0 } else { d }).collect())
                .collect();
            TaskGeometry::from_parts(vec![1.0; tasks], dist)
        };
        let g = match self.kind {
            ScenarioKind::Identical => constant(0.0)?,
            ScenarioKind::Orthogonal => constant(2.0)?,
            ScenarioKind::OneVsMany => {
                if self.special_position == 0 || self.special_position > tasks {
                    return Err(HarnessError::BadInput(format!(
                        "special position {} outside 1..={tasks}",
                        self.special_position
                    )));
                }
                if tasks < 2 {
                    return Err(HarnessError::BadInput("one-vs-many needs T >= 2".into()));
                }
                let base = one_vs_many_geometry(tasks, self.cross_distance)?;
                // move the special task from index 0 to its position
                let mut order: Vec<usize> = (1..tasks).collect();
                order.insert(self.special_position - 1, 0);
                crate::task::permute_geometry(&base, &order)?
            }
            ScenarioKind::Categories => self.categories(tasks)?.geometry()?,
            ScenarioKind::CustomGeometry => {
                let path = self.geometry_file.as_ref().ok_or_else(|| {
                    HarnessError::BadInput("custom-geometry needs a geometry file".into())
                })?;
                let g = GeometryFile::load(path)?;
                if g.tasks() != tasks {
                    return Err(HarnessError::BadInput(format!(
                        "geometry file describes {} tasks, T = {tasks}",
                        g.tasks()
                    )));
                }
                g
            }
        };
        Ok(g)
    }

    /// Index of the special task, for one-vs-many.
    pub fn special_task(&self) -> Option<usize> {
        (self.kind == ScenarioKind::OneVsMany).then(|| self.special_position - 1)
    }

    /// Smallest feature dimension that holds the scenario.
    pub fn required_dimension(&self, tasks: usize) -> usize {
        match self.kind {
            ScenarioKind::Identical => self.support.max(1),
            _ => tasks,
        }
    }

    pub fn check_dimension(&self, tasks: usize, p: usize) -> Result<(), HarnessError> {
        let need = self.required_dimension(tasks);
        if p < need {
            return Err(HarnessError::BadInput(format!(
                "{} scenario with T = {tasks} needs p >= {need}, got p = {p}",
                self.name()
            )));
        }
        Ok(())
    }

    /// Ground-truth vectors in dimension `p`.
    pub fn ground_truths(&self, tasks: usize, p: usize) -> Result<Vec<DVector<f64>>, HarnessError> {
        match self.kind {
            ScenarioKind::Identical => {
                let s = self.support;
                if s == 0 || p < s {
                    return Err(HarnessError::BadInput(format!(
                        "identical scenario needs p >= support = {s}, got p = {p}"
                    )));
                }
                let v = DVector::from_fn(p, |k, _| if k < s { 1.0 / (s as f64).sqrt() } else { 0.0 });
                Ok(vec![v; tasks])
            }
            ScenarioKind::Orthogonal => {
                if p < tasks {
                    return Err(HarnessError::BadInput(format!(
                        "orthogonal scenario needs p >= T = {tasks}, got p = {p}"
                    )));
                }
                Ok((0..tasks)
                    .map(|t| DVector::from_fn(p, |k, _| if k == t { 1.0 } else { 0.0 }))
                    .collect())
            }
            _ => realize(&self.geometry(tasks)?, p),
        }
    }

    pub fn build(&self, tasks: usize, p: usize, n: usize, sigma: f64) -> Result<TaskEnsemble, HarnessError> {
        Ok(TaskEnsemble::new(self.ground_truths(tasks, p)?, n, sigma)?)
    }
}

/// Vectors in dimension `p` with the given norms and distances, via the Gram eigendecomposition.
pub fn realize(geometry: &TaskGeometry, p: usize) -> Result<Vec<DVector<f64>>, HarnessError> {
    let t = geometry.tasks();
    if p < t {
        return Err(HarnessError::BadInput(format!(
            "realizing {t} tasks needs p >= {t}, got p = {p}"
        )));
    }
    let eig = SymmetricEigen::new(geometry.gram());
    let scale: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok((0..t)
        .map(|i| DVector::from_fn(p, |k, _| if k < t { eig.eigenvectors[(i, k)] * scale[k] } else { 0.0 }))
        .collect())
}
