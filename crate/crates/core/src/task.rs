//! Task ensembles and their geometry.
//!
//! Every closed-form quantity in [`crate::theory`] depends on the ground
//! truths only through their squared norms and pairwise squared distances,
//! collected in a [`TaskGeometry`]. A geometry can be computed from explicit
//! vectors or supplied directly, in which case it is checked for
//! embeddability (the implied Gram matrix must be positive semidefinite).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Absolute tolerance (scaled by the largest squared norm) for the Gram PSD check.
pub const GRAM_PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("ensemble needs at least one task")]
    NoTasks,
    #[error("sample count n must be positive")]
    ZeroSamples,
    #[error("feature dimension p must be positive")]
    ZeroDimension,
    #[error("noise level must be finite and nonnegative, got {0}")]
    BadSigma(f64),
    #[error("task {task} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        task: usize,
        expected: usize,
        found: usize,
    },
    #[error("geometry shape mismatch: {0}")]
    Shape(String),
    #[error("invalid geometry entry: {0}")]
    BadEntry(String),
    #[error("geometry is not embeddable: Gram matrix has eigenvalue {min_eigenvalue:e}")]
    NotEmbeddable { min_eigenvalue: f64 },
    #[error("order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("overparameterized ratio requires p > n (n = {n}, p = {p})")]
    NotOverparameterized { n: usize, p: usize },
    #[error("prefix length {requested} out of range 1..={available}")]
    PrefixOutOfRange { requested: usize, available: usize },
}

/// Ground truths of `T` tasks sharing one sample count `n` and noise level `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEnsemble {
    ground_truths: Vec<DVector<f64>>,
    n: usize,
    p: usize,
    sigma: f64,
}

impl TaskEnsemble {
    pub fn new(ground_truths: Vec<DVector<f64>>, n: usize, sigma: f64) -> Result<Self, TaskError> {
        let first = ground_truths.first().ok_or(TaskError::NoTasks)?;
        let p = first.len();
        if p == 0 {
            return Err(TaskError::ZeroDimension);
        }
        if n == 0 {
            return Err(TaskError::ZeroSamples);
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(TaskError::BadSigma(sigma));
        }
        for (task, w) in ground_truths.iter().enumerate() {
            if w.len() != p {
                return Err(TaskError::DimensionMismatch {
                    task,
                    expected: p,
                    found: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(TaskError::BadEntry(format!("task {task} has a non-finite entry")));
            }
        }
        Ok(Self {
            ground_truths,
            n,
            p,
            sigma,
        })
    }

    pub fn ground_truths(&self) -> &[DVector<f64>] {
        &self.ground_truths
    }

    pub fn ground_truth(&self, task: usize) -> &DVector<f64> {
        &self.ground_truths[task]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tasks(&self) -> usize {
        self.ground_truths.len()
    }

    /// Same ground truths with a different noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self, TaskError> {
        Self::new(self.ground_truths.clone(), self.n, sigma)
    }

    /// Ground truths relearned in `order`: task `k` of the result is task `order[k]` here.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, TaskError> {
        check_permutation(order, self.tasks())?;
        let ground_truths = order.iter().map(|&k| self.ground_truths[k].clone()).collect();
        Self::new(ground_truths, self.n, self.sigma)
    }

    pub fn geometry(&self) -> TaskGeometry {
        geometry_from_ensemble(self)
    }
}

/// Squared norms and pairwise squared distances of a set of ground truths.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGeometry {
    norms_sq: Vec<f64>,
    dist_sq: DMatrix<f64>,
}

impl TaskGeometry {
    /// Build a geometry from user-supplied tables, validating symmetry and embeddability.
    pub fn from_parts(norms_sq: Vec<f64>, dist_sq: Vec<Vec<f64>>) -> Result<Self, TaskError> {
        let t = norms_sq.len();
        if t == 0 {
            return Err(TaskError::NoTasks);
        }
        if dist_sq.len() != t || dist_sq.iter().any(|row| row.len() != t) {
            return Err(TaskError::Shape(format!(
                "distance table must be {t}x{t} to match {t} norms"
            )));
        }
        let matrix = DMatrix::from_fn(t, t, |i, j| dist_sq[i][j]);
        Self::from_matrix(norms_sq, matrix)
    }

    pub fn from_matrix(norms_sq: Vec<f64>, dist_sq: DMatrix<f64>) -> Result<Self, TaskError> {
        let t = norms_sq.len();
        if t == 0 {
            return Err(TaskError::NoTasks);
        }
        if dist_sq.nrows() != t || dist_sq.ncols() != t {
            return Err(TaskError::Shape(format!(
                "distance matrix is {}x{}, expected {t}x{t}",
                dist_sq.nrows(),
                dist_sq.ncols()
            )));
        }
        for (i, &v) in norms_sq.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TaskError::BadEntry(format!("norms_sq[{i}] = {v}")));
            }
        }
        let scale = dist_sq
            .iter()
            .chain(norms_sq.iter())
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        let sym_tol = 1e-12 * scale;
        for i in 0..t {
            if dist_sq[(i, i)] != 0.0 {
                return Err(TaskError::BadEntry(format!(
                    "dist_sq[{i}][{i}] = {} must be zero",
                    dist_sq[(i, i)]
                )));
            }
            for j in 0..t {
                let v = dist_sq[(i, j)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(TaskError::BadEntry(format!("dist_sq[{i}][{j}] = {v}")));
                }
                if (v - dist_sq[(j, i)]).abs() > sym_tol {
                    return Err(TaskError::BadEntry(format!(
                        "dist_sq is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let symmetric = (&dist_sq + dist_sq.transpose()) * 0.5;
        let geometry = Self {
            norms_sq,
            dist_sq: symmetric,
        };
        let min_eigenvalue = geometry.min_gram_eigenvalue();
        let max_norm = geometry.max_norm_sq().max(1.0);
        if min_eigenvalue < -GRAM_PSD_TOL * max_norm {
            return Err(TaskError::NotEmbeddable { min_eigenvalue });
        }
        Ok(geometry)
    }

    pub fn tasks(&self) -> usize {
        self.norms_sq.len()
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    pub fn norm_sq(&self, task: usize) -> f64 {
        self.norms_sq[task]
    }

    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        self.dist_sq[(i, j)]
    }

    pub fn dist_sq_matrix(&self) -> &DMatrix<f64> {
        &self.dist_sq
    }

    pub fn max_norm_sq(&self) -> f64 {
        self.norms_sq.iter().copied().fold(0.0, f64::max)
    }

    /// `<w_i, w_j>` recovered from the polarization identity.
    pub fn inner_product(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.norms_sq[i] + self.norms_sq[j] - self.dist_sq[(i, j)])
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let t = self.tasks();
        DMatrix::from_fn(t, t, |i, j| self.inner_product(i, j))
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.gram())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Geometry of the first `len` tasks.
    pub fn prefix(&self, len: usize) -> Result<Self, TaskError> {
        if len == 0 || len > self.tasks() {
            return Err(TaskError::PrefixOutOfRange {
                requested: len,
                available: self.tasks(),
            });
        }
        Ok(Self {
            norms_sq: self.norms_sq[..len].to_vec(),
            dist_sq: self.dist_sq.view((0, 0), (len, len)).into_owned(),
        })
    }

    /// Replace one symmetric distance entry, revalidating embeddability.
    pub fn with_dist_sq(&self, i: usize, j: usize, value: f64) -> Result<Self, TaskError> {
        let mut dist = self.dist_sq.clone();
        dist[(i, j)] = value;
        dist[(j, i)] = value;
        Self::from_matrix(self.norms_sq.clone(), dist)
    }

    /// Multiply every pairwise distance by `factor`, revalidating embeddability.
    pub fn with_scaled_distances(&self, factor: f64) -> Result<Self, TaskError> {
        Self::from_matrix(self.norms_sq.clone(), &self.dist_sq * factor)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.tasks())
            .map(|i| self.dist_sq.row(i).iter().copied().collect())
            .collect()
    }
}

/// Norms and distances computed directly from the ground-truth vectors.
pub fn geometry_from_ensemble(ensemble: &TaskEnsemble) -> TaskGeometry {
    let w = ensemble.ground_truths();
    let t = w.len();
    let norms_sq = w.iter().map(|v| v.norm_squared()).collect();
    let mut dist_sq = DMatrix::zeros(t, t);
    for i in 0..t {
        for j in (i + 1)..t {
            let d = (&w[i] - &w[j]).norm_squared();
            dist_sq[(i, j)] = d;
            dist_sq[(j, i)] = d;
        }
    }
    TaskGeometry { norms_sq, dist_sq }
}

pub(crate) fn check_permutation(order: &[usize], len: usize) -> Result<(), TaskError> {
    if order.len() != len {
        return Err(TaskError::NotAPermutation(len));
    }
    let mut seen = vec![false; len];
    for &k in order {
        if k >= len || seen[k] {
            return Err(TaskError::NotAPermutation(len));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Relabel tasks so that position `k` of the result holds task `order[k]`.
pub fn permute_geometry(geometry: &TaskGeometry, order: &[usize]) -> Result<TaskGeometry, TaskError> {
    let t = geometry.tasks();
    check_permutation(order, t)?;
    let norms_sq = order.iter().map(|&k| geometry.norms_sq[k]).collect();
    let dist_sq = DMatrix::from_fn(t, t, |k, l| geometry.dist_sq[(order[k], order[l])]);
    Ok(TaskGeometry { norms_sq, dist_sq })
}

/// The contraction factor `r = 1 - n/p` of one minimum-norm step.
///
/// `n/p` is stored alongside `r` so that coefficients of the form `1 - r`
/// are evaluated without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverparamRatio {
    r: f64,
    sample_fraction: f64,
}

impl OverparamRatio {
    pub fn new(n: usize, p: usize) -> Result<Self, TaskError> {
        if p <= n {
            return Err(TaskError::NotOverparameterized { n, p });
        }
        let sample_fraction = n as f64 / p as f64;
        Ok(Self {
            r: 1.0 - sample_fraction,
            sample_fraction,
        })
    }

    /// Ratio given directly by value; `r` must lie in `[0, 1)`.
    pub fn from_value(r: f64) -> Result<Self, TaskError> {
        if !(0.0..1.0).contains(&r) {
            return Err(TaskError::BadEntry(format!("ratio {r} outside [0, 1)")));
        }
        Ok(Self {
            r,
            sample_fraction: 1.0 - r,
        })
    }

    pub fn value(&self) -> f64 {
        self.r
    }

    /// `n/p`, i.e. `1 - r`.
    pub fn sample_fraction(&self) -> f64 {
        self.sample_fraction
    }

    /// `[r^0, r^1, ..., r^max]` by repeated multiplication.
    pub fn powers(&self, max: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(max + 1);
        let mut acc = 1.0;
        for _ in 0..=max {
            out.push(acc);
            acc *= self.r;
        }
        out
    }
}
