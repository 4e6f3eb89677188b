//! Monte Carlo simulation of the sequential learner.
//!
//! Each run draws fresh Gaussian data for every task and applies the exact
//! minimum-norm update (more features than samples) or the least-squares
//! solution (more samples than features), starting from `w_0 = 0`.
//!
//! # Random streams
//!
//! Run `k` of a Monte Carlo call is driven by a ChaCha8 generator keyed by
//! the 32-byte seed `master_seed (LE) || k (LE) || 0^16`. Task `t` of that run
//! reads stream id `t`; a resampled draw after a degenerate Gram matrix reads
//! stream id `(attempt << 32) | t`. Standard normals come from `rand_distr`'s
//! ziggurat sampler. Within a task, the `p x n` feature matrix is filled in
//! column-major order and the `n` noise values are drawn afterwards.
//!
//! Runs are independent, so they are spread over a worker pool, but the
//! per-run results are reduced in ascending run order with compensated
//! summation. The report is therefore a pure function of the ensemble, the
//! run count and the master seed.

use crate::task::{TaskEnsemble, TaskError};
use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

/// Largest accepted condition number of a Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Fresh draws attempted after a degenerate one.
pub const MAX_RESAMPLES: u32 = 3;
/// Fraction of runs allowed to hit a degenerate draw before a Monte Carlo call aborts.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("singular data for task {task}: Gram condition estimate {condition:e}")]
    Singular { task: usize, condition: f64 },
    #[error("p = n = {0}: neither the minimum-norm nor the least-squares step applies")]
    SquareSystem(usize),
    #[error("minimum-norm step requires p > n (n = {n}, p = {p})")]
    NeedsOverparameterized { n: usize, p: usize },
    #[error("least-squares step requires n > p (n = {n}, p = {p})")]
    NeedsUnderparameterized { n: usize, p: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("trajectory has {found} models, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("run count must be positive")]
    NoRuns,
    #[error(
        "{degenerate} of {runs} runs hit degenerate data; is p too close to n?"
    )]
    TooManyDegenerate { degenerate: usize, runs: usize },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// Training data for one task: features as columns of `x`, responses `y = x^T w* + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl TaskData {
    pub fn features(&self) -> usize {
        self.x.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }
}

/// Draw a task's features and noisy responses.
pub fn generate_task_data<R: Rng + ?Sized>(
    w_star: &DVector<f64>,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> TaskData {
    let p = w_star.len();
    let entries: Vec<f64> = (0..p * n).map(|_| rng.sample(StandardNormal)).collect();
    let x = DMatrix::from_vec(p, n, entries);
    let noise = DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let y = x.tr_mul(w_star) + noise;
    TaskData { x, y }
}

fn factor_gram(gram: DMatrix<f64>, task: usize) -> Result<Cholesky<f64, nalgebra::Dyn>, SimError> {
    let chol = Cholesky::new(gram).ok_or(SimError::Singular {
        task,
        condition: f64::INFINITY,
    })?;
    // cond(G) >= (max L_ii / min L_ii)^2; cheap lower bound from the factor
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let condition = (hi / lo).powi(2);
    if !condition.is_finite() || condition > MAX_GRAM_CONDITION {
        return Err(SimError::Singular { task, condition });
    }
    Ok(chol)
}

/// The interpolating model closest to `w_prev`:
/// `w = w_prev + X (X^T X)^{-1} (y - X^T w_prev)`.
pub fn minnorm_step(w_prev: &DVector<f64>, data: &TaskData) -> Result<DVector<f64>, SimError> {
    let (p, n) = (data.features(), data.samples());
    if p <= n {
        return Err(SimError::NeedsOverparameterized { n, p });
    }
    if w_prev.len() != p || data.y.len() != n {
        return Err(SimError::Dimension(format!(
            "w_prev has {} entries, y has {}, X is {p}x{n}",
            w_prev.len(),
            data.y.len()
        )));
    }
    let chol = factor_gram(data.x.tr_mul(&data.x), 0)?;
    let residual = &data.y - data.x.tr_mul(w_prev);
    let coeffs = chol.solve(&residual);
    Ok(w_prev + &data.x * coeffs)
}

/// The least-squares model `w = (X X^T)^{-1} X y`; independent of any previous model.
pub fn least_squares_step(data: &TaskData) -> Result<DVector<f64>, SimError> {
    let (p, n) = (data.features(), data.samples());
    if n <= p {
        return Err(SimError::NeedsUnderparameterized { n, p });
    }
    if data.y.len() != n {
        return Err(SimError::Dimension(format!("y has {} entries, X is {p}x{n}", data.y.len())));
    }
    let chol = factor_gram(&data.x * data.x.transpose(), 0)?;
    Ok(chol.solve(&(&data.x * &data.y)))
}

/// Orthogonal projection of `v` onto the column space of `data.x` (requires p > n).
pub fn project_onto_features(v: &DVector<f64>, data: &TaskData) -> Result<DVector<f64>, SimError> {
    let chol = factor_gram(data.x.tr_mul(&data.x), 0)?;
    Ok(&data.x * chol.solve(&data.x.tr_mul(v)))
}

/// Random streams of one run; see the module docs for the layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStream {
    pub master_seed: u64,
    pub run: u64,
}

impl RunStream {
    pub fn new(master_seed: u64, run: u64) -> Self {
        Self { master_seed, run }
    }

    pub fn task_rng(&self, task: usize, attempt: u32) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.run.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((attempt as u64) << 32) | task as u64);
        rng
    }
}

/// Models `w_0 = 0, w_1, ..., w_T` of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub models: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn final_model(&self) -> &DVector<f64> {
        self.models.last().expect("trajectory always holds w_0")
    }
}

struct RunOutput {
    trajectory: Trajectory,
    resamples: u32,
}

fn run_sequence_counted(ensemble: &TaskEnsemble, stream: &RunStream) -> Result<RunOutput, SimError> {
    let (n, p) = (ensemble.n(), ensemble.p());
    if n == p {
        return Err(SimError::SquareSystem(n));
    }
    let mut models = Vec::with_capacity(ensemble.tasks() + 1);
    models.push(DVector::zeros(p));
    let mut resamples = 0;
    for (task, w_star) in ensemble.ground_truths().iter().enumerate() {
        let prev = models.last().expect("w_0 pushed above");
        let mut attempt = 0;
        let next = loop {
            let data = generate_task_data(w_star, n, ensemble.sigma(), &mut stream.task_rng(task, attempt));
            let step = if p > n {
                minnorm_step(prev, &data)
            } else {
                least_squares_step(&data)
            };
            match step {
                Ok(w) => break w,
                Err(SimError::Singular { condition, .. }) if attempt < MAX_RESAMPLES => {
                    warn!(
                        "run {} task {}: degenerate draw (condition {:e}), resampling",
                        stream.run, task, condition
                    );
                    attempt += 1;
                    resamples += 1;
                }
                Err(SimError::Singular { condition, .. }) => {
                    return Err(SimError::Singular { task, condition });
                }
                Err(e) => return Err(e),
            }
        };
        models.push(next);
    }
    Ok(RunOutput {
        trajectory: Trajectory { models },
        resamples,
    })
}

/// Learn every task of the ensemble in order, starting from zero.
pub fn run_sequence(ensemble: &TaskEnsemble, stream: &RunStream) -> Result<Trajectory, SimError> {
    run_sequence_counted(ensemble, stream).map(|out| out.trajectory)
}

/// Forgetting, generalization and per-task errors; Monte Carlo aggregates carry standard errors.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricReport {
    /// Absent for a single task.
    pub forgetting: Option<f64>,
    pub generalization: f64,
    /// `||w_T - w_i*||^2` per task (run averages for Monte Carlo reports).
    pub per_task_error: Vec<f64>,
    pub run_count: usize,
    pub stderr_forgetting: f64,
    pub stderr_generalization: f64,
}

/// Empirical metrics of one trajectory.
pub fn measure_metrics(trajectory: &Trajectory, ensemble: &TaskEnsemble) -> Result<MetricReport, SimError> {
    let t = ensemble.tasks();
    if trajectory.models.len() != t + 1 {
        return Err(SimError::LengthMismatch {
            expected: t + 1,
            found: trajectory.models.len(),
        });
    }
    let last = trajectory.final_model();
    let w = ensemble.ground_truths();
    let per_task_error: Vec<f64> = w.iter().map(|wi| (last - wi).norm_squared()).collect();
    let forgetting = (t >= 2).then(|| {
        let mut acc = CompensatedSum::default();
        for i in 0..t - 1 {
            acc.add(per_task_error[i] - (&trajectory.models[i + 1] - &w[i]).norm_squared());
        }
        acc.value() / (t - 1) as f64
    });
    let mut g = CompensatedSum::default();
    per_task_error.iter().for_each(|&e| g.add(e));
    Ok(MetricReport {
        forgetting,
        generalization: g.value() / t as f64,
        per_task_error,
        run_count: 1,
        stderr_forgetting: 0.0,
        stderr_generalization: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub runs: usize,
    pub master_seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub parallelism: usize,
}

impl RunConfig {
    pub fn new(runs: usize, master_seed: u64) -> Self {
        Self {
            runs,
            master_seed,
            parallelism: 0,
        }
    }

    pub fn with_parallelism(mut self, workers: usize) -> Self {
        self.parallelism = workers;
        self
    }
}

/// Neumaier compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Sample mean and standard error (`sd / sqrt(k)`, zero for a single value), in slice order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    let mut sum = CompensatedSum::default();
    values.iter().for_each(|&v| sum.add(v));
    let mean = sum.value() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let mut sq = CompensatedSum::default();
    values.iter().for_each(|&v| sq.add((v - mean) * (v - mean)));
    let var = sq.value() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Mean and standard error of forgetting and generalization over independent runs.
pub fn monte_carlo(ensemble: &TaskEnsemble, config: &RunConfig) -> Result<MetricReport, SimError> {
    if config.runs == 0 {
        return Err(SimError::NoRuns);
    }
    if ensemble.n() == ensemble.p() {
        return Err(SimError::SquareSystem(ensemble.n()));
    }
    let simulate = |run: usize| {
        let stream = RunStream::new(config.master_seed, run as u64);
        run_sequence_counted(ensemble, &stream).and_then(|out| {
            measure_metrics(&out.trajectory, ensemble).map(|m| (m, out.resamples))
        })
    };
    let results: Vec<Result<(MetricReport, u32), SimError>> = if config.parallelism == 0 {
        (0..config.runs).into_par_iter().map(simulate).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| SimError::Pool(e.to_string()))?;
        pool.install(|| (0..config.runs).into_par_iter().map(simulate).collect())
    };

    let mut reports = Vec::with_capacity(config.runs);
    let mut degenerate = 0;
    let mut first_error = None;
    for result in results {
        match result {
            Ok((report, resamples)) => {
                if resamples > 0 {
                    degenerate += 1;
                }
                reports.push(report);
            }
            Err(SimError::Singular { task, condition }) => {
                degenerate += 1;
                first_error.get_or_insert(SimError::Singular { task, condition });
            }
            Err(e) => return Err(e),
        }
    }
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * config.runs as f64 {
        return Err(SimError::TooManyDegenerate {
            degenerate,
            runs: config.runs,
        });
    }
    if reports.is_empty() {
        return Err(first_error.unwrap_or(SimError::NoRuns));
    }

    let t = ensemble.tasks();
    let generalization: Vec<f64> = reports.iter().map(|r| r.generalization).collect();
    let (g_mean, g_se) = mean_and_stderr(&generalization);
    let (forgetting, f_se) = if t >= 2 {
        let values: Vec<f64> = reports.iter().map(|r| r.forgetting.unwrap_or(f64::NAN)).collect();
        let (m, se) = mean_and_stderr(&values);
        (Some(m), se)
    } else {
        (None, 0.0)
    };
    let per_task_error = (0..t)
        .map(|i| {
            let column: Vec<f64> = reports.iter().map(|r| r.per_task_error[i]).collect();
            mean_and_stderr(&column).0
        })
        .collect();
    Ok(MetricReport {
        forgetting,
        generalization: g_mean,
        per_task_error,
        run_count: reports.len(),
        stderr_forgetting: f_se,
        stderr_generalization: g_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn rng(seed: u64) -> ChaCha8Rng {
        RunStream::new(seed, 0).task_rng(0, 0)
    }

    #[test]
    fn noiseless_data_is_exact() {
        let w = dvector![1.0, -2.0, 0.5];
        let data = generate_task_data(&w, 4, 0.0, &mut rng(1));
        assert_eq!(data.y, data.x.tr_mul(&w));
        let zero = generate_task_data(&DVector::zeros(3), 4, 0.0, &mut rng(1));
        assert!(zero.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_moments() {
        let data = generate_task_data(&DVector::zeros(1000), 100, 0.0, &mut rng(7));
        let k = data.x.len() as f64;
        let mean = data.x.sum() / k;
        let var = data.x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        assert!(mean.abs() < 4.0 / k.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn single_row_projection() {
        let data = TaskData {
            x: dmatrix![1.0; 0.0],
            y: dvector![3.0],
        };
        let w = minnorm_step(&DVector::zeros(2), &data).unwrap();
        assert_relative_eq!(w, dvector![3.0, 0.0]);
    }

    #[test]
    fn consistent_previous_model_is_kept() {
        let w_prev = dvector![0.3, -1.0, 2.0, 0.0, 1.5];
        let mut data = generate_task_data(&dvector![1.0, 0.0, 0.0, 0.0, 0.0], 2, 0.0, &mut rng(3));
        data.y = data.x.tr_mul(&w_prev);
        let w = minnorm_step(&w_prev, &data).unwrap();
        assert_relative_eq!(w, w_prev, epsilon = 1e-12);
    }

    #[test]
    fn step_regime_errors() {
        let data = generate_task_data(&DVector::zeros(3), 5, 0.0, &mut rng(2));
        assert!(matches!(
            minnorm_step(&DVector::zeros(3), &data),
            Err(SimError::NeedsOverparameterized { .. })
        ));
        let wide = generate_task_data(&DVector::zeros(5), 3, 0.0, &mut rng(2));
        assert!(matches!(
            least_squares_step(&wide),
            Err(SimError::NeedsUnderparameterized { .. })
        ));
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let x = dmatrix![1.0, 1.0; 2.0, 2.0; 0.5, 0.5];
        let data = TaskData {
            x,
            y: dvector![1.0, 1.0],
        };
        assert!(matches!(
            minnorm_step(&DVector::zeros(3), &data),
            Err(SimError::Singular { .. })
        ));
    }

    #[test]
    fn least_squares_recovers_truth_without_noise() {
        let w = dvector![1.0, -0.5, 2.0];
        let data = generate_task_data(&w, 20, 0.0, &mut rng(4));
        assert_relative_eq!(least_squares_step(&data).unwrap(), w, epsilon = 1e-8);

        // identity block padded with zero columns
        let mut x = DMatrix::zeros(3, 5);
        for i in 0..3 {
            x[(i, i)] = 1.0;
        }
        x[(0, 3)] = 1.0;
        x[(1, 4)] = 1.0;
        let y = x.tr_mul(&w);
        assert_relative_eq!(least_squares_step(&TaskData { x, y }).unwrap(), w, epsilon = 1e-12);
    }

    #[test]
    fn metrics_of_exact_recovery() {
        let w1 = dvector![1.0, 0.0];
        let w2 = dvector![0.0, 1.0];
        let ensemble = TaskEnsemble::new(vec![w1.clone(), w2.clone()], 1, 0.0).unwrap();
        let traj = Trajectory {
            models: vec![DVector::zeros(2), w1, w2],
        };
        let m = measure_metrics(&traj, &ensemble).unwrap();
        assert_relative_eq!(m.forgetting.unwrap(), 2.0);
        assert_relative_eq!(m.generalization, 1.0);
        assert_relative_eq!(m.generalization, m.per_task_error.iter().sum::<f64>() / 2.0);
        let short = Trajectory {
            models: vec![DVector::zeros(2)],
        };
        assert!(measure_metrics(&short, &ensemble).is_err());
    }

    #[test]
    fn frozen_model_has_no_forgetting() {
        let ensemble = TaskEnsemble::new(vec![dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![1.0, 1.0]], 1, 0.0)
            .unwrap();
        let w = dvector![0.2, 0.7];
        let traj = Trajectory {
            models: vec![DVector::zeros(2), w.clone(), w.clone(), w],
        };
        assert_eq!(measure_metrics(&traj, &ensemble).unwrap().forgetting, Some(0.0));
        let single = TaskEnsemble::new(vec![dvector![1.0, 0.0]], 1, 0.0).unwrap();
        let traj = Trajectory {
            models: vec![DVector::zeros(2), dvector![0.5, 0.0]],
        };
        assert_eq!(measure_metrics(&traj, &single).unwrap().forgetting, None);
    }

    #[test]
    fn stream_layout() {
        let s = RunStream::new(42, 3);
        let a: u64 = s.task_rng(1, 0).random();
        let b: u64 = s.task_rng(1, 0).random();
        let c: u64 = s.task_rng(2, 0).random();
        let d: u64 = s.task_rng(1, 1).random();
        let e: u64 = RunStream::new(42, 4).task_rng(1, 0).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }

    #[test]
    fn single_run_has_zero_stderr() {
        let ensemble = TaskEnsemble::new(vec![dvector![1.0, 0.0, 0.0, 0.0]; 2], 2, 0.1).unwrap();
        let report = monte_carlo(&ensemble, &RunConfig::new(1, 5)).unwrap();
        assert_eq!(report.run_count, 1);
        assert_eq!(report.stderr_forgetting, 0.0);
        assert_eq!(report.stderr_generalization, 0.0);
        assert!(monte_carlo(&ensemble, &RunConfig::new(0, 5)).is_err());
        let square = TaskEnsemble::new(vec![dvector![1.0, 0.0]], 2, 0.0).unwrap();
        assert!(matches!(
            monte_carlo(&square, &RunConfig::new(3, 5)),
            Err(SimError::SquareSystem(2))
        ));
    }

    #[test]
    fn compensated_mean() {
        let values = [1e16, 1.0, -1e16, 1.0];
        let (mean, _) = mean_and_stderr(&values);
        assert_eq!(mean, 0.5);
        let (m, se) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_relative_eq!(se, 1.0);
    }
}
