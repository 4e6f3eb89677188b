//! Closed-form expectations for sequential minimum-norm learning.
//!
//! With i.i.d. standard Gaussian features and `p >= n + 2`, one minimum-norm
//! step contracts the expected squared gap to any fixed target by
//! `r = 1 - n/p`, pulls it towards the new task by `n/p` and injects
//! `n sigma^2 / (p - n - 1)` of noise. Unrolling that recursion from `w_0 = 0`
//! gives every expectation in this module.
//!
//! Indices are 0-based: task `i` here is task `i + 1` in the usual 1-based
//! notation, and "learned through `t` tasks" means the model `w_t`, so
//! `t = 0` is the zero initial model.

use crate::task::{OverparamRatio, TaskError, TaskGeometry};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error(
        "no closed form in the near-square band: n = {n}, p = {p} (need p >= n + 2 or n >= p + 2)"
    )]
    NearSquare { n: usize, p: usize },
    #[error("formula requires the {expected:?} regime, parameters are {found:?}")]
    WrongRegime { expected: Regime, found: Regime },
    #[error("forgetting is undefined for a single task")]
    SingleTask,
    #[error("{0}")]
    InvalidParameter(String),
    #[error("geometry has {geometry} tasks but parameters describe {params}")]
    TaskCountMismatch { geometry: usize, params: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("expected {expected} per-task errors, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(
        "negative-forgetting condition inapplicable: sigma^2 = {sigma_sq} must be below {bound}"
    )]
    PredicateInapplicable { sigma_sq: f64, bound: f64 },
    #[error(transparent)]
    Task(#[from] TaskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `p >= n + 2`: minimum-norm interpolation.
    Over,
    /// `n >= p + 2`: least squares.
    Under,
}

impl Regime {
    pub fn classify(n: usize, p: usize) -> Option<Regime> {
        if p >= n + 2 {
            Some(Regime::Over)
        } else if n >= p + 2 {
            Some(Regime::Under)
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Over => "over",
            Regime::Under => "under",
        }
    }
}

/// System size, noise level and task count for the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    n: usize,
    p: usize,
    sigma: f64,
    tasks: usize,
    regime: Regime,
}

impl SystemParams {
    pub fn new(n: usize, p: usize, sigma: f64, tasks: usize) -> Result<Self, TheoryError> {
        if n == 0 || p == 0 || tasks == 0 {
            return Err(TheoryError::InvalidParameter(format!(
                "n, p and T must be positive (n = {n}, p = {p}, T = {tasks})"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(TheoryError::InvalidParameter(format!(
                "sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        let regime = Regime::classify(n, p).ok_or(TheoryError::NearSquare { n, p })?;
        Ok(Self {
            n,
            p,
            sigma,
            tasks,
            regime,
        })
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
        self.tasks
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn with_tasks(&self, tasks: usize) -> Result<Self, TheoryError> {
        Self::new(self.n, self.p, self.sigma, tasks)
    }

    pub fn with_p(&self, p: usize) -> Result<Self, TheoryError> {
        Self::new(self.n, p, self.sigma, self.tasks)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, TheoryError> {
        Self::new(self.n, self.p, sigma, self.tasks)
    }

    pub fn ratio(&self) -> Result<OverparamRatio, TheoryError> {
        self.require(Regime::Over)?;
        Ok(OverparamRatio::new(self.n, self.p)?)
    }

    /// `p sigma^2 / (p - n - 1)`, the stationary noise floor of the overparameterized learner.
    pub fn noise_floor(&self) -> Result<f64, TheoryError> {
        self.require(Regime::Over)?;
        let (n, p) = (self.n as f64, self.p as f64);
        Ok(p * self.sigma * self.sigma / (p - n - 1.0))
    }

    /// `n sigma^2 / (p - n - 1)`, the noise injected by one minimum-norm step.
    pub fn step_noise(&self) -> Result<f64, TheoryError> {
        self.require(Regime::Over)?;
        let (n, p) = (self.n as f64, self.p as f64);
        Ok(n * self.sigma * self.sigma / (p - n - 1.0))
    }

    /// `p sigma^2 / (n - p - 1)`, the least-squares noise error.
    pub fn least_squares_noise(&self) -> Result<f64, TheoryError> {
        self.require(Regime::Under)?;
        let (n, p) = (self.n as f64, self.p as f64);
        Ok(p * self.sigma * self.sigma / (n - p - 1.0))
    }

    fn require(&self, expected: Regime) -> Result<(), TheoryError> {
        if self.regime != expected {
            return Err(TheoryError::WrongRegime {
                expected,
                found: self.regime,
            });
        }
        Ok(())
    }

    fn check_geometry(&self, geometry: &TaskGeometry) -> Result<(), TheoryError> {
        if geometry.tasks() != self.tasks {
            return Err(TheoryError::TaskCountMismatch {
                geometry: geometry.tasks(),
                params: self.tasks,
            });
        }
        Ok(())
    }
}

/// Weight of `||w_i - w_j||^2` in the expected forgetting, for positions `i < j < tasks`.
pub fn coefficient_c(
    i: usize,
    j: usize,
    tasks: usize,
    ratio: OverparamRatio,
) -> Result<f64, TheoryError> {
    if i >= j || j >= tasks {
        return Err(TheoryError::IndexOutOfRange(format!(
            "coefficient needs i < j < T, got i = {i}, j = {j}, T = {tasks}"
        )));
    }
    let pow = ratio.powers(tasks);
    Ok(c_from_powers(&pow, i, j, tasks, ratio.sample_fraction()))
}

#[inline]
pub(crate) fn c_from_powers(pow: &[f64], i: usize, j: usize, tasks: usize, q: f64) -> f64 {
    q * (pow[tasks - 1 - i] - pow[j - i] + pow[tasks - 1 - j])
}

/// The three parts of the expected forgetting, each already divided by `T - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingTerms {
    /// Norm term `(r^T - r^i) ||w_i||^2`.
    pub norm: f64,
    /// Pairwise task-similarity term, the only part that depends on the order
    /// when all norms are equal.
    pub pairwise: f64,
    /// Noise term.
    pub noise: f64,
}

impl ForgettingTerms {
    pub fn total(&self) -> f64 {
        self.norm + self.pairwise + self.noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizationTerms {
    pub norm: f64,
    pub pairwise: f64,
    pub noise: f64,
}

impl GeneralizationTerms {
    pub fn total(&self) -> f64 {
        self.norm + self.pairwise + self.noise
    }
}

pub fn forgetting_terms(
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<ForgettingTerms, TheoryError> {
    params.check_geometry(geometry)?;
    let ratio = params.ratio()?;
    let t = params.tasks();
    if t < 2 {
        return Err(TheoryError::SingleTask);
    }
    let pow = ratio.powers(t);
    let q = ratio.sample_fraction();
    let floor = params.noise_floor()?;
    let (mut norm, mut pairwise, mut noise) = (0.0, 0.0, 0.0);
    for i in 0..t - 1 {
        // position i (0-based) contributes r^(i+1)
        norm += (pow[t] - pow[i + 1]) * geometry.norm_sq(i);
        for j in (i + 1)..t {
            pairwise += c_from_powers(&pow, i, j, t, q) * geometry.dist_sq(i, j);
        }
        noise += floor * (pow[i + 1] - pow[t]);
    }
    let scale = 1.0 / (t - 1) as f64;
    Ok(ForgettingTerms {
        norm: norm * scale,
        pairwise: pairwise * scale,
        noise: noise * scale,
    })
}

/// Expected forgetting `E[F_T]` for `p >= n + 2`.
pub fn expected_forgetting(geometry: &TaskGeometry, params: &SystemParams) -> Result<f64, TheoryError> {
    params.require(Regime::Over)?;
    Ok(forgetting_terms(geometry, params)?.total())
}

pub fn generalization_terms(
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<GeneralizationTerms, TheoryError> {
    params.check_geometry(geometry)?;
    let ratio = params.ratio()?;
    let t = params.tasks();
    let pow = ratio.powers(t);
    let q = ratio.sample_fraction();
    let norm = pow[t] * geometry.norms_sq().iter().sum::<f64>() / t as f64;
    let mut pairwise = 0.0;
    for i in 0..t {
        let spread: f64 = (0..t).map(|k| geometry.dist_sq(k, i)).sum();
        pairwise += q * pow[t - 1 - i] * spread;
    }
    pairwise /= t as f64;
    let noise = params.noise_floor()? * (1.0 - pow[t]);
    Ok(GeneralizationTerms {
        norm,
        pairwise,
        noise,
    })
}

/// Expected generalization error `E[G_T]` for `p >= n + 2`.
pub fn expected_generalization(
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<f64, TheoryError> {
    params.require(Regime::Over)?;
    Ok(generalization_terms(geometry, params)?.total())
}

/// Expected forgetting for `n >= p + 2`: only the gap to the last task matters.
pub fn expected_forgetting_under(
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<f64, TheoryError> {
    params.require(Regime::Under)?;
    params.check_geometry(geometry)?;
    let t = params.tasks();
    if t < 2 {
        return Err(TheoryError::SingleTask);
    }
    let last = t - 1;
    let sum: f64 = (0..last).map(|i| geometry.dist_sq(last, i)).sum();
    Ok(sum / (t - 1) as f64)
}

/// Expected generalization error for `n >= p + 2`.
pub fn expected_generalization_under(
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<f64, TheoryError> {
    params.require(Regime::Under)?;
    params.check_geometry(geometry)?;
    let t = params.tasks();
    let last = t - 1;
    let sum: f64 = (0..t).map(|i| geometry.dist_sq(last, i)).sum();
    Ok(sum / t as f64 + params.least_squares_noise()?)
}

/// Forgetting (absent for one task) and generalization, using whichever closed form the regime admits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedMetrics {
    pub forgetting: Option<f64>,
    pub generalization: f64,
}

pub fn expected_metrics(
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<ExpectedMetrics, TheoryError> {
    let single = params.tasks() < 2;
    match params.regime() {
        Regime::Over => Ok(ExpectedMetrics {
            forgetting: if single {
                None
            } else {
                Some(expected_forgetting(geometry, params)?)
            },
            generalization: expected_generalization(geometry, params)?,
        }),
        Regime::Under => Ok(ExpectedMetrics {
            forgetting: if single {
                None
            } else {
                Some(expected_forgetting_under(geometry, params)?)
            },
            generalization: expected_generalization_under(geometry, params)?,
        }),
    }
}

fn require_two_tasks(params: &SystemParams) -> Result<(), TheoryError> {
    if params.tasks() != 2 {
        return Err(TheoryError::InvalidParameter(format!(
            "two-task formula called with T = {}",
            params.tasks()
        )));
    }
    Ok(())
}

/// `E[F_2]` written directly in the two tasks' norms and distance.
pub fn two_task_forgetting(
    params: &SystemParams,
    norm1_sq: f64,
    _norm2_sq: f64,
    dist_sq: f64,
) -> Result<f64, TheoryError> {
    require_two_tasks(params)?;
    let ratio = params.ratio()?;
    let r = ratio.value();
    let (n, p) = (params.n() as f64, params.p() as f64);
    let sigma_sq = params.sigma() * params.sigma();
    Ok((r * r - r) * norm1_sq
        + ratio.sample_fraction() * dist_sq
        + n * r * sigma_sq / (p - n - 1.0))
}

/// `E[G_2]` written directly in the two tasks' norms and distance.
pub fn two_task_generalization(
    params: &SystemParams,
    norm1_sq: f64,
    norm2_sq: f64,
    dist_sq: f64,
) -> Result<f64, TheoryError> {
    require_two_tasks(params)?;
    let r = params.ratio()?.value();
    let (n, p) = (params.n() as f64, params.p() as f64);
    let sigma_sq = params.sigma() * params.sigma();
    let keep = 1.0 - r * r;
    Ok(0.5 * r * r * (norm1_sq + norm2_sq)
        + 0.5 * keep * dist_sq
        + p * sigma_sq * keep / (p - n - 1.0))
}

/// `E||w_t - w_i||^2` after learning the first `learned` tasks, for any task `task`.
pub fn expected_task_error(
    geometry: &TaskGeometry,
    params: &SystemParams,
    learned: usize,
    task: usize,
) -> Result<f64, TheoryError> {
    params.check_geometry(geometry)?;
    let ratio = params.ratio()?;
    let t = params.tasks();
    if learned > t || task >= t {
        return Err(TheoryError::IndexOutOfRange(format!(
            "learned = {learned} must be <= T = {t} and task = {task} < T"
        )));
    }
    let pow = ratio.powers(learned);
    let q = ratio.sample_fraction();
    let mut pull = 0.0;
    for k in 0..learned {
        pull += pow[learned - 1 - k] * q * geometry.dist_sq(k, task);
    }
    Ok(pow[learned] * geometry.norm_sq(task) + pull + params.noise_floor()? * (1.0 - pow[learned]))
}

/// One step of the expected-gap recursion towards a fixed task.
pub fn gap_evolution_step(
    prev_gap: f64,
    dist_sq_next_to_task: f64,
    params: &SystemParams,
) -> Result<f64, TheoryError> {
    let ratio = params.ratio()?;
    Ok(ratio.value() * prev_gap
        + ratio.sample_fraction() * dist_sq_next_to_task
        + params.step_noise()?)
}

/// `E[F_{t+1}]` from `E[F_t]`, where `learned = t >= 2`.
///
/// `self_errors[i]` must hold `E||w_{i+1} - w_i*||^2` for the first `learned` tasks.
pub fn forgetting_recursion_step(
    prev_forgetting: f64,
    learned: usize,
    geometry: &TaskGeometry,
    self_errors: &[f64],
    params: &SystemParams,
) -> Result<f64, TheoryError> {
    let ratio = params.ratio()?;
    if learned < 2 || learned >= geometry.tasks() {
        return Err(TheoryError::IndexOutOfRange(format!(
            "recursion step needs 2 <= t < T, got t = {learned}, T = {}",
            geometry.tasks()
        )));
    }
    if self_errors.len() != learned {
        return Err(TheoryError::LengthMismatch {
            expected: learned,
            found: self_errors.len(),
        });
    }
    let t = learned as f64;
    let q = ratio.sample_fraction();
    let next = learned;
    let drift: f64 = self_errors
        .iter()
        .enumerate()
        .map(|(i, e)| geometry.dist_sq(next, i) - e)
        .sum();
    Ok((t - 1.0) / t * ratio.value() * prev_forgetting + q / t * drift + params.step_noise()?)
}

/// `E||w_t - w_t*||^2` for the task at 0-based position `task`, i.e. the
/// continual-learning half of the forward-transfer gap.
pub fn forward_transfer_error(
    geometry: &TaskGeometry,
    params: &SystemParams,
    task: usize,
) -> Result<f64, TheoryError> {
    expected_task_error(geometry, params, task + 1, task)
}

/// Sufficient condition for `E[F_2] <= 0` from the task norms and their inner product.
pub fn negative_forgetting_predicate(
    norm1_sq: f64,
    norm2_sq: f64,
    inner_product: f64,
    params: &SystemParams,
) -> Result<bool, TheoryError> {
    params.require(Regime::Over)?;
    let (n, p) = (params.n() as f64, params.p() as f64);
    let sigma_sq = params.sigma() * params.sigma();
    let bound = (p - n - 1.0) / p * norm1_sq;
    if sigma_sq >= bound {
        return Err(TheoryError::PredicateInapplicable { sigma_sq, bound });
    }
    let rhs = n / p * norm1_sq + norm2_sq + (p - n) * sigma_sq / (p - n - 1.0);
    Ok(2.0 * inner_product >= rhs)
}

/// `dE[G_2]/dp` at feature count `p`, for two tasks with inner product `inner_product`.
pub fn g2_derivative(n: usize, p: usize, sigma: f64, inner_product: f64) -> Result<f64, TheoryError> {
    if p < n + 2 {
        return Err(TheoryError::NearSquare { n, p });
    }
    let (nf, pf) = (n as f64, p as f64);
    let r = 1.0 - nf / pf;
    let gap = pf - nf - 1.0;
    Ok(2.0 * nf * r * inner_product / (pf * pf)
        - sigma * sigma * ((nf + 1.0) * (1.0 - r * r) / (gap * gap) + 2.0 * nf * r / (gap * pf)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(value: f64) -> Sign {
        if value > 0.0 {
            Sign::Positive
        } else if value < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SignFlip {
    /// First grid point with the new sign.
    pub p: usize,
    pub from: Sign,
    pub to: Sign,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DerivativeProbe {
    pub samples: Vec<(usize, Sign)>,
    pub flips: Vec<SignFlip>,
}

/// Evaluate [`g2_derivative`] on a grid of `p` values and record where its sign changes.
///
/// Exact zeros do not count as a sign of their own when looking for flips.
pub fn g2_derivative_sign_probe(
    n: usize,
    sigma: f64,
    inner_product: f64,
    grid: impl IntoIterator<Item = usize>,
) -> Result<DerivativeProbe, TheoryError> {
    let mut samples = Vec::new();
    let mut flips = Vec::new();
    let mut last: Option<Sign> = None;
    for p in grid {
        let sign = Sign::of(g2_derivative(n, p, sigma, inner_product)?);
        samples.push((p, sign));
        if sign == Sign::Zero {
            continue;
        }
        if let Some(prev) = last {
            if prev != sign {
                flips.push(SignFlip {
                    p,
                    from: prev,
                    to: sign,
                });
            }
        }
        last = Some(sign);
    }
    Ok(DerivativeProbe { samples, flips })
}
