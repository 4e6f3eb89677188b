//! Scoring and exhaustive search of task orders.
//!
//! Orders are 0-based task indices: `order[k]` is the task learned at
//! position `k`. Search collapses orders that differ only by permuting
//! identical tasks or by exchanging whole interchangeable categories, so each
//! result row is one "effective" order.

use crate::task::{permute_geometry, OverparamRatio, TaskError, TaskGeometry};
use crate::theory::{self, Regime, SystemParams, TheoryError};
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Largest task count accepted by the exhaustive search.
pub const MAX_SEARCH_TASKS: usize = 10;
/// Ranking entries kept by a search; minimizers are tracked separately.
pub const RANKING_CAP: usize = 100_000;
/// Minimizer patterns listed per search before the expansion stops.
pub const PATTERN_CAP: usize = 4096;
const TIE_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderingError {
    #[error(
        "exhaustive search supports at most {MAX_SEARCH_TASKS} tasks, got {0}; enumerate category patterns instead"
    )]
    TooManyTasks(usize),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderScore {
    pub order: Vec<usize>,
    pub forgetting: f64,
    pub generalization: f64,
    /// The pairwise-distance part of the forgetting. Differs from
    /// `forgetting` by an order-independent constant only when all task
    /// norms are equal.
    pub order_dependent_forgetting: f64,
    /// `sum_{i<j} -r^(j-i) ||w_i - w_j||^2` over positions; zero in the
    /// underparameterized regime.
    pub pairwise_term: f64,
}

/// Exact scores of `order` on the relabeled geometry.
pub fn score_order(
    order: &[usize],
    geometry: &TaskGeometry,
    params: &SystemParams,
) -> Result<OrderScore, OrderingError> {
    let permuted = permute_geometry(geometry, order)?;
    let metrics = theory::expected_metrics(&permuted, params)?;
    let t = geometry.tasks();
    let (order_dependent_forgetting, pairwise_term) = match params.regime() {
        Regime::Over if t >= 2 => {
            let pow = params.ratio()?.powers(t);
            let mut raw = 0.0;
            for i in 0..t {
                for j in (i + 1)..t {
                    raw -= pow[j - i] * permuted.dist_sq(i, j);
                }
            }
            (theory::forgetting_terms(&permuted, params)?.pairwise, raw)
        }
        Regime::Over => (0.0, 0.0),
        Regime::Under => (metrics.forgetting.unwrap_or(0.0), 0.0),
    };
    Ok(OrderScore {
        order: order.to_vec(),
        forgetting: metrics.forgetting.unwrap_or(0.0),
        generalization: metrics.generalization,
        order_dependent_forgetting,
        pairwise_term,
    })
}

/// Precomputed closed forms for scoring many orders of one geometry.
///
/// Agrees with [`score_order`] but avoids rebuilding the permuted geometry.
#[derive(Debug, Clone)]
pub struct OrderScorer {
    tasks: usize,
    norms_sq: Vec<f64>,
    dist_sq: DMatrix<f64>,
    regime: Regime,
    /// Position weights `c_ij` (over) or unused (under).
    coeff: DMatrix<f64>,
    pow: Vec<f64>,
    sample_fraction: f64,
    noise: f64,
    row_sums: Vec<f64>,
}

impl OrderScorer {
    pub fn new(geometry: &TaskGeometry, params: &SystemParams) -> Result<Self, OrderingError> {
        if geometry.tasks() != params.tasks() {
            return Err(TheoryError::TaskCountMismatch {
                geometry: geometry.tasks(),
                params: params.tasks(),
            }
            .into());
        }
        match params.regime() {
            Regime::Over => Ok(Self::build(
                geometry,
                Regime::Over,
                Some(params.ratio()?),
                params.noise_floor()?,
            )),
            Regime::Under => Ok(Self::build(
                geometry,
                Regime::Under,
                None,
                params.least_squares_noise()?,
            )),
        }
    }

    /// Noiseless overparameterized scorer at an arbitrary ratio.
    pub fn at_ratio(geometry: &TaskGeometry, ratio: OverparamRatio) -> Self {
        Self::build(geometry, Regime::Over, Some(ratio), 0.0)
    }

    fn build(geometry: &TaskGeometry, regime: Regime, ratio: Option<OverparamRatio>, noise: f64) -> Self {
        let t = geometry.tasks();
        let (pow, q) = match ratio {
            Some(r) => (r.powers(t), r.sample_fraction()),
            None => (vec![0.0; t + 1], 1.0),
        };
        let coeff = DMatrix::from_fn(t, t, |i, j| {
            if regime == Regime::Over && i < j {
                theory::c_from_powers(&pow, i, j, t, q)
            } else {
                0.0
            }
        });
        let row_sums = (0..t).map(|a| (0..t).map(|b| geometry.dist_sq(a, b)).sum()).collect();
        Self {
            tasks: t,
            norms_sq: geometry.norms_sq().to_vec(),
            dist_sq: geometry.dist_sq_matrix().clone(),
            regime,
            coeff,
            pow,
            sample_fraction: q,
            noise,
            row_sums,
        }
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    /// Scores of `order`, which must be a permutation (unchecked).
    pub fn score(&self, order: &[usize]) -> OrderScore {
        let t = self.tasks;
        let d = |k: usize, l: usize| self.dist_sq[(order[k], order[l])];
        let (forgetting, generalization, odf, pairwise_term) = match self.regime {
            Regime::Over => {
                let pow = &self.pow;
                let (mut norm, mut pair, mut raw, mut noise) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..t.saturating_sub(1) {
                    norm += (pow[t] - pow[i + 1]) * self.norms_sq[order[i]];
                    noise += self.noise * (pow[i + 1] - pow[t]);
                    for j in (i + 1)..t {
                        let dij = d(i, j);
                        pair += self.coeff[(i, j)] * dij;
                        raw -= pow[j - i] * dij;
                    }
                }
                let (f, odf) = if t >= 2 {
                    let s = 1.0 / (t - 1) as f64;
                    ((norm + pair + noise) * s, pair * s)
                } else {
                    (0.0, 0.0)
                };
                let g_norm = pow[t] * self.norms_sq.iter().sum::<f64>() / t as f64;
                let g_pair: f64 = (0..t)
                    .map(|i| self.sample_fraction * pow[t - 1 - i] * self.row_sums[order[i]])
                    .sum::<f64>()
                    / t as f64;
                let g = g_norm + g_pair + self.noise * (1.0 - pow[t]);
                (f, g, odf, raw)
            }
            Regime::Under => {
                let last = t - 1;
                let f = if t >= 2 {
                    (0..last).map(|i| d(last, i)).sum::<f64>() / (t - 1) as f64
                } else {
                    0.0
                };
                let g = (0..t).map(|i| d(last, i)).sum::<f64>() / t as f64 + self.noise;
                (f, g, f, 0.0)
            }
        };
        OrderScore {
            order: order.to_vec(),
            forgetting,
            generalization,
            order_dependent_forgetting: odf,
            pairwise_term,
        }
    }
}

/// Partition of tasks into classes of identical tasks, and of classes into
/// groups whose members can be exchanged without changing the geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskClasses {
    /// Class of each task; class ids follow the first task of each class.
    pub labels: Vec<usize>,
    /// Tasks of each class, ascending.
    pub members: Vec<Vec<usize>>,
    /// Interchangeable classes, each group ascending, groups ordered by first class.
    pub groups: Vec<Vec<usize>>,
}

impl TaskClasses {
    pub fn class_count(&self) -> usize {
        self.members.len()
    }

    fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.class_count()];
        for (g, members) in self.groups.iter().enumerate() {
            for &c in members {
                out[c] = g;
            }
        }
        out
    }

    /// Relabel each group's classes in order of first appearance.
    pub fn canonical_pattern(&self, pattern: &[usize]) -> Vec<usize> {
        let group_of = self.group_of();
        let mut next = vec![0usize; self.groups.len()];
        let mut map: Vec<Option<usize>> = vec![None; self.class_count()];
        pattern
            .iter()
            .map(|&c| {
                *map[c].get_or_insert_with(|| {
                    let g = group_of[c];
                    let label = self.groups[g][next[g]];
                    next[g] += 1;
                    label
                })
            })
            .collect()
    }

    /// Task order realizing `pattern`, each class's tasks taken in ascending order.
    pub fn fill(&self, pattern: &[usize]) -> Vec<usize> {
        let mut cursor = vec![0usize; self.class_count()];
        pattern
            .iter()
            .map(|&c| {
                let task = self.members[c][cursor[c]];
                cursor[c] += 1;
                task
            })
            .collect()
    }

    pub fn pattern_of(&self, order: &[usize]) -> Vec<usize> {
        order.iter().map(|&k| self.labels[k]).collect()
    }

    /// Task orders collapsed into one effective order.
    pub fn orbit_size(&self) -> u128 {
        let fact = |k: usize| (1..=k as u128).product::<u128>();
        let within: u128 = self.members.iter().map(|m| fact(m.len())).product();
        let across: u128 = self.groups.iter().map(|g| fact(g.len())).product();
        within * across
    }

    /// Every pattern obtained from `pattern` by exchanging classes within groups, sorted.
    pub fn expand_pattern(&self, pattern: &[usize], cap: usize) -> Vec<Vec<usize>> {
        let mut maps: Vec<Vec<usize>> = vec![(0..self.class_count()).collect()];
        for group in &self.groups {
            let mut perm = group.clone();
            let mut next_maps = Vec::new();
            loop {
                for m in &maps {
                    let mut m = m.clone();
                    for (&from, &to) in group.iter().zip(&perm) {
                        m[from] = to;
                    }
                    next_maps.push(m);
                }
                if next_maps.len() >= cap || !next_permutation(&mut perm) {
                    break;
                }
            }
            maps = next_maps;
            maps.truncate(cap);
        }
        let mut out: Vec<Vec<usize>> = maps
            .iter()
            .map(|m| pattern.iter().map(|&c| m[c]).collect())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Detect identical tasks (zero distance, equal norm) and interchangeable classes.
#[allow(clippy::needless_range_loop)]
pub fn task_classes(geometry: &TaskGeometry) -> TaskClasses {
    let t = geometry.tasks();
    let scale = geometry.max_norm_sq().max(1.0);
    let close = |a: f64, b: f64| (a - b).abs() <= IDENTITY_TOL * scale;
    let mut labels = vec![usize::MAX; t];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for k in 0..t {
        if labels[k] != usize::MAX {
            continue;
        }
        let class = members.len();
        let mut m = vec![k];
        labels[k] = class;
        for l in (k + 1)..t {
            if labels[l] == usize::MAX
                && close(geometry.dist_sq(k, l), 0.0)
                && close(geometry.norm_sq(k), geometry.norm_sq(l))
            {
                labels[l] = class;
                m.push(l);
            }
        }
        members.push(m);
    }
    let c = members.len();
    let rep = |a: usize| members[a][0];
    // exchanging classes a and b preserves the geometry iff they match in size,
    // norm and distance to every third class
    let swappable = |a: usize, b: usize| {
        members[a].len() == members[b].len()
            && close(geometry.norm_sq(rep(a)), geometry.norm_sq(rep(b)))
            && (0..c)
                .filter(|&x| x != a && x != b)
                .all(|x| close(geometry.dist_sq(rep(a), rep(x)), geometry.dist_sq(rep(b), rep(x))))
    };
    let mut grouped = vec![false; c];
    let mut groups = Vec::new();
    for a in 0..c {
        if grouped[a] {
            continue;
        }
        let mut g = vec![a];
        grouped[a] = true;
        for b in (a + 1)..c {
            if !grouped[b] && swappable(a, b) {
                grouped[b] = true;
                g.push(b);
            }
        }
        groups.push(g);
    }
    TaskClasses {
        labels,
        members,
        groups,
    }
}

/// Advance to the next lexicographic permutation; false after the last one.
pub fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Forgetting,
    Generalization,
}

impl Objective {
    pub fn value(&self, score: &OrderScore) -> f64 {
        match self {
            Objective::Forgetting => score.forgetting,
            Objective::Generalization => score.generalization,
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forgetting" => Ok(Objective::Forgetting),
            "generalization" => Ok(Objective::Generalization),
            other => Err(format!("unknown objective '{other}' (forgetting|generalization)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveOrder {
    /// Lexicographically smallest task order in the class.
    pub score: OrderScore,
    /// Class label per position, canonicalized.
    pub pattern: Vec<usize>,
    /// Number of task orders represented.
    pub multiplicity: u128,
}

impl EffectiveOrder {
    pub fn order(&self) -> &[usize] {
        &self.score.order
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSearch {
    pub objective: Objective,
    pub classes: TaskClasses,
    /// Ascending by objective, then by order.
    pub ranking: Vec<EffectiveOrder>,
    /// All effective orders tied with the best value.
    pub minimizers: Vec<EffectiveOrder>,
    pub effective_orders: usize,
    /// The ranking holds only the best [`RANKING_CAP`] entries.
    pub truncated: bool,
}

impl OrderSearch {
    pub fn best_value(&self) -> f64 {
        self.objective.value(&self.minimizers[0].score)
    }

    /// Canonical minimizer (lexicographically smallest task order).
    pub fn canonical(&self) -> &EffectiveOrder {
        &self.minimizers[0]
    }

    /// Class patterns of all minimizers, including exchanged categories.
    pub fn minimizer_patterns(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for m in &self.minimizers {
            out.extend(self.classes.expand_pattern(&m.pattern, PATTERN_CAP));
            if out.len() >= PATTERN_CAP {
                break;
            }
        }
        out.sort();
        out.dedup();
        out.truncate(PATTERN_CAP);
        out
    }

    pub fn delta_vs_best(&self, entry: &EffectiveOrder) -> f64 {
        self.objective.value(&entry.score) - self.best_value()
    }
}

fn is_tie(a: f64, best: f64) -> bool {
    a - best <= TIE_TOL * best.abs().max(1.0)
}

fn rank_cmp(objective: Objective) -> impl Fn(&EffectiveOrder, &EffectiveOrder) -> std::cmp::Ordering {
    move |a, b| {
        objective
            .value(&a.score)
            .total_cmp(&objective.value(&b.score))
            .then_with(|| a.score.order.cmp(&b.score.order))
    }
}

/// Exhaustive search over effective orders with a prepared scorer.
pub fn search_orders(
    geometry: &TaskGeometry,
    scorer: &OrderScorer,
    objective: Objective,
) -> Result<OrderSearch, OrderingError> {
    let t = geometry.tasks();
    if t > MAX_SEARCH_TASKS {
        return Err(OrderingError::TooManyTasks(t));
    }
    if scorer.tasks() != t {
        return Err(TheoryError::TaskCountMismatch {
            geometry: t,
            params: scorer.tasks(),
        }
        .into());
    }
    let classes = task_classes(geometry);
    let multiplicity = classes.orbit_size();
    let cmp = rank_cmp(objective);

    let mut pattern: Vec<usize> = {
        let mut p = classes.labels.clone();
        p.sort();
        p
    };
    let mut ranking: Vec<EffectiveOrder> = Vec::new();
    let mut best: Option<f64> = None;
    let mut minimizers: Vec<EffectiveOrder> = Vec::new();
    let mut effective_orders = 0;
    let mut truncated = false;
    loop {
        if classes.canonical_pattern(&pattern) == pattern {
            effective_orders += 1;
            let entry = EffectiveOrder {
                score: scorer.score(&classes.fill(&pattern)),
                pattern: pattern.clone(),
                multiplicity,
            };
            let v = objective.value(&entry.score);
            match best {
                Some(b) if is_tie(v, b) && is_tie(b, v) => minimizers.push(entry.clone()),
                Some(b) if v < b => {
                    best = Some(v);
                    minimizers.retain(|m| is_tie(objective.value(&m.score), v));
                    minimizers.push(entry.clone());
                }
                Some(_) => {}
                None => {
                    best = Some(v);
                    minimizers.push(entry.clone());
                }
            }
            ranking.push(entry);
            if ranking.len() >= 2 * RANKING_CAP {
                ranking.sort_by(&cmp);
                ranking.truncate(RANKING_CAP);
                truncated = true;
            }
        }
        if !next_permutation(&mut pattern) {
            break;
        }
    }
    ranking.sort_by(&cmp);
    if ranking.len() > RANKING_CAP {
        ranking.truncate(RANKING_CAP);
        truncated = true;
    }
    minimizers.sort_by(|a, b| a.score.order.cmp(&b.score.order));
    Ok(OrderSearch {
        objective,
        classes,
        ranking,
        minimizers,
        effective_orders,
        truncated,
    })
}

/// All effective orders of `geometry`, ranked by `objective`, with every minimizer.
pub fn brute_force_optimal_order(
    geometry: &TaskGeometry,
    params: &SystemParams,
    objective: Objective,
) -> Result<OrderSearch, OrderingError> {
    if geometry.tasks() > MAX_SEARCH_TASKS {
        return Err(OrderingError::TooManyTasks(geometry.tasks()));
    }
    search_orders(geometry, &OrderScorer::new(geometry, params)?, objective)
}

/// Tasks split into categories; distance `cross_distance` across categories, zero within.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CategoryScenario {
    pub tasks_per_category: Vec<usize>,
    pub cross_distance: f64,
}

impl CategoryScenario {
    pub fn new(tasks_per_category: Vec<usize>) -> Self {
        Self {
            tasks_per_category,
            cross_distance: 1.0,
        }
    }

    pub fn balanced(categories: usize, per_category: usize) -> Self {
        Self::new(vec![per_category; categories])
    }

    pub fn with_cross_distance(mut self, d: f64) -> Self {
        self.cross_distance = d;
        self
    }

    pub fn category_count(&self) -> usize {
        self.tasks_per_category.len()
    }

    pub fn tasks(&self) -> usize {
        self.tasks_per_category.iter().sum()
    }

    /// Category of each task; categories occupy consecutive task indices.
    pub fn labels(&self) -> Vec<usize> {
        self.tasks_per_category
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
            .collect()
    }

    /// Unit-norm geometry of the scenario.
    pub fn geometry(&self) -> Result<TaskGeometry, TaskError> {
        if self.tasks_per_category.is_empty() || self.tasks_per_category.contains(&0) {
            return Err(TaskError::NoTasks);
        }
        let labels = self.labels();
        let t = labels.len();
        let dist = (0..t)
            .map(|i| {
                (0..t)
                    .map(|j| if labels[i] == labels[j] { 0.0 } else { self.cross_distance })
                    .collect()
            })
            .collect();
        TaskGeometry::from_parts(vec![1.0; t], dist)
    }
}

/// One special task (task 0) and `tasks - 1` identical tasks, all unit norm.
pub fn one_vs_many_geometry(tasks: usize, cross_distance: f64) -> Result<TaskGeometry, TaskError> {
    CategoryScenario::new(vec![1, tasks.saturating_sub(1)])
        .with_cross_distance(cross_distance)
        .geometry()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPosition {
    pub tasks: usize,
    /// 1-based position of the special task minimizing forgetting.
    pub i_star: usize,
    /// Forgetting with the special task at positions 1..=T.
    pub forgetting_by_position: Vec<f64>,
    /// Continuous optimum of `alpha = r^(T - i)`.
    pub alpha_star: f64,
    /// The same optimum with denominator `T - 2 - (T - 1) r`; absent when that is not positive.
    pub alpha_alt: Option<f64>,
    /// `T - ln(alpha_star) / ln(r)`, the relaxed optimal position.
    pub continuous_position: f64,
}

impl OptimalPosition {
    /// `2 <= i* <= T/2`.
    pub fn within_bounds(&self) -> bool {
        self.i_star >= 2 && 2 * self.i_star <= self.tasks
    }
}

/// Best position of the special task for forgetting, at unit cross distance.
pub fn one_vs_many_optimal_position(
    tasks: usize,
    params: &SystemParams,
) -> Result<OptimalPosition, OrderingError> {
    if params.regime() != Regime::Over {
        return Err(TheoryError::WrongRegime {
            expected: Regime::Over,
            found: params.regime(),
        }
        .into());
    }
    let params = params.with_tasks(tasks)?;
    let geometry = one_vs_many_geometry(tasks, 1.0)?;
    optimal_position(tasks, &geometry, &OrderScorer::new(&geometry, &params)?, params.ratio()?)
}

/// [`one_vs_many_optimal_position`] at an arbitrary ratio, without noise.
pub fn one_vs_many_optimal_position_at_ratio(
    tasks: usize,
    ratio: OverparamRatio,
) -> Result<OptimalPosition, OrderingError> {
    let geometry = one_vs_many_geometry(tasks, 1.0)?;
    optimal_position(tasks, &geometry, &OrderScorer::at_ratio(&geometry, ratio), ratio)
}

fn optimal_position(
    tasks: usize,
    geometry: &TaskGeometry,
    scorer: &OrderScorer,
    ratio: OverparamRatio,
) -> Result<OptimalPosition, OrderingError> {
    if tasks < 3 {
        return Err(OrderingError::Unsupported(format!(
            "one-vs-many needs at least 3 tasks, got {tasks}"
        )));
    }
    if ratio.value() <= 0.0 {
        return Err(OrderingError::Unsupported("one-vs-many needs 0 < r < 1".into()));
    }
    debug_assert_eq!(geometry.tasks(), tasks);
    let forgetting_by_position: Vec<f64> = (0..tasks)
        .map(|pos| {
            let mut order: Vec<usize> = (1..tasks).collect();
            order.insert(pos, 0);
            scorer.score(&order).forgetting
        })
        .collect();
    let mut best = 0;
    for (k, &f) in forgetting_by_position.iter().enumerate() {
        let b = forgetting_by_position[best];
        if !is_tie(b, f) {
            best = k;
        }
    }
    let r = ratio.value();
    let tf = tasks as f64;
    let rt = r.powi(tasks as i32);
    let alpha_star = (rt / (tf - 2.0 - (tf - 3.0) * r)).sqrt();
    let alt_den = tf - 2.0 - (tf - 1.0) * r;
    let alpha_alt = (alt_den > 0.0).then(|| (rt / alt_den).sqrt());
    Ok(OptimalPosition {
        tasks,
        i_star: best + 1,
        forgetting_by_position,
        alpha_star,
        alpha_alt,
        continuous_position: tf - alpha_star.ln() / r.ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub enum DivergenceScenario {
    OneVsMany { tasks: usize, cross_distance: f64 },
    Categories(CategoryScenario),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub forgetting: OrderSearch,
    pub generalization: OrderSearch,
    /// Both objectives have the same set of minimizing effective orders.
    pub same_minimizers: bool,
    /// One-vs-many only: 1-based positions of the special task in each objective's minimizers.
    pub special_positions_forgetting: Vec<usize>,
    pub special_positions_generalization: Vec<usize>,
}

/// Minimizers of forgetting and of generalization for one of the special cases.
pub fn forgetting_vs_generalization_order_divergence(
    scenario: &DivergenceScenario,
    params: &SystemParams,
) -> Result<DivergenceReport, OrderingError> {
    let (geometry, special) = match scenario {
        DivergenceScenario::OneVsMany {
            tasks,
            cross_distance,
        } => {
            if *tasks < 2 {
                return Err(OrderingError::Unsupported("one-vs-many needs at least 2 tasks".into()));
            }
            (one_vs_many_geometry(*tasks, *cross_distance)?, true)
        }
        DivergenceScenario::Categories(c) => (c.geometry()?, false),
    };
    let params = params.with_tasks(geometry.tasks())?;
    let scorer = OrderScorer::new(&geometry, &params)?;
    let forgetting = search_orders(&geometry, &scorer, Objective::Forgetting)?;
    let generalization = search_orders(&geometry, &scorer, Objective::Generalization)?;
    let orders = |s: &OrderSearch| -> Vec<Vec<usize>> { s.minimizers.iter().map(|m| m.score.order.clone()).collect() };
    let positions = |s: &OrderSearch| -> Vec<usize> {
        if !special {
            return Vec::new();
        }
        let mut v: Vec<usize> = s
            .minimizers
            .iter()
            .filter_map(|m| m.score.order.iter().position(|&k| k == 0).map(|p| p + 1))
            .collect();
        v.sort();
        v.dedup();
        v
    };
    Ok(DivergenceReport {
        same_minimizers: orders(&forgetting) == orders(&generalization),
        special_positions_forgetting: positions(&forgetting),
        special_positions_generalization: positions(&generalization),
        forgetting,
        generalization,
    })
}
