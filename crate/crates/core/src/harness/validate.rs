//! Fast self-consistency suite run by `cl-lab validate`.

use super::output::{read_sweep_csv, write_sweep_csv};
use super::{run_sweep, ConfigFile, ExperimentKind, ExperimentSpec, PValues, SigmaValues};
use crate::ordering::{
    brute_force_optimal_order, one_vs_many_optimal_position, CategoryScenario, Objective,
};
use crate::sim::{monte_carlo, RunConfig};
use crate::task::{TaskEnsemble, TaskGeometry};
use crate::theory::{self, SystemParams};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

/// Geometry of `tasks` random Gaussian vectors in dimension `dim`, scaled by `scale`.
pub fn random_geometry<R: Rng>(rng: &mut R, tasks: usize, dim: usize, scale: f64) -> TaskGeometry {
    let vectors: Vec<DVector<f64>> = (0..tasks)
        .map(|_| DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    TaskEnsemble::new(vectors, 1, 0.0).expect("nonempty").geometry()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

type Check = fn(&mut ChaCha8Rng) -> Result<String, String>;

fn two_task(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let n = rng.random_range(2..60);
        let p = n + rng.random_range(2..200);
        let sigma = rng.random_range(0.0..1.0);
        let g = random_geometry(rng, 2, 6, 0.5);
        let params = SystemParams::new(n, p, sigma, 2).map_err(|e| e.to_string())?;
        let (a, b, d) = (g.norm_sq(0), g.norm_sq(1), g.dist_sq(0, 1));
        let f = theory::expected_forgetting(&g, &params).map_err(|e| e.to_string())?;
        let f2 = theory::two_task_forgetting(&params, a, b, d).map_err(|e| e.to_string())?;
        let gg = theory::expected_generalization(&g, &params).map_err(|e| e.to_string())?;
        let g2 = theory::two_task_generalization(&params, a, b, d).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(f, f2)).max(rel_err(gg, g2));
    }
    if worst <= 1e-12 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-12"))
    }
}

fn gap_recursion(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let t = rng.random_range(2..8);
        let n = rng.random_range(2..40);
        let p = n + rng.random_range(2..100);
        let params = SystemParams::new(n, p, rng.random_range(0.0..0.5), t).map_err(|e| e.to_string())?;
        let g = random_geometry(rng, t, 5, 0.6);
        for task in 0..t {
            let mut gap = g.norm_sq(task);
            for learned in 1..=t {
                gap = theory::gap_evolution_step(gap, g.dist_sq(learned - 1, task), &params)
                    .map_err(|e| e.to_string())?;
                let direct = theory::expected_task_error(&g, &params, learned, task).map_err(|e| e.to_string())?;
                worst = worst.max(rel_err(gap, direct));
            }
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-10"))
    }
}

fn forgetting_recursion(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let t = rng.random_range(3..9);
        let n = rng.random_range(2..40);
        let p = n + rng.random_range(2..100);
        let sigma = rng.random_range(0.0..0.5);
        let g = random_geometry(rng, t, 5, 0.6);
        let at = |k: usize| -> Result<f64, String> {
            let gk = g.prefix(k).map_err(|x| x.to_string())?;
            let pk = SystemParams::new(n, p, sigma, k).map_err(|x| x.to_string())?;
            theory::expected_forgetting(&gk, &pk).map_err(|x| x.to_string())
        };
        let params = SystemParams::new(n, p, sigma, t).map_err(|x| x.to_string())?;
        let mut f = at(2)?;
        for learned in 2..t {
            let own: Vec<f64> = (0..learned)
                .map(|i| theory::expected_task_error(&g, &params, i + 1, i))
                .collect::<Result<_, _>>()
                .map_err(|x| x.to_string())?;
            f = theory::forgetting_recursion_step(f, learned, &g, &own, &params).map_err(|x| x.to_string())?;
            worst = worst.max(rel_err(f, at(learned + 1)?));
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-10"))
    }
}

fn alternating_order(_: &mut ChaCha8Rng) -> Result<String, String> {
    let g = CategoryScenario::balanced(2, 2).geometry().map_err(|e| e.to_string())?;
    for n in [10, 30, 50, 70, 90] {
        let params = SystemParams::new(n, 100, 0.0, 4).map_err(|e| e.to_string())?;
        let search = brute_force_optimal_order(&g, &params, Objective::Forgetting).map_err(|e| e.to_string())?;
        let patterns = search.minimizer_patterns();
        if patterns != vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]] {
            return Err(format!("n/p = {}: minimizers {patterns:?}", n as f64 / 100.0));
        }
    }
    Ok("alternating orders minimize forgetting for T = 4".into())
}

fn special_task_position(_: &mut ChaCha8Rng) -> Result<String, String> {
    for t in [6, 8] {
        let mut last = 0;
        for k in 1..10 {
            let params = SystemParams::new(10 * k, 100, 0.0, t).map_err(|e| e.to_string())?;
            let pos = one_vs_many_optimal_position(t, &params).map_err(|e| e.to_string())?;
            if !pos.within_bounds() || pos.i_star < last {
                return Err(format!("T = {t}, n/p = {}: i* = {}", k as f64 / 10.0, pos.i_star));
            }
            last = pos.i_star;
        }
    }
    Ok("2 <= i* <= T/2, non-decreasing in n/p".into())
}

fn large_p_limit(_: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0_f64;
    for d in [0.0, 2.0] {
        let g = TaskGeometry::from_parts(
            vec![1.0; 8],
            (0..8).map(|i| (0..8).map(|j| if i == j { 0.0 } else { d }).collect()).collect(),
        )
        .map_err(|e| e.to_string())?;
        for sigma in [0.1, 0.5] {
            let params = SystemParams::new(50, 1_000_000_000, sigma, 8).map_err(|e| e.to_string())?;
            worst = worst.max(theory::expected_forgetting(&g, &params).map_err(|e| e.to_string())?.abs());
        }
    }
    if worst <= 1e-6 {
        Ok(format!("max |F| at p = 1e9 is {worst:.2e}"))
    } else {
        Err(format!("max |F| at p = 1e9 is {worst:.2e}"))
    }
}

fn monte_carlo_agreement(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let vectors: Vec<DVector<f64>> = (0..3)
        .map(|t| DVector::from_fn(40, |k, _| if k == t { 1.0 } else { 0.0 }))
        .collect();
    let mut worst = 0.0_f64;
    for p in [40usize, 6] {
        let ensemble = TaskEnsemble::new(vectors.iter().map(|v| v.rows(0, p).into_owned()).collect(), 12, 0.2)
            .map_err(|e| e.to_string())?;
        let params = SystemParams::new(12, p, 0.2, 3).map_err(|e| e.to_string())?;
        let expected = theory::expected_metrics(&ensemble.geometry(), &params).map_err(|e| e.to_string())?;
        let report = monte_carlo(&ensemble, &RunConfig::new(400, rng.random())).map_err(|e| e.to_string())?;
        let zf = (report.forgetting.unwrap() - expected.forgetting.unwrap()).abs() / report.stderr_forgetting;
        let zg = (report.generalization - expected.generalization).abs() / report.stderr_generalization;
        worst = worst.max(zf).max(zg);
    }
    // four comparisons at the 4.5 SE level
    if worst <= 4.5 {
        Ok(format!("max |sim - theory| / SE = {worst:.2}"))
    } else {
        Err(format!("max |sim - theory| / SE = {worst:.2}"))
    }
}

fn csv_round_trip(_: &mut ChaCha8Rng) -> Result<String, String> {
    let spec = ExperimentSpec::resolve(
        ExperimentKind::Theory,
        ConfigFile {
            scenario: Some(super::ScenarioKind::Orthogonal),
            p: Some(PValues::List(vec![10, 50, 60, 1000])),
            sigma: Some(SigmaValues::List(vec![0.0, 0.3])),
            ..Default::default()
        },
        None,
        None,
    )
    .map_err(|e| e.to_string())?;
    let rows = run_sweep(&spec).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).map_err(|e| e.to_string())?;
    let back = read_sweep_csv(buf.as_slice()).map_err(|e| e.to_string())?;
    if back == rows {
        Ok(format!("{} rows", rows.len()))
    } else {
        Err("rows differ after re-parsing".into())
    }
}

const CHECKS: [(&str, Check); 8] = [
    ("two-task closed forms", two_task),
    ("gap recursion", gap_recursion),
    ("forgetting recursion", forgetting_recursion),
    ("alternating order", alternating_order),
    ("special task position", special_task_position),
    ("large-p limit", large_p_limit),
    ("monte carlo agreement", monte_carlo_agreement),
    ("csv round trip", csv_round_trip),
];

pub fn run_suite(seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = CHECKS
        .iter()
        .map(|(name, check)| match check(&mut rng) {
            Ok(detail) => CheckResult {
                name,
                passed: true,
                detail,
            },
            Err(detail) => CheckResult {
                name,
                passed: false,
                detail,
            },
        })
        .collect();
    ValidationReport { checks }
}
