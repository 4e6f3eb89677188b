#![allow(dead_code)]

use cl_lab::TaskGeometry;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Expected gaps `a[t][i] = E||w_t - w_i*||^2` by stepping the one-step
/// gap update from `w_0 = 0`, one task at a time.
pub fn gap_table(g: &TaskGeometry, n: usize, p: usize, sigma: f64) -> Vec<Vec<f64>> {
    let t = g.tasks();
    let (nf, pf) = (n as f64, p as f64);
    let s2 = sigma * sigma;
    let mut table = vec![(0..t).map(|i| g.norm_sq(i)).collect::<Vec<_>>()];
    for learned in 0..t {
        let prev = table.last().unwrap().clone();
        let next = (0..t)
            .map(|i| {
                if p > n {
                    let r = 1.0 - nf / pf;
                    r * prev[i] + nf / pf * g.dist_sq(learned, i) + nf * s2 / (pf - nf - 1.0)
                } else {
                    g.dist_sq(learned, i) + pf * s2 / (nf - pf - 1.0)
                }
            })
            .collect();
        table.push(next);
    }
    table
}

/// Forgetting and generalization read off the gap table.
pub fn oracle_metrics(g: &TaskGeometry, n: usize, p: usize, sigma: f64) -> (Option<f64>, f64) {
    let t = g.tasks();
    let a = gap_table(g, n, p, sigma);
    let gen = a[t].iter().sum::<f64>() / t as f64;
    if t < 2 {
        return (None, gen);
    }
    let f = (0..t - 1).map(|i| a[t][i] - a[i + 1][i]).sum::<f64>() / (t - 1) as f64;
    (Some(f), gen)
}

/// Two-task forgetting and generalization written out for `T = 2`.
pub fn two_task_oracle(n: usize, p: usize, sigma: f64, n1: f64, n2: f64, d: f64) -> (f64, f64) {
    let (nf, pf) = (n as f64, p as f64);
    let r = 1.0 - nf / pf;
    let s2 = sigma * sigma;
    let f = (r * r - r) * n1 + nf / pf * d + nf * r * s2 / (pf - nf - 1.0);
    let g = r * r / 2.0 * (n1 + n2) + (1.0 - r * r) / 2.0 * d + pf * s2 * (1.0 - r * r) / (pf - nf - 1.0);
    (f, g)
}

pub fn random_vectors<R: Rng>(rng: &mut R, tasks: usize, dim: usize, scale: f64) -> Vec<DVector<f64>> {
    (0..tasks)
        .map(|_| DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

pub fn geometry_of(vectors: &[DVector<f64>]) -> TaskGeometry {
    let t = vectors.len();
    let norms = vectors.iter().map(|v| v.dot(v)).collect();
    let dist = (0..t)
        .map(|i| (0..t).map(|j| (&vectors[i] - &vectors[j]).norm_squared()).collect())
        .collect();
    TaskGeometry::from_parts(norms, dist).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Polynomial `c_0 + c_1 r + ...`.
pub fn poly(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

/// Category patterns of the two-category, six-task table with their forgetting
/// differences against `121212`, as coefficient lists in `r`.
pub fn two_category_table() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("121212", vec![0.0]),
        ("112122", vec![0.0, 2.0, -2.0, 2.0, -2.0]),
        ("112212", vec![0.0, 2.0, -3.0, 2.0, -1.0]),
        ("112221", vec![0.0, 3.0, -3.0, 0.0, -1.0, 1.0]),
        ("122112", vec![0.0, 2.0, -4.0, 2.0]),
        ("122121", vec![0.0, 1.0, -2.0, 2.0, -2.0, 1.0]),
        ("111222", vec![0.0, 4.0, -2.0, 0.0, -2.0]),
        ("121221", vec![0.0, 1.0, -2.0, 2.0, -2.0, 1.0]),
        ("121122", vec![0.0, 2.0, -3.0, 2.0, -1.0]),
        ("122211", vec![0.0, 3.0, -3.0, 0.0, -1.0, 1.0]),
    ]
}

/// Same for three categories of two tasks, against `123123`.
pub fn three_category_table() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("123123", vec![0.0]),
        ("121233", vec![0.0, 1.0, 2.0, -3.0]),
        ("122331", vec![0.0, 2.0, 0.0, -3.0, 0.0, 1.0]),
        ("121323", vec![0.0, 0.0, 2.0, -2.0]),
        ("123213", vec![0.0, 0.0, 1.0, -2.0, 1.0]),
        ("123132", vec![0.0, 0.0, 1.0, -2.0, 1.0]),
        ("112323", vec![0.0, 1.0, 2.0, -3.0]),
        ("122133", vec![0.0, 2.0, 0.0, -2.0]),
        ("112233", vec![0.0, 3.0, 0.0, -3.0]),
        ("121332", vec![0.0, 1.0, 1.0, -3.0, 1.0]),
        ("123312", vec![0.0, 1.0, 0.0, -3.0, 2.0]),
        ("123321", vec![0.0, 1.0, 0.0, -2.0, 0.0, 1.0]),
        ("122313", vec![0.0, 1.0, 1.0, -3.0, 1.0]),
        ("112332", vec![0.0, 2.0, 0.0, -2.0]),
        ("123231", vec![0.0, 0.0, 2.0, -3.0, 0.0, 1.0]),
    ]
}

/// 0-based category labels from a digit string like `"121233"`.
pub fn labels(pattern: &str) -> Vec<usize> {
    pattern.bytes().map(|b| (b - b'1') as usize).collect()
}

/// Task order for a label pattern when category `c` holds tasks `c*k .. c*k + k`.
pub fn fill(pattern: &[usize], per_category: usize) -> Vec<usize> {
    let mut next = vec![0; pattern.iter().max().unwrap() + 1];
    pattern
        .iter()
        .map(|&c| {
            let task = c * per_category + next[c];
            next[c] += 1;
            task
        })
        .collect()
}
