mod common;

use cl_lab::ordering::{
    brute_force_optimal_order, forgetting_vs_generalization_order_divergence, next_permutation,
    one_vs_many_optimal_position_at_ratio, search_orders, task_classes, CategoryScenario, DivergenceScenario,
    Objective, OrderScorer,
};
use cl_lab::{OverparamRatio, SystemParams, TaskGeometry};
use common::{fill, geometry_of, labels, poly, random_vectors, three_category_table, two_category_table};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_orders(t: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..t).collect();
    let mut out = vec![order.clone()];
    while next_permutation(&mut order) {
        out.push(order.clone());
    }
    out
}

fn check_table(table: &[(&str, Vec<f64>)], categories: usize, per: usize) {
    let g = CategoryScenario::balanced(categories, per).geometry().unwrap();
    for r in [0.05, 0.3, 0.5, 0.77, 0.95] {
        let scorer = OrderScorer::at_ratio(&g, OverparamRatio::from_value(r).unwrap());
        let reference = scorer.score(&fill(&labels(table[0].0), per));
        for (pattern, coeffs) in table {
            let s = scorer.score(&fill(&labels(pattern), per));
            let raw = s.pairwise_term - reference.pairwise_term;
            assert!((raw - poly(coeffs, r)).abs() < 1e-12, "{pattern} at r = {r}: {raw}");
            // with unit cross distance the full difference carries the factor (1 - r) / (T - 1)
            let full = s.forgetting - reference.forgetting;
            let scale = (1.0 - r) / (categories * per - 1) as f64;
            assert!((full - scale * poly(coeffs, r)).abs() < 1e-12, "{pattern} at r = {r}");
            if *pattern != table[0].0 {
                assert!(full > 0.0, "{pattern} at r = {r}");
            }
        }
    }
}

#[test]
fn two_category_table_rows() {
    check_table(&two_category_table(), 2, 3);
}

#[test]
fn three_category_table_rows() {
    check_table(&three_category_table(), 3, 2);
}

#[test]
fn search_agrees_with_plain_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..12 {
        let t = rng.random_range(3..7);
        let n = rng.random_range(2..40);
        let p = n + rng.random_range(2..80);
        let sigma = rng.random_range(0.0..0.5);
        let g = geometry_of(&random_vectors(&mut rng, t, 5, 0.7));
        let params = SystemParams::new(n, p, sigma, t).unwrap();
        let scorer = OrderScorer::new(&g, &params).unwrap();
        for objective in [Objective::Forgetting, Objective::Generalization] {
            let search = search_orders(&g, &scorer, objective).unwrap();
            let best = all_orders(t)
                .iter()
                .map(|o| objective.value(&scorer.score(o)))
                .fold(f64::INFINITY, f64::min);
            assert!((search.best_value() - best).abs() <= 1e-12 * best.abs().max(1.0));
            let total: u128 = search.ranking.iter().map(|e| e.multiplicity).sum();
            assert_eq!(total, (1..=t as u128).product::<u128>());
        }
    }
}

#[test]
fn dedup_counts_match_multinomials() {
    for (sizes, expected) in [(vec![3, 3], 10), (vec![2, 2, 2], 15), (vec![1, 5], 6), (vec![2, 3], 10)] {
        let scenario = CategoryScenario::new(sizes.clone());
        let g = scenario.geometry().unwrap();
        let classes = task_classes(&g);
        let search = search_orders(
            &g,
            &OrderScorer::at_ratio(&g, OverparamRatio::from_value(0.4).unwrap()),
            Objective::Forgetting,
        )
        .unwrap();
        // equal-size categories are interchangeable, so their swaps collapse too
        assert_eq!(search.effective_orders, expected, "{sizes:?}");
        assert_eq!(classes.class_count(), sizes.len());
    }
}

#[test]
fn equal_norm_minimizers_follow_the_pairwise_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let t = rng.random_range(3..7);
        let vectors: Vec<DVector<f64>> = random_vectors(&mut rng, t, 6, 1.0)
            .into_iter()
            .map(|v| v.normalize())
            .collect();
        let g = geometry_of(&vectors);
        let r = rng.random_range(0.05..0.95);
        let scorer = OrderScorer::at_ratio(&g, OverparamRatio::from_value(r).unwrap());
        let orders = all_orders(t);
        let argmin = |key: &dyn Fn(&[usize]) -> f64| {
            orders
                .iter()
                .min_by(|a, b| key(a).total_cmp(&key(b)))
                .cloned()
                .unwrap()
        };
        let by_full = argmin(&|o| scorer.score(o).forgetting);
        let by_part = argmin(&|o| scorer.score(o).order_dependent_forgetting);
        let full = scorer.score(&by_part).forgetting;
        assert!((full - scorer.score(&by_full).forgetting).abs() < 1e-12);
    }
}

#[test]
fn brute_force_prefers_alternation_for_four_tasks() {
    let g = CategoryScenario::balanced(2, 2).geometry().unwrap();
    for n in [5, 25, 50, 75, 95] {
        let params = SystemParams::new(n, 100, 0.1, 4).unwrap();
        let search = brute_force_optimal_order(&g, &params, Objective::Forgetting).unwrap();
        assert_eq!(search.minimizer_patterns(), vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]]);
        assert_eq!(search.canonical().order(), &[0, 2, 1, 3]);
    }
}

#[test]
fn special_task_position_grows_with_sample_fraction() {
    for t in [5usize, 6, 7, 8, 9, 10] {
        let mut last = 0;
        for k in 1..20 {
            let r = 1.0 - k as f64 / 20.0;
            let pos = one_vs_many_optimal_position_at_ratio(t, OverparamRatio::from_value(r).unwrap()).unwrap();
            assert!(pos.within_bounds(), "T = {t}, r = {r}: {}", pos.i_star);
            assert!(pos.i_star >= last);
            assert!((pos.continuous_position - pos.i_star as f64).abs() <= 1.0, "T = {t}, r = {r}");
            last = pos.i_star;
        }
    }
}

#[test]
fn objectives_disagree_on_the_special_task() {
    let params = SystemParams::new(40, 100, 0.0, 6).unwrap();
    let report = forgetting_vs_generalization_order_divergence(
        &DivergenceScenario::OneVsMany {
            tasks: 6,
            cross_distance: 1.0,
        },
        &params,
    )
    .unwrap();
    assert!(!report.same_minimizers);
    assert_eq!(report.special_positions_generalization, vec![1]);
    assert!(report.special_positions_forgetting.iter().all(|&p| p >= 2));
}

#[test]
fn balanced_categories_leave_generalization_flat() {
    let params = SystemParams::new(30, 100, 0.0, 4).unwrap();
    let report = forgetting_vs_generalization_order_divergence(
        &DivergenceScenario::Categories(CategoryScenario::balanced(2, 2)),
        &params,
    )
    .unwrap();
    assert!(report.special_positions_forgetting.is_empty());
    // every task has the same total distance to the others
    assert_eq!(report.generalization.minimizers.len(), report.generalization.effective_orders);
    assert_eq!(report.forgetting.minimizers.len(), 1);
}

#[test]
fn geometry_with_identical_tasks_is_grouped() {
    let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let b = DVector::from_vec(vec![0.0, 2.0, 0.0]);
    let g: TaskGeometry = geometry_of(&[a.clone(), b.clone(), a.clone(), b]);
    let classes = task_classes(&g);
    assert_eq!(classes.labels, vec![0, 1, 0, 1]);
    // different norms keep the two classes apart
    assert_eq!(classes.groups.len(), 2);
}

#[test]
fn next_permutation_visits_multisets_once() {
    let mut v = vec![0, 0, 1, 1, 2];
    let mut seen = vec![v.clone()];
    while next_permutation(&mut v) {
        seen.push(v.clone());
    }
    assert_eq!(seen.len(), 30);
    let mut sorted = seen.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, seen);
}

#[test]
fn too_many_tasks_is_refused() {
    let g = CategoryScenario::balanced(1, 11).geometry().unwrap();
    let params = SystemParams::new(10, 100, 0.0, 11).unwrap();
    assert!(brute_force_optimal_order(&g, &params, Objective::Forgetting).is_err());
}
