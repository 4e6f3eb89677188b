mod common;

use cl_lab::task::permute_geometry;
use cl_lab::theory::{self, Sign};
use cl_lab::{OverparamRatio, SystemParams, TaskGeometry};
use common::{geometry_of, oracle_metrics, random_vectors, rel_err, two_task_oracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn geometry(seed: u64, tasks: usize, dim: usize) -> TaskGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    geometry_of(&random_vectors(&mut rng, tasks, dim, 0.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_task_forms_agree(seed in any::<u64>(), n in 1usize..80, extra in 2usize..400, sigma in 0.0..1.5f64) {
        let p = n + extra;
        let g = geometry(seed, 2, 7);
        let params = SystemParams::new(n, p, sigma, 2).unwrap();
        let (n1, n2, d) = (g.norm_sq(0), g.norm_sq(1), g.dist_sq(0, 1));
        let (f, gen) = two_task_oracle(n, p, sigma, n1, n2, d);
        prop_assert!(rel_err(theory::expected_forgetting(&g, &params).unwrap(), f) <= 1e-12);
        prop_assert!(rel_err(theory::expected_generalization(&g, &params).unwrap(), gen) <= 1e-12);
        prop_assert!(rel_err(theory::two_task_forgetting(&params, n1, n2, d).unwrap(), f) <= 1e-12);
        prop_assert!(rel_err(theory::two_task_generalization(&params, n1, n2, d).unwrap(), gen) <= 1e-12);
    }

    #[test]
    fn closed_form_matches_gap_oracle(seed in any::<u64>(), t in 2usize..10, n in 1usize..60, extra in 2usize..300, sigma in 0.0..1.0f64) {
        let p = n + extra;
        let g = geometry(seed, t, 9);
        let params = SystemParams::new(n, p, sigma, t).unwrap();
        let (f, gen) = oracle_metrics(&g, n, p, sigma);
        prop_assert!(rel_err(theory::expected_forgetting(&g, &params).unwrap(), f.unwrap()) <= 1e-10);
        prop_assert!(rel_err(theory::expected_generalization(&g, &params).unwrap(), gen) <= 1e-10);
    }

    #[test]
    fn underparameterized_matches_gap_oracle(seed in any::<u64>(), t in 2usize..8, p in 1usize..40, extra in 2usize..100, sigma in 0.0..1.0f64) {
        let n = p + extra;
        let g = geometry(seed, t, 6);
        let params = SystemParams::new(n, p, sigma, t).unwrap();
        let (f, gen) = oracle_metrics(&g, n, p, sigma);
        let m = theory::expected_metrics(&g, &params).unwrap();
        prop_assert!(rel_err(m.forgetting.unwrap(), f.unwrap()) <= 1e-10);
        prop_assert!(rel_err(m.generalization, gen) <= 1e-10);
    }

    #[test]
    fn gap_step_matches_direct_error(seed in any::<u64>(), t in 2usize..9, n in 1usize..50, extra in 2usize..200, sigma in 0.0..1.0f64) {
        let p = n + extra;
        let g = geometry(seed, t, 5);
        let params = SystemParams::new(n, p, sigma, t).unwrap();
        for task in 0..t {
            let mut gap = g.norm_sq(task);
            for learned in 1..=t {
                gap = theory::gap_evolution_step(gap, g.dist_sq(learned - 1, task), &params).unwrap();
                let direct = theory::expected_task_error(&g, &params, learned, task).unwrap();
                prop_assert!(rel_err(gap, direct) <= 1e-10);
            }
        }
    }

    #[test]
    fn forgetting_step_matches_closed_form(seed in any::<u64>(), t in 3usize..9, n in 1usize..50, extra in 2usize..200, sigma in 0.0..1.0f64) {
        let p = n + extra;
        let g = geometry(seed, t, 5);
        let params = SystemParams::new(n, p, sigma, t).unwrap();
        let at = |k: usize| {
            let pk = SystemParams::new(n, p, sigma, k).unwrap();
            theory::expected_forgetting(&g.prefix(k).unwrap(), &pk).unwrap()
        };
        let mut f = at(2);
        for learned in 2..t {
            let own: Vec<f64> = (0..learned)
                .map(|i| theory::expected_task_error(&g, &params, i + 1, i).unwrap())
                .collect();
            f = theory::forgetting_recursion_step(f, learned, &g, &own, &params).unwrap();
            prop_assert!(rel_err(f, at(learned + 1)) <= 1e-10);
        }
    }

    #[test]
    fn affine_in_noise_variance(seed in any::<u64>(), t in 2usize..8, n in 1usize..40, extra in 2usize..100, s in 0.0..2.0f64) {
        let p = n + extra;
        let g = geometry(seed, t, 5);
        let metrics = |sigma: f64| theory::expected_metrics(&g, &SystemParams::new(n, p, sigma, t).unwrap()).unwrap();
        let (m0, m1, ms) = (metrics(0.0), metrics(1.0), metrics(s));
        let lerp = |a: f64, b: f64| a + s * s * (b - a);
        let f = lerp(m0.forgetting.unwrap(), m1.forgetting.unwrap());
        prop_assert!((ms.forgetting.unwrap() - f).abs() <= 1e-10 * f.abs().max(1.0));
        let gen = lerp(m0.generalization, m1.generalization);
        prop_assert!((ms.generalization - gen).abs() <= 1e-10 * gen.abs().max(1.0));
    }

    #[test]
    fn reversing_a_palindrome_changes_nothing(seed in any::<u64>(), n in 1usize..40, extra in 2usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vectors(&mut rng, 3, 4, 0.5);
        let g = geometry_of(&[v[0].clone(), v[1].clone(), v[2].clone(), v[1].clone(), v[0].clone()]);
        let reversed = permute_geometry(&g, &[4, 3, 2, 1, 0]).unwrap();
        let params = SystemParams::new(n, n + extra, 0.2, 5).unwrap();
        let a = theory::expected_metrics(&g, &params).unwrap();
        let b = theory::expected_metrics(&reversed, &params).unwrap();
        prop_assert!(rel_err(a.generalization, b.generalization) <= 1e-12);
        prop_assert!(rel_err(a.forgetting.unwrap(), b.forgetting.unwrap()) <= 1e-12);
    }
}

#[test]
fn coefficient_matches_one_based_form() {
    for (n, p) in [(10usize, 100usize), (40, 100), (90, 100), (3, 7)] {
        let ratio = OverparamRatio::new(n, p).unwrap();
        let r = ratio.value();
        let t = 7;
        for i in 1..t {
            for j in (i + 1)..=t {
                let expected = (1.0 - r) * (r.powi((t - i) as i32) - r.powi((j - i) as i32) + r.powi((t - j) as i32));
                let c = theory::coefficient_c(i - 1, j - 1, t, ratio).unwrap();
                assert!((c - expected).abs() <= 1e-15, "i = {i}, j = {j}");
            }
        }
    }
    assert!(theory::coefficient_c(2, 2, 4, OverparamRatio::from_value(0.5).unwrap()).is_err());
    assert!(theory::coefficient_c(1, 4, 4, OverparamRatio::from_value(0.5).unwrap()).is_err());
}

#[test]
fn forgetting_vanishes_for_huge_p() {
    for (d, sigma) in [(0.0, 0.1), (2.0, 0.1), (0.0, 0.5), (2.0, 0.5)] {
        let g = TaskGeometry::from_parts(
            vec![1.0; 8],
            (0..8).map(|i| (0..8).map(|j| if i == j { 0.0 } else { d }).collect()).collect(),
        )
        .unwrap();
        let params = SystemParams::new(50, 1_000_000_000, sigma, 8).unwrap();
        assert!(theory::expected_forgetting(&g, &params).unwrap().abs() <= 1e-6);
    }
}

#[test]
fn generalization_tends_to_average_norm_for_huge_p() {
    let g = geometry(3, 5, 6);
    let params = SystemParams::new(20, 1_000_000_000, 0.3, 5).unwrap();
    let mean_norm = g.norms_sq().iter().sum::<f64>() / 5.0;
    let gen = theory::expected_generalization(&g, &params).unwrap();
    assert!(rel_err(gen, mean_norm) < 1e-5);
}

#[test]
fn near_square_band_is_rejected() {
    for p in [49usize, 50, 51] {
        assert!(SystemParams::new(50, p, 0.1, 2).is_err(), "p = {p}");
    }
    assert!(SystemParams::new(50, 52, 0.1, 2).is_ok());
    assert!(SystemParams::new(50, 48, 0.1, 2).is_ok());
}

#[test]
fn g2_derivative_changes_sign_once() {
    let probe = theory::g2_derivative_sign_probe(50, 0.1, 1.0, 52..=2000).unwrap();
    assert_eq!(probe.flips.len(), 1, "{:?}", probe.flips);
    let flip = probe.flips[0];
    assert_eq!((flip.from, flip.to), (Sign::Negative, Sign::Positive));
    assert_eq!(flip.p, 62);
}

#[test]
fn g2_derivative_matches_finite_difference() {
    let (n, sigma, ip) = (30usize, 0.4, 0.7);
    let g = TaskGeometry::from_parts(vec![1.0, 1.0], vec![vec![0.0, 2.0 - 2.0 * ip], vec![2.0 - 2.0 * ip, 0.0]]).unwrap();
    let gen = |p: f64| {
        let params = SystemParams::new(n, p as usize, sigma, 2).unwrap();
        theory::expected_generalization(&g, &params).unwrap()
    };
    for p in [40usize, 80, 200, 600] {
        let slope = (gen(p as f64 + 1.0) - gen(p as f64 - 1.0)) / 2.0;
        let exact = theory::g2_derivative(n, p, sigma, ip).unwrap();
        assert!((slope - exact).abs() <= 0.05 * exact.abs() + 1e-9, "p = {p}: {slope} vs {exact}");
    }
}
