use elimboost::experiments::{ms13_constant_pool, ms13_dataset};
use elimboost::learnability::{iterative_weak_learnability, RHO_TOL};
use elimboost::{
    game_value, score, weak_learnability, Distribution, Execution, FeatureMatrix, Label, LabelingMode, PoolSpec,
    StumpPool, Verdict,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `min_d max_h score` over a grid of the simplex with step `1/steps`.
fn grid_value(realizations: &[Vec<Label>], y: &[Label], steps: usize) -> f64 {
    let n = y.len();
    let mut best = f64::INFINITY;
    let mut visit = |w: &[f64]| {
        let d = Distribution::new(w.to_vec()).unwrap();
        let v = realizations
            .iter()
            .map(|h| score(h, y, &d).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        best = best.min(v);
    };
    let s = steps as f64;
    match n {
        1 => visit(&[1.0]),
        2 => {
            for i in 0..=steps {
                let a = i as f64 / s;
                visit(&[a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let a = i as f64 / s;
                    let b = j as f64 / s;
                    visit(&[a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<Label>>, Vec<Label>) {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(2..=4);
    let pool_size = rng.gen_range(1..=6);
    let y = (0..n).map(|_| rng.gen_range(0..m)).collect();
    let pool = (0..pool_size)
        .map(|_| (0..n).map(|_| rng.gen_range(0..m)).collect())
        .collect();
    (pool, y)
}

#[test]
fn solver_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..60 {
        let (pool, y) = random_instance(&mut rng);
        let g = game_value(&pool, &y).unwrap();
        let oracle = grid_value(&pool, &y, 1000);
        assert!((g.value - oracle).abs() <= 2e-3, "case {case}: {} vs {oracle}", g.value);
        assert!(g.value <= oracle + 1e-9, "case {case}: solver above a feasible grid point");
    }
}

#[test]
fn duality_gap_is_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(2..=5);
        let y: Vec<Label> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        let pool: Vec<Vec<Label>> = (0..rng.gen_range(1..=20))
            .map(|_| (0..n).map(|_| rng.gen_range(0..m)).collect())
            .collect();
        let g = game_value(&pool, &y).unwrap();
        assert!((g.value - g.dual_value).abs() <= 1e-8);
        let d = Distribution::new(g.witness_d.clone()).unwrap();
        let best = pool.iter().map(|h| score(h, &y, &d).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert!((best - g.value).abs() <= 1e-9);
    }
}

#[test]
fn value_is_invariant_under_relabeling_and_reordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(2..=4);
        let y: Vec<Label> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        let pool: Vec<Vec<Label>> = (0..rng.gen_range(1..=10))
            .map(|_| (0..n).map(|_| rng.gen_range(0..m)).collect())
            .collect();
        let base = game_value(&pool, &y).unwrap().value;

        let mut pi: Vec<Label> = (0..m).collect();
        pi.shuffle(&mut rng);
        let relabeled: Vec<Vec<Label>> = pool.iter().map(|h| h.iter().map(|&a| pi[a]).collect()).collect();
        let y_relabeled: Vec<Label> = y.iter().map(|&a| pi[a]).collect();
        assert!((game_value(&relabeled, &y_relabeled).unwrap().value - base).abs() < 1e-9);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let reordered: Vec<Vec<Label>> = pool.iter().map(|h| order.iter().map(|&p| h[p]).collect()).collect();
        let y_reordered: Vec<Label> = order.iter().map(|&p| y[p]).collect();
        let mut rows = reordered.clone();
        rows.reverse();
        assert!((game_value(&rows, &y_reordered).unwrap().value - base).abs() < 1e-9);
    }
}

#[test]
fn ms13_constants() {
    let data = ms13_dataset();
    let pool = StumpPool::build(data.features(), 3, &ms13_constant_pool()).unwrap();
    let full = weak_learnability(&pool.realizations(), data.labels(), 3, RHO_TOL).unwrap();
    assert!(full.value.abs() < 1e-12);
    assert!((full.margin - 1.0 / 3.0).abs() < 1e-8);
    assert_eq!(full.verdict, Verdict::Pass);

    let pair = StumpPool::build(data.features(), 2, &ms13_constant_pool()).unwrap();
    let sub = weak_learnability(&pair.realizations(), data.labels(), 2, RHO_TOL).unwrap();
    assert!(sub.margin.abs() < 1e-12);
    assert_eq!(sub.verdict, Verdict::Fail);
}

#[test]
fn exhaustive_check_on_points_in_general_position() {
    let features = FeatureMatrix::from_rows(&[vec![0.0, 0.3], vec![0.6, 1.0], vec![1.0, 0.0]]).unwrap();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let report =
            iterative_weak_learnability(&features, 3, &PoolSpec::Axis, &LabelingMode::Exhaustive, RHO_TOL, exec)
                .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        let checked: u64 = report.sizes.iter().map(|s| s.labelings_checked).sum();
        assert_eq!(checked, 8 + 27);
    }
}
