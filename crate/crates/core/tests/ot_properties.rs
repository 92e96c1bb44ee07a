//! Property tests and oracle cross-checks for the transport solvers.
//! The brute-force permutation oracle here is written from scratch against
//! the definition, independent of both exact solvers.

use jwdm_core::linalg::Matrix;
use jwdm_core::ot::{
    cost_matrix, decomposition_report, exact_wasserstein, sinkhorn, DiscreteDistribution,
    JointPairDistribution, Metric,
};
use proptest::prelude::*;

/// Minimum over all permutation couplings of a uniform n=n instance,
/// straight from the definition.
fn permutation_minimum(cost: &Matrix) -> f64 {
    fn rec(cost: &Matrix, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.rows() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.cols() {
            if !used[j] {
                used[j] = true;
                rec(cost, row + 1, used, acc + cost.get(row, j), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.cols()], 0.0, &mut best);
    best / cost.rows() as f64
}

fn uniform_dist(points: Vec<Vec<f64>>) -> DiscreteDistribution {
    DiscreteDistribution::uniform(Matrix::from_rows(&points).unwrap()).unwrap()
}

fn weighted_dist(points: Vec<Vec<f64>>, raw: Vec<f64>) -> DiscreteDistribution {
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let partial: f64 = w[..w.len() - 1].iter().sum();
    let last = w.len() - 1;
    w[last] = 1.0 - partial;
    DiscreteDistribution::new(Matrix::from_rows(&points).unwrap(), w).unwrap()
}

fn points_strategy(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-5.0..5.0f64, d..=d),
        n..=n,
    )
}

fn metric_strategy() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::L1), Just(Metric::L2), Just(Metric::SqL2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_matches_permutation_oracle(
        n in 1usize..=6,
        seed_points in points_strategy(12, 2),
        metric in metric_strategy(),
    ) {
        let a = uniform_dist(seed_points[..n].to_vec());
        let b = uniform_dist(seed_points[6..6 + n].to_vec());
        let c = cost_matrix(a.points(), b.points(), metric).unwrap();
        let (value, _) = exact_wasserstein(&a, &b, &c).unwrap();
        let oracle = permutation_minimum(c.entries());
        prop_assert!((value - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
            "lp {} vs oracle {}", value, oracle);
    }

    #[test]
    fn transport_is_symmetric(
        n in 1usize..=5,
        m in 1usize..=5,
        pts in points_strategy(10, 2),
        wa in prop::collection::vec(0.05..1.0f64, 5),
        wb in prop::collection::vec(0.05..1.0f64, 5),
        metric in metric_strategy(),
    ) {
        let a = weighted_dist(pts[..n].to_vec(), wa[..n].to_vec());
        let b = weighted_dist(pts[5..5 + m].to_vec(), wb[..m].to_vec());
        let c_ab = cost_matrix(a.points(), b.points(), metric).unwrap();
        let c_ba = cost_matrix(b.points(), a.points(), metric).unwrap();
        let (v_ab, _) = exact_wasserstein(&a, &b, &c_ab).unwrap();
        let (v_ba, _) = exact_wasserstein(&b, &a, &c_ba).unwrap();
        prop_assert!((v_ab - v_ba).abs() < 1e-9, "{} vs {}", v_ab, v_ba);
    }

    #[test]
    fn self_transport_is_zero(
        n in 1usize..=6,
        pts in points_strategy(6, 2),
        wa in prop::collection::vec(0.05..1.0f64, 6),
        metric in metric_strategy(),
    ) {
        let a = weighted_dist(pts[..n].to_vec(), wa[..n].to_vec());
        let c = cost_matrix(a.points(), a.points(), metric).unwrap();
        let (value, _) = exact_wasserstein(&a, &a, &c).unwrap();
        prop_assert!(value.abs() < 1e-12);
    }

    #[test]
    fn couplings_satisfy_marginals(
        n in 2usize..=5,
        m in 2usize..=5,
        pts in points_strategy(10, 2),
        wa in prop::collection::vec(0.05..1.0f64, 5),
        wb in prop::collection::vec(0.05..1.0f64, 5),
    ) {
        let a = weighted_dist(pts[..n].to_vec(), wa[..n].to_vec());
        let b = weighted_dist(pts[5..5 + m].to_vec(), wb[..m].to_vec());
        let c = cost_matrix(a.points(), b.points(), Metric::SqL2).unwrap();
        let (_, coupling) = exact_wasserstein(&a, &b, &c).unwrap();
        prop_assert!(coupling.marginal_violation(a.weights(), b.weights()) < 1e-9);
        prop_assert!(coupling.plan().data().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn decomposition_gap_is_nonnegative(
        n in 1usize..=5,
        m in 1usize..=5,
        xs in points_strategy(10, 2),
        ys in points_strategy(10, 1),
        wa in prop::collection::vec(0.05..1.0f64, 5),
        wb in prop::collection::vec(0.05..1.0f64, 5),
    ) {
        let total_a: f64 = wa[..n].iter().sum();
        let mut weights_a: Vec<f64> = wa[..n].iter().map(|v| v / total_a).collect();
        let pa_sum: f64 = weights_a[..n - 1].iter().sum();
        weights_a[n - 1] = 1.0 - pa_sum;
        let total_b: f64 = wb[..m].iter().sum();
        let mut weights_b: Vec<f64> = wb[..m].iter().map(|v| v / total_b).collect();
        let pb_sum: f64 = weights_b[..m - 1].iter().sum();
        weights_b[m - 1] = 1.0 - pb_sum;
        let pa = JointPairDistribution::new(
            Matrix::from_rows(&xs[..n]).unwrap(),
            Matrix::from_rows(&ys[..n]).unwrap(),
            weights_a,
        ).unwrap();
        let pb = JointPairDistribution::new(
            Matrix::from_rows(&xs[5..5 + m]).unwrap(),
            Matrix::from_rows(&ys[5..5 + m]).unwrap(),
            weights_b,
        ).unwrap();
        let report = decomposition_report(&pa, &pb, Metric::L1, Metric::SqL2).unwrap();
        prop_assert!(report.gap >= -1e-9, "gap {}", report.gap);
    }

    #[test]
    fn product_joints_have_zero_gap(
        na in 1usize..=4,
        nb in 1usize..=4,
        xs in points_strategy(8, 2),
        ys in points_strategy(8, 2),
        wa in prop::collection::vec(0.05..1.0f64, 8),
        metric in metric_strategy(),
    ) {
        let ax = weighted_dist(xs[..na].to_vec(), wa[..na].to_vec());
        let ay = weighted_dist(ys[..nb].to_vec(), wa[4..4 + nb].to_vec());
        let bx = uniform_dist(xs[4..4 + na].to_vec());
        let by = uniform_dist(ys[4..4 + nb].to_vec());
        let pa = JointPairDistribution::product(&ax, &ay).unwrap();
        let pb = JointPairDistribution::product(&bx, &by).unwrap();
        let report = decomposition_report(&pa, &pb, metric, Metric::L1).unwrap();
        prop_assert!(report.independent);
        prop_assert!(report.gap.abs() <= 1e-9, "gap {}", report.gap);
    }
}

#[test]
fn sinkhorn_value_descends_toward_lp_as_epsilon_shrinks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let n = rng.random_range(3..=6usize);
        let pts_a: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let pts_b: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let a = uniform_dist(pts_a);
        let b = uniform_dist(pts_b);
        let c = cost_matrix(a.points(), b.points(), Metric::SqL2).unwrap();
        let (lp, _) = exact_wasserstein(&a, &b, &c).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            // Marginal residue decays like 1/iters near degenerate optima,
            // so the tolerance stays at 1e-6; that perturbs the value by at
            // most ~1e-6 * max(C), well under the gaps being compared.
            let (value, _) = sinkhorn(&a, &b, &c, eps, 500_000, 1e-6).unwrap();
            let diff = (value - lp).abs();
            assert!(
                diff <= prev + 1e-5,
                "diff grew: {prev} -> {diff} at eps {eps}"
            );
            prev = diff;
        }
        assert!(prev < 5e-2 * c.max_entry(), "final gap {prev}");
    }
}

#[test]
fn hungarian_and_simplex_agree_on_random_uniform_instances() {
    use jwdm_core::ot::{hungarian, network_simplex};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let n = rng.random_range(2..=10usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..4.0)).collect())
            .collect();
        let cost = Matrix::from_rows(&rows).unwrap();
        let (_, assignment_cost) = hungarian::solve(&cost).unwrap();
        let w = vec![1.0 / n as f64; n];
        let plan = network_simplex::solve(&w, &w, &cost).unwrap();
        let lp: f64 = plan
            .data()
            .iter()
            .zip(cost.data())
            .map(|(&p, &c)| p * c)
            .sum();
        assert!(
            (lp - assignment_cost / n as f64).abs() < 1e-9,
            "simplex {lp} vs hungarian {}",
            assignment_cost / n as f64
        );
    }
}
