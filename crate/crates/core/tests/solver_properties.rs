//! Algebraic properties of the prox operator and the group Lasso solver.

use blocksparse::dictionary::GroupPartition;
use blocksparse::linalg::Matrix;
use blocksparse::rng::SplitMix64;
use blocksparse::solver::{block_soft_threshold, solve_group_lasso, SolverOptions};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..8)
}

proptest! {
    #[test]
    fn prox_is_firmly_nonexpansive(u in vec_strategy(), seed in any::<u64>(), lambda in 0.0f64..5.0) {
        let mut rng = SplitMix64::new(seed);
        let v: Vec<f64> = u.iter().map(|x| x + rng.gaussian()).collect();
        let (pu, pv) = (block_soft_threshold(&u, lambda), block_soft_threshold(&v, lambda));
        let dp: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        // ‖P u − P v‖² ≤ ⟨P u − P v, u − v⟩
        let lhs: f64 = dp.iter().map(|x| x * x).sum();
        let rhs: f64 = dp.iter().zip(&du).map(|(a, b)| a * b).sum();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn prox_is_positively_homogeneous(v in vec_strategy(), lambda in 0.0f64..5.0, c in 0.1f64..10.0) {
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let a = block_soft_threshold(&scaled, c * lambda);
        let b = block_soft_threshold(&v, lambda);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - c * y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn prox_output_is_a_shrunken_copy(v in vec_strategy(), lambda in 0.0f64..5.0) {
        let p = block_soft_threshold(&v, lambda);
        let expected = (norm(&v) - lambda).max(0.0);
        prop_assert!((norm(&p) - expected).abs() < 1e-12);
        if norm(&p) > 0.0 {
            let cos = p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / (norm(&p) * norm(&v));
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn solver_is_homogeneous_in_data_and_weights() {
    let mut rng = SplitMix64::new(7);
    let (n, p) = (20, 30);
    let mut x = Matrix::from_fn(n, p, |_, _| rng.gaussian());
    for j in 0..p {
        let c = norm(&x.column(j));
        for i in 0..n {
            x.set(i, j, x.get(i, j) / c);
        }
    }
    let part = GroupPartition::contiguous(&[3; 10]).unwrap();
    let y: Vec<f64> = (0..n).map(|_| 2.0 * rng.gaussian()).collect();
    let lambdas = vec![0.8; 10];
    let opts = SolverOptions { kkt_tolerance: 1e-12, max_iterations: 100_000, ..Default::default() };
    let base = solve_group_lasso(&x, &y, &part, &lambdas, &opts).unwrap();
    for c in [0.5, 3.0] {
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let ls: Vec<f64> = lambdas.iter().map(|l| c * l).collect();
        let opts = SolverOptions { kkt_tolerance: 1e-12 * c, ..opts.clone() };
        let scaled = solve_group_lasso(&x, &ys, &part, &ls, &opts).unwrap();
        assert!(scaled.converged);
        for (a, b) in scaled.estimate.coefficients().iter().zip(base.estimate.coefficients()) {
            assert!((a - c * b).abs() < 1e-8, "{a} vs {}", c * b);
        }
        assert_eq!(scaled.estimate.support(), base.estimate.support());
    }
}
