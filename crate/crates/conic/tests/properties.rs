mod common;

use common::Instance;
use conic::{solve, SolveStatus, SolverSettings};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn positive_cost_scaling_keeps_the_minimizer(seed in 0u64..10_000, factor in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = Instance::random(&mut rng, 15);
        let p = inst.to_program();
        let settings = SolverSettings::default();
        let a = solve(&p, &settings).unwrap();
        let b = solve(&p.with_objective_scaled(factor), &settings).unwrap();
        prop_assert_eq!(a.status, SolveStatus::Optimal);
        prop_assert_eq!(b.status, SolveStatus::Optimal);
        prop_assert!((b.objective - factor * a.objective).abs() <= 1e-6 * (factor * a.objective).abs().max(factor));
        // The objective is ρ-strongly convex in x, so an objective error of
        // ε moves the minimizer by at most √(ε/ρ).
        let eps = settings.tol * a.objective.abs().max(1.0);
        let radius = 2.0 * (eps / inst.rho).sqrt();
        let dist: f64 = (0..inst.n).map(|j| (a.x[j] - b.x[j]).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dist <= 2.0 * radius, "moved {} > {}", dist, 2.0 * radius);
    }

    #[test]
    fn optimal_points_are_feasible_and_dual_bounds_hold(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = Instance::random(&mut rng, 20);
        let p = inst.to_program();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!(p.max_violation(&sol.x) <= 1e-7, "violation {}", p.max_violation(&sol.x));
        prop_assert!(sol.dual_residual <= 1e-6);
        // Weak duality up to the stopping tolerance.
        prop_assert!(sol.dual_objective <= sol.objective + 1e-7 * sol.objective.abs().max(1.0));
        // Dual cone multipliers lie in their cones.
        let mut row = 0;
        for cone in p.cones() {
            let z = &sol.z[row..row + cone.rows.len()];
            match cone.kind {
                conic::ConeKind::NonNegative => prop_assert!(z[0] >= -1e-9),
                conic::ConeKind::SecondOrder => {
                    let tail: f64 = z[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    prop_assert!(tail <= z[0] + 1e-8);
                }
            }
            row += cone.rows.len();
        }
    }
}
