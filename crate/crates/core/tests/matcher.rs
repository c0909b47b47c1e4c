use conic::{solve, SolveStatus, SolverSettings};
use elastic_match::elasticity::{affine_field, assemble_stiffness, boundary_forces, schur_condense, total_force_norm, LameParams, SchurOperator};
use elastic_match::geometry::{Point, Polygon, PolygonSet};
use elastic_match::matcher::{
    add_distortion_constraints, build_subproblem, closest_point, conformal_distortion, frames, icp_like_match,
    linearized_fidelity, match_shapes, run, Fidelity, Linearization, MatchConfig, MatchProblem, Method, Termination,
};
use elastic_match::meshing::{order_nodes, TriMesh};
use elastic_match::shapes;
use elastic_match::symdiff::{area_at, DeformedBoundary};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(name: &str) -> MatchProblem {
    let (s, t) = shapes::pair(name).unwrap();
    MatchProblem::new(&s, &PolygonSet::from_polygon(t), LameParams::default()).unwrap()
}

fn boundary_field(p: &MatchProblem, m: Matrix2<f64>) -> DVector<f64> {
    affine_field(p.source.vertices(), m, Vector2::zeros())
}

#[test]
fn jacobian_maps_reproduce_affine_fields() {
    let p = problem("ellipse-rectangle");
    let zero = DVector::zeros(2 * p.num_boundary());
    let rot = Matrix2::new(0.0, -0.01, 0.01, 0.0);
    for m in &p.jacobians {
        assert_eq!(m.eval(&zero), Matrix2::identity());
    }
    for (field, expected) in [
        (Matrix2::identity() * 0.1, Matrix2::identity() * 1.1),
        (rot, Matrix2::identity() + rot),
    ] {
        let u = boundary_field(&p, field);
        for m in &p.jacobians {
            assert!((m.eval(&u) - expected).abs().max() <= 1e-10);
        }
    }
}

#[test]
fn stretch_beyond_the_bound_is_infeasible() {
    // J = diag(2, 0.5) has (a, b, c, d) = (1.25, 0, 0.75, 0) and distortion 4.
    let p = problem("ellipse-rectangle");
    let target = boundary_field(&p, Matrix2::new(1.0, 0.0, 0.0, -0.5));
    let j = p.jacobians[0].eval(&target);
    assert!((conformal_distortion(&j).cd - 4.0).abs() < 1e-9);
    let status = |bound: f64| {
        let mut prog = conic::ConicProgram::new(0);
        let u = prog.add_variables(target.len());
        for (var, &v) in u.clone().zip(target.iter()) {
            prog.add_equality(vec![(var, 1.0)], v).unwrap();
        }
        add_distortion_constraints(&mut prog, u, &p.jacobians, bound, &vec![0.0; p.jacobians.len()]).unwrap();
        solve(&prog, &SolverSettings::default()).unwrap().status
    };
    assert_eq!(status(3.5), SolveStatus::Infeasible);
    assert_eq!(status(4.5), SolveStatus::Optimal);
}

#[test]
fn distortion_cone_follows_the_frame() {
    // A rotated mild stretch passes with the frame of its own rotation and
    // fails with a frame a quarter turn away.
    let p = problem("ellipse-rectangle");
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let r = Matrix2::new(c, -s, s, c);
    let field = boundary_field(&p, r * Matrix2::new(1.2, 0.0, 0.0, 1.0) - Matrix2::identity());
    let theta = frames(&p.jacobians, &field);
    assert!(theta.iter().all(|t| (t - 0.7).abs() < 1e-9));
    let feasible = |shift: f64| {
        let mut prog = conic::ConicProgram::new(0);
        let u = prog.add_variables(field.len());
        for (var, &v) in u.clone().zip(field.iter()) {
            prog.add_equality(vec![(var, 1.0)], v).unwrap();
        }
        let shifted: Vec<f64> = theta.iter().map(|t| t + shift).collect();
        add_distortion_constraints(&mut prog, u, &p.jacobians, 1.5, &shifted).unwrap();
        solve(&prog, &SolverSettings::default()).unwrap().status == SolveStatus::Optimal
    };
    assert!(feasible(0.0));
    assert!(!feasible(std::f64::consts::FRAC_PI_2));
}

#[test]
fn affine_model_is_anchored_at_u0() {
    let p = problem("articulated-star");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u0 = DVector::from_fn(2 * p.num_boundary(), |_, _| rng.gen_range(-0.003..0.003));
    let db = DeformedBoundary::new(p.source.clone(), u0.clone()).unwrap();
    let lin = linearized_fidelity(&db, &p.target, 1e-3).unwrap();
    assert_eq!(lin.eval(&u0), lin.f0);
    assert_eq!(lin.f0, area_at(&db, &p.target).unwrap());
    let same = PolygonSet::from_polygon(p.source.clone());
    let lin = linearized_fidelity(&DeformedBoundary::undeformed(p.source.clone()), &same, 1e-3).unwrap();
    assert_eq!(lin.f0, 0.0);
}

/// Unit square with its four corners as the only nodes.
fn square_operator() -> SchurOperator {
    let m = TriMesh::from_triangles(
        vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    schur_condense(&assemble_stiffness(&m, &order_nodes(&m), LameParams::new(1.0, 0.5).unwrap()).unwrap()).unwrap()
}

fn objective(s: &DMatrix<f64>, u: &DVector<f64>, u0: &DVector<f64>, lin: &Linearization, alpha: f64, beta: f64) -> f64 {
    let f = s * u;
    let forces: f64 = (0..u.len() / 2).map(|i| f[2 * i].hypot(f[2 * i + 1])).sum();
    forces + beta * (u - u0).norm_squared() + alpha * lin.eval(u).powi(2)
}

/// ADMM on `z_i = S_i u` with group soft-thresholding.
fn admm(s: &DMatrix<f64>, u0: &DVector<f64>, lin: &Linearization, alpha: f64, beta: f64) -> DVector<f64> {
    let n = u0.len();
    let rho = 1.0;
    let c = lin.f0 - lin.grad.dot(&lin.u0);
    let lhs = DMatrix::identity(n, n) * (2.0 * beta) + &lin.grad * lin.grad.transpose() * (2.0 * alpha) + s.transpose() * s * rho;
    let chol = lhs.cholesky().unwrap();
    let (mut z, mut w) = (DVector::zeros(n), DVector::zeros(n));
    let mut u = u0.clone();
    for _ in 0..50_000 {
        let rhs = u0 * (2.0 * beta) - &lin.grad * (2.0 * alpha * c) + s.transpose() * (&z - &w) * rho;
        u = chol.solve(&rhs);
        let su = s * &u;
        for i in 0..n / 2 {
            let v = Vector2::new(su[2 * i] + w[2 * i], su[2 * i + 1] + w[2 * i + 1]);
            let shrink = (1.0 - 1.0 / (rho * v.norm())).max(0.0);
            z[2 * i] = shrink * v.x;
            z[2 * i + 1] = shrink * v.y;
        }
        w += su - &z;
    }
    u
}

fn random_linearization(rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, Linearization) {
    let u0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.2..0.2));
    let lin = Linearization {
        f0: rng.gen_range(0.1..1.0),
        grad: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        u0: u0.clone(),
        warning: None,
    };
    (u0, lin)
}

fn solve_subproblem(s: &SchurOperator, u0: &DVector<f64>, lin: &Linearization, alpha: f64, beta: f64) -> (DVector<f64>, f64) {
    let (prog, layout) = build_subproblem(s, u0, Fidelity::Area(lin), alpha, beta).unwrap();
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    (DVector::from_column_slice(&sol.x[layout.u]), sol.objective)
}

#[test]
fn subproblem_matches_admm_oracle() {
    let s = square_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let (u0, lin) = random_linearization(&mut rng, 8);
        let (alpha, beta) = (rng.gen_range(0.5..5.0), rng.gen_range(0.2..2.0));
        let (u, obj) = solve_subproblem(&s, &u0, &lin, alpha, beta);
        let oracle = admm(s.matrix(), &u0, &lin, alpha, beta);
        assert!((&u - &oracle).amax() <= 1e-4, "{u} vs {oracle}");
        let reference = objective(s.matrix(), &oracle, &u0, &lin, alpha, beta);
        assert!((obj - reference).abs() <= 1e-4 * reference.max(1.0));
        assert!((objective(s.matrix(), &u, &u0, &lin, alpha, beta) - obj).abs() <= 1e-6);
    }
}

#[test]
fn strong_localization_pins_u0() {
    let s = square_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (u0, lin) = random_linearization(&mut rng, 8);
    let mut previous = f64::INFINITY;
    for beta in [1e2, 1e4, 1e6] {
        let (u, _) = solve_subproblem(&s, &u0, &lin, 1.0, beta);
        let dist = (&u - &u0).norm();
        assert!(dist < previous);
        previous = dist;
    }
    assert!(previous <= 1e-5);
}

#[test]
fn without_weights_the_forces_vanish() {
    let s = square_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (u0, lin) = random_linearization(&mut rng, 8);
    let (prog, layout) = build_subproblem(&s, &u0, Fidelity::Area(&lin), 0.0, 0.0).unwrap();
    assert_eq!((layout.d, layout.e), (None, None));
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let u = DVector::from_column_slice(&sol.x[layout.u]);
    assert!(sol.objective.abs() <= 1e-7);
    assert!(s.apply(&u).amax() <= 1e-7);
}

#[test]
fn subproblem_rejects_wrong_sizes() {
    let s = square_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (u0, lin) = random_linearization(&mut rng, 6);
    assert!(build_subproblem(&s, &u0, Fidelity::Area(&lin), 1.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn localized_step_is_bounded_by_the_objective(seed in any::<u64>(), alpha in 0.1f64..10.0, beta in 0.1f64..10.0) {
        let s = square_operator();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u0, lin) = random_linearization(&mut rng, 8);
        let (u, obj) = solve_subproblem(&s, &u0, &lin, alpha, beta);
        prop_assert!((&u - &u0).norm() <= (obj / beta).sqrt() + 1e-7);
    }
}

#[test]
fn identity_task_stops_after_one_iteration() {
    let star = shapes::star();
    let target = PolygonSet::from_polygon(star.clone());
    for r in [
        match_shapes(&star, &target, &MatchConfig::default()).unwrap(),
        icp_like_match(&star, &target, &MatchConfig::default()).unwrap(),
    ] {
        assert_eq!(r.termination, Termination::Converged);
        assert_eq!(r.log.len(), 1);
        assert_eq!(r.log[0].area_fraction, 0.0);
        assert!(total_force_norm(&r.forces) <= 1e-6);
    }
}

#[test]
fn translation_is_free() {
    let (s, t) = shapes::pair("translated-star").unwrap();
    let r = match_shapes(&s, &PolygonSet::from_polygon(t), &MatchConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::Converged);
    let last = r.final_record();
    assert!(last.area_fraction < 0.01);
    assert!(last.force_norm / r.normalization.scale <= 1e-3);
}

#[test]
fn log_is_recomputable_from_the_displacement() {
    let (s, t) = shapes::pair("articulated-star").unwrap();
    let target = PolygonSet::from_polygon(t);
    let r = match_shapes(&s, &target, &MatchConfig::default()).unwrap();
    assert!(!r.log.is_empty());
    let mesh = &r.mesh;
    let ord = order_nodes(mesh);
    let a = assemble_stiffness(mesh, &ord, LameParams::default()).unwrap();
    let schur = schur_condense(&a).unwrap();
    let scale = r.normalization.scale;
    for (rec, u) in r.log.iter().zip(&r.history) {
        let u_b = u * scale;
        let force = total_force_norm(&boundary_forces(&schur, &u_b).unwrap());
        let magnitude = force.max(schur.matrix().amax() * u_b.norm());
        assert!((force - rec.force_norm).abs() <= 1e-9 * magnitude, "{force} {}", rec.force_norm);
        let db = DeformedBoundary::new(mesh.boundary_polygon(), u_b.clone()).unwrap();
        let area = area_at(&db, &target).unwrap();
        assert_eq!(area, rec.area_abs);
        // Deformation gradients from the interior recovery, triangle by triangle.
        let u_full: DVector<f64> = DVector::from_iterator(2 * ord.n, u_b.iter().copied().chain(schur.interior(&u_b).iter().copied()));
        let mut max_cd = 1.0f64;
        for t in &mesh.triangles {
            let p = t.map(|v| mesh.nodes[v]);
            let e1 = p[1] - p[0];
            let e2 = p[2] - p[0];
            let disp = |v: usize| {
                let s = ord.to_system[v];
                Vector2::new(u_full[2 * s], u_full[2 * s + 1])
            };
            let d1 = disp(t[1]) - disp(t[0]);
            let d2 = disp(t[2]) - disp(t[0]);
            let x = Matrix2::from_columns(&[e1, e2]);
            let j = Matrix2::identity() + Matrix2::from_columns(&[d1, d2]) * x.try_inverse().unwrap();
            let sv = j.singular_values();
            max_cd = max_cd.max(sv.max() / sv.min());
        }
        assert!((max_cd - rec.max_cd).abs() <= 1e-9 * max_cd);
    }
    // The returned forces are S u_B of the returned iterate.
    let f = schur.apply(&r.u_b);
    for (i, fi) in r.forces.iter().enumerate() {
        assert!((fi - Vector2::new(f[2 * i], f[2 * i + 1])).norm() <= 1e-12 * f.amax().max(1.0));
    }
}

#[test]
fn distortion_bound_holds_on_every_iterate() {
    let p = problem("articulated-star");
    let bound = 1.3;
    let cfg = MatchConfig {
        distortion_bound: Some(bound),
        max_iters: 15,
        ..MatchConfig::default()
    };
    let r = run(&p, &cfg, Method::Symdiff).unwrap();
    assert!(!r.log.is_empty());
    for rec in &r.log {
        assert_eq!(rec.flipped, 0);
        assert!(rec.max_cd <= bound + 1e-6, "iteration {}: {}", rec.iter, rec.max_cd);
    }
}

#[test]
fn closest_point_on_a_square() {
    let sq = PolygonSet::from_polygon(Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
    assert_eq!(closest_point(&sq, &Point::new(0.5, -1.0)), Point::new(0.5, 0.0));
    assert_eq!(closest_point(&sq, &Point::new(2.0, 2.0)), Point::new(1.0, 1.0));
    assert_eq!(closest_point(&sq, &Point::new(0.9, 0.5)), Point::new(1.0, 0.5));
}

#[test]
fn invalid_configurations_are_rejected() {
    let star = shapes::star();
    let target = PolygonSet::from_polygon(star.clone());
    for cfg in [
        MatchConfig { stop_fraction: 0.0, ..MatchConfig::default() },
        MatchConfig { beta: -1.0, ..MatchConfig::default() },
        MatchConfig { distortion_bound: Some(1.0), ..MatchConfig::default() },
        MatchConfig { fd_step: 0.0, ..MatchConfig::default() },
        MatchConfig { max_iters: 0, ..MatchConfig::default() },
    ] {
        assert!(match_shapes(&star, &target, &cfg).is_err());
    }
}

