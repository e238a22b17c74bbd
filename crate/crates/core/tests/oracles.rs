//! Independent reference computations checked against the library.

use adafw::distributed::{
    estimate_sigma, estimate_sigma_sampled, generate_network, relative_condition_number, CommunicationLedger,
    NetworkSpec,
};
use adafw::objectives::{verify_relative_smoothness, RelativelySmooth};
use adafw::solver::{fw_gap, linear_rate_envelope, monotone_violations, scaling_diagnostic, solve_baseline};
use adafw::{
    BregmanDivergence, ClippedSimplex, DOptimalDesign, Matrix, Objective, PoissonInverse, QuadraticObjective,
    ReferenceFunction, SolverConfig, Variant, Vector,
};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central differences with step `1e-6·(1 + ‖x‖)`.
fn finite_difference(f: impl Fn(&Vector) -> f64, x: &Vector) -> Vector {
    let h = 1e-6 * (1.0 + x.norm());
    Vector::from_fn(x.len(), |i, _| {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[i] += h;
        minus[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

fn assert_gradient_matches(name: &str, f: impl Fn(&Vector) -> f64, grad: &Vector, x: &Vector) {
    let fd = finite_difference(f, x);
    let err = (&fd - grad).amax() / grad.amax().max(1.0);
    assert!(err <= 1e-5, "{name}: finite-difference mismatch {err:e}\nanalytic {grad}\nnumeric {fd}");
}

#[test]
fn objective_gradients_match_finite_differences() {
    let mut r = rng(1);
    let design = DOptimalDesign::random(3, 7, &mut r).unwrap();
    let poisson = PoissonInverse::random(9, 6, &mut r).unwrap();
    let a = Matrix::from_fn(5, 5, |_, _| r.random_range(-1.0..1.0));
    let quad = QuadraticObjective::new(&a + a.transpose(), Vector::from_fn(5, |_, _| r.random::<f64>())).unwrap();
    for _ in 0..50 {
        let x = ClippedSimplex::standard(7).unwrap().sample_interior(&mut r);
        assert_gradient_matches("doptimal", |z| design.value(z).unwrap(), &design.gradient(&x).unwrap(), &x);
        let x = ClippedSimplex::standard(6).unwrap().sample_interior(&mut r);
        assert_gradient_matches("poisson", |z| poisson.value(z).unwrap(), &poisson.gradient(&x).unwrap(), &x);
        let x = Vector::from_fn(5, |_, _| r.random_range(-2.0..2.0));
        assert_gradient_matches("quadratic", |z| quad.value(z).unwrap(), &quad.gradient(&x).unwrap(), &x);
    }
}

#[test]
fn reference_gradients_match_finite_differences() {
    let mut r = rng(2);
    let h = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.5]);
    let refs = [
        ReferenceFunction::SquaredEuclidean,
        ReferenceFunction::BurgEntropy,
        ReferenceFunction::Quadratic { hessian: h, linear: Vector::from_column_slice(&[0.1, -0.4, 1.0]) },
    ];
    for reference in &refs {
        for _ in 0..20 {
            let x = Vector::from_fn(3, |_, _| r.random_range(0.1..2.0));
            assert_gradient_matches(
                &format!("{reference:?}"),
                |z| reference.value(z).unwrap(),
                &reference.gradient(&x).unwrap(),
                &x,
            );
        }
    }
}

#[test]
fn closed_form_divergences_match_definition() {
    let mut r = rng(3);
    for geometry in [BregmanDivergence::euclidean(), BregmanDivergence::burg()] {
        for _ in 0..200 {
            let x = Vector::from_fn(4, |_, _| r.random_range(0.05..3.0));
            let y = Vector::from_fn(4, |_, _| r.random_range(0.05..3.0));
            let closed = geometry.divergence(&x, &y).unwrap();
            let literal = geometry.divergence_from_definition(&x, &y).unwrap();
            assert!(closed >= 0.0);
            assert!((closed - literal).abs() <= 1e-10 * (1.0 + literal.abs()), "{closed} vs {literal}");
        }
    }
}

/// Every vertex is enumerated and scored; ties resolve to the lowest index.
fn brute_force_lmo(set: &ClippedSimplex, g: &Vector) -> Vector {
    let mut best = set.vertex(0);
    let mut best_score = g.dot(&best);
    for i in 1..set.dim() {
        let v = set.vertex(i);
        let score = g.dot(&v);
        if score < best_score - 1e-12 {
            best = v;
            best_score = score;
        }
    }
    best
}

#[test]
fn lmo_equals_brute_force_up_to_dimension_six() {
    let mut r = rng(4);
    for n in 2..=6 {
        for floor in [0.0, 0.01 / n as f64] {
            let set = ClippedSimplex::new(n, floor).unwrap();
            for _ in 0..500 {
                // rounding to a coarse grid produces frequent ties
                let g = Vector::from_fn(n, |_, _| (r.random_range(-3.0..3.0_f64) * 2.0).round() / 2.0);
                assert_eq!(set.lmo(&g).unwrap(), brute_force_lmo(&set, &g), "n = {n}, g = {g}");
            }
        }
    }
}

#[test]
fn fw_gap_of_linear_function() {
    let set = ClippedSimplex::standard(3).unwrap();
    let c = Vector::from_column_slice(&[1.0, 2.0, 3.0]);
    let gap = fw_gap(&c, &set.center(), &set).unwrap();
    assert!((gap.gap - 1.0).abs() < 1e-15);
    assert_eq!(gap.vertex, set.vertex(0));
    let at_vertex = fw_gap(&c, &set.vertex(0), &set).unwrap();
    assert_eq!(at_vertex.gap, 0.0);
}

#[test]
fn doptimal_reference_optimum_matches_grid_search() {
    let design = DOptimalDesign::random(2, 3, &mut rng(5)).unwrap();
    let steps = 1000;
    let mut grid_best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let x = Vector::from_column_slice(&[
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ]);
            if let Ok(v) = design.value(&x) {
                grid_best = grid_best.min(v);
            }
        }
    }
    let set = ClippedSimplex::with_default_floor(3).unwrap();
    let config = SolverConfig { max_iterations: 1000, ..SolverConfig::default() };
    let f_ref = adafw::experiments::reference_optimum(&design, &BregmanDivergence::burg(), &set, &config, &set.center())
        .unwrap();
    assert!((f_ref - grid_best).abs() <= 1e-3, "reference {f_ref} vs grid {grid_best}");
}

#[test]
fn quadratic_reference_optimum_matches_closed_form() {
    let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
    let c = Vector::from_column_slice(&[0.25, 0.35, 0.4]);
    let q = QuadraticObjective::new(a.clone(), &a * &c).unwrap();
    let minimizer = a.clone().cholesky().unwrap().solve(q.linear());
    let exact = q.value(&minimizer).unwrap();
    let set = ClippedSimplex::standard(3).unwrap();
    let config = SolverConfig { max_iterations: 5000, ..SolverConfig::default() };
    let f_ref = adafw::experiments::reference_optimum(&q, &BregmanDivergence::euclidean(), &set, &config, &set.center())
        .unwrap();
    assert!(f_ref >= exact - 1e-12);
    assert!(f_ref - exact <= 1e-8, "reference {f_ref} vs closed form {exact}");
}

#[test]
fn doptimal_is_one_smooth_relative_to_burg() {
    let mut r = rng(6);
    let design = DOptimalDesign::random(4, 12, &mut r).unwrap();
    let set = ClippedSimplex::with_default_floor(12).unwrap();
    let pairs: Vec<_> = (0..10_000).map(|_| (set.sample_interior(&mut r), set.sample_interior(&mut r))).collect();
    let check =
        verify_relative_smoothness(&design, &BregmanDivergence::burg(), design.relative_smoothness_constant(), pairs)
            .unwrap();
    assert!(check.passed, "worst violation {}", check.worst_violation);
}

#[test]
fn poisson_smoothness_constant_holds_on_interior_samples() {
    let mut r = rng(7);
    let problem = PoissonInverse::random(40, 10, &mut r).unwrap();
    let set = ClippedSimplex::with_default_floor(10).unwrap();
    let pairs: Vec<_> = (0..2000).map(|_| (set.sample_interior(&mut r), set.sample_interior(&mut r))).collect();
    let check =
        verify_relative_smoothness(&problem, &BregmanDivergence::burg(), problem.relative_smoothness_constant(), pairs)
            .unwrap();
    assert!(check.passed, "worst violation {}", check.worst_violation);
}

#[test]
fn quadratic_smoothness_is_tight_at_one() {
    let q = QuadraticObjective::new(Matrix::identity(3, 3), Vector::zeros(3)).unwrap();
    let mut r = rng(8);
    let pairs: Vec<_> = (0..100)
        .map(|_| (Vector::from_fn(3, |_, _| r.random::<f64>()), Vector::from_fn(3, |_, _| r.random::<f64>())))
        .collect();
    let geometry = BregmanDivergence::euclidean();
    assert!(verify_relative_smoothness(&q, &geometry, 1.0, pairs.clone()).unwrap().passed);
    let half = verify_relative_smoothness(&q, &geometry, 0.5, pairs).unwrap();
    assert!(!half.passed);
    assert!(half.witness.is_some());
}

#[test]
fn euclidean_triangle_scaling_exponent_is_two() {
    let set = ClippedSimplex::standard(5).unwrap();
    let mut r = rng(9);
    let est = BregmanDivergence::euclidean().estimate_tse(set.tse_samples(&mut r, 500)).unwrap();
    assert!((est.gamma_hat - 2.0).abs() < 1e-9, "{}", est.gamma_hat);
}

#[test]
fn aggregation_matches_explicit_average() {
    let spec = NetworkSpec { dim: 8, nodes: 6, central: 2, condition_number: 30.0, sigma_ratio: 0.02 };
    let net = generate_network(&spec, &mut rng(10)).unwrap();
    let mut r = rng(11);
    let mut ledger = CommunicationLedger::default();
    for _ in 0..20 {
        let x = Vector::from_fn(8, |_, _| r.random_range(-1.0..1.0));
        // each node's gradient written out as A_j x - b_j
        let mut explicit = Vector::zeros(8);
        for node in net.nodes() {
            explicit += node.hessian() * &x - node.linear();
        }
        explicit /= net.node_count() as f64;
        let aggregated = net.aggregate_gradient(&x, &mut ledger).unwrap();
        let err = (&aggregated - &explicit).amax();
        assert!(err <= 1e-12 * (1.0 + explicit.amax()), "{err:e}");
    }
    assert_eq!(ledger.rounds, 20);
    assert_eq!(ledger.gradient_vectors_sent, 20 * 4);
}

#[test]
fn sigma_matches_eigendecomposition_and_bounds_samples() {
    for seed in 0..5 {
        let spec = NetworkSpec { dim: 10, nodes: 7, central: 2, condition_number: 50.0, sigma_ratio: 0.01 };
        let net = generate_network(&spec, &mut rng(20 + seed)).unwrap();
        let diff = net.global_objective().unwrap().hessian() - net.central_objective().unwrap().hessian();
        let exact = SymmetricEigen::new(diff).eigenvalues.amax();
        let power = estimate_sigma(&net).unwrap();
        assert!((power - exact).abs() <= 1e-8 * exact, "{power} vs {exact}");
        let sampled = estimate_sigma_sampled(&net, 10_000, &mut rng(30 + seed)).unwrap();
        assert!(sampled <= exact + 1e-6, "{sampled} > {exact}");
        let mu = net.global_objective().unwrap().min_eigenvalue();
        let l = net.global_objective().unwrap().max_eigenvalue();
        assert!(power < (l - mu) / 2.0);
        assert!(relative_condition_number(mu, power).unwrap() < l / mu);
    }
}

#[test]
fn scaling_condition_dominates_theoretical_tau() {
    let a = Matrix::from_row_slice(4, 4, &[
        3.0, 0.5, 0.0, 0.2, 0.5, 2.0, 0.1, 0.0, 0.0, 0.1, 1.5, 0.3, 0.2, 0.0, 0.3, 1.0,
    ]);
    let x_star = Vector::from_column_slice(&[0.1, 0.2, 0.3, 0.4]);
    let q = QuadraticObjective::new(a.clone(), &a * &x_star).unwrap();
    let set = ClippedSimplex::standard(4).unwrap();
    let geometry = BregmanDivergence::euclidean();
    let mut r = rng(12);
    let constants = set.set_constants(&geometry, 4000, &mut r).unwrap();
    let mut checked = 0;
    for _ in 0..100 {
        let x = set.sample_interior(&mut r);
        let g = q.gradient(&x).unwrap();
        let s = set.lmo(&g).unwrap();
        let eps = geometry.divergence(&x_star, &x).unwrap();
        let d = scaling_diagnostic(&x, &g, &s, &x_star, &constants, &geometry, eps).unwrap();
        if let Some(tau) = d.tau_implied {
            assert!(tau >= d.tau_theory, "implied {tau} below theory {}", d.tau_theory);
            checked += 1;
        }
    }
    assert!(checked > 90);
}

#[test]
fn fixed_step_with_underestimated_constant_can_increase_f() {
    // f(t) = 5(t - 0.4)² along the segment, true curvature 10 in x₁
    let a = Matrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 0.0]);
    let q = QuadraticObjective::new(a, Vector::from_column_slice(&[4.0, 0.0])).unwrap();
    let set = ClippedSimplex::standard(2).unwrap();
    let config = SolverConfig { variant: Variant::Fixed, l0: 1.0, max_iterations: 20, ..SolverConfig::default() };
    let run = solve_baseline(&q, &BregmanDivergence::euclidean(), &set, &config, &set.center()).unwrap();
    assert!(!monotone_violations(&run.trace).is_empty());
}

#[test]
fn linear_envelope_on_quadratic_with_known_optimum() {
    let a = Matrix::from_row_slice(3, 3, &[2.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.5]);
    let c = Vector::from_column_slice(&[0.3, 0.3, 0.4]);
    let q = QuadraticObjective::new(a.clone(), &a * &c).unwrap();
    let set = ClippedSimplex::standard(3).unwrap();
    let geometry = BregmanDivergence::euclidean();
    let config = SolverConfig { max_iterations: 500, gap_tolerance: 1e-10, ..SolverConfig::default() };
    let run = adafw::solver::solve_fully_adaptive(&q, &geometry, &set, &config, &set.center()).unwrap();
    let f_star = q.value(&c).unwrap();
    let constants = set.set_constants(&geometry, 1000, &mut rng(13)).unwrap();
    let eps = run.trace.iter().map(|r| (r.f_value - f_star) / q.max_eigenvalue()).fold(f64::INFINITY, f64::min);
    let tau = set.boundary_distance(&c) / constants.euclidean_diameter * eps.max(0.0) / constants.divergence_diameter;
    let env = linear_rate_envelope(&run.trace, f_star, q.min_eigenvalue(), tau, run.gamma_min()).unwrap();
    assert!(env.holds(), "violations at {:?}", env.violations);
}

#[test]
fn poisson_value_is_nonnegative() {
    let mut r = rng(14);
    let problem = PoissonInverse::random(30, 8, &mut r).unwrap();
    let set = ClippedSimplex::with_default_floor(8).unwrap();
    for _ in 0..1000 {
        let x = set.sample_interior(&mut r).scale(r.random_range(0.01..10.0));
        assert!(problem.value(&x).unwrap() >= -1e-12);
    }
}

#[test]
fn doptimal_is_midpoint_convex() {
    let mut r = rng(15);
    let design = DOptimalDesign::random(5, 12, &mut r).unwrap();
    let set = ClippedSimplex::with_default_floor(12).unwrap();
    for _ in 0..100 {
        let x = set.sample_interior(&mut r);
        let y = set.sample_interior(&mut r);
        let mid = (&x + &y) / 2.0;
        let avg = (design.value(&x).unwrap() + design.value(&y).unwrap()) / 2.0;
        assert!(design.value(&mid).unwrap() <= avg + 1e-12);
    }
}

#[test]
fn burg_scaling_exponent_on_small_clipped_simplex() {
    let set = ClippedSimplex::new(3, 1e-3).unwrap();
    let est = BregmanDivergence::burg().estimate_tse(set.tse_samples(&mut rng(16), 10_000)).unwrap();
    assert!(est.gamma_hat > 0.0 && est.gamma_hat <= 2.0);
    println!("burg gamma_hat on dim 3, floor 1e-3: {:.6}", est.gamma_hat);
}
