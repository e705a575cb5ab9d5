//! Property tests for the structural invariants of every module.

use ndarray::{Array1, Array2, Axis};
use netuq::chaos_basis::{total_degree_set, TensorBasis};
use netuq::galerkin::{triple_products, GalerkinOptions, GalerkinProblem};
use netuq::lp_solver::{phase_one_bfs, StandardFormLp};
use netuq::models::composite::{composite_experiment, CompositeFunction, CompositeReference};
use netuq::models::heat::HeatNetworkConfig;
use netuq::network::{
    augmented_newton, eliminate_solve, gauss_seidel_relax, ComponentModel, CouplingState,
    NetworkOptions,
};
use netuq::pseudospectral::project;
use netuq::quadrature::tensor_grid;
use netuq::reduction::{
    monomial_matrix, reduced_project, reduced_weights_with, weighted_mgs_with, DependentColumns,
    ReductionOptions,
};
use proptest::prelude::*;

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn gram_error(basis: &Array2<f64>, weights: &Array1<f64>) -> f64 {
    let weighted = basis * &weights.view().insert_axis(Axis(1));
    let gram = basis.t().dot(&weighted);
    max_abs((&gram - &Array2::<f64>::eye(gram.nrows())).iter().copied())
}

/// Smooth intermediate samples `y = (x₁ + a x₂², b + x₂ + c x₁ x₂)` on a
/// two-dimensional grid.
fn intermediate_samples(points: &Array2<f64>, a: f64, b: f64, c: f64) -> Array2<f64> {
    let mut y = Array2::zeros((points.nrows(), 2));
    for (j, x) in points.rows().into_iter().enumerate() {
        y[[j, 0]] = x[0] + a * x[1] * x[1];
        y[[j, 1]] = b + x[1] + c * x[0] * x[1];
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_is_discretely_orthonormal(dim in 1usize..=3, degree in 0usize..=4) {
        let basis = TensorBasis::total_degree(dim, degree);
        let grid = tensor_grid(dim, degree + 1).unwrap();
        let psi = basis.evaluate(grid.points.view()).unwrap();
        prop_assert!(gram_error(&psi, &grid.weights) <= 1e-12);
    }

    #[test]
    fn index_sets_are_stable_prefixes(dim in 1usize..=4, degree in 0usize..=5) {
        let small = total_degree_set(dim, degree);
        let large = total_degree_set(dim, degree + 1);
        prop_assert_eq!(small.indices(), &large.indices()[..small.len()]);
        let again = total_degree_set(dim, degree);
        prop_assert_eq!(small.indices(), again.indices());
    }

    #[test]
    fn grids_are_deterministic_probability_rules(dim in 0usize..=3, points in 1usize..=6) {
        let a = tensor_grid(dim, points).unwrap();
        let b = tensor_grid(dim, points).unwrap();
        prop_assert_eq!(&a.points, &b.points);
        prop_assert_eq!(&a.weights, &b.weights);
        prop_assert!((a.weights.sum() - 1.0).abs() <= 1e-14);
        prop_assert!(a.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn projection_inverts_evaluation(
        dim in 1usize..=3,
        degree in 0usize..=3,
        raw in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let basis = TensorBasis::total_degree(dim, degree);
        let grid = tensor_grid(dim, degree + 1).unwrap();
        let psi = basis.evaluate(grid.points.view()).unwrap();
        let coefficients = Array1::from(raw[..basis.len()].to_vec());
        let samples = psi.dot(&coefficients).insert_axis(Axis(1));
        let projected = project(samples.view(), psi.view(), grid.weights.view()).unwrap();
        let recovered = projected.coefficients.column(0);
        prop_assert!(max_abs((&recovered - &coefficients).iter().copied()) <= 1e-12);
        let energy: f64 = samples.column(0).iter().zip(&grid.weights).map(|(v, w)| w * v * v).sum();
        prop_assert!((energy - coefficients.dot(&coefficients)).abs() <= 1e-12);
    }

    #[test]
    fn weighted_mgs_is_orthonormal(
        a in -0.5f64..0.5,
        b in -1.0f64..1.0,
        c in -0.5f64..0.5,
        degree in 1usize..=3,
    ) {
        let grid = tensor_grid(2, 6).unwrap();
        let y = intermediate_samples(&grid.points, a, b, c);
        let monomials = monomial_matrix(y.view(), degree);
        let basis = weighted_mgs_with(&monomials, grid.weights.view(), DependentColumns::Drop { tol: 1e-8 }).unwrap();
        prop_assert!(basis.orthogonality_error() <= 1e-10);
        prop_assert!(gram_error(&basis.phi, &grid.weights) <= 1e-10);
    }

    #[test]
    fn modified_quadrature_preserves_orthogonality(
        a in -0.5f64..0.5,
        b in -1.0f64..1.0,
        c in -0.5f64..0.5,
        degree in 1usize..=2,
    ) {
        let grid = tensor_grid(2, 6).unwrap();
        let y = intermediate_samples(&grid.points, a, b, c);
        let monomials = monomial_matrix(y.view(), degree);
        let basis = weighted_mgs_with(&monomials, grid.weights.view(), DependentColumns::Drop { tol: 1e-8 }).unwrap();
        let mq = reduced_weights_with(basis.phi.view(), grid.weights.view(), &ReductionOptions::default()).unwrap();
        prop_assert!(gram_error(&basis.phi, &mq.u_star) <= mq.orthogonality_error + 1e-15);
        prop_assert!(mq.orthogonality_error <= 1e-8);
        prop_assert!(mq.u_star.iter().all(|&u| u >= 0.0));
        let size = basis.len();
        prop_assert!(mq.nonzero_count <= mq.rank_used);
        prop_assert!(mq.rank_used <= grid.len().min(size * size));
        prop_assert_eq!(mq.nonzero_count, mq.support.len());
    }

    #[test]
    fn reduced_projection_is_exact_for_polynomials_in_y(
        a in -0.5f64..0.5,
        b in -1.0f64..1.0,
        c in -0.5f64..0.5,
        coefficients in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let grid = tensor_grid(2, 6).unwrap();
        let psi = TensorBasis::total_degree(2, 5).evaluate(grid.points.view()).unwrap();
        let y = intermediate_samples(&grid.points, a, b, c);
        let monomials = monomial_matrix(y.view(), 2);
        let basis = weighted_mgs_with(&monomials, grid.weights.view(), DependentColumns::Drop { tol: 1e-8 }).unwrap();
        let mq = reduced_weights_with(basis.phi.view(), grid.weights.view(), &ReductionOptions::default()).unwrap();
        let h = monomials.values.dot(&Array1::from(coefficients)).insert_axis(Axis(1));
        let full = project(h.view(), psi.view(), grid.weights.view()).unwrap();
        let at_support = h.select(Axis(0), &mq.support);
        let reduced = reduced_project(at_support.view(), &mq, basis.phi.view(), psi.view(), grid.weights.view()).unwrap();
        prop_assert!(max_abs((&full.coefficients - &reduced.coefficients).iter().copied()) <= 1e-9);
    }

    #[test]
    fn phase_one_returns_a_basic_feasible_point(
        rows in 1usize..=6,
        extra in 1usize..=12,
        seed in prop::collection::vec(0.0f64..1.0, 18 * 7),
        flip in prop::collection::vec(any::<bool>(), 6),
    ) {
        let cols = rows + extra;
        let a = Array2::from_shape_fn((rows, cols), |(i, j)| seed[i * 18 + j] - 0.3);
        let u0 = Array1::from_shape_fn(cols, |j| seed[6 * 18 + j] + 0.1);
        let b = a.dot(&u0);
        let lp = StandardFormLp::new(a.clone(), b.clone()).unwrap();
        let bfs = phase_one_bfs(&lp).unwrap();
        prop_assert!(lp.residual(bfs.u.view()) <= 1e-10);
        prop_assert!(bfs.u.iter().all(|&u| u >= 0.0));
        let support = bfs.support();
        prop_assert!(support.len() <= rows);

        // support columns are independent: their Gram matrix has full rank
        let columns = a.select(Axis(1), &support);
        let gram = columns.t().dot(&columns);
        let lu = netuq::linalg::Lu::factor(gram.clone());
        prop_assert!(lu.is_ok());
        let rhs = columns.t().dot(&b);
        let solved = lu.unwrap().solve_vec(&rhs);
        let values = bfs.u.select(Axis(0), &support);
        prop_assert!(max_abs((&solved - &values).iter().copied()) <= 1e-8 * (1.0 + max_abs(values.iter().copied())));

        // flipping row signs does not change the feasible set
        let signs = Array1::from_shape_fn(rows, |i| if flip[i] { -1.0 } else { 1.0 });
        let flipped = StandardFormLp::new(&a * &signs.view().insert_axis(Axis(1)), &b * &signs).unwrap();
        let other = phase_one_bfs(&flipped).unwrap();
        prop_assert!(lp.residual(other.u.view()) <= 1e-10);
    }

    #[test]
    fn triple_products_are_symmetric(dim in 1usize..=3, degree in 0usize..=3) {
        let basis = TensorBasis::total_degree(dim, degree);
        let t = triple_products(&basis);
        for (i, j, k, v) in t.expanded() {
            prop_assert_eq!(t.get(j, i, k), v);
            prop_assert_eq!(t.get(k, j, i), v);
        }
        for j in 0..basis.len() {
            for k in 0..basis.len() {
                let expected = if j == k { 1.0 } else { 0.0 };
                prop_assert!((t.get(0, j, k) - expected).abs() <= 1e-13);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn galerkin_jacobian_has_identity_diagonal_blocks(
        modes in 1usize..=2,
        degree in 1usize..=2,
        shift in -0.05f64..0.05,
    ) {
        let (pipe, reactor) = HeatNetworkConfig::with_modes(modes).build().unwrap();
        let problem = GalerkinProblem::new(&pipe, &reactor, degree).unwrap();
        let mut state = problem.zero_state();
        state.v1[[0, 0]] = 1.2 + shift;
        state.v2[[0, 0]] = 1.25 - shift;
        if state.basis_size() > 1 {
            state.v1[[1, 0]] = shift;
        }
        let jac = problem.jacobian(&problem.evaluate_full(&state).unwrap());
        let size = state.basis_size();
        for block in [0..size, size..2 * size] {
            for r in block.clone() {
                for c in block.clone() {
                    prop_assert_eq!(jac[[r, c]], if r == c { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn sensitivities_match_finite_differences(
        x in prop::collection::vec(-1.0f64..1.0, 3),
        v in 0.5f64..2.0,
    ) {
        let (pipe, reactor) = HeatNetworkConfig::with_modes(3).build().unwrap();
        let cases: [(&dyn ComponentModel, &[f64]); 2] = [(&pipe, &x), (&reactor, &[])];
        for (model, params) in cases {
            let u = model.solve(&[v], params).unwrap();
            let analytic = model.sensitivity(u.as_slice().unwrap(), &[v], params).unwrap().dg_dv[[0, 0]];
            let output = |v: f64| {
                let u = model.solve(&[v], params).unwrap();
                model.output(u.as_slice().unwrap())[0]
            };
            let step = 1e-5;
            let fd = (output(v + step) - output(v - step)) / (2.0 * step);
            prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs());
        }
    }

    #[test]
    fn network_solvers_agree(x in prop::collection::vec(-1.0f64..1.0, 2)) {
        let opts = NetworkOptions::default();
        let v0 = CouplingState::zeros(1, 1);
        let (pipe, reactor) = HeatNetworkConfig::with_modes(2).build().unwrap();
        let (eliminated, trace) = eliminate_solve(&pipe, &reactor, &x, &v0, &opts).unwrap();
        let (monolithic, _) = augmented_newton(&pipe, &reactor, &x, &v0, &opts).unwrap();
        prop_assert!(eliminated.max_difference(&monolithic.coupling) <= 10.0 * opts.tol);
        prop_assert!(trace.solves.iter().all(|s| *s == [1, 1]));

        let weak = HeatNetworkConfig { reaction: 0.01, source: 0.5, ..HeatNetworkConfig::with_modes(2) };
        let (pipe, reactor) = weak.build().unwrap();
        let (eliminated, _) = eliminate_solve(&pipe, &reactor, &x, &v0, &opts).unwrap();
        let (relaxed, _) = gauss_seidel_relax(&pipe, &reactor, &x, &v0, &opts).unwrap();
        prop_assert!(eliminated.max_difference(&relaxed) <= 10.0 * opts.tol);
    }
}

#[test]
fn loosening_the_qr_tolerance_never_adds_points() {
    let problem = CompositeFunction::new(4).unwrap();
    let reference = CompositeReference::new(&problem, 5).unwrap();
    let loose = ReductionOptions {
        qr_tol: 1e-6,
        retry: false,
        ..ReductionOptions::default()
    };
    for n in 1..=4 {
        let strict =
            composite_experiment(&problem, n, n, &ReductionOptions::default(), &reference).unwrap();
        let relaxed = composite_experiment(&problem, n, n, &loose, &reference).unwrap();
        assert!(relaxed.nonzeros <= strict.nonzeros, "N={n}");
        assert!(relaxed.rank_used <= strict.rank_used, "N={n}");
    }
}

#[test]
fn reduced_and_full_galerkin_agree_on_heat_network() {
    let (pipe, reactor) = HeatNetworkConfig::with_modes(2).build().unwrap();
    let problem = GalerkinProblem::new(&pipe, &reactor, 2).unwrap();
    let opts = GalerkinOptions::default();
    let (full, _) = problem.newton(&problem.zero_state(), &opts).unwrap();
    let reduced_opts =
        netuq::galerkin::ReducedGalerkinOptions::new(2, netuq::galerkin::ReduceWhich::Component2);
    let (reduced, report) = problem
        .newton_reduced(&problem.zero_state(), &opts, &reduced_opts)
        .unwrap();
    assert!(report.final_full_residual <= opts.tol);
    assert!(full.max_difference(&reduced) <= 1e-5);
    for (solves, records) in report.trace.solves.iter().zip(&report.reductions) {
        assert_eq!(solves[1], records[0].nonzeros);
    }
}
