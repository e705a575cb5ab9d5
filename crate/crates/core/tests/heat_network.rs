//! End-to-end behaviour of the network solvers and Galerkin methods on the
//! heat-network model.

use ndarray::Axis;
use netuq::galerkin::{
    GalerkinOptions, GalerkinProblem, IntermediateVariables, ReduceWhich, ReducedGalerkinOptions,
};
use netuq::models::heat::{heat_network_experiment, monte_carlo_v1, HeatNetworkConfig};
use netuq::network::{
    augmented_newton, eliminate_solve, gauss_seidel_relax, ComponentModel, CouplingState,
    NetworkOptions,
};
use netuq::pseudospectral::project;
use netuq::ErrorKind;

fn deterministic(config: &HeatNetworkConfig) -> CouplingState {
    let (pipe, reactor) = config.build().unwrap();
    let x = vec![0.0; config.modes];
    eliminate_solve(
        &pipe,
        &reactor,
        &x,
        &CouplingState::zeros(1, 1),
        &NetworkOptions::default(),
    )
    .unwrap()
    .0
}

#[test]
fn elimination_converges_quadratically() {
    let (pipe, reactor) = HeatNetworkConfig::default().build().unwrap();
    let (_, trace) = eliminate_solve(
        &pipe,
        &reactor,
        &[0.0, 0.0],
        &CouplingState::zeros(1, 1),
        &NetworkOptions::with_tol(1e-13),
    )
    .unwrap();
    // steps that land on the roundoff floor carry no rate information
    let r: Vec<f64> = trace
        .residual_norms
        .iter()
        .copied()
        .filter(|&r| r > 1e-12)
        .collect();
    assert!(r.len() >= 4, "{r:?}");
    for k in r.len() - 4..r.len() - 1 {
        let ratio = r[k + 1] / (r[k] * r[k]);
        assert!(ratio < 1.0, "ratio {ratio} at step {k}: {r:?}");
    }
}

#[test]
fn monolithic_newton_matches_elimination_at_nominal_inputs() {
    let config = HeatNetworkConfig::default();
    let (pipe, reactor) = config.build().unwrap();
    let v0 = CouplingState::zeros(1, 1);
    let opts = NetworkOptions::default();
    let (monolithic, _) = augmented_newton(&pipe, &reactor, &[0.0, 0.0], &v0, &opts).unwrap();
    let eliminated = deterministic(&config);
    assert!(monolithic.coupling.max_difference(&eliminated) <= 1e-10);
    assert!(eliminated.v1[0] > 0.0 && eliminated.v2[0] > 0.0);
}

#[test]
fn relaxation_converges_only_for_weak_coupling() {
    let weak = HeatNetworkConfig {
        reaction: 0.01,
        source: 0.5,
        ..HeatNetworkConfig::default()
    };
    let (pipe, reactor) = weak.build().unwrap();
    let v0 = CouplingState::zeros(1, 1);
    let opts = NetworkOptions::default();
    let (relaxed, _) = gauss_seidel_relax(&pipe, &reactor, &[0.3, -0.2], &v0, &opts).unwrap();
    let (eliminated, _) = eliminate_solve(&pipe, &reactor, &[0.3, -0.2], &v0, &opts).unwrap();
    assert!(relaxed.max_difference(&eliminated) <= 1e-8);

    let (pipe, reactor) = HeatNetworkConfig::default().build().unwrap();
    let err = gauss_seidel_relax(&pipe, &reactor, &[0.0, 0.0], &v0, &opts).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Solver);
}

#[test]
fn discretization_is_second_order() {
    let at = |nodes: usize| {
        deterministic(&HeatNetworkConfig {
            pipe_nodes: nodes,
            reactor_nodes: nodes,
            ..HeatNetworkConfig::default()
        })
    };
    let (coarse, medium, fine) = (at(32), at(64), at(128));
    let ratio = coarse.max_difference(&medium) / medium.max_difference(&fine);
    assert!((3.0..5.0).contains(&ratio), "refinement ratio {ratio}");
}

#[test]
fn zero_state_residual_is_the_negated_projection_of_outputs() {
    let (pipe, reactor) = HeatNetworkConfig::with_modes(2).build().unwrap();
    let problem = GalerkinProblem::new(&pipe, &reactor, 2).unwrap();
    let (h1, h2) = problem.residual(&problem.zero_state()).unwrap();

    let grid = problem.grid();
    let mut g1 = ndarray::Array2::zeros((grid.len(), 1));
    let mut g2 = ndarray::Array2::zeros((grid.len(), 1));
    for (j, x) in grid.points.rows().into_iter().enumerate() {
        let x = x.to_vec();
        let u1 = pipe.solve(&[0.0], &x).unwrap();
        g1[[j, 0]] = pipe.output(u1.as_slice().unwrap())[0];
        let u2 = reactor.solve(&[0.0], &[]).unwrap();
        g2[[j, 0]] = reactor.output(u2.as_slice().unwrap())[0];
    }
    let g1_hat = project(g1.view(), problem.psi(), grid.weights.view()).unwrap();
    let g2_hat = project(g2.view(), problem.psi(), grid.weights.view()).unwrap();
    assert!((&h1 + &g1_hat.coefficients)
        .iter()
        .all(|d| d.abs() <= 1e-12));
    assert!((&h2 + &g2_hat.coefficients)
        .iter()
        .all(|d| d.abs() <= 1e-12));
}

#[test]
fn pointwise_coupling_error_decreases_with_degree() {
    let (pipe, reactor) = HeatNetworkConfig::with_modes(2).build().unwrap();
    let probe = netuq::quadrature::tensor_grid(2, 7).unwrap();
    let v0 = CouplingState::zeros(1, 1);
    let exact: Vec<f64> = probe
        .points
        .rows()
        .into_iter()
        .map(|x| {
            eliminate_solve(
                &pipe,
                &reactor,
                &x.to_vec(),
                &v0,
                &NetworkOptions::default(),
            )
            .unwrap()
            .0
            .v1[0]
        })
        .collect();
    let mut errors = Vec::new();
    for degree in 1..=4 {
        let problem = GalerkinProblem::new(&pipe, &reactor, degree).unwrap();
        let (state, _) = problem
            .newton(&problem.zero_state(), &GalerkinOptions::default())
            .unwrap();
        let psi = problem.basis().evaluate(probe.points.view()).unwrap();
        let surrogate = psi.dot(&state.v1).remove_axis(Axis(1));
        let error = surrogate
            .iter()
            .zip(&exact)
            .fold(0.0f64, |m, (s, e)| m.max((s - e).abs()));
        errors.push(error);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn zero_dimensional_galerkin_is_the_deterministic_solve() {
    let config = HeatNetworkConfig::with_modes(0);
    let (pipe, reactor) = config.build().unwrap();
    let problem = GalerkinProblem::new(&pipe, &reactor, 3).unwrap();
    let (state, _) = problem
        .newton(&problem.zero_state(), &GalerkinOptions::default())
        .unwrap();
    let v = deterministic(&config);
    assert_eq!(state.basis_size(), 1);
    assert!((state.v1[[0, 0]] - v.v1[0]).abs() <= 1e-10);
    assert!((state.v2[[0, 0]] - v.v2[0]).abs() <= 1e-10);
}

#[test]
fn reduced_reactor_needs_few_solves_at_four_modes() {
    let (pipe, reactor) = HeatNetworkConfig::with_modes(4).build().unwrap();
    let problem = GalerkinProblem::new(&pipe, &reactor, 3).unwrap();
    let reduced = ReducedGalerkinOptions {
        variables: IntermediateVariables::IncomingCoupling,
        ..ReducedGalerkinOptions::new(3, ReduceWhich::Component2)
    };
    let (_, report) = problem
        .newton_reduced(&problem.zero_state(), &GalerkinOptions::default(), &reduced)
        .unwrap();
    for (solves, records) in report.trace.solves.iter().zip(&report.reductions) {
        let record = &records[0];
        assert_eq!(solves[1], record.nonzeros);
        assert!(record.nonzeros <= record.rank_used);
        assert!(solves[1] < 256 / 4);
        assert_eq!(solves[0], 256);
    }
}

#[test]
fn reduced_and_full_coefficients_agree_at_three_modes() {
    let report = heat_network_experiment(
        &HeatNetworkConfig::with_modes(3),
        3,
        3,
        &GalerkinOptions::default(),
    )
    .unwrap();
    assert!(report.coefficient_difference <= 1e-6);
    assert_eq!((report.row.basis_size, report.row.grid_size), (20, 64));
    let (full_mean, _) = report.full_state.v1_moments();
    let (reduced_mean, _) = report.reduced_state.v1_moments();
    assert!((full_mean[0] - reduced_mean[0]).abs() <= 1e-6);
}

#[test]
fn experiment_rows_have_the_expected_structure() {
    let opts = GalerkinOptions::default();
    let small = heat_network_experiment(&HeatNetworkConfig::with_modes(2), 3, 3, &opts).unwrap();
    assert_eq!(
        (
            small.row.s,
            small.row.basis_size,
            small.row.grid_size,
            small.row.reduced_size
        ),
        (2, 10, 16, 10)
    );
    let large = heat_network_experiment(&HeatNetworkConfig::with_modes(5), 3, 3, &opts).unwrap();
    assert_eq!(large.row.grid_size, 1024);
    let medium = heat_network_experiment(&HeatNetworkConfig::with_modes(3), 3, 3, &opts).unwrap();
    assert!(large.row.nonzeros <= 2 * medium.row.nonzeros);
    assert!(large.row.nonzeros * 10 < large.row.grid_size);
    for row in [&small.row, &medium.row, &large.row] {
        assert!(row.time_c1.is_finite() && row.time_c2.is_finite());
    }

    assert!(heat_network_experiment(&HeatNetworkConfig::with_modes(1), 3, 3, &opts).is_err());
    assert!(heat_network_experiment(&HeatNetworkConfig::with_modes(6), 3, 3, &opts).is_err());
}

#[test]
fn monte_carlo_depends_only_on_the_seed() {
    let config = HeatNetworkConfig::with_modes(2);
    let opts = NetworkOptions::default();
    let a = monte_carlo_v1(&config, 200, 11, &opts).unwrap();
    let b = monte_carlo_v1(&config, 200, 11, &opts).unwrap();
    let c = monte_carlo_v1(&config, 200, 12, &opts).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mean, c.mean);
}
