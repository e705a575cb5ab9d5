//! A 1-D heat network standing in for a pipe/reactor pair.
//!
//! The **pipe** is steady diffusion on `[0, 1]` with random conductivity
//! `κ(z, x) = κ₀ + σ Σᵢ (xᵢ/i) sin(iπz)`, temperature zero at `z = 0` and an
//! incoming flux `v₂` at `z = 1`. It exports the end temperature `g₁ = T(1)`.
//!
//! The **reactor** is steady diffusion-reaction `−κ_R T″ + γT³ = T_s` on
//! `[0, 1]` with `T(0) = v₁` and an insulated far end. It exports the heat flux
//! it delivers back through `z = 0`, `g₂ = κ_R T′(0)`, which is positive when
//! the reactor is hotter than the interface.
//!
//! Both components use second-order finite differences with tridiagonal
//! Jacobians, so every linearized solve is a Thomas sweep.

use ndarray::{Array1, Array2, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::{
    GalerkinOptions, GalerkinProblem, GalerkinState, IntermediateVariables, ReduceWhich,
    ReducedGalerkinOptions, ReducedSolveReport,
};
use crate::linalg::solve_tridiagonal;
use crate::network::{eliminate_solve, ComponentModel, CouplingState, NetworkOptions, SolveTrace};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatNetworkConfig {
    /// Number of random conductivity modes `s`.
    pub modes: usize,
    pub kappa0: f64,
    pub sigma: f64,
    pub reactor_conductivity: f64,
    pub reaction: f64,
    pub source: f64,
    pub pipe_nodes: usize,
    pub reactor_nodes: usize,
}

impl Default for HeatNetworkConfig {
    fn default() -> Self {
        Self {
            modes: 2,
            kappa0: 1.0,
            sigma: 0.05,
            reactor_conductivity: 1.0,
            reaction: 1.0,
            source: 5.0,
            pipe_nodes: 64,
            reactor_nodes: 64,
        }
    }
}

impl HeatNetworkConfig {
    pub fn with_modes(modes: usize) -> Self {
        Self {
            modes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pipe_nodes < 2 || self.reactor_nodes < 2 {
            return Err(Error::invalid(
                "heat network needs at least 2 nodes per component",
            ));
        }
        let harmonic: f64 = (1..=self.modes).map(|i| 1.0 / i as f64).sum();
        if !(self.kappa0 - self.sigma.abs() * harmonic > 0.0) {
            return Err(Error::invalid(
                "pipe conductivity is not bounded away from zero",
            ));
        }
        if !(self.reactor_conductivity > 0.0) || !(self.reaction >= 0.0) {
            return Err(Error::invalid(
                "reactor needs positive conductivity and nonnegative reaction",
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(Pipe, Reactor)> {
        self.validate()?;
        Ok((
            Pipe {
                modes: self.modes,
                kappa0: self.kappa0,
                sigma: self.sigma,
                nodes: self.pipe_nodes,
            },
            Reactor {
                conductivity: self.reactor_conductivity,
                reaction: self.reaction,
                source: self.source,
                nodes: self.reactor_nodes,
            },
        ))
    }
}

/// Linear diffusion with random conductivity. Unknowns `T₁ … T_n` at
/// `z_i = i/n`; `T₀ = 0` is eliminated.
#[derive(Clone, Debug)]
pub struct Pipe {
    pub modes: usize,
    pub kappa0: f64,
    pub sigma: f64,
    pub nodes: usize,
}

impl Pipe {
    pub fn conductivity(&self, z: f64, x: &[f64]) -> f64 {
        let variation: f64 = x
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                let k = (i + 1) as f64;
                xi / k * (k * std::f64::consts::PI * z).sin()
            })
            .sum();
        self.kappa0 + self.sigma * variation
    }

    /// Harmonic-mean conductivity on the face between nodes `i-1` and `i`.
    fn face_conductivities(&self, x: &[f64]) -> Vec<f64> {
        let h = 1.0 / self.nodes as f64;
        let nodal: Vec<f64> = (0..=self.nodes)
            .map(|i| self.conductivity(i as f64 * h, x))
            .collect();
        (1..=self.nodes)
            .map(|i| 2.0 * nodal[i - 1] * nodal[i] / (nodal[i - 1] + nodal[i]))
            .collect()
    }

    /// Tridiagonal bands of the (constant) Jacobian.
    fn bands(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.nodes;
        let h = 1.0 / n as f64;
        let faces = self.face_conductivities(x);
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for r in 0..n {
            // row r holds the equation for node r+1; faces[r] lies to its left
            let left = faces[r];
            if r + 1 < n {
                let right = faces[r + 1];
                diag[r] = left + right;
                upper[r] = -right;
            } else {
                diag[r] = left;
            }
            if r > 0 {
                lower[r] = -left;
            }
            // interior rows are flux differences per h², the end row is a flux per h
            let scale = if r + 1 < n { 1.0 / (h * h) } else { 1.0 / h };
            lower[r] *= scale;
            diag[r] *= scale;
            upper[r] *= scale;
        }
        (lower, diag, upper)
    }

    fn check(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<()> {
        if u.len() != self.nodes || v_in.len() != 1 || x.len() != self.modes {
            return Err(Error::invalid("pipe argument sizes do not match"));
        }
        Ok(())
    }
}

impl ComponentModel for Pipe {
    fn state_dim(&self) -> usize {
        self.nodes
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        self.modes
    }

    fn residual(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array1<f64>> {
        self.check(u, v_in, x)?;
        let (lower, diag, upper) = self.bands(x);
        let n = self.nodes;
        let mut f = Array1::zeros(n);
        for r in 0..n {
            let mut acc = diag[r] * u[r];
            if r > 0 {
                acc += lower[r] * u[r - 1];
            }
            if r + 1 < n {
                acc += upper[r] * u[r + 1];
            }
            f[r] = acc;
        }
        f[n - 1] -= v_in[0];
        Ok(f)
    }

    fn state_jacobian(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array2<f64>> {
        self.check(u, v_in, x)?;
        Ok(dense_from_bands(self.bands(x)))
    }

    fn input_jacobian(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array2<f64>> {
        self.check(u, v_in, x)?;
        let mut j = Array2::zeros((self.nodes, 1));
        j[[self.nodes - 1, 0]] = -1.0;
        Ok(j)
    }

    fn output(&self, u: &[f64]) -> Array1<f64> {
        Array1::from(vec![u[self.nodes - 1]])
    }

    fn output_jacobian(&self, _u: &[f64]) -> Array2<f64> {
        let mut j = Array2::zeros((1, self.nodes));
        j[[0, self.nodes - 1]] = 1.0;
        j
    }

    fn solve_linearized(
        &self,
        u: &[f64],
        v_in: &[f64],
        x: &[f64],
        mut rhs: Array2<f64>,
    ) -> Result<Array2<f64>> {
        self.check(u, v_in, x)?;
        let (lower, diag, upper) = self.bands(x);
        thomas(&lower, &diag, &upper, rhs.view_mut())?;
        Ok(rhs)
    }
}

/// Diffusion-reaction with Dirichlet data `v₁` at `z = 0` and a zero-flux end.
/// Unknowns `T₀ … T_n` at `z_i = i/n`.
#[derive(Clone, Debug)]
pub struct Reactor {
    pub conductivity: f64,
    pub reaction: f64,
    pub source: f64,
    pub nodes: usize,
}

impl Reactor {
    fn h(&self) -> f64 {
        1.0 / self.nodes as f64
    }

    fn bands(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.nodes;
        let k = self.conductivity / (self.h() * self.h());
        let mut lower = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut upper = vec![0.0; n + 1];
        diag[0] = 1.0;
        for i in 1..=n {
            diag[i] = 2.0 * k + 3.0 * self.reaction * u[i] * u[i];
            if i < n {
                lower[i] = -k;
                upper[i] = -k;
            } else {
                lower[i] = -2.0 * k;
            }
        }
        (lower, diag, upper)
    }

    fn check(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<()> {
        if u.len() != self.nodes + 1 || v_in.len() != 1 || !x.is_empty() {
            return Err(Error::invalid("reactor argument sizes do not match"));
        }
        Ok(())
    }
}

impl ComponentModel for Reactor {
    fn state_dim(&self) -> usize {
        self.nodes + 1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        0
    }

    fn residual(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array1<f64>> {
        self.check(u, v_in, x)?;
        let n = self.nodes;
        let k = self.conductivity / (self.h() * self.h());
        let mut f = Array1::zeros(n + 1);
        f[0] = u[0] - v_in[0];
        for i in 1..=n {
            let diffusion = if i < n {
                -k * (u[i + 1] - 2.0 * u[i] + u[i - 1])
            } else {
                -2.0 * k * (u[n - 1] - u[n])
            };
            f[i] = diffusion + self.reaction * u[i].powi(3) - self.source;
        }
        Ok(f)
    }

    fn state_jacobian(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array2<f64>> {
        self.check(u, v_in, x)?;
        Ok(dense_from_bands(self.bands(u)))
    }

    fn input_jacobian(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array2<f64>> {
        self.check(u, v_in, x)?;
        let mut j = Array2::zeros((self.nodes + 1, 1));
        j[[0, 0]] = -1.0;
        Ok(j)
    }

    /// Second-order one-sided flux `κ T′(0)`, corrected with the equation
    /// `κ T″ = γT³ − T_s` at the boundary.
    fn output(&self, u: &[f64]) -> Array1<f64> {
        let h = self.h();
        let k = self.conductivity;
        let flux = k * (u[1] - u[0]) / h - 0.5 * h * (self.reaction * u[0].powi(3) - self.source);
        Array1::from(vec![flux])
    }

    fn output_jacobian(&self, u: &[f64]) -> Array2<f64> {
        let h = self.h();
        let k = self.conductivity;
        let mut j = Array2::zeros((1, self.nodes + 1));
        j[[0, 0]] = -k / h - 1.5 * h * self.reaction * u[0] * u[0];
        j[[0, 1]] = k / h;
        j
    }

    fn initial_state(&self, v_in: &[f64], _x: &[f64]) -> Vec<f64> {
        vec![v_in.first().copied().unwrap_or(0.0); self.nodes + 1]
    }

    fn solve_linearized(
        &self,
        u: &[f64],
        v_in: &[f64],
        x: &[f64],
        mut rhs: Array2<f64>,
    ) -> Result<Array2<f64>> {
        self.check(u, v_in, x)?;
        let (lower, diag, upper) = self.bands(u);
        thomas(&lower, &diag, &upper, rhs.view_mut())?;
        Ok(rhs)
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: ArrayViewMut2<f64>) -> Result<()> {
    solve_tridiagonal(lower, diag, upper, rhs)
        .map_err(|e| Error::ComponentSolve(format!("tridiagonal solve failed: {e}")))
}

fn dense_from_bands((lower, diag, upper): (Vec<f64>, Vec<f64>, Vec<f64>)) -> Array2<f64> {
    let n = diag.len();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = diag[i];
        if i > 0 {
            a[[i, i - 1]] = lower[i];
        }
        if i + 1 < n {
            a[[i, i + 1]] = upper[i];
        }
    }
    a
}

/// Sample mean and standard deviation of `v₁` and their standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub samples: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub mean_std_error: f64,
    pub std_dev_std_error: f64,
}

/// Monte Carlo of `v₁` using deterministic nonlinear elimination at
/// uniformly drawn inputs. Samples are drawn sequentially from a seeded
/// ChaCha8 stream and solved in parallel.
pub fn monte_carlo_v1(
    config: &HeatNetworkConfig,
    samples: usize,
    seed: u64,
    opts: &NetworkOptions,
) -> Result<MonteCarloSummary> {
    if samples < 2 {
        return Err(Error::invalid("Monte Carlo needs at least two samples"));
    }
    let (pipe, reactor) = config.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            (0..config.modes)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();
    let v0 = CouplingState::zeros(1, 1);
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| eliminate_solve(&pipe, &reactor, x, &v0, opts).map(|(v, _)| v.v1[0]))
        .collect::<Result<_>>()?;
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_dev = var.sqrt();
    Ok(MonteCarloSummary {
        samples,
        mean,
        std_dev,
        mean_std_error: std_dev / n.sqrt(),
        std_dev_std_error: std_dev / (2.0 * (n - 1.0)).sqrt(),
    })
}

/// Smallest and largest number of random modes accepted by the experiment.
pub const EXPERIMENT_MODES: std::ops::RangeInclusive<usize> = 2..=5;

/// One row of the heat-network table. Counts and times refer to the run with
/// the reduced components; `R` is the largest solve count of any reduced
/// component in any reduced Newton iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatNetworkRow {
    pub s: usize,
    #[serde(rename = "P1")]
    pub basis_size: usize,
    #[serde(rename = "Q1")]
    pub grid_size: usize,
    #[serde(rename = "Pp1")]
    pub reduced_size: usize,
    #[serde(rename = "R")]
    pub nonzeros: usize,
    pub solves_c1: usize,
    pub solves_c2: usize,
    pub time_c1: f64,
    pub time_c2: f64,
}

/// Full and reduced Galerkin solutions of the heat network for one `s`.
#[derive(Clone, Debug)]
pub struct HeatNetworkReport {
    pub row: HeatNetworkRow,
    pub full_state: GalerkinState,
    pub full_trace: SolveTrace,
    pub reduced_state: GalerkinState,
    pub reduced: ReducedSolveReport,
    /// Max-norm difference between the full and reduced coefficients.
    pub coefficient_difference: f64,
}

/// Solves the heat network by Galerkin Newton twice, once with full
/// quadrature and once with the reactor reduced in the intermediate
/// variables `(v₁, v₂)`.
pub fn heat_network_experiment(
    config: &HeatNetworkConfig,
    degree: usize,
    reduced_degree: usize,
    opts: &GalerkinOptions,
) -> Result<HeatNetworkReport> {
    let reduced = ReducedGalerkinOptions {
        variables: IntermediateVariables::BothCouplings,
        ..ReducedGalerkinOptions::new(reduced_degree, ReduceWhich::Component2)
    };
    heat_network_experiment_with(config, degree, &reduced, opts)
}

/// [`heat_network_experiment`] with caller-chosen reduction settings.
pub fn heat_network_experiment_with(
    config: &HeatNetworkConfig,
    degree: usize,
    reduced_opts: &ReducedGalerkinOptions,
    opts: &GalerkinOptions,
) -> Result<HeatNetworkReport> {
    if !EXPERIMENT_MODES.contains(&config.modes) {
        return Err(Error::invalid(format!(
            "heat-network experiment needs s in {}..={}, got {}",
            EXPERIMENT_MODES.start(),
            EXPERIMENT_MODES.end(),
            config.modes
        )));
    }
    if degree == 0 || reduced_opts.reduced_degree == 0 {
        return Err(Error::invalid("degrees must be at least 1"));
    }
    let (pipe, reactor) = config.build()?;
    let problem = GalerkinProblem::new(&pipe, &reactor, degree)?;
    let (full_state, full_trace) = problem.newton(&problem.zero_state(), opts)?;
    let (reduced_state, reduced) =
        problem.newton_reduced(&problem.zero_state(), opts, reduced_opts)?;

    let records = || reduced.reductions.iter().flatten();
    let totals = reduced.trace.total_solves();
    let row = HeatNetworkRow {
        s: config.modes,
        basis_size: problem.basis().len(),
        grid_size: problem.grid().len(),
        reduced_size: records().map(|r| r.nominal_size).max().unwrap_or(0),
        nonzeros: records().map(|r| r.nonzeros).max().unwrap_or(0),
        solves_c1: totals[0],
        solves_c2: totals[1],
        time_c1: reduced.trace.component_seconds[0],
        time_c2: reduced.trace.component_seconds[1],
    };
    Ok(HeatNetworkReport {
        row,
        coefficient_difference: full_state.max_difference(&reduced_state),
        full_state,
        full_trace,
        reduced_state,
        reduced,
    })
}
