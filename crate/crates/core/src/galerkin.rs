//! Intrusive stochastic Galerkin solution for the polynomial chaos
//! coefficients of the coupling variables.
//!
//! With `ṽ₁ = Ψ v̂₁` and `ṽ₂ = Ψ v̂₂`, the Galerkin residual is
//! ```text
//! ĥ₁ = Ψᵀ W ṽ₁ − ĝ₁,   ĝ₁ = Ψᵀ W g₁(u₁(ṽ₂, x₁))
//! ĥ₂ = Ψᵀ W ṽ₂ − ĝ₂,   ĝ₂ = Ψᵀ W g₂(u₂(ṽ₁, x₂))
//! ```
//! and Newton's method uses the Jacobian whose diagonal blocks are identities
//! and whose off-diagonal `(i, j)` sub-blocks are
//! `−Σ_k ĝ'_k ⟨ψᵢ ψⱼ ψ_k⟩`, where `ĝ'` are the pseudospectral coefficients of
//! the sensitivity `∂g/∂v`.
//!
//! The reduced variant replaces the projections of an expensive component's
//! `g` and `∂g/∂v` with the reduced basis in intermediate variables
//! `y = (x_i, coupling surrogates)` and its sparse modified quadrature, so that
//! component is solved only where the modified weights are nonzero.

use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::chaos_basis::{legendre_normalized, TensorBasis};
use crate::error::{Error, Result};
use crate::linalg::{binomial, max_abs, Lu};
use crate::network::{solve_component, ComponentModel, SolveTrace};
use crate::pseudospectral::project;
use crate::quadrature::{gauss_legendre_1d, tensor_grid, QuadratureGrid};
use crate::reduction::{
    monomial_matrix, reduced_project, reduced_weights_with, weighted_mgs_with, DependentColumns,
    ModifiedQuadrature, ReducedBasis, ReductionOptions,
};

/// Triple products with magnitude below this are not stored.
pub const TRIPLE_PRODUCT_CUTOFF: f64 = 1e-13;

/// Chaos coefficients of both coupling vectors, one row per basis polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinState {
    pub v1: Array2<f64>,
    pub v2: Array2<f64>,
}

impl GalerkinState {
    pub fn zeros(basis_size: usize, m1: usize, m2: usize) -> Self {
        Self {
            v1: Array2::zeros((basis_size, m1)),
            v2: Array2::zeros((basis_size, m2)),
        }
    }

    pub fn basis_size(&self) -> usize {
        self.v1.nrows()
    }

    /// Unknown vector `[v̂₁ (row-major), v̂₂ (row-major)]`.
    pub fn to_vector(&self) -> Array1<f64> {
        self.v1.iter().chain(self.v2.iter()).copied().collect()
    }

    pub fn from_vector(z: &Array1<f64>, basis_size: usize, m1: usize, m2: usize) -> Result<Self> {
        let n1 = basis_size * m1;
        if z.len() != n1 + basis_size * m2 {
            return Err(Error::invalid("Galerkin vector has the wrong length"));
        }
        let v1 = Array2::from_shape_vec((basis_size, m1), z.slice(s![..n1]).to_vec())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let v2 = Array2::from_shape_vec((basis_size, m2), z.slice(s![n1..]).to_vec())
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self { v1, v2 })
    }

    pub fn max_difference(&self, other: &GalerkinState) -> f64 {
        let d1 = max_abs((&self.v1 - &other.v1).iter().copied());
        let d2 = max_abs((&self.v2 - &other.v2).iter().copied());
        d1.max(d2)
    }

    /// Mean and standard deviation of each `v₁` component.
    pub fn v1_moments(&self) -> (Array1<f64>, Array1<f64>) {
        let mean = self.v1.row(0).to_owned();
        let sd = self
            .v1
            .slice(s![1.., ..])
            .map(|c| c * c)
            .sum_axis(Axis(0))
            .mapv(f64::sqrt);
        (mean, sd)
    }

    fn check(&self, basis_size: usize, m1: usize, m2: usize) -> Result<()> {
        if self.v1.dim() != (basis_size, m1) || self.v2.dim() != (basis_size, m2) {
            return Err(Error::invalid(format!(
                "Galerkin state shapes {:?}/{:?} do not match basis size {basis_size}",
                self.v1.dim(),
                self.v2.dim()
            )));
        }
        if !self.v1.iter().chain(self.v2.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("Galerkin state is not finite"));
        }
        Ok(())
    }
}

/// Sparse table of `⟨ψᵢ ψⱼ ψ_k⟩` stored once per index multiset.
#[derive(Clone, Debug)]
pub struct TripleProductTensor {
    size: usize,
    /// Canonical entries with `i ≤ j ≤ k`, sorted.
    entries: Vec<(usize, usize, usize, f64)>,
}

impl TripleProductTensor {
    pub fn basis_size(&self) -> usize {
        self.size
    }

    /// Number of stored canonical entries.
    pub fn stored(&self) -> usize {
        self.entries.len()
    }

    pub fn canonical_entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut key = [i, j, k];
        key.sort_unstable();
        self.entries
            .binary_search_by(|e| (e.0, e.1, e.2).cmp(&(key[0], key[1], key[2])))
            .map(|pos| self.entries[pos].3)
            .unwrap_or(0.0)
    }

    /// Every ordered `(i, j, k)` with a stored value.
    pub fn expanded(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.entries.len() * 6);
        for &(i, j, k, t) in &self.entries {
            let mut perms = vec![
                (i, j, k),
                (i, k, j),
                (j, i, k),
                (j, k, i),
                (k, i, j),
                (k, j, i),
            ];
            perms.sort_unstable();
            perms.dedup();
            out.extend(perms.into_iter().map(|(a, b, c)| (a, b, c, t)));
        }
        out
    }
}

/// Triple products of a total-degree tensor basis, computed per dimension on
/// a Gauss rule with `⌈(3N+1)/2⌉` points, exact for degree `3N`.
pub fn triple_products(basis: &TensorBasis) -> TripleProductTensor {
    let degree = basis.max_degree();
    let points = (3 * degree + 1).div_ceil(2).max(1);
    let (nodes, weights) = gauss_legendre_1d(points).expect("rule size is positive");
    let tables: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&x| legendre_normalized(degree, x))
        .collect();
    let d1 = degree + 1;
    let mut line = vec![0.0; d1 * d1 * d1];
    for a in 0..d1 {
        for b in 0..d1 {
            for c in 0..d1 {
                line[(a * d1 + b) * d1 + c] = tables
                    .iter()
                    .zip(&weights)
                    .map(|(t, w)| w * t[a] * t[b] * t[c])
                    .sum();
            }
        }
    }
    let indices = basis.index_set().indices();
    let size = indices.len();
    let entries: Vec<(usize, usize, usize, f64)> = (0..size)
        .into_par_iter()
        .flat_map_iter(|i| {
            let line = &line;
            (i..size).flat_map(move |j| {
                (j..size).filter_map(move |k| {
                    let mut value = 1.0;
                    for ((&a, &b), &c) in indices[i]
                        .entries()
                        .iter()
                        .zip(indices[j].entries())
                        .zip(indices[k].entries())
                    {
                        value *= line[(a * d1 + b) * d1 + c];
                        if value.abs() < TRIPLE_PRODUCT_CUTOFF {
                            return None;
                        }
                    }
                    Some((i, j, k, value))
                })
            })
        })
        .collect();
    TripleProductTensor { size, entries }
}

#[derive(Clone, Copy, Debug)]
pub struct GalerkinOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 30,
        }
    }
}

/// Which components use reduced bases and modified quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReduceWhich {
    Component1,
    Component2,
    Both,
}

impl ReduceWhich {
    fn includes(self, component: usize) -> bool {
        matches!(
            (self, component),
            (ReduceWhich::Both, _) | (ReduceWhich::Component1, 0) | (ReduceWhich::Component2, 1)
        )
    }
}

/// Coupling surrogates appended to a component's own inputs to form its
/// intermediate variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntermediateVariables {
    /// `y₁ = (x₁, ṽ₂)`, `y₂ = (x₂, ṽ₁)`: only the component's actual input.
    IncomingCoupling,
    /// `yᵢ = (xᵢ, ṽ₁, ṽ₂)`: both coupling surrogates.
    BothCouplings,
}

#[derive(Clone, Debug)]
pub struct ReducedGalerkinOptions {
    /// Total degree `N'` of the reduced bases.
    pub reduced_degree: usize,
    pub which: ReduceWhich,
    pub variables: IntermediateVariables,
    pub reduction: ReductionOptions,
    /// Relative diagonal below which a monomial column is left out of the
    /// reduced basis.
    pub dependent_tol: f64,
    /// The reduced phase ends once the residual fails to shrink by this factor.
    pub stagnation_ratio: f64,
}

impl ReducedGalerkinOptions {
    pub fn new(reduced_degree: usize, which: ReduceWhich) -> Self {
        Self {
            reduced_degree,
            which,
            variables: IntermediateVariables::BothCouplings,
            reduction: ReductionOptions::default(),
            dependent_tol: 1e-8,
            stagnation_ratio: 0.5,
        }
    }
}

/// Outcome of one reduction attempt inside a reduced Newton iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionRecord {
    pub component: usize,
    /// `C(N'+m, m)` for the `m` intermediate variables.
    pub nominal_size: usize,
    /// Basis functions kept after dropping dependent monomials.
    pub basis_size: usize,
    pub rank_used: usize,
    pub nonzeros: usize,
    pub orthogonality_error: f64,
    /// Set when the reduction failed and full quadrature was used instead.
    pub fallback: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ReducedSolveReport {
    pub trace: SolveTrace,
    /// Reduction records per reduced iteration.
    pub reductions: Vec<Vec<ReductionRecord>>,
    /// Residual evaluations made with reduced quadrature.
    pub reduced_evaluations: usize,
    /// Full-quadrature residual of the returned state.
    pub final_full_residual: f64,
}

/// Projected residual and sensitivity coefficients at one state.
#[derive(Clone, Debug)]
pub struct GalerkinEvaluation {
    pub h1: Array2<f64>,
    pub h2: Array2<f64>,
    /// `(P+1) × m₁m₂`, entry `(k, a·m₂ + b)` is the coefficient of `∂g₁ₐ/∂v₂ᵦ`.
    pub dg1: Array2<f64>,
    /// `(P+1) × m₂m₁`, entry `(k, b·m₁ + a)` is the coefficient of `∂g₂ᵦ/∂v₁ₐ`.
    pub dg2: Array2<f64>,
    pub solves: [usize; 2],
    pub seconds: [f64; 2],
    pub reductions: Vec<ReductionRecord>,
}

impl GalerkinEvaluation {
    pub fn residual_norm(&self) -> f64 {
        max_abs(self.h1.iter().chain(self.h2.iter()).copied())
    }

    fn residual_vector(&self) -> Array1<f64> {
        self.h1.iter().chain(self.h2.iter()).copied().collect()
    }
}

/// A Galerkin discretization of a two-component network: basis, tensor
/// quadrature grid and triple products.
pub struct GalerkinProblem<'a> {
    c1: &'a dyn ComponentModel,
    c2: &'a dyn ComponentModel,
    basis: TensorBasis,
    grid: QuadratureGrid,
    psi: Array2<f64>,
    triple: TripleProductTensor,
}

impl<'a> GalerkinProblem<'a> {
    /// Total-degree basis of degree `degree` on the `N+1`-point Gauss tensor
    /// grid over all random inputs of both components.
    pub fn new(
        c1: &'a dyn ComponentModel,
        c2: &'a dyn ComponentModel,
        degree: usize,
    ) -> Result<Self> {
        let dim = c1.param_dim() + c2.param_dim();
        let basis = TensorBasis::total_degree(dim, degree);
        let grid = tensor_grid(dim, degree + 1)?;
        Self::with_grid(c1, c2, basis, grid)
    }

    pub fn with_grid(
        c1: &'a dyn ComponentModel,
        c2: &'a dyn ComponentModel,
        basis: TensorBasis,
        grid: QuadratureGrid,
    ) -> Result<Self> {
        if c1.input_dim() != c2.output_dim() || c2.input_dim() != c1.output_dim() {
            return Err(Error::invalid(
                "component coupling dimensions are inconsistent",
            ));
        }
        let dim = c1.param_dim() + c2.param_dim();
        if basis.dimension() != dim || grid.dimension() != dim {
            return Err(Error::invalid(format!(
                "basis and grid must have dimension {dim}"
            )));
        }
        let psi = basis.evaluate(grid.points.view())?;
        let triple = triple_products(&basis);
        Ok(Self {
            c1,
            c2,
            basis,
            grid,
            psi,
            triple,
        })
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn psi(&self) -> ArrayView2<'_, f64> {
        self.psi.view()
    }

    pub fn triple_products(&self) -> &TripleProductTensor {
        &self.triple
    }

    pub fn coupling_dims(&self) -> (usize, usize) {
        (self.c1.output_dim(), self.c2.output_dim())
    }

    pub fn zero_state(&self) -> GalerkinState {
        let (m1, m2) = self.coupling_dims();
        GalerkinState::zeros(self.basis.len(), m1, m2)
    }

    fn component(&self, index: usize) -> &dyn ComponentModel {
        if index == 0 {
            self.c1
        } else {
            self.c2
        }
    }

    /// Columns of the grid holding component `index`'s random inputs.
    fn param_range(&self, index: usize) -> std::ops::Range<usize> {
        let p1 = self.c1.param_dim();
        if index == 0 {
            0..p1
        } else {
            p1..p1 + self.c2.param_dim()
        }
    }

    /// Solves component `index` at the listed grid points with incoming
    /// coupling values `incoming` (one row per grid point). Returns `g` and
    /// flattened `∂g/∂v` rows in point order.
    fn solve_at(
        &self,
        index: usize,
        points: &[usize],
        incoming: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let model = self.component(index);
        let range = self.param_range(index);
        let (m_out, m_in) = (model.output_dim(), model.input_dim());
        let results: Vec<(Array1<f64>, Array2<f64>)> = points
            .par_iter()
            .map(|&j| {
                let x: Vec<f64> = self.grid.points.row(j).slice(s![range.clone()]).to_vec();
                let v_in = incoming.row(j).to_vec();
                solve_component(model, index, &v_in, &x, true)
                    .map(|sol| (sol.output, sol.dg_dv))
                    .map_err(|e| e.in_component(index, Some(j)))
            })
            .collect::<Result<_>>()?;
        let mut g = Array2::zeros((points.len(), m_out));
        let mut dg = Array2::zeros((points.len(), m_out * m_in));
        for (r, (out, sens)) in results.into_iter().enumerate() {
            g.row_mut(r).assign(&out);
            for (c, v) in sens.iter().enumerate() {
                dg[[r, c]] = *v;
            }
        }
        Ok((g, dg))
    }

    /// Full-quadrature projection of `g` and `∂g/∂v` for one component.
    fn project_full(
        &self,
        index: usize,
        incoming: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>, usize)> {
        let all: Vec<usize> = (0..self.grid.len()).collect();
        let (g, dg) = self.solve_at(index, &all, incoming)?;
        let w = self.grid.weights.view();
        let g_hat = project(g.view(), self.psi.view(), w)?.coefficients;
        let dg_hat = project(dg.view(), self.psi.view(), w)?.coefficients;
        Ok((g_hat, dg_hat, all.len()))
    }

    /// Intermediate-variable samples for component `index`, each column mapped
    /// affinely onto `[-1, 1]` over the grid (constant columns become zero).
    fn intermediate_samples(
        &self,
        index: usize,
        variables: IntermediateVariables,
        v1: &Array2<f64>,
        v2: &Array2<f64>,
    ) -> Array2<f64> {
        let own = self
            .grid
            .points
            .slice(s![.., self.param_range(index)])
            .to_owned();
        let mut blocks = vec![own.view()];
        match (variables, index) {
            (IntermediateVariables::IncomingCoupling, 0) => blocks.push(v2.view()),
            (IntermediateVariables::IncomingCoupling, _) => blocks.push(v1.view()),
            (IntermediateVariables::BothCouplings, _) => {
                blocks.push(v1.view());
                blocks.push(v2.view());
            }
        }
        let mut y = ndarray::concatenate(Axis(1), &blocks).expect("row counts agree");
        for mut col in y.columns_mut() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            if half > f64::EPSILON * mid.abs().max(1.0) {
                col.mapv_inplace(|v| (v - mid) / half);
            } else {
                col.fill(0.0);
            }
        }
        y
    }

    /// Reduced projection of `g` and `∂g/∂v` for one component, or `None`
    /// when the reduction itself fails.
    fn project_reduced(
        &self,
        index: usize,
        incoming: &Array2<f64>,
        y: &Array2<f64>,
        opts: &ReducedGalerkinOptions,
    ) -> Result<(Array2<f64>, Array2<f64>, usize, ReductionRecord)> {
        let w = self.grid.weights.view();
        let nominal_size =
            binomial(opts.reduced_degree + y.ncols(), y.ncols()).unwrap_or(usize::MAX);
        let attempt = || -> Result<(ReducedBasis, ModifiedQuadrature)> {
            let monomials = monomial_matrix(y.view(), opts.reduced_degree);
            let basis = weighted_mgs_with(
                &monomials,
                w,
                DependentColumns::Drop {
                    tol: opts.dependent_tol,
                },
            )?;
            let mq = reduced_weights_with(basis.phi.view(), w, &opts.reduction)?;
            Ok((basis, mq))
        };
        match attempt() {
            Ok((basis, mq)) => {
                let (g, dg) = self.solve_at(index, &mq.support, incoming)?;
                let phi = basis.phi.view();
                let psi = self.psi.view();
                let g_hat = reduced_project(g.view(), &mq, phi, psi, w)?.coefficients;
                let dg_hat = reduced_project(dg.view(), &mq, phi, psi, w)?.coefficients;
                let record = ReductionRecord {
                    component: index,
                    nominal_size,
                    basis_size: basis.len(),
                    rank_used: mq.rank_used,
                    nonzeros: mq.nonzero_count,
                    orthogonality_error: mq.orthogonality_error,
                    fallback: false,
                };
                Ok((g_hat, dg_hat, mq.nonzero_count, record))
            }
            Err(e) => {
                log::warn!(
                    "reduction for component {} failed ({e}); using full quadrature",
                    index + 1
                );
                let (g_hat, dg_hat, solves) = self.project_full(index, incoming)?;
                let record = ReductionRecord {
                    component: index,
                    nominal_size,
                    basis_size: 0,
                    rank_used: 0,
                    nonzeros: solves,
                    orthogonality_error: f64::NAN,
                    fallback: true,
                };
                Ok((g_hat, dg_hat, solves, record))
            }
        }
    }

    fn evaluate(
        &self,
        state: &GalerkinState,
        reduced: Option<&ReducedGalerkinOptions>,
    ) -> Result<GalerkinEvaluation> {
        let (m1, m2) = self.coupling_dims();
        state.check(self.basis.len(), m1, m2)?;
        let v1 = self.psi.dot(&state.v1);
        let v2 = self.psi.dot(&state.v2);
        let w = self.grid.weights.view();
        let mut g_hat = Vec::with_capacity(2);
        let mut dg_hat = Vec::with_capacity(2);
        let mut solves = [0usize; 2];
        let mut seconds = [0.0; 2];
        let mut reductions = Vec::new();
        for index in 0..2 {
            let start = Instant::now();
            let incoming = if index == 0 { &v2 } else { &v1 };
            let (g, dg, count) = match reduced {
                Some(opts) if opts.which.includes(index) => {
                    let y = self.intermediate_samples(index, opts.variables, &v1, &v2);
                    let (g, dg, count, record) = self.project_reduced(index, incoming, &y, opts)?;
                    reductions.push(record);
                    (g, dg, count)
                }
                _ => self.project_full(index, incoming)?,
            };
            g_hat.push(g);
            dg_hat.push(dg);
            solves[index] = count;
            seconds[index] = start.elapsed().as_secs_f64();
        }
        let v1_proj = project(v1.view(), self.psi.view(), w)?.coefficients;
        let v2_proj = project(v2.view(), self.psi.view(), w)?.coefficients;
        let dg2 = dg_hat.pop().expect("two components");
        let dg1 = dg_hat.pop().expect("two components");
        Ok(GalerkinEvaluation {
            h1: v1_proj - &g_hat[0],
            h2: v2_proj - &g_hat[1],
            dg1,
            dg2,
            solves,
            seconds,
            reductions,
        })
    }

    /// Projected residuals `(ĥ₁, ĥ₂)` with full quadrature.
    pub fn residual(&self, state: &GalerkinState) -> Result<(Array2<f64>, Array2<f64>)> {
        let e = self.evaluate(state, None)?;
        Ok((e.h1, e.h2))
    }

    /// Full-quadrature residual and sensitivity coefficients.
    pub fn evaluate_full(&self, state: &GalerkinState) -> Result<GalerkinEvaluation> {
        self.evaluate(state, None)
    }

    /// Newton Jacobian assembled from sensitivity coefficients.
    pub fn jacobian(&self, evaluation: &GalerkinEvaluation) -> Array2<f64> {
        let (m1, m2) = self.coupling_dims();
        let size = self.basis.len();
        let offset = size * m1;
        let mut jac = Array2::<f64>::eye(size * (m1 + m2));
        for (i, j, k, t) in self.triple.expanded() {
            for a in 0..m1 {
                for b in 0..m2 {
                    jac[[i * m1 + a, offset + j * m2 + b]] -= t * evaluation.dg1[[k, a * m2 + b]];
                    jac[[offset + i * m2 + b, j * m1 + a]] -= t * evaluation.dg2[[k, b * m1 + a]];
                }
            }
        }
        jac
    }

    fn newton_step(
        &self,
        state: &GalerkinState,
        evaluation: &GalerkinEvaluation,
    ) -> Result<GalerkinState> {
        let (m1, m2) = self.coupling_dims();
        let jac = self.jacobian(evaluation);
        let mut step: Vec<f64> = evaluation.residual_vector().iter().map(|r| -r).collect();
        Lu::factor(jac)?.solve_in_place(&mut step);
        let z = state.to_vector() + &Array1::from(step);
        GalerkinState::from_vector(&z, self.basis.len(), m1, m2)
    }

    /// Galerkin Newton with full quadrature at every iteration.
    pub fn newton(
        &self,
        state0: &GalerkinState,
        opts: &GalerkinOptions,
    ) -> Result<(GalerkinState, SolveTrace)> {
        if !(opts.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let mut state = state0.clone();
        let mut trace = SolveTrace::default();
        loop {
            let evaluation = self.evaluate(&state, None)?;
            let norm = evaluation.residual_norm();
            trace.record(norm, evaluation.solves);
            add_seconds(&mut trace, &evaluation);
            if norm <= opts.tol {
                return Ok((state, trace));
            }
            if !norm.is_finite() || trace.iterations >= opts.max_iterations {
                return Err(Error::NonConvergence {
                    solver: "Galerkin Newton",
                    trace: Box::new(trace),
                });
            }
            state = self.newton_step(&state, &evaluation)?;
            trace.iterations += 1;
        }
    }

    /// Galerkin Newton whose residual and Jacobian use reduced bases and
    /// modified quadrature for the selected components.
    ///
    /// The reduced phase runs until its residual meets the tolerance or stops
    /// shrinking. The iterate is then checked with full quadrature and, if
    /// needed, finished with full Newton steps; those solves are reported in
    /// `verification_solves`.
    pub fn newton_reduced(
        &self,
        state0: &GalerkinState,
        opts: &GalerkinOptions,
        reduced: &ReducedGalerkinOptions,
    ) -> Result<(GalerkinState, ReducedSolveReport)> {
        if !(opts.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if reduced.reduced_degree == 0 {
            return Err(Error::invalid("reduced degree must be at least 1"));
        }
        let mut state = state0.clone();
        let mut report = ReducedSolveReport::default();
        loop {
            let evaluation = self.evaluate(&state, Some(reduced))?;
            let norm = evaluation.residual_norm();
            let previous = report.trace.residual_norms.last().copied();
            report.trace.record(norm, evaluation.solves);
            add_seconds(&mut report.trace, &evaluation);
            report.reductions.push(evaluation.reductions.clone());
            report.reduced_evaluations += 1;
            let stagnated = previous.is_some_and(|p| norm > reduced.stagnation_ratio * p);
            if !norm.is_finite() {
                return Err(Error::NonConvergence {
                    solver: "reduced Galerkin Newton",
                    trace: Box::new(report.trace),
                });
            }
            if norm <= opts.tol || stagnated || report.trace.iterations >= opts.max_iterations {
                break;
            }
            state = self.newton_step(&state, &evaluation)?;
            report.trace.iterations += 1;
        }

        // acceptance is decided on the full-quadrature residual
        let mut polish_steps = 0;
        loop {
            let evaluation = self.evaluate(&state, None)?;
            report.trace.verification_solves[0] += evaluation.solves[0];
            report.trace.verification_solves[1] += evaluation.solves[1];
            add_seconds(&mut report.trace, &evaluation);
            let norm = evaluation.residual_norm();
            report.final_full_residual = norm;
            if norm <= opts.tol {
                return Ok((state, report));
            }
            if !norm.is_finite() || polish_steps >= opts.max_iterations {
                return Err(Error::NonConvergence {
                    solver: "reduced Galerkin Newton",
                    trace: Box::new(report.trace),
                });
            }
            state = self.newton_step(&state, &evaluation)?;
            polish_steps += 1;
        }
    }
}

fn add_seconds(trace: &mut SolveTrace, evaluation: &GalerkinEvaluation) {
    trace.component_seconds[0] += evaluation.seconds[0];
    trace.component_seconds[1] += evaluation.seconds[1];
}
