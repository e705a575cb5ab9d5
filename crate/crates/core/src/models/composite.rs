//! Composite-function benchmark `h(y(x)) = exp(y₁ + y₂)` with
//! `y₁ = x₁` and `y₂ = 1/(10 + Σᵢ xᵢ/i)` on `[-1, 1]^s`.
//!
//! For each degree `N` the intermediate variables are replaced by their own
//! degree-`N` pseudospectral surrogates `ỹ`, and the coefficients of
//! `h(ỹ(x))` are computed twice: by full tensor quadrature and by the reduced
//! basis in `ỹ` with a sparse modified quadrature. Both are compared with a
//! full projection at a higher reference degree.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::chaos_basis::TensorBasis;
use crate::error::{Error, Result};
use crate::linalg::{binomial, max_abs};
use crate::pseudospectral::{project, SpectralCoefficients};
use crate::quadrature::{tensor_grid, QuadratureGrid};
use crate::reduction::{
    monomial_matrix, reduced_project, reduced_weights_with, weighted_mgs, ReductionOptions,
};

/// Largest degree accepted by the composite experiment.
pub const MAX_COMPOSITE_DEGREE: usize = 8;
/// Default reference degree for coefficient errors.
pub const DEFAULT_REFERENCE_DEGREE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeFunction {
    pub dimension: usize,
}

impl CompositeFunction {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("composite function needs s ≥ 1"));
        }
        Ok(Self { dimension })
    }

    /// `(y₁, y₂)` at one point.
    pub fn intermediate(&self, x: ArrayView1<f64>) -> [f64; 2] {
        let weighted: f64 = x
            .iter()
            .enumerate()
            .map(|(i, xi)| xi / (i + 1) as f64)
            .sum();
        [x[0], 1.0 / (10.0 + weighted)]
    }

    /// Bounds of `y₂` over the cube.
    pub fn y2_range(&self) -> (f64, f64) {
        let harmonic: f64 = (1..=self.dimension).map(|i| 1.0 / i as f64).sum();
        (1.0 / (10.0 + harmonic), 1.0 / (10.0 - harmonic))
    }

    pub fn outer(y: &[f64]) -> f64 {
        (y[0] + y[1]).exp()
    }

    /// Samples of `y` at every grid point, one row per point.
    pub fn intermediate_samples(&self, points: ArrayView2<f64>) -> Array2<f64> {
        let mut y = Array2::zeros((points.nrows(), 2));
        for (j, x) in points.rows().into_iter().enumerate() {
            let [y1, y2] = self.intermediate(x);
            y[[j, 0]] = y1;
            y[[j, 1]] = y2;
        }
        y
    }
}

/// Everything shared by the full and reduced projections at one degree.
struct DegreeSetup {
    grid: QuadratureGrid,
    psi: Array2<f64>,
    /// Surrogate intermediate samples `ỹ(xʲ)`.
    y_tilde: Array2<f64>,
    /// `h(ỹ(xʲ))`, one column.
    h: Array2<f64>,
}

fn setup(problem: &CompositeFunction, degree: usize) -> Result<DegreeSetup> {
    let grid = tensor_grid(problem.dimension, degree + 1)?;
    let basis = TensorBasis::total_degree(problem.dimension, degree);
    let psi = basis.evaluate(grid.points.view())?;
    let y = problem.intermediate_samples(grid.points.view());
    let y_hat = project(y.view(), psi.view(), grid.weights.view())?;
    let y_tilde = psi.dot(&y_hat.coefficients);
    let h = y_tilde
        .map_axis(Axis(1), |row| CompositeFunction::outer(&[row[0], row[1]]))
        .insert_axis(Axis(1));
    Ok(DegreeSetup {
        grid,
        psi,
        y_tilde,
        h,
    })
}

/// Full pseudospectral coefficients of `h(ỹ)` at one degree.
pub fn full_coefficients(
    problem: &CompositeFunction,
    degree: usize,
) -> Result<SpectralCoefficients> {
    let st = setup(problem, degree)?;
    project(st.h.view(), st.psi.view(), st.grid.weights.view())
}

#[derive(Clone, Debug)]
pub struct CompositeReference {
    pub degree: usize,
    pub coefficients: Array1<f64>,
}

impl CompositeReference {
    pub fn new(problem: &CompositeFunction, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let c = full_coefficients(problem, degree)?;
        Ok(Self {
            degree,
            coefficients: c.coefficients.column(0).to_owned(),
        })
    }

    /// Max-norm distance over the coefficients shared with a lower-degree
    /// vector. Graded ordering makes the lower-degree set a prefix of the
    /// reference set.
    pub fn error(&self, coefficients: ArrayView1<f64>) -> f64 {
        self.coefficients
            .iter()
            .zip(coefficients.iter())
            .map(|(r, c)| (r - c).abs())
            .fold(0.0, f64::max)
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if !(1..=MAX_COMPOSITE_DEGREE).contains(&degree) {
        return Err(Error::invalid(format!(
            "composite degree {degree} outside 1..={MAX_COMPOSITE_DEGREE}"
        )));
    }
    Ok(())
}

/// One row of the composite-function table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositeRow {
    #[serde(rename = "N")]
    pub degree: usize,
    #[serde(rename = "P1")]
    pub basis_size: usize,
    #[serde(rename = "Q1")]
    pub grid_size: usize,
    #[serde(rename = "Pp1")]
    pub reduced_size: usize,
    #[serde(rename = "R")]
    pub nonzeros: usize,
    pub rank_used: usize,
    pub err_full: f64,
    pub err_reduced: f64,
    pub orth_err: f64,
}

/// Runs the full and reduced projections at degree `degree` with a reduced
/// basis of degree `reduced_degree`.
pub fn composite_experiment(
    problem: &CompositeFunction,
    degree: usize,
    reduced_degree: usize,
    opts: &ReductionOptions,
    reference: &CompositeReference,
) -> Result<CompositeRow> {
    check_degree(degree)?;
    if reduced_degree == 0 {
        return Err(Error::invalid("reduced degree must be at least 1"));
    }
    let st = setup(problem, degree)?;
    let weights = st.grid.weights.view();
    let full = project(st.h.view(), st.psi.view(), weights)?;

    let monomials = monomial_matrix(st.y_tilde.view(), reduced_degree);
    let basis = weighted_mgs(&monomials, weights)?;
    let mq = reduced_weights_with(basis.phi.view(), weights, opts)?;
    let at_support = st.h.select(Axis(0), &mq.support);
    let reduced = reduced_project(
        at_support.view(),
        &mq,
        basis.phi.view(),
        st.psi.view(),
        weights,
    )?;

    let row = CompositeRow {
        degree,
        basis_size: st.psi.ncols(),
        grid_size: st.grid.len(),
        reduced_size: basis.len(),
        nonzeros: mq.nonzero_count,
        rank_used: mq.rank_used,
        err_full: reference.error(full.coefficients.column(0)),
        err_reduced: reference.error(reduced.coefficients.column(0)),
        orth_err: mq.orthogonality_error,
    };
    if ![row.err_full, row.err_reduced, row.orth_err]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::invalid(
            "composite experiment produced a non-finite value",
        ));
    }
    Ok(row)
}

/// `C(2N'+m, m)`, the exact-arithmetic rank of the constraint matrix for `m`
/// intermediate variables.
pub fn theoretical_constraint_rank(reduced_degree: usize, intermediates: usize) -> usize {
    binomial(2 * reduced_degree + intermediates, intermediates).unwrap_or(usize::MAX)
}

/// Max-norm difference of two coefficient sets of equal shape.
pub fn coefficient_distance(a: &SpectralCoefficients, b: &SpectralCoefficients) -> f64 {
    max_abs((&a.coefficients - &b.coefficients).iter().copied())
}
