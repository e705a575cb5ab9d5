//! Discrete (pseudospectral) projection onto a tensor basis: `ĥ = Ψᵀ W h`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::chaos_basis::TensorBasis;
use crate::error::{Error, Result};

/// Expansion coefficients, one row per basis polynomial and one column per
/// output component.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoefficients {
    pub coefficients: Array2<f64>,
}

impl SpectralCoefficients {
    pub fn new(coefficients: Array2<f64>) -> Self {
        Self { coefficients }
    }

    pub fn len(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.nrows() == 0
    }

    pub fn outputs(&self) -> usize {
        self.coefficients.ncols()
    }

    /// `Σᵢ cᵢ ψᵢ(x)`.
    pub fn evaluate(&self, basis: &TensorBasis, x: &[f64]) -> Result<Array1<f64>> {
        if basis.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for a basis of size {}",
                self.len(),
                basis.len()
            )));
        }
        let psi = Array1::from(basis.evaluate_point(x)?);
        Ok(self.coefficients.t().dot(&psi))
    }

    /// Mean (first coefficient) and variance (sum of the remaining squares).
    pub fn moments(&self) -> (Array1<f64>, Array1<f64>) {
        let m = self.outputs();
        if self.is_empty() {
            return (Array1::zeros(m), Array1::zeros(m));
        }
        let mean = self.coefficients.row(0).to_owned();
        let variance = self
            .coefficients
            .slice(ndarray::s![1.., ..])
            .map(|c| c * c)
            .sum_axis(Axis(0));
        (mean, variance)
    }
}

/// Projects sampled values onto the basis evaluated at the same points.
pub fn project(
    samples: ArrayView2<f64>,
    psi: ArrayView2<f64>,
    weights: ArrayView1<f64>,
) -> Result<SpectralCoefficients> {
    if samples.nrows() != psi.nrows() || weights.len() != psi.nrows() {
        return Err(Error::invalid(format!(
            "projection needs matching rows: samples {}, basis {}, weights {}",
            samples.nrows(),
            psi.nrows(),
            weights.len()
        )));
    }
    let mut weighted = samples.to_owned();
    for (mut row, &w) in weighted.axis_iter_mut(Axis(0)).zip(weights.iter()) {
        row *= w;
    }
    Ok(SpectralCoefficients::new(psi.t().dot(&weighted)))
}

pub fn evaluate_expansion(
    c: &SpectralCoefficients,
    basis: &TensorBasis,
    x: &[f64],
) -> Result<Array1<f64>> {
    c.evaluate(basis, x)
}

pub fn moments(c: &SpectralCoefficients) -> (Array1<f64>, Array1<f64>) {
    c.moments()
}
