//! Gauss-Legendre rules on `[-1, 1]` with weights normalized to the uniform
//! probability density, and their tensor products.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Default cap on the number of tensor grid points.
pub const DEFAULT_POINT_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    /// Points stored row-wise, `(Q+1) × s`.
    pub points: Array2<f64>,
    /// Positive weights summing to one.
    pub weights: Array1<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }
}

/// Legendre `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Nodes (ascending) and probability-normalized weights of the `n`-point rule.
pub fn gauss_legendre_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::invalid(
            "Gauss-Legendre rule needs at least one point",
        ));
    }
    if n == 1 {
        return Ok((vec![0.0], vec![1.0]));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for k in 0..half {
        // Chebyshev-like initial guess for the (k+1)-th largest root
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - k] = x;
        nodes[k] = -x;
        weights[n - 1 - k] = w;
        weights[k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Tensor product of the `n_per_dim`-point rule in `s` dimensions, first
/// coordinate varying slowest.
pub fn tensor_grid(s: usize, n_per_dim: usize) -> Result<QuadratureGrid> {
    tensor_grid_capped(s, n_per_dim, DEFAULT_POINT_CAP)
}

pub fn tensor_grid_capped(s: usize, n_per_dim: usize, cap: usize) -> Result<QuadratureGrid> {
    let (nodes, weights) = gauss_legendre_1d(n_per_dim)?;
    let total = u32::try_from(s)
        .ok()
        .and_then(|s| n_per_dim.checked_pow(s))
        .unwrap_or(usize::MAX);
    if total > cap {
        return Err(Error::ResourceCap {
            requested: total,
            cap,
        });
    }
    let mut points = Array2::zeros((total, s));
    let mut grid_weights = Array1::zeros(total);
    let mut digits = vec![0usize; s];
    for k in 0..total {
        let mut w = 1.0;
        for d in 0..s {
            points[[k, d]] = nodes[digits[d]];
            w *= weights[digits[d]];
        }
        grid_weights[k] = w;
        for d in (0..s).rev() {
            digits[d] += 1;
            if digits[d] < n_per_dim {
                break;
            }
            digits[d] = 0;
        }
    }
    Ok(QuadratureGrid {
        points,
        weights: grid_weights,
    })
}
