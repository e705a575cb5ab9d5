//! Total-degree multi-index sets and orthonormal tensor-product Legendre bases.
//!
//! The univariate family is Legendre, normalized against the uniform
//! *probability* density on `[-1, 1]` (weight 1/2), so `ψ₀ ≡ 1`, the mean of
//! an expansion is its first coefficient and the variance is the sum of the
//! squares of the others.
//!
//! Multi-indices are ordered graded-lexicographically: by total degree, then
//! lexicographically descending within a degree, e.g. for two variables
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::binomial;

/// Slack allowed on the `[-1, 1]` domain check.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndexSet {
    dimension: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|m| m == index)
    }
}

/// All multi-indices of the given dimension with total degree at most
/// `max_degree`, in graded-lexicographic order.
///
/// Dimension zero is accepted and yields the single empty index.
pub fn total_degree_set(dimension: usize, max_degree: usize) -> MultiIndexSet {
    let expected = binomial(max_degree + dimension, dimension).unwrap_or(0);
    let mut indices = Vec::with_capacity(expected);
    let mut scratch = vec![0; dimension];
    for degree in 0..=max_degree {
        if dimension == 0 {
            if degree == 0 {
                indices.push(MultiIndex(Vec::new()));
            }
            continue;
        }
        push_compositions(degree, 0, &mut scratch, &mut indices);
    }
    MultiIndexSet {
        dimension,
        max_degree,
        indices,
    }
}

fn push_compositions(
    remaining: usize,
    slot: usize,
    scratch: &mut [usize],
    out: &mut Vec<MultiIndex>,
) {
    if slot + 1 == scratch.len() {
        scratch[slot] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for first in (0..=remaining).rev() {
        scratch[slot] = first;
        push_compositions(remaining - first, slot + 1, scratch, out);
    }
}

/// Values `L₀(x), …, L_n(x)` of the normalized Legendre polynomials,
/// `L_k = √(2k+1) P_k`, by the three-term recurrence.
pub fn legendre_normalized(max_degree: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(max_degree + 1);
    p.push(1.0);
    if max_degree >= 1 {
        p.push(x);
    }
    for k in 1..max_degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v *= ((2 * k + 1) as f64).sqrt();
    }
    p
}

/// A tensor-product basis of normalized Legendre polynomials indexed by a
/// total-degree set.
#[derive(Clone, Debug)]
pub struct TensorBasis {
    index_set: MultiIndexSet,
}

impl TensorBasis {
    pub fn new(index_set: MultiIndexSet) -> Self {
        Self { index_set }
    }

    pub fn total_degree(dimension: usize, max_degree: usize) -> Self {
        Self::new(total_degree_set(dimension, max_degree))
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.index_set.dimension()
    }

    pub fn max_degree(&self) -> usize {
        self.index_set.max_degree()
    }

    /// Evaluates every basis polynomial at one point.
    pub fn evaluate_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.evaluate_point_tagged(x, 0)
    }

    fn evaluate_point_tagged(&self, x: &[f64], point: usize) -> Result<Vec<f64>> {
        let dim = self.dimension();
        if x.len() != dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, basis dimension is {dim}",
                x.len()
            )));
        }
        let degree = self.max_degree();
        let mut tables = Vec::with_capacity(dim);
        for (d, &xd) in x.iter().enumerate() {
            if !(xd.abs() <= 1.0 + DOMAIN_SLACK) {
                return Err(Error::Domain {
                    point,
                    dim: d,
                    value: xd,
                });
            }
            tables.push(legendre_normalized(degree, xd));
        }
        Ok(self
            .index_set
            .indices()
            .iter()
            .map(|alpha| {
                alpha
                    .entries()
                    .iter()
                    .zip(&tables)
                    .map(|(&a, table)| table[a])
                    .product()
            })
            .collect())
    }

    /// Evaluation matrix `Ψ(j, i) = ψᵢ(xʲ)` for points stored row-wise.
    pub fn evaluate(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut psi = Array2::zeros((points.nrows(), self.len()));
        for (j, row) in points.rows().into_iter().enumerate() {
            let x: Vec<f64> = row.to_vec();
            let values = self.evaluate_point_tagged(&x, j)?;
            for (i, v) in values.into_iter().enumerate() {
                psi[[j, i]] = v;
            }
        }
        Ok(psi)
    }
}

/// Convenience wrapper matching [`TensorBasis::evaluate`].
pub fn evaluate_basis(basis: &TensorBasis, points: ArrayView2<f64>) -> Result<Array2<f64>> {
    basis.evaluate(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Explicit sum `P_n(x) = 2⁻ⁿ Σ_k (-1)^k C(n,k) C(2n-2k, n) x^{n-2k}`.
    fn legendre_direct(n: usize, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..=n / 2 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let c = binomial(n, k).unwrap() as f64 * binomial(2 * n - 2 * k, n).unwrap() as f64;
            s += sign * c * x.powi((n - 2 * k) as i32);
        }
        s / 2f64.powi(n as i32)
    }

    #[test]
    fn counts_match_binomials() {
        assert_eq!(total_degree_set(4, 3).len(), 35);
        assert_eq!(total_degree_set(2, 3).len(), 10);
        assert_eq!(total_degree_set(4, 6).len(), 210);
        let constant = total_degree_set(5, 0);
        assert_eq!(constant.len(), 1);
        assert_eq!(constant.get(0).entries(), &[0, 0, 0, 0, 0]);
        assert_eq!(total_degree_set(0, 4).len(), 1);
    }

    #[test]
    fn graded_lex_order() {
        let set = total_degree_set(2, 2);
        let got: Vec<Vec<usize>> = set.indices().iter().map(|m| m.entries().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        let set = total_degree_set(3, 4);
        for w in set.indices().windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(
                a.total_degree() < b.total_degree()
                    || (a.total_degree() == b.total_degree() && a.entries() > b.entries())
            );
        }
    }

    #[test]
    fn normalized_legendre_spot_values() {
        let at_one = legendre_normalized(1, 1.0);
        assert!((at_one[1] - 3f64.sqrt()).abs() < 1e-15);
        let at_zero = legendre_normalized(2, 0.0);
        assert!((at_zero[2] + 5f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_direct_sum() {
        for &x in &[-1.0, -0.73, -0.2, 0.0, 0.41, 0.9, 1.0] {
            let values = legendre_normalized(12, x);
            for (n, v) in values.iter().enumerate() {
                let direct = legendre_direct(n, x) * ((2 * n + 1) as f64).sqrt();
                assert!((v - direct).abs() < 1e-11, "n={n} x={x}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn first_column_is_ones() {
        let basis = TensorBasis::total_degree(3, 2);
        let pts = array![[0.1, -0.5, 0.9], [0.0, 0.0, 0.0], [1.0, -1.0, 0.3]];
        let psi = basis.evaluate(pts.view()).unwrap();
        assert_eq!(psi.dim(), (3, 10));
        assert!(psi.column(0).iter().all(|&v| v == 1.0));
        // ψ for (0,1,0) at the second point is L₁(0) = 0
        assert_eq!(psi[[1, 2]], 0.0);
    }

    #[test]
    fn rejects_points_outside_cube() {
        let basis = TensorBasis::total_degree(2, 1);
        let pts = array![[0.0, 0.0], [0.5, 1.2]];
        match basis.evaluate(pts.view()) {
            Err(Error::Domain { point, dim, .. }) => assert_eq!((point, dim), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
