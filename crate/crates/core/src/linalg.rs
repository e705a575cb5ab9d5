//! Small dense kernels shared by the solvers: LU with partial pivoting and a
//! tridiagonal (Thomas) solve for the 1-D component models.

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};

use crate::error::{Error, Result};

/// LU factorization `P A = L U` stored in place, unit lower triangle implied.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("LU of a non-square matrix"));
        }
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::SingularMatrix);
        }
        let threshold = scale * 1e-15 * (n.max(1) as f64);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[[k, k]].abs();
            for i in k + 1..n {
                let v = a[[i, k]].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold || best == 0.0 {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    a.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let pivot = a[[k, k]];
            for i in k + 1..n {
                let l = a[[i, k]] / pivot;
                a[[i, k]] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[[i, j]] -= l * a[[k, j]];
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let permuted: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[[i, j]] * b[j];
            }
            b[i] = s / self.lu[[i, i]];
        }
    }

    /// Solves `Aᵀ x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        // Uᵀ z = b
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[[j, i]] * b[j];
            }
            b[i] = s / self.lu[[i, i]];
        }
        // Lᵀ y = z
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[[j, i]] * b[j];
            }
            b[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = b[i];
        }
        b.copy_from_slice(&x);
    }

    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Array1::from(x)
    }

    /// Solves for every column of `b`.
    pub fn solve_mat(&self, b: ArrayView2<f64>) -> Array2<f64> {
        let mut out = b.to_owned();
        for mut col in out.axis_iter_mut(Axis(1)) {
            let mut x = col.to_vec();
            self.solve_in_place(&mut x);
            for (c, v) in col.iter_mut().zip(x) {
                *c = v;
            }
        }
        out
    }
}

/// Solves `A x = b` for a dense square system.
pub fn solve_dense(a: Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(Lu::factor(a)?.solve_vec(b))
}

/// Thomas algorithm for tridiagonal systems with multiple right-hand sides.
///
/// `lower[i]` couples row `i` to `i - 1` (entry 0 unused), `upper[i]` couples
/// row `i` to `i + 1` (last entry unused). No pivoting: callers supply
/// diagonally dominant or symmetric positive definite systems.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    mut rhs: ArrayViewMut2<f64>,
) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.nrows() != n {
        return Err(Error::invalid("tridiagonal dimension mismatch"));
    }
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    d[0] = diag[0];
    if d[0] == 0.0 || !d[0].is_finite() {
        return Err(Error::SingularMatrix);
    }
    for i in 1..n {
        c[i] = lower[i] / d[i - 1];
        d[i] = diag[i] - c[i] * upper[i - 1];
        if d[i] == 0.0 || !d[i].is_finite() {
            return Err(Error::SingularMatrix);
        }
    }
    for mut col in rhs.axis_iter_mut(Axis(1)) {
        for i in 1..n {
            let prev = col[i - 1];
            col[i] -= c[i] * prev;
        }
        col[n - 1] /= d[n - 1];
        for i in (0..n - 1).rev() {
            let next = col[i + 1];
            col[i] = (col[i] - upper[i] * next) / d[i];
        }
    }
    Ok(())
}

/// `n choose k` with overflow reported as `None`.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).ok()
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lu_solves_and_transposes() {
        let a = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 4.0]];
        let lu = Lu::factor(a.clone()).unwrap();
        let b = array![1.0, 2.0, 3.0];
        let x = lu.solve_vec(&b);
        let r = a.dot(&x) - &b;
        assert!(max_abs(r.iter().copied()) < 1e-14);

        let mut y = b.to_vec();
        lu.solve_transpose_in_place(&mut y);
        let r = a.t().dot(&Array1::from(y)) - &b;
        assert!(max_abs(r.iter().copied()) < 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(Lu::factor(a), Err(Error::SingularMatrix)));
    }

    #[test]
    fn thomas_matches_dense() {
        let n = 6;
        let lower: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { -1.0 }).collect();
        let upper: Vec<f64> = (0..n)
            .map(|i| if i + 1 == n { 0.0 } else { -0.5 })
            .collect();
        let diag = vec![3.0; n];
        let mut dense = Array2::zeros((n, n));
        for i in 0..n {
            dense[[i, i]] = diag[i];
            if i > 0 {
                dense[[i, i - 1]] = lower[i];
            }
            if i + 1 < n {
                dense[[i, i + 1]] = upper[i];
            }
        }
        let b = Array2::from_shape_fn((n, 2), |(i, j)| (i + 3 * j) as f64);
        let mut x = b.clone();
        solve_tridiagonal(&lower, &diag, &upper, x.view_mut()).unwrap();
        let r = dense.dot(&x) - &b;
        assert!(max_abs(r.iter().copied()) < 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(7, 4), Some(35));
        assert_eq!(binomial(10, 4), Some(210));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(5, 0), Some(1));
    }
}
