//! Reduced polynomial bases over dependent intermediate variables and sparse
//! modified quadrature rules that keep those bases discretely orthonormal.
//!
//! Given samples `y(xʲ)` of `m` intermediate variables at the points of a
//! quadrature rule `{(xʲ, wʲ)}`, the pipeline is:
//!
//! 1. [`monomial_matrix`]: `Y(j, ℓ) = ∏ y_d(xʲ)^{ℓ_d}` for all `|ℓ| ≤ N'`.
//! 2. [`weighted_mgs`]: `Y = Φ R` with `Φᵀ W Φ = I`.
//! 3. [`constraint_matrix`]: pairwise products `A(j, (k₁,k₂)) = φ_{k₁} φ_{k₂}`.
//! 4. [`reduced_weights`]: a column-pivoted weighted Gram-Schmidt on `A`
//!    extracts `R` independent constraints `Q_R`, and a phase-one simplex
//!    finds a vertex of `{Q_Rᵀ u = Q_Rᵀ w, u ≥ 0}`. The vertex has at most
//!    `R` nonzeros and every zero weight is a model evaluation that can be
//!    skipped.
//! 5. [`reduced_project`]: `ĥ = Ψᵀ W Φ (Φᵀ U★ h)`, which only reads `h`
//!    where `u★ > 0`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::chaos_basis::{total_degree_set, MultiIndexSet};
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::lp_solver::{phase_one_bfs_with, LpOptions, StandardFormLp};
use crate::pseudospectral::SpectralCoefficients;

/// Default absolute tolerance on the pivoted QR diagonal.
pub const DEFAULT_QR_TOL: f64 = 1e-12;
/// Orthogonality error above which a modified rule is rejected.
pub const DEFAULT_ORTHOGONALITY_THRESHOLD: f64 = 1e-8;
/// Relative diagonal below which a scaled monomial column counts as dependent.
pub const RANK_DEFICIENCY_TOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct MonomialMatrix {
    pub values: Array2<f64>,
    pub index_set: MultiIndexSet,
}

/// All monomials of total degree `≤ max_degree` in the columns of `y_samples`.
pub fn monomial_matrix(y_samples: ArrayView2<f64>, max_degree: usize) -> MonomialMatrix {
    let (rows, m) = y_samples.dim();
    let index_set = total_degree_set(m, max_degree);
    let mut values = Array2::zeros((rows, index_set.len()));
    for (j, y) in y_samples.rows().into_iter().enumerate() {
        // powers[d][p] = y_d^p by repeated multiplication
        let powers: Vec<Vec<f64>> = y
            .iter()
            .map(|&yd| {
                let mut p = Vec::with_capacity(max_degree + 1);
                let mut acc = 1.0;
                p.push(acc);
                for _ in 0..max_degree {
                    acc *= yd;
                    p.push(acc);
                }
                p
            })
            .collect();
        for (l, alpha) in index_set.indices().iter().enumerate() {
            values[[j, l]] = alpha
                .entries()
                .iter()
                .zip(&powers)
                .map(|(&a, p)| p[a])
                .product();
        }
    }
    MonomialMatrix { values, index_set }
}

/// What [`weighted_mgs_with`] does with a numerically dependent column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DependentColumns {
    /// Fail with [`Error::RankDeficient`] below [`RANK_DEFICIENCY_TOL`].
    Reject,
    /// Leave the column out of the basis when its relative diagonal is below `tol`.
    Drop { tol: f64 },
}

#[derive(Clone, Debug)]
pub struct ReducedBasis {
    /// `(Q+1) × k`, orthonormal under the source weights.
    pub phi: Array2<f64>,
    /// Upper triangular `k × k` with `Y[:, columns] = Φ R`.
    pub r: Array2<f64>,
    pub weights: Array1<f64>,
    /// Monomial columns retained, in order.
    pub columns: Vec<usize>,
}

impl ReducedBasis {
    pub fn len(&self) -> usize {
        self.phi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.ncols() == 0
    }

    /// `max |I − Φᵀ W Φ|`.
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(self.phi.view(), self.weights.view())
    }
}

fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

/// Weighted modified Gram-Schmidt with column pre-scaling and one full
/// re-orthogonalization pass.
pub fn weighted_mgs(y: &MonomialMatrix, weights: ArrayView1<f64>) -> Result<ReducedBasis> {
    weighted_mgs_with(y, weights, DependentColumns::Reject)
}

pub fn weighted_mgs_with(
    y: &MonomialMatrix,
    weights: ArrayView1<f64>,
    dependent: DependentColumns,
) -> Result<ReducedBasis> {
    let (rows, cols) = y.values.dim();
    if weights.len() != rows {
        return Err(Error::invalid(format!(
            "{} weights for {} monomial rows",
            weights.len(),
            rows
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::invalid("quadrature weights must be nonnegative"));
    }
    let w = weights.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut kept = Vec::with_capacity(cols);

    for k in 0..cols {
        let column = y.values.column(k).to_vec();
        let scale = weighted_dot(&column, &column, &w).sqrt();
        let threshold = match dependent {
            DependentColumns::Reject => RANK_DEFICIENCY_TOL,
            DependentColumns::Drop { tol } => tol,
        };
        if !(scale > 0.0) || !scale.is_finite() {
            match dependent {
                DependentColumns::Reject => {
                    return Err(Error::RankDeficient {
                        column: k,
                        diagonal: 0.0,
                    })
                }
                DependentColumns::Drop { .. } => continue,
            }
        }
        let mut v: Vec<f64> = column.iter().map(|c| c / scale).collect();
        let mut coefs = vec![0.0; basis.len()];
        for _pass in 0..2 {
            for (i, phi) in basis.iter().enumerate() {
                let c = weighted_dot(phi, &v, &w);
                for (vj, pj) in v.iter_mut().zip(phi) {
                    *vj -= c * pj;
                }
                coefs[i] += c;
            }
        }
        let diag = weighted_dot(&v, &v, &w).sqrt();
        if !(diag >= threshold) {
            match dependent {
                DependentColumns::Reject => {
                    return Err(Error::RankDeficient {
                        column: k,
                        diagonal: diag,
                    })
                }
                DependentColumns::Drop { .. } => continue,
            }
        }
        for vj in v.iter_mut() {
            *vj /= diag;
        }
        let mut r_col: Vec<f64> = coefs.iter().map(|c| c * scale).collect();
        r_col.push(diag * scale);
        basis.push(v);
        r_cols.push(r_col);
        kept.push(k);
    }

    let k = basis.len();
    let mut phi = Array2::zeros((rows, k));
    let mut r = Array2::zeros((k, k));
    for (c, (col, rc)) in basis.iter().zip(&r_cols).enumerate() {
        for (j, v) in col.iter().enumerate() {
            phi[[j, c]] = *v;
        }
        for (i, v) in rc.iter().enumerate() {
            r[[i, c]] = *v;
        }
    }
    Ok(ReducedBasis {
        phi,
        r,
        weights: weights.to_owned(),
        columns: kept,
    })
}

/// Column order of [`constraint_matrix`]: pairs graded by `k₁ + k₂`, then
/// by descending `k₁`.
pub fn constraint_pairs(basis_size: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(basis_size * basis_size);
    if basis_size == 0 {
        return pairs;
    }
    for total in 0..=2 * (basis_size - 1) {
        let lo = total.saturating_sub(basis_size - 1);
        let hi = total.min(basis_size - 1);
        for k1 in (lo..=hi).rev() {
            pairs.push((k1, total - k1));
        }
    }
    pairs
}

/// `A(j, (k₁,k₂)) = φ_{k₁}(yʲ) φ_{k₂}(yʲ)`, all `(P'+1)²` ordered pairs.
pub fn constraint_matrix(phi: ArrayView2<f64>) -> Array2<f64> {
    let (rows, p) = phi.dim();
    let pairs = constraint_pairs(p);
    let mut a = Array2::zeros((rows, pairs.len()));
    for (c, &(k1, k2)) in pairs.iter().enumerate() {
        for j in 0..rows {
            a[[j, c]] = phi[[j, k1]] * phi[[j, k2]];
        }
    }
    a
}

/// `max |I − Φᵀ diag(u) Φ|`.
pub fn orthogonality_error(phi: ArrayView2<f64>, u: ArrayView1<f64>) -> f64 {
    let k = phi.ncols();
    let mut err = 0.0_f64;
    for a in 0..k {
        for b in a..k {
            let s: f64 = phi
                .column(a)
                .iter()
                .zip(phi.column(b).iter())
                .zip(u.iter())
                .filter(|(_, &uj)| uj != 0.0)
                .map(|((x, y), uj)| x * y * uj)
                .sum();
            let target = if a == b { 1.0 } else { 0.0 };
            err = err.max((target - s).abs());
        }
    }
    err
}

/// Column-pivoted weighted Gram-Schmidt factorization `A Π = Q S`.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    /// First `rank` columns of `Q`, orthonormal under the weights.
    pub q: Array2<f64>,
    /// `|S(r, r)|` for the accepted pivots, nonincreasing up to rounding.
    pub diagonal: Vec<f64>,
    /// Column of `A` chosen at each step.
    pub pivots: Vec<usize>,
}

impl PivotedQr {
    pub fn rank(&self) -> usize {
        self.diagonal.len()
    }
}

/// How the QR tolerance is compared with the pivot diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ToleranceScale {
    /// Accept pivots with `|S(R,R)| > tol`.
    Absolute,
    /// Accept pivots with `|S(R,R)| > tol · |S(1,1)|`.
    #[default]
    RelativeToLeading,
}

/// Pivoted weighted QR that stops once the largest remaining column norm is
/// at most the tolerance or `max_rank` pivots have been taken. Weights must
/// be strictly positive.
pub fn pivoted_weighted_qr(
    a: ArrayView2<f64>,
    weights: ArrayView1<f64>,
    tol: f64,
    scale: ToleranceScale,
    max_rank: Option<usize>,
) -> Result<PivotedQr> {
    let (rows, cols) = a.dim();
    if weights.len() != rows {
        return Err(Error::invalid("weights and constraint rows differ"));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid("pivoted QR needs strictly positive weights"));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    // work in the scaled space diag(√w) A where the inner product is Euclidean
    let mut work: Vec<Vec<f64>> = (0..cols)
        .map(|c| {
            a.column(c)
                .iter()
                .zip(&sqrt_w)
                .map(|(v, s)| v * s)
                .collect()
        })
        .collect();
    let mut active = vec![true; cols];
    let limit = max_rank.unwrap_or(usize::MAX).min(rows).min(cols);
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut diagonal = Vec::new();
    let mut pivots = Vec::new();

    while q_cols.len() < limit {
        let norms: Vec<(usize, f64)> = work
            .par_iter()
            .enumerate()
            .filter(|(c, _)| active[*c])
            .map(|(c, col)| (c, col.iter().map(|v| v * v).sum::<f64>()))
            .collect();
        let Some(&(p, norm2)) = norms
            .iter()
            .fold(None, |best: Option<&(usize, f64)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            })
        else {
            break;
        };
        let norm = norm2.sqrt();
        let threshold = match (scale, diagonal.first()) {
            (ToleranceScale::RelativeToLeading, Some(&lead)) => tol * lead,
            (ToleranceScale::RelativeToLeading, None) => 0.0,
            (ToleranceScale::Absolute, _) => tol,
        };
        if !(norm > threshold) {
            break;
        }
        active[p] = false;
        let mut q: Vec<f64> = work[p].iter().map(|v| v / norm).collect();
        // re-orthogonalize against accepted columns
        for prev in &q_cols {
            let c: f64 = prev.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (qi, pi) in q.iter_mut().zip(prev) {
                *qi -= c * pi;
            }
        }
        let renorm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        for qi in q.iter_mut() {
            *qi /= renorm;
        }
        work.par_iter_mut()
            .enumerate()
            .filter(|(c, _)| active[*c])
            .for_each(|(_, col)| {
                let c: f64 = q.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for (v, qi) in col.iter_mut().zip(&q) {
                    *v -= c * qi;
                }
            });
        q_cols.push(q);
        diagonal.push(norm);
        pivots.push(p);
    }

    let rank = q_cols.len();
    let mut q = Array2::zeros((rows, rank));
    for (c, col) in q_cols.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            q[[j, c]] = v / sqrt_w[j];
        }
    }
    Ok(PivotedQr {
        q,
        diagonal,
        pivots,
    })
}

/// How many pivoted-QR columns become LP constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankSelection {
    /// Every pivot whose diagonal exceeds the tolerance.
    Tolerance,
    /// At most this many leading pivots (still cut off at the tolerance).
    Fixed(usize),
}

#[derive(Clone, Debug)]
pub struct ReductionOptions {
    pub qr_tol: f64,
    pub tol_scale: ToleranceScale,
    pub rank: RankSelection,
    /// Retry once with `qr_tol / 100` when the orthogonality check fails.
    /// Only tolerance-selected ranks are checked; with retries off the first
    /// rule is returned as is.
    pub retry: bool,
    pub orthogonality_threshold: f64,
    pub lp: LpOptions,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            qr_tol: DEFAULT_QR_TOL,
            tol_scale: ToleranceScale::default(),
            rank: RankSelection::Tolerance,
            retry: true,
            orthogonality_threshold: DEFAULT_ORTHOGONALITY_THRESHOLD,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModifiedQuadrature {
    /// Nonnegative weights on the original points.
    pub u_star: Array1<f64>,
    /// Indices with `u★ > 0`, ascending.
    pub support: Vec<usize>,
    pub nonzero_count: usize,
    pub orthogonality_error: f64,
    /// Number of independent constraints handed to the LP.
    pub rank_used: usize,
    /// QR tolerance of the accepted attempt.
    pub qr_tol: f64,
}

pub fn reduced_weights(
    phi: ArrayView2<f64>,
    weights: ArrayView1<f64>,
    tol: f64,
) -> Result<ModifiedQuadrature> {
    let opts = ReductionOptions {
        qr_tol: tol,
        ..ReductionOptions::default()
    };
    reduced_weights_with(phi, weights, &opts)
}

/// Modified quadrature for `phi` under explicit options. A fixed rank yields
/// the rule for that many constraints together with its orthogonality error,
/// however large.
pub fn reduced_weights_with(
    phi: ArrayView2<f64>,
    weights: ArrayView1<f64>,
    opts: &ReductionOptions,
) -> Result<ModifiedQuadrature> {
    if !(opts.qr_tol > 0.0) {
        return Err(Error::invalid("QR tolerance must be positive"));
    }
    if phi.nrows() != weights.len() {
        return Err(Error::invalid("basis rows and weights differ"));
    }
    let a = constraint_matrix(phi);
    let first = modified_rule(&a, phi, weights, opts.qr_tol, opts)?;
    let checked = opts.retry && opts.rank == RankSelection::Tolerance;
    if first.orthogonality_error <= opts.orthogonality_threshold || !checked {
        return Ok(first);
    }
    log::debug!(
        "orthogonality error {:e} at tol {:e}, retrying with {:e}",
        first.orthogonality_error,
        opts.qr_tol,
        opts.qr_tol / 100.0
    );
    let second = modified_rule(&a, phi, weights, opts.qr_tol / 100.0, opts)?;
    if second.orthogonality_error <= opts.orthogonality_threshold {
        Ok(second)
    } else {
        Err(Error::Orthogonality {
            error: second.orthogonality_error,
            threshold: opts.orthogonality_threshold,
        })
    }
}

fn modified_rule(
    a: &Array2<f64>,
    phi: ArrayView2<f64>,
    weights: ArrayView1<f64>,
    tol: f64,
    opts: &ReductionOptions,
) -> Result<ModifiedQuadrature> {
    let max_rank = match opts.rank {
        RankSelection::Tolerance => None,
        RankSelection::Fixed(r) => Some(r),
    };
    let qr = pivoted_weighted_qr(a.view(), weights, tol, opts.tol_scale, max_rank)?;
    let rank = qr.rank();
    if rank == 0 {
        return Err(Error::invalid(
            "constraint matrix has no column above tolerance",
        ));
    }
    let constraints = qr.q.t().to_owned();
    let rhs = constraints.dot(&weights);
    let lp = StandardFormLp::new(constraints, rhs)?;
    let bfs = phase_one_bfs_with(&lp, &opts.lp)?;
    let support = bfs.support();
    let orthogonality_error = orthogonality_error(phi, bfs.u.view());
    Ok(ModifiedQuadrature {
        nonzero_count: support.len(),
        u_star: bfs.u,
        support,
        orthogonality_error,
        rank_used: rank,
        qr_tol: tol,
    })
}

/// `ĥ = Ψᵀ W Φ (Φᵀ U★ h)` with `h` given only on the support of `u★`, one
/// row per support index in ascending order.
pub fn reduced_project(
    h_at_support: ArrayView2<f64>,
    mq: &ModifiedQuadrature,
    phi: ArrayView2<f64>,
    psi: ArrayView2<f64>,
    weights: ArrayView1<f64>,
) -> Result<SpectralCoefficients> {
    let rows = psi.nrows();
    if phi.nrows() != rows || weights.len() != rows || mq.u_star.len() != rows {
        return Err(Error::invalid("reduced projection row counts differ"));
    }
    if h_at_support.nrows() != mq.support.len() {
        return Err(Error::invalid(format!(
            "{} samples for a support of {}",
            h_at_support.nrows(),
            mq.support.len()
        )));
    }
    let k = phi.ncols();
    let m = h_at_support.ncols();
    // c = Φᵀ U★ h, touching only support rows
    let mut c = Array2::<f64>::zeros((k, m));
    for (s, &j) in mq.support.iter().enumerate() {
        let u = mq.u_star[j];
        for a in 0..k {
            let pa = phi[[j, a]] * u;
            for b in 0..m {
                c[[a, b]] += pa * h_at_support[[s, b]];
            }
        }
    }
    // Ψᵀ W (Φ c)
    let mut surrogate = phi.dot(&c);
    for (mut row, &w) in surrogate.rows_mut().into_iter().zip(weights.iter()) {
        row *= w;
    }
    Ok(SpectralCoefficients::new(psi.t().dot(&surrogate)))
}

/// Residual `max |Y[:, columns] − Φ R| / max |Y|`.
pub fn factorization_error(y: &MonomialMatrix, basis: &ReducedBasis) -> f64 {
    let cols: Vec<usize> = basis.columns.clone();
    let sub = y.values.select(ndarray::Axis(1), &cols);
    let diff = &sub - &basis.phi.dot(&basis.r);
    max_abs(diff.iter().copied()) / max_abs(sub.iter().copied()).max(f64::MIN_POSITIVE)
}
