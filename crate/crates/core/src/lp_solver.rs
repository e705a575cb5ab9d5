//! Phase-one revised simplex for equality-constrained feasibility problems
//! `{ C u = b, u ≥ 0 }`.
//!
//! Only a vertex of the feasible polytope is wanted, so the objective is
//! the sum of artificial variables. The basis is held as a dense LU plus a
//! product-form eta file, refactorized every `refactor_interval` pivots.
//! Pricing follows Dantzig's rule until the number of degenerate pivots
//! crosses `bland_after`, then switches to Bland's rule for the rest of the
//! solve.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Lu};

#[derive(Clone, Debug)]
pub struct StandardFormLp {
    /// `R_c × n`, rows assumed linearly independent.
    pub constraints: Array2<f64>,
    pub rhs: Array1<f64>,
}

impl StandardFormLp {
    pub fn new(constraints: Array2<f64>, rhs: Array1<f64>) -> Result<Self> {
        if constraints.nrows() != rhs.len() {
            return Err(Error::invalid(format!(
                "{} constraint rows but {} right-hand sides",
                constraints.nrows(),
                rhs.len()
            )));
        }
        if constraints.nrows() > constraints.ncols() {
            return Err(Error::invalid("more constraints than variables"));
        }
        Ok(Self { constraints, rhs })
    }

    pub fn rows(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn cols(&self) -> usize {
        self.constraints.ncols()
    }

    /// `‖C u − b‖∞`.
    pub fn residual(&self, u: ArrayView1<f64>) -> f64 {
        let r = self.constraints.dot(&u) - &self.rhs;
        max_abs(r.iter().copied())
    }
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Pivot cap; `None` means `50 · n`.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
    /// Relative feasibility tolerance, scaled by `1 + ‖b‖∞`.
    pub feasibility_tol: f64,
    /// Degenerate pivots before switching to Bland's rule; `None` means `10 · n`.
    pub bland_after: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            refactor_interval: 30,
            feasibility_tol: 1e-10,
            bland_after: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BasicFeasibleSolution {
    pub u: Array1<f64>,
    /// Structural variables in the final basis (may include zero-valued ones).
    pub basis: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
}

impl BasicFeasibleSolution {
    pub fn support(&self) -> Vec<usize> {
        self.u
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn phase_one_bfs(lp: &StandardFormLp) -> Result<BasicFeasibleSolution> {
    phase_one_bfs_with(lp, &LpOptions::default())
}

pub fn phase_one_bfs_with(lp: &StandardFormLp, opts: &LpOptions) -> Result<BasicFeasibleSolution> {
    let mut simplex = Simplex::new(lp, opts);
    simplex.run()?;
    simplex.finish(lp)
}

/// `B_k = B_0 E_1 ⋯ E_k`, each `E` the identity with column `row` replaced by `column`.
struct Eta {
    row: usize,
    column: Vec<f64>,
}

struct Simplex<'a> {
    /// Sign-normalized constraint matrix, rhs ≥ 0.
    a: Array2<f64>,
    b: Array1<f64>,
    m: usize,
    n: usize,
    /// Variables `n..n+m` are artificial (unit columns).
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x_basic: Vec<f64>,
    lu: Lu,
    etas: Vec<Eta>,
    opts: &'a LpOptions,
    iterations: usize,
    degenerate: usize,
    bland: bool,
    b_scale: f64,
}

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-11;

impl<'a> Simplex<'a> {
    fn new(lp: &StandardFormLp, opts: &'a LpOptions) -> Self {
        let (m, n) = lp.constraints.dim();
        let mut a = lp.constraints.clone();
        let mut b = lp.rhs.clone();
        for i in 0..m {
            if b[i] < 0.0 {
                b[i] = -b[i];
                a.row_mut(i).mapv_inplace(|v| -v);
            }
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let mut is_basic = vec![false; n + m];
        for &j in &basis {
            is_basic[j] = true;
        }
        let b_scale = 1.0 + max_abs(b.iter().copied());
        let lu = Lu::factor(Array2::eye(m)).expect("identity is nonsingular");
        Self {
            x_basic: b.to_vec(),
            a,
            b,
            m,
            n,
            basis,
            is_basic,
            lu,
            etas: Vec::new(),
            opts,
            iterations: 0,
            degenerate: 0,
            bland: false,
            b_scale,
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            self.a.column(j).to_vec()
        } else {
            let mut e = vec![0.0; self.m];
            e[j - self.n] = 1.0;
            e
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let mut bmat = Array2::zeros((self.m, self.m));
        for (r, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j).into_iter().enumerate() {
                bmat[[i, r]] = v;
            }
        }
        self.lu = Lu::factor(bmat)?;
        self.etas.clear();
        let mut x = self.b.to_vec();
        self.lu.solve_in_place(&mut x);
        self.x_basic = x;
        Ok(())
    }

    fn ftran(&self, mut v: Vec<f64>) -> Vec<f64> {
        self.lu.solve_in_place(&mut v);
        for eta in &self.etas {
            let xr = v[eta.row] / eta.column[eta.row];
            for (i, d) in eta.column.iter().enumerate() {
                if i != eta.row {
                    v[i] -= d * xr;
                }
            }
            v[eta.row] = xr;
        }
        v
    }

    fn btran(&self, mut v: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.row];
            for (i, d) in eta.column.iter().enumerate() {
                if i != eta.row {
                    s -= d * v[i];
                }
            }
            v[eta.row] = s / eta.column[eta.row];
        }
        self.lu.solve_transpose_in_place(&mut v);
        v
    }

    fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_basic)
            .filter(|(&j, _)| j >= self.n)
            .map(|(_, &x)| x.max(0.0))
            .sum()
    }

    fn max_iterations(&self) -> usize {
        self.opts
            .max_iterations
            .unwrap_or(50 * (self.n + self.m).max(1))
    }

    fn bland_threshold(&self) -> usize {
        self.opts.bland_after.unwrap_or(10 * self.n.max(1))
    }

    fn pivot(&mut self, entering: usize, row: usize, d: Vec<f64>, step: f64) -> Result<()> {
        for (x, di) in self.x_basic.iter_mut().zip(&d) {
            *x -= step * di;
        }
        self.x_basic[row] = step;
        let leaving = self.basis[row];
        self.is_basic[leaving] = false;
        self.is_basic[entering] = true;
        self.basis[row] = entering;
        self.etas.push(Eta { row, column: d });
        if self.etas.len() >= self.opts.refactor_interval {
            self.refactor()?;
        }
        self.iterations += 1;
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let cap = self.max_iterations();
        loop {
            if self.iterations >= cap {
                return Err(Error::LpIterationLimit {
                    iterations: self.iterations,
                });
            }
            if !self.bland && self.degenerate >= self.bland_threshold() {
                self.bland = true;
            }
            // duals for the phase-one costs
            let costs: Vec<f64> = self
                .basis
                .iter()
                .map(|&j| if j >= self.n { 1.0 } else { 0.0 })
                .collect();
            let y = Array1::from(self.btran(costs));
            let reduced = self.a.t().dot(&y);

            let mut entering = None;
            let mut best = -PRICE_TOL;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let dj = -reduced[j];
                if self.bland {
                    if dj < -PRICE_TOL {
                        entering = Some(j);
                        break;
                    }
                } else if dj < best {
                    best = dj;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };

            let d = self.ftran(self.column(q));
            let dmax = max_abs(d.iter().copied());
            let mut leave: Option<(usize, f64)> = None;
            for (i, &di) in d.iter().enumerate() {
                if di <= PIVOT_TOL * dmax.max(1.0) {
                    continue;
                }
                let ratio = self.x_basic[i].max(0.0) / di;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best_ratio)) => {
                        if ratio < best_ratio - 1e-14 {
                            Some((i, ratio))
                        } else if ratio <= best_ratio + 1e-14 && self.prefer(i, r, &d) {
                            Some((i, ratio.min(best_ratio)))
                        } else {
                            Some((r, best_ratio))
                        }
                    }
                };
            }
            let Some((row, step)) = leave else {
                // phase one is bounded below; a missing ratio is numerical noise
                return Err(Error::LpInaccurate {
                    residual: f64::INFINITY,
                });
            };
            if step <= 1e-14 {
                self.degenerate += 1;
            }
            self.pivot(q, row, d, step)?;
        }
    }

    /// Tie-break in the ratio test: artificials leave first, then Bland's
    /// smallest index or the largest pivot element.
    fn prefer(&self, candidate: usize, current: usize, d: &[f64]) -> bool {
        let ca = self.basis[candidate] >= self.n;
        let cb = self.basis[current] >= self.n;
        if ca != cb {
            return ca;
        }
        if self.bland {
            self.basis[candidate] < self.basis[current]
        } else {
            d[candidate] > d[current]
        }
    }

    /// Pivots zero-level artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for row in 0..self.m {
            if self.basis[row] < self.n {
                continue;
            }
            let mut e = vec![0.0; self.m];
            e[row] = 1.0;
            let rho = Array1::from(self.btran(e));
            let alpha = self.a.t().dot(&rho);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let v = alpha[j].abs();
                if v > 1e-9 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                let d = self.ftran(self.column(q));
                let step = self.x_basic[row] / d[row];
                self.pivot(q, row, d, step)?;
            }
        }
        Ok(())
    }

    fn finish(&mut self, lp: &StandardFormLp) -> Result<BasicFeasibleSolution> {
        self.refactor()?;
        let objective = self.objective();
        let tol = self.opts.feasibility_tol * self.b_scale;
        if objective > tol {
            return Err(Error::LpInfeasible { objective });
        }
        self.drive_out_artificials()?;
        self.refactor()?;

        // one step of iterative refinement on the basic solution
        let mut r = self.b.to_vec();
        for (k, &j) in self.basis.iter().enumerate() {
            let col = self.column(j);
            for (ri, ci) in r.iter_mut().zip(col) {
                *ri -= ci * self.x_basic[k];
            }
        }
        let delta = self.ftran(r);
        for (x, dx) in self.x_basic.iter_mut().zip(delta) {
            *x += dx;
        }

        let mut u = Array1::zeros(self.n);
        let mut basis = Vec::new();
        for (&j, &x) in self.basis.iter().zip(&self.x_basic) {
            if j >= self.n {
                continue;
            }
            if x < -tol {
                return Err(Error::LpInaccurate { residual: -x });
            }
            u[j] = x.max(0.0);
            basis.push(j);
        }
        basis.sort_unstable();
        let residual = lp.residual(u.view());
        if residual > tol {
            return Err(Error::LpInaccurate { residual });
        }
        Ok(BasicFeasibleSolution {
            u,
            basis,
            iterations: self.iterations,
            residual,
        })
    }
}
