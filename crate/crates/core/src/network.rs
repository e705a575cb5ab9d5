//! Deterministic solvers for two components coupled through a few scalar
//! interface variables.
//!
//! Component 1 solves `f₁(u₁, v₂, x₁) = 0` and exports `g₁(u₁)`; component 2
//! solves `f₂(u₂, v₁, x₂) = 0` and exports `g₂(u₂)`. The coupling conditions
//! are `v₁ = g₁(u₁)` and `v₂ = g₂(u₂)`. Three strategies are provided:
//!
//! * [`eliminate_solve`]: nonlinear elimination. Each iteration solves both
//!   components for the current coupling values, forms the implicit-function
//!   sensitivities `∂u/∂v = −(∂f/∂u)⁻¹ ∂f/∂v`, and takes a Newton step on the
//!   small system `h₁ = v₁ − g₁(u₁(v₂)) = 0`, `h₂ = v₂ − g₂(u₂(v₁)) = 0`.
//! * [`augmented_newton`]: monolithic Newton on `(u₁, u₂, v₁, v₂)` with the
//!   full four-block Jacobian.
//! * [`gauss_seidel_relax`]: fixed-point sweeps `v₁ ← g₁(u₁(v₂))`,
//!   `v₂ ← g₂(u₂(v₁))`.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Lu};

/// Contract for one physical component.
///
/// `v_in` is the coupling vector produced by the *other* component and `x` the
/// component's own random inputs. Implementors must be usable from several
/// threads at once through shared references.
pub trait ComponentModel: Sync {
    /// Number of internal unknowns `n`.
    fn state_dim(&self) -> usize;
    /// Length of the incoming coupling vector.
    fn input_dim(&self) -> usize;
    /// Length of the exported coupling vector `g(u)`.
    fn output_dim(&self) -> usize;
    /// Number of random inputs consumed by this component.
    fn param_dim(&self) -> usize;

    /// `f(u, v_in, x)`.
    fn residual(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array1<f64>>;
    /// `∂f/∂u` as a dense `n × n` matrix.
    fn state_jacobian(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array2<f64>>;
    /// `∂f/∂v_in` as a dense `n × input_dim` matrix.
    fn input_jacobian(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Array2<f64>>;
    /// `g(u)`.
    fn output(&self, u: &[f64]) -> Array1<f64>;
    /// `∂g/∂u` as a dense `output_dim × n` matrix.
    fn output_jacobian(&self, u: &[f64]) -> Array2<f64>;

    /// Solves `(∂f/∂u) X = rhs`. The default factors the dense Jacobian;
    /// models with banded structure should override it.
    fn solve_linearized(
        &self,
        u: &[f64],
        v_in: &[f64],
        x: &[f64],
        rhs: Array2<f64>,
    ) -> Result<Array2<f64>> {
        let lu = Lu::factor(self.state_jacobian(u, v_in, x)?)?;
        Ok(lu.solve_mat(rhs.view()))
    }

    /// Starting state for [`ComponentModel::solve`].
    fn initial_state(&self, _v_in: &[f64], _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    /// Newton iteration on `f(·, v_in, x) = 0` until either the residual or
    /// the Newton step falls below `COMPONENT_TOL · (1 + ‖u‖∞)`.
    fn solve(&self, v_in: &[f64], x: &[f64]) -> Result<Array1<f64>> {
        let mut u = self.initial_state(v_in, x);
        let tolerance = |u: &[f64]| COMPONENT_TOL * (1.0 + max_abs(u.iter().copied()));
        for _ in 0..COMPONENT_MAX_ITER {
            let f = self.residual(&u, v_in, x)?;
            let norm = max_abs(f.iter().copied());
            if !norm.is_finite() {
                return Err(Error::ComponentSolve(format!("non-finite residual {norm}")));
            }
            if norm <= tolerance(&u) {
                return Ok(Array1::from(u));
            }
            let rhs = f.insert_axis(ndarray::Axis(1));
            let step = self.solve_linearized(&u, v_in, x, rhs)?;
            for (ui, di) in u.iter_mut().zip(step.column(0)) {
                *ui -= di;
            }
            if max_abs(step.iter().copied()) <= tolerance(&u) {
                return Ok(Array1::from(u));
            }
        }
        let f = self.residual(&u, v_in, x)?;
        let norm = max_abs(f.iter().copied());
        if norm <= tolerance(&u) {
            Ok(Array1::from(u))
        } else {
            Err(Error::ComponentSolve(format!(
                "Newton stalled at residual {norm:e} after {COMPONENT_MAX_ITER} iterations"
            )))
        }
    }

    /// `∂u/∂v_in` and `∂g/∂v_in` at a solved state.
    fn sensitivity(&self, u: &[f64], v_in: &[f64], x: &[f64]) -> Result<Sensitivity> {
        let dfdv = self.input_jacobian(u, v_in, x)?;
        let du_dv = -self.solve_linearized(u, v_in, x, dfdv)?;
        let dg_dv = self.output_jacobian(u).dot(&du_dv);
        Ok(Sensitivity { du_dv, dg_dv })
    }
}

/// Residual tolerance of the default component Newton solve, relative to
/// `1 + ‖u‖∞`.
pub const COMPONENT_TOL: f64 = 1e-12;
const COMPONENT_MAX_ITER: usize = 50;

#[derive(Clone, Debug)]
pub struct Sensitivity {
    /// `n × input_dim`.
    pub du_dv: Array2<f64>,
    /// `output_dim × input_dim`.
    pub dg_dv: Array2<f64>,
}

/// A solved component: state, exported coupling values and their sensitivity.
#[derive(Clone, Debug)]
pub struct ComponentSolution {
    pub state: Array1<f64>,
    pub output: Array1<f64>,
    pub dg_dv: Array2<f64>,
}

/// Solves one component and, when `with_sensitivity` is set, its coupling
/// sensitivity. Failures are tagged with the component index.
pub fn solve_component(
    model: &dyn ComponentModel,
    index: usize,
    v_in: &[f64],
    x: &[f64],
    with_sensitivity: bool,
) -> Result<ComponentSolution> {
    let run = || -> Result<ComponentSolution> {
        let state = model.solve(v_in, x)?;
        let u = state.as_slice().expect("owned array is contiguous");
        let output = model.output(u);
        let dg_dv = if with_sensitivity {
            model.sensitivity(u, v_in, x)?.dg_dv
        } else {
            Array2::zeros((model.output_dim(), model.input_dim()))
        };
        Ok(ComponentSolution {
            state,
            output,
            dg_dv,
        })
    };
    run().map_err(|e| e.in_component(index, None))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingState {
    pub v1: Array1<f64>,
    pub v2: Array1<f64>,
}

impl CouplingState {
    pub fn new(v1: Array1<f64>, v2: Array1<f64>) -> Self {
        Self { v1, v2 }
    }

    pub fn zeros(m1: usize, m2: usize) -> Self {
        Self::new(Array1::zeros(m1), Array1::zeros(m2))
    }

    pub fn max_difference(&self, other: &CouplingState) -> f64 {
        let d1 = max_abs((&self.v1 - &other.v1).iter().copied());
        let d2 = max_abs((&self.v2 - &other.v2).iter().copied());
        d1.max(d2)
    }

    fn is_finite(&self) -> bool {
        self.v1.iter().chain(self.v2.iter()).all(|v| v.is_finite())
    }
}

/// Convergence history of an iterative solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    /// Residual max-norm at every iterate, starting with the initial guess.
    pub residual_norms: Vec<f64>,
    /// Component solves `[component 1, component 2]` spent on each residual
    /// evaluation, aligned with `residual_norms`.
    pub solves: Vec<[usize; 2]>,
    /// Number of updates applied to the initial guess.
    pub iterations: usize,
    /// Component solves spent on final full-quadrature checks and polishing.
    pub verification_solves: [usize; 2],
    /// Wall-clock seconds spent evaluating each component, including any
    /// basis reduction built for it.
    pub component_seconds: [f64; 2],
}

impl SolveTrace {
    /// Last recorded residual, or infinity for an empty trace.
    pub fn last_residual(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn total_solves(&self) -> [usize; 2] {
        let mut total = self.verification_solves;
        for s in &self.solves {
            total[0] += s[0];
            total[1] += s[1];
        }
        total
    }

    pub(crate) fn record(&mut self, residual: f64, solves: [usize; 2]) {
        self.residual_norms.push(residual);
        self.solves.push(solves);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NetworkOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
        }
    }
}

impl NetworkOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

fn check_network(
    c1: &dyn ComponentModel,
    c2: &dyn ComponentModel,
    x: &[f64],
    v0: &CouplingState,
) -> Result<usize> {
    if c1.input_dim() != c2.output_dim() || c2.input_dim() != c1.output_dim() {
        return Err(Error::invalid(
            "component coupling dimensions are inconsistent",
        ));
    }
    if x.len() != c1.param_dim() + c2.param_dim() {
        return Err(Error::invalid(format!(
            "expected {} random inputs, got {}",
            c1.param_dim() + c2.param_dim(),
            x.len()
        )));
    }
    if v0.v1.len() != c1.output_dim() || v0.v2.len() != c2.output_dim() {
        return Err(Error::invalid("initial coupling state has the wrong size"));
    }
    if !v0.is_finite() {
        return Err(Error::invalid("initial coupling state is not finite"));
    }
    Ok(c1.param_dim())
}

/// Nonlinear elimination: a Newton iteration on the coupling variables only.
///
/// Every iteration performs exactly one solve of each component plus the
/// multi-right-hand-side sensitivity solves, then solves the block system
/// `[[I, −∂g₁/∂v₂], [−∂g₂/∂v₁, I]] Δv = −(v − g)`.
pub fn eliminate_solve(
    c1: &dyn ComponentModel,
    c2: &dyn ComponentModel,
    x: &[f64],
    v0: &CouplingState,
    opts: &NetworkOptions,
) -> Result<(CouplingState, SolveTrace)> {
    opts.validate()?;
    let split = check_network(c1, c2, x, v0)?;
    let (x1, x2) = x.split_at(split);
    let (m1, m2) = (c1.output_dim(), c2.output_dim());
    let mut v = v0.clone();
    let mut trace = SolveTrace::default();

    loop {
        let (s1, s2) = rayon::join(
            || solve_component(c1, 0, v.v2.as_slice().expect("contiguous"), x1, true),
            || solve_component(c2, 1, v.v1.as_slice().expect("contiguous"), x2, true),
        );
        let (s1, s2) = (s1?, s2?);
        let h1 = &v.v1 - &s1.output;
        let h2 = &v.v2 - &s2.output;
        let norm = max_abs(h1.iter().chain(h2.iter()).copied());
        trace.record(norm, [1, 1]);
        if !norm.is_finite() {
            return Err(Error::NonConvergence {
                solver: "nonlinear elimination",
                trace: Box::new(trace),
            });
        }
        if norm <= opts.tol {
            return Ok((v, trace));
        }
        if trace.iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                solver: "nonlinear elimination",
                trace: Box::new(trace),
            });
        }

        let size = m1 + m2;
        let mut jac = Array2::<f64>::eye(size);
        jac.slice_mut(s![..m1, m1..]).assign(&(-&s1.dg_dv));
        jac.slice_mut(s![m1.., ..m1]).assign(&(-&s2.dg_dv));
        let mut rhs: Vec<f64> = h1.iter().chain(h2.iter()).map(|r| -r).collect();
        Lu::factor(jac)?.solve_in_place(&mut rhs);
        for a in 0..m1 {
            v.v1[a] += rhs[a];
        }
        for b in 0..m2 {
            v.v2[b] += rhs[m1 + b];
        }
        trace.iterations += 1;
    }
}

/// Full solution of the coupled system.
#[derive(Clone, Debug)]
pub struct NetworkSolution {
    pub u1: Array1<f64>,
    pub u2: Array1<f64>,
    pub coupling: CouplingState,
}

/// Monolithic Newton on `(u₁, u₂, v₁, v₂)` with the explicit block Jacobian
/// ```text
/// [ ∂f₁/∂u₁     0        0      ∂f₁/∂v₂ ]
/// [   0      ∂f₂/∂u₂  ∂f₂/∂v₁     0     ]
/// [ −∂g₁/∂u₁    0        I        0     ]
/// [   0     −∂g₂/∂u₂     0        I     ]
/// ```
/// Internal states start from each component's `initial_state`.
pub fn augmented_newton(
    c1: &dyn ComponentModel,
    c2: &dyn ComponentModel,
    x: &[f64],
    v0: &CouplingState,
    opts: &NetworkOptions,
) -> Result<(NetworkSolution, SolveTrace)> {
    opts.validate()?;
    let split = check_network(c1, c2, x, v0)?;
    let (x1, x2) = x.split_at(split);
    let (n1, n2) = (c1.state_dim(), c2.state_dim());
    let (m1, m2) = (c1.output_dim(), c2.output_dim());
    let total = n1 + n2 + m1 + m2;
    let (o_u2, o_v1, o_v2) = (n1, n1 + n2, n1 + n2 + m1);

    let mut z = Array1::<f64>::zeros(total);
    z.slice_mut(s![..n1]).assign(&Array1::from(
        c1.initial_state(v0.v2.as_slice().unwrap(), x1),
    ));
    z.slice_mut(s![o_u2..o_v1]).assign(&Array1::from(
        c2.initial_state(v0.v1.as_slice().unwrap(), x2),
    ));
    z.slice_mut(s![o_v1..o_v2]).assign(&v0.v1);
    z.slice_mut(s![o_v2..]).assign(&v0.v2);
    let mut trace = SolveTrace::default();

    loop {
        let zs = z.as_slice().expect("contiguous");
        let (u1, u2, v1, v2) = (&zs[..n1], &zs[o_u2..o_v1], &zs[o_v1..o_v2], &zs[o_v2..]);
        let f1 = c1
            .residual(u1, v2, x1)
            .map_err(|e| e.in_component(0, None))?;
        let f2 = c2
            .residual(u2, v1, x2)
            .map_err(|e| e.in_component(1, None))?;
        let g1 = c1.output(u1);
        let g2 = c2.output(u2);
        let mut r = Array1::<f64>::zeros(total);
        r.slice_mut(s![..n1]).assign(&f1);
        r.slice_mut(s![o_u2..o_v1]).assign(&f2);
        for a in 0..m1 {
            r[o_v1 + a] = v1[a] - g1[a];
        }
        for b in 0..m2 {
            r[o_v2 + b] = v2[b] - g2[b];
        }
        let norm = max_abs(r.iter().copied());
        trace.record(norm, [0, 0]);
        if norm.is_finite() && norm <= opts.tol {
            let coupling = CouplingState::new(
                z.slice(s![o_v1..o_v2]).to_owned(),
                z.slice(s![o_v2..]).to_owned(),
            );
            return Ok((
                NetworkSolution {
                    u1: z.slice(s![..n1]).to_owned(),
                    u2: z.slice(s![o_u2..o_v1]).to_owned(),
                    coupling,
                },
                trace,
            ));
        }
        if !norm.is_finite() || trace.iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                solver: "augmented Newton",
                trace: Box::new(trace),
            });
        }

        let mut jac = Array2::<f64>::zeros((total, total));
        jac.slice_mut(s![..n1, ..n1])
            .assign(&c1.state_jacobian(u1, v2, x1)?);
        jac.slice_mut(s![..n1, o_v2..])
            .assign(&c1.input_jacobian(u1, v2, x1)?);
        jac.slice_mut(s![o_u2..o_v1, o_u2..o_v1])
            .assign(&c2.state_jacobian(u2, v1, x2)?);
        jac.slice_mut(s![o_u2..o_v1, o_v1..o_v2])
            .assign(&c2.input_jacobian(u2, v1, x2)?);
        jac.slice_mut(s![o_v1..o_v2, ..n1])
            .assign(&(-c1.output_jacobian(u1)));
        jac.slice_mut(s![o_v2.., o_u2..o_v1])
            .assign(&(-c2.output_jacobian(u2)));
        for i in o_v1..total {
            jac[[i, i]] = 1.0;
        }
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        Lu::factor(jac)?.solve_in_place(&mut step);
        z += &Array1::from(step);
        trace.iterations += 1;
    }
}

/// Growth of the sweep-to-sweep change, relative to the first sweep, at which
/// relaxation is declared divergent.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Nonlinear block Gauss-Seidel: `v₁ ← g₁(u₁(v₂))` then `v₂ ← g₂(u₂(v₁))`.
///
/// Converges only when the coupling map is contractive; divergence and slow
/// convergence both surface as [`Error::NonConvergence`].
pub fn gauss_seidel_relax(
    c1: &dyn ComponentModel,
    c2: &dyn ComponentModel,
    x: &[f64],
    v0: &CouplingState,
    opts: &NetworkOptions,
) -> Result<(CouplingState, SolveTrace)> {
    opts.validate()?;
    let split = check_network(c1, c2, x, v0)?;
    let (x1, x2) = x.split_at(split);
    let mut v = v0.clone();
    let mut trace = SolveTrace::default();
    loop {
        let s1 = solve_component(c1, 0, v.v2.as_slice().unwrap(), x1, false)?;
        let v1_new = s1.output;
        let s2 = solve_component(c2, 1, v1_new.as_slice().unwrap(), x2, false)?;
        let v2_new = s2.output;
        let change = max_abs(
            (&v1_new - &v.v1)
                .iter()
                .chain((&v2_new - &v.v2).iter())
                .copied(),
        );
        trace.record(change, [1, 1]);
        let finite = v1_new.iter().chain(v2_new.iter()).all(|t| t.is_finite());
        let diverged = change > DIVERGENCE_FACTOR * trace.residual_norms[0].max(opts.tol);
        v = CouplingState::new(v1_new, v2_new);
        trace.iterations += 1;
        if finite && change <= opts.tol {
            return Ok((v, trace));
        }
        if !finite || diverged || trace.iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                solver: "Gauss-Seidel relaxation",
                trace: Box::new(trace),
            });
        }
    }
}
