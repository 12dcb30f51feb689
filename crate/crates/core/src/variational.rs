//! Functionals `I(y) = int_a^b F(y, K_P[y], y', B_P[y], t) dt`, their
//! Euler-Lagrange and natural-boundary residuals, isoperimetric constraints,
//! and a direct (Ritz) solver on nodal values.
//!
//! Residual sign convention:
//! `dF/dx1 + K_{P*}[dF/dx2] - d/dt dF/dx3 - A_{P*}[dF/dx4]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::lagrangian::{Arguments, LagrangianSpec};
use crate::operators::{Discretization, OperatorHandle};
use crate::optimize::{minimize, BfgsOptions};
use crate::report::ResidualReport;

/// `(y, K_P[y], y', B_P[y], t)` at every node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub ky: Vec<f64>,
    pub dy: Vec<f64>,
    pub by: Vec<f64>,
}

impl Trajectory {
    pub fn new(disc: &Discretization, y: &[f64]) -> Self {
        let dy = disc.derivative(y);
        Self {
            t: disc.grid().nodes(),
            y: y.to_vec(),
            ky: disc.apply_k(y),
            by: disc.apply_k(&dy),
            dy,
        }
    }

    pub fn at(&self, j: usize) -> Arguments {
        Arguments::new(self.y[j], self.ky[j], self.dy[j], self.by[j], self.t[j])
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Partials of `f` along the trajectory, one vector per slot.
    pub fn partials(&self, f: &LagrangianSpec) -> Result<[Vec<f64>; 4]> {
        let mut out: [Vec<f64>; 4] = Default::default();
        for v in out.iter_mut() {
            v.reserve(self.len());
        }
        for j in 0..self.len() {
            let d = f.partials(&self.at(j));
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: j, t: self.t[j] });
            }
            for i in 0..4 {
                out[i].push(d[i]);
            }
        }
        Ok(out)
    }
}

fn check_compatible(op: &OperatorHandle, y: &GridFunction) -> Result<Discretization> {
    op.discretize(&y.grid)
}

/// Trapezoidal value of the functional on an existing discretization.
pub fn functional_value(f: &LagrangianSpec, disc: &Discretization, y: &[f64]) -> Result<f64> {
    let traj = Trajectory::new(disc, y);
    let w = disc.grid().trapezoid_weights();
    let mut total = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let v = f.value(&traj.at(j));
        if !v.is_finite() {
            return Err(Error::NonFinite { index: j, t: traj.t[j] });
        }
        total += wj * v;
    }
    Ok(total)
}

pub fn eval_functional(f: &LagrangianSpec, op: &OperatorHandle, y: &GridFunction) -> Result<f64> {
    let disc = check_compatible(op, y)?;
    functional_value(f, &disc, &y.values)
}

/// Euler-Lagrange expression at every node (ends included).
pub fn el_residual_values(f: &LagrangianSpec, disc: &Discretization, y: &[f64]) -> Result<Vec<f64>> {
    let traj = Trajectory::new(disc, y);
    let [d1, d2, d3, d4] = traj.partials(f)?;
    let k2 = disc.apply_k_dual(&d2);
    let dd3 = disc.derivative(&d3);
    let a4 = disc.apply_a_dual(&d4);
    Ok((0..traj.len()).map(|j| d1[j] + k2[j] - dd3[j] - a4[j]).collect())
}

pub fn el_residual(f: &LagrangianSpec, op: &OperatorHandle, y: &GridFunction) -> Result<ResidualReport> {
    let disc = check_compatible(op, y)?;
    let full = el_residual_values(f, &disc, &y.values)?;
    Ok(ResidualReport::interior(y, &full))
}

/// `dF/dx3 (a) + K_{P*}[dF/dx4](a)`.
pub fn natural_boundary_residual(f: &LagrangianSpec, op: &OperatorHandle, y: &GridFunction) -> Result<f64> {
    let disc = check_compatible(op, y)?;
    natural_boundary_value(f, &disc, &y.values)
}

fn natural_boundary_value(f: &LagrangianSpec, disc: &Discretization, y: &[f64]) -> Result<f64> {
    let traj = Trajectory::new(disc, y);
    let [_, _, d3, d4] = traj.partials(f)?;
    let k4 = disc.k_dual_matrix().row(0).iter().zip(&d4).map(|(w, v)| w * v).sum::<f64>();
    Ok(d3[0] + k4)
}

fn augmented(f: &LagrangianSpec, gs: &[LagrangianSpec], lambdas: &[f64]) -> Result<LagrangianSpec> {
    if gs.len() != lambdas.len() {
        return Err(Error::Precondition(format!(
            "{} constraints but {} multipliers",
            gs.len(),
            lambdas.len()
        )));
    }
    let terms: Vec<(f64, &LagrangianSpec)> = lambdas.iter().copied().zip(gs.iter()).collect();
    Ok(f.minus_combination(&terms))
}

/// EL residual of `H = F - sum_k lambda_k G_k`.
pub fn iso_el_residual(
    f: &LagrangianSpec,
    gs: &[LagrangianSpec],
    lambdas: &[f64],
    op: &OperatorHandle,
    y: &GridFunction,
) -> Result<ResidualReport> {
    if gs.is_empty() {
        return Err(Error::Precondition("isoperimetric residual needs at least one constraint".into()));
    }
    el_residual(&augmented(f, gs, lambdas)?, op, y)
}

#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Number of singular values above `1e-8` times the largest.
    pub rank: usize,
}

/// `a_kl = int (dG_k/dx1 + K_{P*}[dG_k/dx2]) eta_l + (dG_k/dx3 + K_{P*}[dG_k/dx4]) eta_l' dt`.
///
/// The `eta_l'` term uses cell averages times nodal increments, so it vanishes
/// exactly when the weight is constant and `eta_l` vanishes at both ends.
pub fn sensitivity_matrix(
    gs: &[LagrangianSpec],
    etas: &[GridFunction],
    op: &OperatorHandle,
    y: &GridFunction,
) -> Result<SensitivityMatrix> {
    if gs.len() != etas.len() || gs.is_empty() {
        return Err(Error::Precondition(format!(
            "need as many variations as constraints (r >= 1), got {} and {}",
            etas.len(),
            gs.len()
        )));
    }
    for (l, eta) in etas.iter().enumerate() {
        y.grid.check_same(&eta.grid)?;
        let scale = eta.max_abs().max(1.0);
        let ends = eta.values[0].abs().max(eta.values[eta.grid.n].abs());
        if ends > 1e-12 * scale {
            return Err(Error::Precondition(format!("variation {l} does not vanish at the endpoints")));
        }
    }
    let disc = check_compatible(op, y)?;
    let traj = Trajectory::new(&disc, &y.values);
    let w = y.grid.trapezoid_weights();
    let r = gs.len();
    let mut a = DMatrix::zeros(r, r);
    for (k, g) in gs.iter().enumerate() {
        let [d1, d2, d3, d4] = traj.partials(g)?;
        let k2 = disc.apply_k_dual(&d2);
        let k4 = disc.apply_k_dual(&d4);
        let value: Vec<f64> = (0..traj.len()).map(|j| d1[j] + k2[j]).collect();
        let slope: Vec<f64> = (0..traj.len()).map(|j| d3[j] + k4[j]).collect();
        for (l, eta) in etas.iter().enumerate() {
            let e = &eta.values;
            let mut s: f64 = (0..e.len()).map(|j| w[j] * value[j] * e[j]).sum();
            for j in 0..y.grid.n {
                s += 0.5 * (slope[j] + slope[j + 1]) * (e[j + 1] - e[j]);
            }
            a[(k, l)] = s;
        }
    }
    let singular_values: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    let smax = singular_values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let rank = if smax == 0.0 { 0 } else { singular_values.iter().filter(|s| **s > 1e-8 * smax).count() };
    Ok(SensitivityMatrix { matrix: a, singular_values, rank })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    /// `None` leaves `y(a)` free.
    pub left: Option<f64>,
    pub right: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub g: LagrangianSpec,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub lagrangian: LagrangianSpec,
    pub op: OperatorHandle,
    pub boundary: Boundary,
    pub constraints: Vec<Constraint>,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub bfgs: BfgsOptions,
    /// Starting nodal values; defaults to the line between the boundary values.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { bfgs: BfgsOptions::default(), initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub y: GridFunction,
    pub report: ResidualReport,
    pub functional: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct IsoSolution {
    pub y: GridFunction,
    pub multipliers: Vec<f64>,
    pub constraint_values: Vec<f64>,
    pub report: ResidualReport,
    pub outer_iterations: usize,
}

/// Ritz functional restricted to the free nodes.
///
/// Unlike [`functional_value`], this is the piecewise-linear finite-element
/// form: on each cell the integrand is sampled at the two Gauss points, with `y`
/// interpolated linearly, `y'` the cell slope, `K_P[y]` evaluated at the Gauss
/// point and `B_P[y]` taken as `K_P` of the piecewise-constant slope. Nodal
/// central differences and nodal product-trapezoid values both annihilate the
/// alternating mode `(-1)^j` up to `O(h^2)`, which leaves the nodal trapezoid
/// sum without a well-defined minimizer.
struct RitzProblem<'a> {
    f: &'a LagrangianSpec,
    h: f64,
    /// Gauss points ordered `[left points of every cell, right points of every cell]`.
    points: Vec<f64>,
    k_rows: DMatrix<f64>,
    cell_rows: DMatrix<f64>,
    template: Vec<f64>,
    free: Vec<usize>,
}

pub(crate) const GAUSS_OFFSETS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

impl<'a> RitzProblem<'a> {
    fn new(f: &'a LagrangianSpec, op: &OperatorHandle, grid: &Grid, boundary: &Boundary, initial: &[f64]) -> Result<Self> {
        let n = grid.n;
        let h = grid.step();
        let mut template = initial.to_vec();
        template[n] = boundary.right;
        if let Some(l) = boundary.left {
            template[0] = l;
        }
        let first = if boundary.left.is_some() { 1 } else { 0 };
        let points: Vec<f64> = GAUSS_OFFSETS
            .iter()
            .flat_map(|s| (0..n).map(move |c| grid.node(c) + s * h))
            .collect();
        let deps = f.dependencies();
        let (k_rows, cell_rows) = if deps[1] || deps[3] {
            op.sample_matrices(grid, &points)?
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        };
        Ok(Self { f, h, points, k_rows, cell_rows, template, free: (first..n).collect() })
    }

    fn expand(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut y = self.template.clone();
        for (i, &j) in self.free.iter().enumerate() {
            y[j] = x[i];
        }
        y
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let y = self.expand(x);
        let h = self.h;
        let cells = y.len() - 1;
        let deps = self.f.dependencies();
        let slopes: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let q = self.points.len();
        let kq = if deps[1] { self.k_rows.clone() * DVector::from_column_slice(&y) } else { DVector::zeros(q) };
        let bq = if deps[3] {
            self.cell_rows.clone() * DVector::from_column_slice(&slopes)
        } else {
            DVector::zeros(q)
        };

        let mut value = 0.0;
        let mut grad = DVector::zeros(y.len());
        let mut g_k = DVector::zeros(q);
        let mut g_b = DVector::zeros(q);
        let mut g_slope = vec![0.0; cells];
        for (p, s) in GAUSS_OFFSETS.iter().enumerate() {
            for c in 0..cells {
                let i = p * cells + c;
                let yq = (1.0 - s) * y[c] + s * y[c + 1];
                let args = Arguments::new(yq, kq[i], slopes[c], bq[i], self.points[i]);
                let v = self.f.value(&args);
                let d = self.f.partials(&args);
                if !v.is_finite() || d.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { index: c, t: self.points[i] });
                }
                let w = 0.5 * h;
                value += w * v;
                grad[c] += (1.0 - s) * w * d[0];
                grad[c + 1] += s * w * d[0];
                g_k[i] = w * d[1];
                g_b[i] = w * d[3];
                g_slope[c] += w * d[2];
            }
        }
        if deps[1] {
            grad += self.k_rows.tr_mul(&g_k);
        }
        if deps[3] {
            let back = self.cell_rows.tr_mul(&g_b);
            for (p, b) in g_slope.iter_mut().zip(back.iter()) {
                *p += b;
            }
        }
        for (c, p) in g_slope.iter().enumerate() {
            grad[c] -= p / h;
            grad[c + 1] += p / h;
        }
        let g = DVector::from_iterator(self.free.len(), self.free.iter().map(|&j| grad[j]));
        Ok((value, g))
    }
}

fn initial_guess(grid: &Grid, boundary: &Boundary, initial: Option<&[f64]>) -> Result<Vec<f64>> {
    match initial {
        Some(v) => {
            if v.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "initial guess has {} values, grid has {}",
                    v.len(),
                    grid.len()
                )));
            }
            Ok(v.to_vec())
        }
        None => {
            let ya = boundary.left.unwrap_or(boundary.right);
            let (a, b) = (grid.a, grid.b);
            Ok(grid.nodes().iter().map(|t| ya + (boundary.right - ya) * (t - a) / (b - a)).collect())
        }
    }
}

fn check_spec(spec: &ProblemSpec) -> Result<()> {
    if !spec.boundary.right.is_finite() || spec.boundary.left.is_some_and(|v| !v.is_finite()) {
        return Err(Error::Precondition("boundary values must be finite".into()));
    }
    Ok(())
}

fn minimize_on(
    f: &LagrangianSpec,
    op: &OperatorHandle,
    grid: &Grid,
    boundary: &Boundary,
    options: &SolverOptions,
) -> Result<(Vec<f64>, f64, usize, f64)> {
    let start = initial_guess(grid, boundary, options.initial.as_deref())?;
    let problem = RitzProblem::new(f, op, grid, boundary, &start)?;
    let x0 = DVector::from_iterator(problem.free.len(), problem.free.iter().map(|&j| problem.template[j]));
    // Nodal gradients carry a factor h; dividing it out makes the tolerance a
    // bound on the L2 gradient rather than on the grid-dependent nodal one.
    let h = grid.step();
    let scaled = |x: &DVector<f64>| problem.value_and_gradient(x).map(|(v, g)| (v / h, g / h));
    let out = minimize(scaled, x0, &options.bfgs).map_err(|e| match e {
        Error::NonConvergence { iterations, gradient_norm, last_iterate } => Error::NonConvergence {
            iterations,
            gradient_norm,
            last_iterate: problem.expand(&DVector::from_vec(last_iterate)),
        },
        other => other,
    })?;
    Ok((problem.expand(&out.x), out.value * h, out.iterations, out.gradient_norm))
}

fn finish(f: &LagrangianSpec, disc: &Discretization, y: Vec<f64>, free_left: bool) -> Result<(GridFunction, ResidualReport)> {
    let full = el_residual_values(f, disc, &y)?;
    let y = GridFunction::new(*disc.grid(), y)?;
    let mut report = ResidualReport::interior(&y, &full);
    if free_left {
        report = report.with_boundary_term(natural_boundary_value(f, disc, &y.values)?);
    }
    Ok((y, report))
}

pub fn solve_fundamental(spec: &ProblemSpec) -> Result<Solution> {
    solve_fundamental_with(spec, &SolverOptions::default())
}

/// Minimizes the discretized functional over the free nodal values.
pub fn solve_fundamental_with(spec: &ProblemSpec, options: &SolverOptions) -> Result<Solution> {
    check_spec(spec)?;
    if !spec.constraints.is_empty() {
        return Err(Error::Precondition("constraints present; use solve_isoperimetric".into()));
    }
    let disc = spec.op.discretize(&spec.grid)?;
    let (y, functional, iterations, gradient_norm) =
        minimize_on(&spec.lagrangian, &spec.op, &spec.grid, &spec.boundary, options)?;
    let (y, report) = finish(&spec.lagrangian, &disc, y, spec.boundary.left.is_none())?;
    Ok(Solution { y, report, functional, iterations, gradient_norm })
}

const CONSTRAINT_TOL: f64 = 1e-6;
const MAX_OUTER: usize = 50;

pub fn solve_isoperimetric(spec: &ProblemSpec) -> Result<IsoSolution> {
    solve_isoperimetric_with(spec, &SolverOptions::default())
}

/// Outer multiplier search (secant for one constraint, damped Newton otherwise)
/// around inner Ritz solves of `H = F - sum lambda_k G_k`.
pub fn solve_isoperimetric_with(spec: &ProblemSpec, options: &SolverOptions) -> Result<IsoSolution> {
    check_spec(spec)?;
    let r = spec.constraints.len();
    if r == 0 {
        return Err(Error::Precondition("isoperimetric problem needs at least one constraint".into()));
    }
    let disc = spec.op.discretize(&spec.grid)?;
    let gs: Vec<LagrangianSpec> = spec.constraints.iter().map(|c| c.g.clone()).collect();
    let targets: Vec<f64> = spec.constraints.iter().map(|c| c.target).collect();

    let mut warm = options.clone();
    let inner = |lambdas: &[f64], warm: &mut SolverOptions| -> Result<(Vec<f64>, Vec<f64>)> {
        let h = augmented(&spec.lagrangian, &gs, lambdas)?;
        let (y, _, _, _) = minimize_on(&h, &spec.op, &spec.grid, &spec.boundary, warm)?;
        let values = gs.iter().map(|g| functional_value(g, &disc, &y)).collect::<Result<Vec<_>>>()?;
        warm.initial = Some(y.clone());
        Ok((y, values))
    };
    let mismatch = |values: &[f64]| -> Vec<f64> { values.iter().zip(&targets).map(|(v, t)| v - t).collect() };
    let converged = |res: &[f64]| res.iter().all(|v| v.abs() <= CONSTRAINT_TOL);
    let norm = |res: &[f64]| res.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut lambdas = vec![0.0; r];
    let (mut y, mut values) = inner(&lambdas, &mut warm)?;
    let mut res = mismatch(&values);
    let mut outer = 0;

    if r == 1 {
        let mut prev: Option<(f64, f64)> = None;
        while !converged(&res) {
            if outer >= MAX_OUTER {
                return Err(Error::NonConvergence {
                    iterations: outer,
                    gradient_norm: res[0].abs(),
                    last_iterate: y,
                });
            }
            outer += 1;
            let step = match prev {
                None => 1.0_f64.max(lambdas[0].abs() * 1e-2),
                Some((lp, rp)) => {
                    let slope = (res[0] - rp) / (lambdas[0] - lp);
                    if !(slope.abs() > 1e-12 * (1.0 + targets[0].abs())) {
                        return Err(singular_jacobian(slope));
                    }
                    -res[0] / slope
                }
            };
            prev = Some((lambdas[0], res[0]));
            lambdas[0] += step;
            let (ny, nv) = inner(&lambdas, &mut warm)?;
            y = ny;
            values = nv;
            res = mismatch(&values);
        }
    } else {
        while !converged(&res) {
            if outer >= MAX_OUTER {
                return Err(Error::NonConvergence { iterations: outer, gradient_norm: norm(&res), last_iterate: y });
            }
            outer += 1;
            let mut jac = DMatrix::zeros(r, r);
            for k in 0..r {
                let delta = 1e-3 * lambdas[k].abs().max(1.0);
                let mut probe = lambdas.clone();
                probe[k] += delta;
                let mut local = warm.clone();
                let (_, pv) = inner(&probe, &mut local)?;
                for i in 0..r {
                    jac[(i, k)] = (pv[i] - values[i]) / delta;
                }
            }
            let svd = jac.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > 1e-10 * smax) || smax == 0.0 {
                return Err(Error::SingularJacobian(format!(
                    "constraint Jacobian dJ/dlambda has singular values in [{smin:e}, {smax:e}]; \
                     the constraints are degenerate for these data, try different variations eta"
                )));
            }
            let step = svd
                .solve(&DVector::from_iterator(r, res.iter().map(|v| -v)), 0.0)
                .map_err(|e| Error::SingularJacobian(e.to_string()))?;
            let current = norm(&res);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = lambdas.iter().zip(step.iter()).map(|(l, s)| l + t * s).collect();
                let mut local = warm.clone();
                let (ty, tv) = inner(&trial, &mut local)?;
                let tres = mismatch(&tv);
                if norm(&tres) < current || t < 1e-3 {
                    lambdas = trial;
                    y = ty;
                    values = tv;
                    res = tres;
                    warm = local;
                    break;
                }
                t *= 0.5;
            }
        }
    }

    let h = augmented(&spec.lagrangian, &gs, &lambdas)?;
    let (y, report) = finish(&h, &disc, y, spec.boundary.left.is_none())?;
    Ok(IsoSolution { y, multipliers: lambdas, constraint_values: values, report, outer_iterations: outer })
}

fn singular_jacobian(slope: f64) -> Error {
    Error::SingularJacobian(format!(
        "dJ/dlambda = {slope:e}: the constraint does not respond to the multiplier \
         (G may itself be extremal); try different variations eta"
    ))
}
