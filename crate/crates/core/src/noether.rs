//! Bilinear operators `D` and `I`, invariance checks for one-parameter families
//! `y + theta xi(t, y)`, the Noether residual and conserved quantities.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lagrangian::{Arguments, LagrangianSpec};
use crate::operators::{Discretization, OperatorHandle};
use crate::report::ResidualReport;
use crate::variational::{Trajectory, GAUSS_OFFSETS};

/// Infinitesimal generator `xi(t, x)` with the sampling half-width `epsilon`.
#[derive(Clone)]
pub struct Generator {
    xi: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub epsilon: f64,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator").field("epsilon", &self.epsilon).finish_non_exhaustive()
    }
}

impl Generator {
    pub fn new(xi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!("sampling width must be positive, got {epsilon}")));
        }
        Ok(Self { xi: Arc::new(xi), epsilon })
    }

    /// Translation `xi = c`.
    pub fn constant(c: f64, epsilon: f64) -> Result<Self> {
        Self::new(move |_, _| c, epsilon)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.xi)(t, x)
    }

    /// `xi(t_j, y_j)` on the grid of `y`.
    pub fn along(&self, y: &GridFunction) -> Result<GridFunction> {
        GridFunction::new(y.grid, y.values.iter().enumerate().map(|(j, &v)| self.eval(y.grid.node(j), v)).collect())
    }
}

fn discretize_pair(f: &GridFunction, g: &GridFunction, op: &OperatorHandle) -> Result<Discretization> {
    f.grid.check_same(&g.grid)?;
    op.discretize(&f.grid)
}

fn bilinear_d_with(disc: &Discretization, f: &[f64], g: &[f64]) -> Vec<f64> {
    let a = disc.apply_a_dual(g);
    let b = disc.apply_b(f);
    (0..f.len()).map(|j| f[j] * a[j] + g[j] * b[j]).collect()
}

fn bilinear_i_with(disc: &Discretization, f: &[f64], g: &[f64]) -> Vec<f64> {
    let kd = disc.apply_k_dual(g);
    let k = disc.apply_k(f);
    (0..f.len()).map(|j| -f[j] * kd[j] + g[j] * k[j]).collect()
}

/// `D[f, g] = f A_{P*}[g] + g B_P[f]`.
pub fn bilinear_d(f: &GridFunction, g: &GridFunction, op: &OperatorHandle) -> Result<GridFunction> {
    let disc = discretize_pair(f, g, op)?;
    Ok(GridFunction { grid: f.grid, values: bilinear_d_with(&disc, &f.values, &g.values) })
}

/// `I[f, g] = -f K_{P*}[g] + g K_P[f]`.
pub fn bilinear_i(f: &GridFunction, g: &GridFunction, op: &OperatorHandle) -> Result<GridFunction> {
    let disc = discretize_pair(f, g, op)?;
    Ok(GridFunction { grid: f.grid, values: bilinear_i_with(&disc, &f.values, &g.values) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub thetas: Vec<f64>,
    /// Largest `|F(y + theta xi) - F(y)|` over samples and nodes.
    pub max_abs_difference: f64,
    /// Largest fitted coefficient of `theta` over the nodes.
    pub linear_coefficient: f64,
    /// Largest fitted coefficient of `theta^2` over the nodes.
    pub quadratic_coefficient: f64,
    pub tolerance: f64,
    pub exact: bool,
    pub first_order: bool,
}

impl InvarianceReport {
    pub fn invariant(&self) -> bool {
        self.exact || self.first_order
    }
}

/// Samples `theta in {-eps, -eps/2, eps/2, eps}` and fits `c1 theta + c2 theta^2` per node.
pub fn check_invariance(
    f: &LagrangianSpec,
    generator: &Generator,
    op: &OperatorHandle,
    y: &GridFunction,
) -> Result<InvarianceReport> {
    let disc = op.discretize(&y.grid)?;
    let base = Trajectory::new(&disc, &y.values);
    let base_values: Vec<f64> = (0..base.len()).map(|j| f.value(&base.at(j))).collect();
    if let Some(j) = base_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: j, t: base.t[j] });
    }
    let xi = generator.along(y)?;
    let eps = generator.epsilon;
    let thetas = vec![-eps, -0.5 * eps, 0.5 * eps, eps];

    let m = y.grid.len();
    let mut diffs = vec![vec![0.0; m]; thetas.len()];
    for (s, &theta) in thetas.iter().enumerate() {
        let shifted: Vec<f64> = y.values.iter().zip(&xi.values).map(|(v, x)| v + theta * x).collect();
        let traj = Trajectory::new(&disc, &shifted);
        for j in 0..m {
            diffs[s][j] = f.value(&traj.at(j)) - base_values[j];
        }
    }

    let s2: f64 = thetas.iter().map(|t| t * t).sum();
    let s4: f64 = thetas.iter().map(|t| t.powi(4)).sum();
    let mut max_abs_difference = 0.0_f64;
    let mut linear = 0.0_f64;
    let mut quadratic = 0.0_f64;
    for j in 0..m {
        // symmetric samples decouple the normal equations
        let c1: f64 = thetas.iter().zip(&diffs).map(|(t, d)| t * d[j]).sum::<f64>() / s2;
        let c2: f64 = thetas.iter().zip(&diffs).map(|(t, d)| t * t * d[j]).sum::<f64>() / s4;
        linear = linear.max(c1.abs());
        quadratic = quadratic.max(c2.abs());
        for d in &diffs {
            max_abs_difference = max_abs_difference.max(d[j].abs());
        }
    }
    if !max_abs_difference.is_finite() {
        return Err(Error::NonFinite { index: 0, t: y.grid.a });
    }
    let scale = 1.0 + base_values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tolerance = 1e-10 * scale;
    Ok(InvarianceReport {
        thetas,
        max_abs_difference,
        linear_coefficient: linear,
        quadratic_coefficient: quadratic,
        tolerance,
        exact: max_abs_difference <= tolerance,
        first_order: linear <= tolerance / eps,
    })
}

/// `d/dt (xi dF/dx3) + D[xi, dF/dx4] + I[xi, dF/dx2]` at interior nodes.
pub fn noether_residual(
    f: &LagrangianSpec,
    generator: &Generator,
    op: &OperatorHandle,
    y: &GridFunction,
) -> Result<ResidualReport> {
    let disc = op.discretize(&y.grid)?;
    let traj = Trajectory::new(&disc, &y.values);
    let [_, d2, d3, d4] = traj.partials(f)?;
    let xi = generator.along(y)?.values;
    let flux: Vec<f64> = xi.iter().zip(&d3).map(|(a, b)| a * b).collect();
    let dflux = disc.derivative(&flux);
    let dterm = bilinear_d_with(&disc, &xi, &d4);
    let iterm = bilinear_i_with(&disc, &xi, &d2);
    let full: Vec<f64> = (0..xi.len()).map(|j| dflux[j] + dterm[j] + iterm[j]).collect();
    Ok(ResidualReport::interior(y, &full))
}

fn require_by_only(f: &LagrangianSpec) -> Result<()> {
    if f.depends_only_on_by() {
        return Ok(());
    }
    Err(Error::Precondition(format!(
        "conserved quantity needs F(x4, t); {} declares dependencies {:?}",
        f.name(),
        f.dependencies()
    )))
}

/// `Q = K_{P*}[dF/dx4]` along `y` for Lagrangians of the form `F(x4, t)`.
///
/// Evaluated in the same piecewise-linear form the direct solver minimizes:
/// `B_P[y]` and `dF/dx4` are sampled at two Gauss points per cell, `Q` is
/// averaged over each cell and the cell averages are averaged onto interior
/// nodes (extrapolated linearly to the end nodes).
/// On discrete extremals the cell averages are equal up to the solver tolerance.
pub fn conserved_quantity(f: &LagrangianSpec, op: &OperatorHandle, y: &GridFunction) -> Result<GridFunction> {
    require_by_only(f)?;
    let grid = y.grid;
    let (n, h) = (grid.n, grid.step());
    let points: Vec<f64> = GAUSS_OFFSETS.iter().flat_map(|s| (0..n).map(move |c| grid.node(c) + s * h)).collect();
    let (_, cell_rows) = op.sample_matrices(&grid, &points)?;
    let slopes: Vec<f64> = y.values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let by = &cell_rows * DVector::from_column_slice(&slopes);
    let mut d4 = DVector::zeros(points.len());
    for (i, &t) in points.iter().enumerate() {
        let v = f.partials(&Arguments::new(0.0, 0.0, 0.0, by[i], t))[3];
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i % n, t });
        }
        d4[i] = 0.5 * v;
    }
    let cells = cell_rows.tr_mul(&d4);
    let mut q = Vec::with_capacity(n + 1);
    if n == 1 {
        return GridFunction::new(grid, vec![cells[0]; 2]);
    }
    q.push(1.5 * cells[0] - 0.5 * cells[1]);
    q.extend((1..n).map(|j| 0.5 * (cells[j - 1] + cells[j])));
    q.push(1.5 * cells[n - 1] - 0.5 * cells[n - 2]);
    GridFunction::new(grid, q)
}

/// `K_{P*}[dF/dx4]` with `B_P[y]` and `K_{P*}` taken from the nodal product-integration matrices.
pub fn conserved_quantity_nodal(f: &LagrangianSpec, op: &OperatorHandle, y: &GridFunction) -> Result<GridFunction> {
    require_by_only(f)?;
    let disc = op.discretize(&y.grid)?;
    let traj = Trajectory::new(&disc, &y.values);
    let [_, _, _, d4] = traj.partials(f)?;
    GridFunction::new(y.grid, disc.apply_k_dual(&d4))
}

/// `stdev / (|mean| + 1)` over the nodes, skipping two at each end.
pub fn relative_stdev(q: &GridFunction) -> f64 {
    let v = &q.values;
    let inner = if v.len() > 6 { &v[2..v.len() - 2] } else { &v[..] };
    let n = inner.len() as f64;
    let mean = inner.iter().sum::<f64>() / n;
    let var = inner.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / (mean.abs() + 1.0)
}
