//! Generalized fractional integral `K_P` and the derivatives `A_P = d/dt K_P`,
//! `B_P = K_P d/dt` on uniform grids.
//!
//! `K_P[f](t) = lambda int_a^t k(t, tau) f(tau) dtau + mu int_t^b k(tau, t) f(tau) dtau`
//!
//! Integrals are computed by product integration: `f` is replaced by its
//! piecewise-linear interpolant and the kernel moments `int k` and
//! `int k (tau - t_j)` are integrated per cell. Power kernels use closed-form
//! moments; other kernels use Gauss-Jacobi rules with the weight
//! `|t - tau|^(-sigma)` on the cell touching the singularity and Gauss-Legendre
//! rules elsewhere.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DerivativeStencil, Grid, GridFunction};
use crate::kernels::{dual, KernelSpec, PSet};
use crate::quadrature::GaussRule;

const RULE_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Linear interpolation of `f` on each cell.
    #[default]
    ProductTrapezoid,
    /// `f` replaced by its cell average.
    ProductMidpoint,
}

/// Immutable description of a generalized fractional operator.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    pset: PSet,
    kernel: KernelSpec,
    quadrature: QuadratureRule,
    stencil: DerivativeStencil,
    legendre: GaussRule,
    // weight (1 - x)^(-sigma): singular at the right end of a left-side cell
    jacobi_left: GaussRule,
    // weight (1 + x)^(-sigma): singular at the left end of a right-side cell
    jacobi_right: GaussRule,
}

/// Derivative value with the stencil actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeValue {
    pub value: f64,
    /// True when the point was too close to an endpoint for the central stencil.
    pub one_sided: bool,
}

type RowSet = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl OperatorHandle {
    pub fn new(pset: PSet, kernel: KernelSpec) -> Result<Self> {
        Self::with_options(pset, kernel, QuadratureRule::default(), DerivativeStencil::default())
    }

    pub fn with_options(
        pset: PSet,
        kernel: KernelSpec,
        quadrature: QuadratureRule,
        stencil: DerivativeStencil,
    ) -> Result<Self> {
        let pset = PSet::new(pset.a, pset.b, pset.lambda, pset.mu)?;
        let sigma = kernel.singularity_exponent();
        if !(0.0..1.0).contains(&sigma) {
            return Err(Error::Domain(format!("kernel singularity exponent {sigma} not in [0, 1)")));
        }
        if kernel.requires_positive_support() && pset.a <= 0.0 {
            return Err(Error::Domain(format!(
                "{} kernel requires a > 0, got a = {}",
                kernel.name(),
                pset.a
            )));
        }
        Ok(Self {
            pset,
            kernel,
            quadrature,
            stencil,
            legendre: GaussRule::legendre(RULE_POINTS),
            jacobi_left: GaussRule::jacobi(RULE_POINTS, -sigma, 0.0),
            jacobi_right: GaussRule::jacobi(RULE_POINTS, 0.0, -sigma),
        })
    }

    pub fn pset(&self) -> &PSet {
        &self.pset
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn quadrature(&self) -> QuadratureRule {
        self.quadrature
    }

    pub fn stencil(&self) -> DerivativeStencil {
        self.stencil
    }

    /// Same kernel and rules with the dual parameter set.
    pub fn dual(&self) -> Self {
        let mut op = self.clone();
        op.pset = dual(&self.pset);
        op
    }

    /// Same kernel and rules with another parameter set on the same interval.
    pub fn with_pset(&self, pset: PSet) -> Result<Self> {
        if pset.a != self.pset.a || pset.b != self.pset.b {
            return Err(Error::Domain("with_pset must keep the interval".into()));
        }
        let mut op = self.clone();
        op.pset = pset;
        Ok(op)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        let tol = 1e-12 * (self.pset.b - self.pset.a);
        if (grid.a - self.pset.a).abs() > tol || (grid.b - self.pset.b).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "grid [{}, {}] differs from operator interval [{}, {}]",
                grid.a, grid.b, self.pset.a, self.pset.b
            )));
        }
        Ok(())
    }

    /// `(int_c^d k, int_c^d k (tau - xl) / h)` for the sub-interval `[c, d]` of the cell starting at `xl`.
    fn cell_moments(&self, side: Side, t: f64, c: f64, d: f64, xl: f64, h: f64) -> Result<(f64, f64)> {
        if d <= c {
            return Ok((0.0, 0.0));
        }
        if let Some((beta, inv_gamma)) = self.kernel.power_form() {
            let (m0, m1) = match side {
                Side::Left => {
                    let (uc, ud) = (t - c, (t - d).max(0.0));
                    let p = pow_diff(uc, ud, beta) / beta;
                    let q = pow_diff(uc, ud, beta + 1.0) / (beta + 1.0);
                    (p, (t - xl) * p - q)
                }
                Side::Right => {
                    let (uc, ud) = ((c - t).max(0.0), d - t);
                    let p = pow_diff(ud, uc, beta) / beta;
                    let q = pow_diff(ud, uc, beta + 1.0) / (beta + 1.0);
                    (p, (t - xl) * p + q)
                }
            };
            return Ok((m0 * inv_gamma, m1 * inv_gamma / h));
        }

        let half = 0.5 * (d - c);
        let sigma = self.kernel.singularity_exponent();
        let scale = 1e-13 * (self.pset.b - self.pset.a);
        let touching = sigma > 0.0
            && match side {
                Side::Left => (t - d).abs() <= scale,
                Side::Right => (c - t).abs() <= scale,
            };
        let (rule, factor) = if touching {
            match side {
                Side::Left => (&self.jacobi_left, half.powf(1.0 - sigma)),
                Side::Right => (&self.jacobi_right, half.powf(1.0 - sigma)),
            }
        } else {
            (&self.legendre, half)
        };

        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let tau = c + (x + 1.0) * half;
            let k = match (side, touching) {
                (Side::Left, true) => self.kernel.regular_part(t, tau),
                (Side::Left, false) => self.kernel.eval(t, tau),
                (Side::Right, true) => self.kernel.regular_part(tau, t),
                (Side::Right, false) => self.kernel.eval(tau, t),
            }
            .map_err(|e| Error::KernelEvaluation { t, tau, reason: e.to_string() })?;
            m0 += w * k;
            m1 += w * k * (tau - xl);
        }
        Ok((factor * m0, factor * m1 / h))
    }

    /// Quadrature weights so that `int (side) = sum_j w_j f_j` at the point `t`.
    /// Also accumulates the plain cell integrals `int_cell k` into `cells`.
    fn side_weights(&self, grid: &Grid, t: f64, side: Side, row: &mut [f64], cells: &mut [f64]) -> Result<()> {
        let h = grid.step();
        let n = grid.n;
        let (first, last) = match side {
            Side::Left => {
                if t <= grid.a {
                    return Ok(());
                }
                (0, grid.cell_of(t))
            }
            Side::Right => {
                if t >= grid.b {
                    return Ok(());
                }
                (grid.cell_of(t), n - 1)
            }
        };
        for k in first..=last {
            let xl = grid.node(k);
            let xr = grid.node(k + 1);
            let (c, d) = match side {
                Side::Left => (xl, xr.min(t)),
                Side::Right => (xl.max(t), xr),
            };
            let (m0, ms) = self.cell_moments(side, t, c, d, xl, h)?;
            cells[k] += m0;
            match self.quadrature {
                QuadratureRule::ProductTrapezoid => {
                    row[k] += m0 - ms;
                    row[k + 1] += ms;
                }
                QuadratureRule::ProductMidpoint => {
                    row[k] += 0.5 * m0;
                    row[k + 1] += 0.5 * m0;
                }
            }
        }
        Ok(())
    }

    /// Left and right quadrature rows at `t`.
    fn rows_at(&self, grid: &Grid, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let rows = self.rows_with_cells_at(grid, t)?;
        Ok((rows.0, rows.1))
    }

    fn rows_with_cells_at(&self, grid: &Grid, t: f64) -> Result<RowSet> {
        let mut left = vec![0.0; grid.len()];
        let mut right = vec![0.0; grid.len()];
        let mut left_cells = vec![0.0; grid.n];
        let mut right_cells = vec![0.0; grid.n];
        self.side_weights(grid, t, Side::Left, &mut left, &mut left_cells)?;
        self.side_weights(grid, t, Side::Right, &mut right, &mut right_cells)?;
        Ok((left, right, left_cells, right_cells))
    }

    /// Builds the dense operator matrices on `grid`.
    pub fn discretize(&self, grid: &Grid) -> Result<Discretization> {
        self.check_grid(grid)?;
        let rows: Vec<RowSet> = (0..grid.len())
            .into_par_iter()
            .map(|j| self.rows_with_cells_at(grid, grid.node(j)))
            .collect::<Result<_>>()?;
        let m = grid.len();
        let mut left = DMatrix::zeros(m, m);
        let mut right = DMatrix::zeros(m, m);
        let mut left_cells = DMatrix::zeros(m, grid.n);
        let mut right_cells = DMatrix::zeros(m, grid.n);
        for (j, (l, r, lc, rc)) in rows.into_iter().enumerate() {
            for i in 0..m {
                left[(j, i)] = l[i];
                right[(j, i)] = r[i];
            }
            for c in 0..grid.n {
                left_cells[(j, c)] = lc[c];
                right_cells[(j, c)] = rc[c];
            }
        }
        Ok(Discretization::from_parts(
            *grid,
            self.pset,
            self.stencil,
            [left, right],
            [left_cells, right_cells],
        ))
    }

    /// Rows of `K_P` (acting on nodal values) and of `K_P` acting on
    /// piecewise-constant cell data, at arbitrary points of `[a, b]`.
    pub fn sample_matrices(&self, grid: &Grid, points: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_grid(grid)?;
        for &t in points {
            grid.check_contains(t)?;
        }
        let rows: Vec<RowSet> = points
            .par_iter()
            .map(|&t| self.rows_with_cells_at(grid, t.clamp(grid.a, grid.b)))
            .collect::<Result<_>>()?;
        let (l, m) = (self.pset.lambda, self.pset.mu);
        let mut k = DMatrix::zeros(points.len(), grid.len());
        let mut cells = DMatrix::zeros(points.len(), grid.n);
        for (q, (lr, rr, lc, rc)) in rows.into_iter().enumerate() {
            for i in 0..grid.len() {
                k[(q, i)] = l * lr[i] + m * rr[i];
            }
            for c in 0..grid.n {
                cells[(q, c)] = l * lc[c] + m * rc[c];
            }
        }
        Ok((k, cells))
    }

    /// `K_P[f](t)` for any `t` in `[a, b]`.
    pub fn eval_k(&self, f: &GridFunction, t: f64) -> Result<f64> {
        self.check_grid(&f.grid)?;
        f.grid.check_contains(t)?;
        let t = t.clamp(f.grid.a, f.grid.b);
        let (left, right) = self.rows_at(&f.grid, t)?;
        let l: f64 = left.iter().zip(&f.values).map(|(w, v)| w * v).sum();
        let r: f64 = right.iter().zip(&f.values).map(|(w, v)| w * v).sum();
        Ok(self.pset.lambda * l + self.pset.mu * r)
    }

    /// `K_P[f]` at every node.
    pub fn eval_k_grid(&self, f: &GridFunction) -> Result<GridFunction> {
        let disc = self.discretize(&f.grid)?;
        Ok(GridFunction { grid: f.grid, values: disc.apply_k(&f.values) })
    }

    /// `A_P[f](t)`: second-order difference of `K_P[f]` with spacing equal to the grid step.
    pub fn eval_a(&self, f: &GridFunction, t: f64) -> Result<DerivativeValue> {
        self.check_grid(&f.grid)?;
        f.grid.check_contains(t)?;
        let g = f.grid;
        let h = g.step();
        let t = t.clamp(g.a, g.b);
        let slack = 1e-12 * (g.b - g.a);
        if t - h >= g.a - slack && t + h <= g.b + slack {
            let plus = self.eval_k(f, (t + h).min(g.b))?;
            let minus = self.eval_k(f, (t - h).max(g.a))?;
            return Ok(DerivativeValue { value: (plus - minus) / (2.0 * h), one_sided: false });
        }
        let value = if t - h < g.a - slack {
            let k0 = self.eval_k(f, t)?;
            let k1 = self.eval_k(f, t + h)?;
            let k2 = self.eval_k(f, t + 2.0 * h)?;
            (-1.5 * k0 + 2.0 * k1 - 0.5 * k2) / h
        } else {
            let k0 = self.eval_k(f, t)?;
            let k1 = self.eval_k(f, t - h)?;
            let k2 = self.eval_k(f, t - 2.0 * h)?;
            (1.5 * k0 - 2.0 * k1 + 0.5 * k2) / h
        };
        Ok(DerivativeValue { value, one_sided: true })
    }

    /// `B_P[f](t) = K_P[f'](t)` with `f'` from the configured stencil.
    pub fn eval_b(&self, f: &GridFunction, t: f64) -> Result<f64> {
        let df = f.derivative(self.stencil);
        self.eval_k(&df, t)
    }
}

/// `x^p - y^p` for `x >= y >= 0` without cancellation when `p` is tiny.
fn pow_diff(x: f64, y: f64, p: f64) -> f64 {
    if y <= 0.0 {
        x.powf(p)
    } else {
        y.powf(p) * (p * (x / y).ln()).exp_m1()
    }
}

/// Dense matrices of `K_P`, `K_{P*}`, `B_P` and the differentiation stencil on one grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Grid,
    pset: PSet,
    stencil: DerivativeStencil,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    diff: DMatrix<f64>,
    k: DMatrix<f64>,
    k_dual: DMatrix<f64>,
    b: DMatrix<f64>,
    left_cells: DMatrix<f64>,
    right_cells: DMatrix<f64>,
    cells: DMatrix<f64>,
}

impl Discretization {
    fn from_parts(
        grid: Grid,
        pset: PSet,
        stencil: DerivativeStencil,
        [left, right]: [DMatrix<f64>; 2],
        [left_cells, right_cells]: [DMatrix<f64>; 2],
    ) -> Self {
        let diff = stencil.matrix(&grid);
        let k = &left * pset.lambda + &right * pset.mu;
        let k_dual = &left * pset.mu + &right * pset.lambda;
        let b = &k * &diff;
        let cells = &left_cells * pset.lambda + &right_cells * pset.mu;
        Self { grid, pset, stencil, left, right, diff, k, k_dual, b, left_cells, right_cells, cells }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pset(&self) -> &PSet {
        &self.pset
    }

    pub fn left_matrix(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right_matrix(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn k_matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn k_dual_matrix(&self) -> &DMatrix<f64> {
        &self.k_dual
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `(n+1) x n` matrix of `lambda int_cell k(t_j, .) + mu int_cell k(., t_j)`:
    /// `K_P` applied to piecewise-constant data.
    pub fn cell_matrix(&self) -> &DMatrix<f64> {
        &self.cells
    }

    /// Same matrices with another weight pair on the same interval.
    pub fn reweighted(&self, lambda: f64, mu: f64) -> Self {
        Self::from_parts(
            self.grid,
            PSet { lambda, mu, ..self.pset },
            self.stencil,
            [self.left.clone(), self.right.clone()],
            [self.left_cells.clone(), self.right_cells.clone()],
        )
    }

    /// Discretization of the dual operator.
    pub fn dual(&self) -> Self {
        self.reweighted(self.pset.mu, self.pset.lambda)
    }

    fn mul(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        (m * x).as_slice().to_vec()
    }

    /// Left and right integrals combined as `lambda L v + mu R v`.
    pub fn apply_k(&self, v: &[f64]) -> Vec<f64> {
        let l = Self::mul(&self.left, v);
        let r = Self::mul(&self.right, v);
        l.iter().zip(&r).map(|(a, b)| self.pset.lambda * a + self.pset.mu * b).collect()
    }

    pub fn apply_k_dual(&self, v: &[f64]) -> Vec<f64> {
        let l = Self::mul(&self.left, v);
        let r = Self::mul(&self.right, v);
        l.iter().zip(&r).map(|(a, b)| self.pset.mu * a + self.pset.lambda * b).collect()
    }

    pub fn stencil(&self) -> DerivativeStencil {
        self.stencil
    }

    /// Stencil derivative of nodal values; exactly zero on constants.
    pub fn derivative(&self, v: &[f64]) -> Vec<f64> {
        self.stencil.apply(&self.grid, v)
    }

    pub fn apply_a(&self, v: &[f64]) -> Vec<f64> {
        self.derivative(&self.apply_k(v))
    }

    pub fn apply_a_dual(&self, v: &[f64]) -> Vec<f64> {
        self.derivative(&self.apply_k_dual(v))
    }

    pub fn apply_b(&self, v: &[f64]) -> Vec<f64> {
        self.apply_k(&self.derivative(v))
    }

    pub fn apply_b_dual(&self, v: &[f64]) -> Vec<f64> {
        self.apply_k_dual(&self.derivative(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{power_derivative_kernel, power_integral_kernel, profile_kernel, Profile};
    use statrs::function::gamma::gamma;
    use std::f64::consts::PI;

    fn unit_left() -> PSet {
        PSet::left(0.0, 1.0).unwrap()
    }

    #[test]
    fn running_integral_of_constant() {
        let op = OperatorHandle::new(unit_left(), profile_kernel(Profile::Constant(1.0), None)).unwrap();
        let g = Grid::new(0.0, 1.0, 16).unwrap();
        let f = GridFunction::constant(g, 2.5);
        for t in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((op.eval_k(&f, t).unwrap() - 2.5 * t).abs() < 1e-13);
        }
        let grid_vals = op.eval_k_grid(&f).unwrap();
        for (t, v) in g.nodes().iter().zip(&grid_vals.values) {
            assert!((v - 2.5 * t).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_function_maps_to_zero() {
        let op = OperatorHandle::new(unit_left(), power_integral_kernel(0.3).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 32).unwrap();
        let out = op.eval_k_grid(&GridFunction::zeros(g)).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riemann_liouville_integral_of_identity() {
        let op = OperatorHandle::new(unit_left(), power_integral_kernel(0.5).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let f = GridFunction::from_fn(g, |t| t);
        let v = op.eval_k(&f, 1.0).unwrap();
        assert!((v - 1.0 / gamma(2.5)).abs() < 1e-12);
        assert!((v - 0.752252).abs() < 1e-6);
        // off-grid evaluation point
        let t: f64 = 0.4321;
        let expected = t.powf(1.5) / gamma(2.5);
        assert!((op.eval_k(&f, t).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn exponential_kernel_tracking_identity() {
        let op = OperatorHandle::new(unit_left(), profile_kernel(Profile::Exponential { rate: -1.0 }, None)).unwrap();
        let g = Grid::new(0.0, 1.0, 32).unwrap();
        let y = GridFunction::from_fn(g, |t| -1.0 - t);
        for t in [0.1, 0.35, 0.5, 0.9] {
            assert!((op.eval_k(&y, t).unwrap() + t).abs() < 1e-12);
        }
    }

    #[test]
    fn riemann_liouville_derivative_of_constant() {
        let op = OperatorHandle::new(unit_left(), power_derivative_kernel(0.5).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 512).unwrap();
        let f = GridFunction::constant(g, 1.0);
        let d = op.eval_a(&f, 0.25).unwrap();
        assert!(!d.one_sided);
        assert!((d.value - 2.0 / PI.sqrt()).abs() < 1e-4, "{}", d.value);
        let d = op.eval_a(&GridFunction::from_fn(g, |t| t), 1.0).unwrap();
        assert!(d.one_sided);
        assert!((d.value - 2.0 / PI.sqrt()).abs() < 1e-4, "{}", d.value);
    }

    #[test]
    fn a_with_unit_kernel_recovers_function() {
        let op = OperatorHandle::new(unit_left(), profile_kernel(Profile::Constant(1.0), None)).unwrap();
        let g = Grid::new(0.0, 1.0, 128).unwrap();
        let f = GridFunction::from_fn(g, |t| (3.0 * t).sin());
        for t in [0.2, 0.5, 0.71] {
            let d = op.eval_a(&f, t).unwrap();
            assert!((d.value - (3.0 * t).sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn caputo_of_constant_is_exactly_zero() {
        let op = OperatorHandle::new(unit_left(), power_derivative_kernel(0.4).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 20).unwrap();
        let f = GridFunction::constant(g, 7.0);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(op.eval_b(&f, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn caputo_of_identity() {
        let op = OperatorHandle::new(unit_left(), power_derivative_kernel(0.5).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let f = GridFunction::from_fn(g, |t| t);
        assert!((op.eval_b(&f, 1.0).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn right_sided_caputo_of_identity() {
        let op = OperatorHandle::new(PSet::right(0.0, 1.0).unwrap(), power_derivative_kernel(0.5).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let f = GridFunction::from_fn(g, |t| t);
        for t in [0.0f64, 0.3, 0.8] {
            let expected = 2.0 * (1.0 - t).sqrt() / PI.sqrt();
            assert!((op.eval_b(&f, t).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hadamard_requires_positive_left_end() {
        let k = crate::kernels::hadamard_kernel(0.5).unwrap();
        assert!(OperatorHandle::new(unit_left(), k.clone()).is_err());
        assert!(OperatorHandle::new(PSet::left(1.0, 2.0).unwrap(), k).is_ok());
    }

    #[test]
    fn evaluation_outside_interval_fails() {
        let op = OperatorHandle::new(unit_left(), power_integral_kernel(0.5).unwrap()).unwrap();
        let g = Grid::new(0.0, 1.0, 8).unwrap();
        let f = GridFunction::constant(g, 1.0);
        assert!(matches!(op.eval_k(&f, 1.5), Err(Error::Domain(_))));
        let other = GridFunction::constant(Grid::new(0.0, 2.0, 8).unwrap(), 1.0);
        assert!(matches!(op.eval_k(&other, 0.5), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn pow_diff_is_accurate_for_tiny_exponents() {
        let d = pow_diff(2.0, 1.0, 1e-9);
        assert!((d / (1e-9 * 2f64.ln()) - 1.0).abs() < 1e-8);
    }
}
