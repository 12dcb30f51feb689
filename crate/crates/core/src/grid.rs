//! Uniform one-dimensional grids and sampled functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_j = a + j (b - a) / n`, `j = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Domain(format!("grid interval [{a}, {b}] is empty or non-finite")));
        }
        if n < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 intervals, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n {
            self.b
        } else {
            self.a + j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.node(j)).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (self.b - self.a);
        t >= self.a - slack && t <= self.b + slack
    }

    pub fn check_contains(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} outside [{}, {}]", self.a, self.b)))
        }
    }

    /// Index of the node at `t` when `t` lies on the grid (up to rounding).
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.a) / self.step();
        let j = x.round();
        if (x - j).abs() <= 1e-9 && j >= 0.0 && j <= self.n as f64 {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Cell `[t_k, t_{k+1}]` containing `t`, clamped to the last cell at `t = b`.
    pub fn cell_of(&self, t: f64) -> usize {
        let x = ((t - self.a) / self.step()).floor();
        (x.max(0.0) as usize).min(self.n - 1)
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.len()];
        w[0] = 0.5 * h;
        w[self.n] = 0.5 * h;
        w
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.a == other.a && self.b == other.b
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Finite-difference rule for first derivatives of grid data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeStencil {
    /// Central differences inside, first-order one-sided differences at the ends.
    Central2ndOrder,
    /// Central differences inside, second-order one-sided differences at the ends.
    #[default]
    OneSided2ndOrderAtEnds,
}

impl DerivativeStencil {
    /// Dense `(n+1) x (n+1)` differentiation matrix.
    pub fn matrix(&self, grid: &Grid) -> DMatrix<f64> {
        let n = grid.n;
        let inv = 1.0 / grid.step();
        let mut d = DMatrix::zeros(n + 1, n + 1);
        for j in 1..n {
            d[(j, j - 1)] = -0.5 * inv;
            d[(j, j + 1)] = 0.5 * inv;
        }
        match self {
            DerivativeStencil::Central2ndOrder => {
                d[(0, 0)] = -inv;
                d[(0, 1)] = inv;
                d[(n, n - 1)] = -inv;
                d[(n, n)] = inv;
            }
            DerivativeStencil::OneSided2ndOrderAtEnds => {
                d[(0, 0)] = -1.5 * inv;
                d[(0, 1)] = 2.0 * inv;
                d[(0, 2)] = -0.5 * inv;
                d[(n, n)] = 1.5 * inv;
                d[(n, n - 1)] = -2.0 * inv;
                d[(n, n - 2)] = 0.5 * inv;
            }
        }
        d
    }

    /// Applies the stencil to nodal values.
    pub fn apply(&self, grid: &Grid, values: &[f64]) -> Vec<f64> {
        let n = grid.n;
        let inv = 1.0 / grid.step();
        let v = values;
        let mut out = vec![0.0; n + 1];
        for j in 1..n {
            out[j] = 0.5 * inv * (v[j + 1] - v[j - 1]);
        }
        match self {
            DerivativeStencil::Central2ndOrder => {
                out[0] = inv * (v[1] - v[0]);
                out[n] = inv * (v[n] - v[n - 1]);
            }
            DerivativeStencil::OneSided2ndOrderAtEnds => {
                out[0] = inv * (2.0 * (v[1] - v[0]) - 0.5 * (v[2] - v[0]));
                out[n] = inv * (2.0 * (v[n] - v[n - 1]) - 0.5 * (v[n] - v[n - 2]));
            }
        }
        out
    }
}

/// Function sampled on a uniform grid; linear interpolation between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index, t: grid.node(index) });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    /// Piecewise-linear interpolant at `t`.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        self.grid.check_contains(t)?;
        let k = self.grid.cell_of(t);
        let s = ((t - self.grid.node(k)) / self.grid.step()).clamp(0.0, 1.0);
        Ok((1.0 - s) * self.values[k] + s * self.values[k + 1])
    }

    pub fn derivative(&self, stencil: DerivativeStencil) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: stencil.apply(&self.grid, &self.values),
        }
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .trapezoid_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.node(j), v))
            .collect();
        GridFunction { grid: self.grid, values }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridFunction { grid: self.grid, values })
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|_, v| c * v)
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}
