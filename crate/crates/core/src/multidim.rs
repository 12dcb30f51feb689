//! Partial operators on rectangular domains, generalized fractional gradients,
//! the multidimensional Euler-Lagrange residual and wave-equation residuals.
//!
//! Axis indices are zero-based. Values are stored row-major with the last axis fastest.

use std::fmt::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operators::{Discretization, OperatorHandle};
use crate::report::fmt_f64;

/// Per-axis descriptor `(a, b, n)` as serialized in headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDescriptor {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunctionND {
    pub axes: Vec<Grid>,
    pub values: Vec<f64>,
}

fn shape_of(axes: &[Grid]) -> Vec<usize> {
    axes.iter().map(|g| g.len()).collect()
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl GridFunctionND {
    pub fn new(axes: Vec<Grid>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Domain("at least one axis is required".into()));
        }
        let size: usize = shape_of(&axes).iter().product();
        if values.len() != size {
            return Err(Error::GridMismatch(format!("{} values for {size} nodes", values.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: k, t: f64::NAN });
        }
        Ok(Self { axes, values })
    }

    pub fn from_fn(axes: Vec<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let shape = shape_of(&axes);
        let size: usize = shape.iter().product();
        let mut point = vec![0.0; axes.len()];
        let values = (0..size)
            .map(|k| {
                for (i, idx) in unravel(k, &shape).into_iter().enumerate() {
                    point[i] = axes[i].node(idx);
                }
                f(&point)
            })
            .collect();
        Self { axes, values }
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        shape_of(&self.axes)
    }

    pub fn descriptors(&self) -> Vec<AxisDescriptor> {
        self.axes.iter().map(|g| AxisDescriptor { a: g.a, b: g.b, n: g.n }).collect()
    }

    pub fn point(&self, index: &[usize]) -> Vec<f64> {
        index.iter().zip(&self.axes).map(|(&j, g)| g.node(j)).collect()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[ravel(index, &self.shape())]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_same(&self, other: &GridFunctionND) -> Result<()> {
        if self.axes.len() != other.axes.len() {
            return Err(Error::GridMismatch(format!("{} axes vs {}", self.axes.len(), other.axes.len())));
        }
        for (a, b) in self.axes.iter().zip(&other.axes) {
            a.check_same(b)?;
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &GridFunctionND, f: impl Fn(f64, f64) -> f64) -> Result<GridFunctionND> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(GridFunctionND { axes: self.axes.clone(), values })
    }

    /// Index columns, coordinate columns and the value, one row per node.
    pub fn to_csv(&self, column: &str) -> String {
        let d = self.dims();
        let mut out = String::new();
        let idx: Vec<String> = (0..d).map(|i| format!("i{i}")).collect();
        let coords: Vec<String> = (0..d).map(|i| format!("t{i}")).collect();
        let _ = writeln!(out, "{},{},{column}", idx.join(","), coords.join(","));
        let shape = self.shape();
        for (k, v) in self.values.iter().enumerate() {
            let index = unravel(k, &shape);
            let p = self.point(&index);
            let ids: Vec<String> = index.iter().map(|j| j.to_string()).collect();
            let ts: Vec<String> = p.iter().map(|t| fmt_f64(*t)).collect();
            let _ = writeln!(out, "{},{},{}", ids.join(","), ts.join(","), fmt_f64(*v));
        }
        out
    }

    /// Axis descriptors as JSON.
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({ "dims": self.dims(), "axes": self.descriptors() })
    }

    /// Line through `index` along `axis` (the entry of `index` at `axis` is ignored).
    fn line(&self, axis: usize, index: &[usize]) -> Vec<f64> {
        let shape = self.shape();
        let strides = strides_of(&shape);
        let mut base = ravel(index, &shape);
        base -= index[axis] * strides[axis];
        (0..shape[axis]).map(|j| self.values[base + j * strides[axis]]).collect()
    }

    /// Applies a 1D map to every line along `axis`.
    fn sweep(&self, axis: usize, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> GridFunctionND {
        let shape = self.shape();
        let strides = strides_of(&shape);
        let m = shape[axis];
        let bases: Vec<usize> = (0..self.values.len()).filter(|k| (k / strides[axis]) % m == 0).collect();
        let lines: Vec<Vec<f64>> = bases
            .par_iter()
            .map(|&base| {
                let line: Vec<f64> = (0..m).map(|j| self.values[base + j * strides[axis]]).collect();
                f(&line)
            })
            .collect();
        let mut values = vec![0.0; self.values.len()];
        for (base, line) in bases.iter().zip(lines) {
            for (j, v) in line.into_iter().enumerate() {
                values[base + j * strides[axis]] = v;
            }
        }
        GridFunctionND { axes: self.axes.clone(), values }
    }
}

fn unravel(mut k: usize, shape: &[usize]) -> Vec<usize> {
    let mut index = vec![0; shape.len()];
    for i in (0..shape.len()).rev() {
        index[i] = k % shape[i];
        k /= shape[i];
    }
    index
}

fn ravel(index: &[usize], shape: &[usize]) -> usize {
    index.iter().zip(shape).fold(0, |acc, (j, m)| acc * m + j)
}

/// One operator (interval, weights and kernel) per axis.
#[derive(Debug, Clone)]
pub struct PVector {
    pub axes: Vec<OperatorHandle>,
}

impl PVector {
    pub fn new(axes: Vec<OperatorHandle>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Domain("at least one axis is required".into()));
        }
        Ok(Self { axes })
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    fn op(&self, axis: usize) -> Result<&OperatorHandle> {
        self.axes
            .get(axis)
            .ok_or_else(|| Error::Domain(format!("axis {axis} out of range for {} axes", self.axes.len())))
    }

    fn check(&self, f: &GridFunctionND) -> Result<()> {
        if f.dims() != self.dims() {
            return Err(Error::GridMismatch(format!("{} operators for {} axes", self.dims(), f.dims())));
        }
        for (op, g) in self.axes.iter().zip(&f.axes) {
            let p = op.pset();
            if (p.a - g.a).abs() > 1e-12 * (1.0 + g.a.abs()) || (p.b - g.b).abs() > 1e-12 * (1.0 + g.b.abs()) {
                return Err(Error::GridMismatch(format!("operator on [{}, {}] vs axis [{}, {}]", p.a, p.b, g.a, g.b)));
            }
        }
        Ok(())
    }

    /// Discretizations of every axis on the axes of `f`.
    pub fn discretize(&self, f: &GridFunctionND) -> Result<Vec<Discretization>> {
        self.check(f)?;
        self.axes.iter().zip(&f.axes).map(|(op, g)| op.discretize(g)).collect()
    }
}

/// Slice of `f` along `axis` through `t`, interpolated multilinearly in the other coordinates.
fn slice_through(axis: usize, f: &GridFunctionND, t: &[f64]) -> Result<GridFunction> {
    if t.len() != f.dims() {
        return Err(Error::Domain(format!("point has {} coordinates, domain has {}", t.len(), f.dims())));
    }
    let mut corners: Vec<(Vec<usize>, f64)> = vec![(vec![0; f.dims()], 1.0)];
    for (i, g) in f.axes.iter().enumerate() {
        g.check_contains(t[i])?;
        if i == axis {
            continue;
        }
        let c = g.cell_of(t[i].clamp(g.a, g.b));
        let s = ((t[i].clamp(g.a, g.b) - g.node(c)) / g.step()).clamp(0.0, 1.0);
        let mut next = Vec::with_capacity(corners.len() * 2);
        for (idx, w) in corners {
            let mut lo = idx.clone();
            lo[i] = c;
            next.push((lo, w * (1.0 - s)));
            if s > 0.0 {
                let mut hi = idx;
                hi[i] = c + 1;
                next.push((hi, w * s));
            }
        }
        corners = next;
    }
    let m = f.axes[axis].len();
    let mut line = vec![0.0; m];
    for (idx, w) in corners {
        for (acc, v) in line.iter_mut().zip(f.line(axis, &idx)) {
            *acc += w * v;
        }
    }
    GridFunction::new(f.axes[axis], line)
}

/// `K_{P_i}[f](t)` along axis `axis`.
pub fn eval_partial_k(axis: usize, pv: &PVector, f: &GridFunctionND, t: &[f64]) -> Result<f64> {
    let op = pv.op(axis)?;
    pv.check(f)?;
    op.eval_k(&slice_through(axis, f, t)?, t[axis])
}

/// `A_{P_i}[f](t)` along axis `axis`.
pub fn eval_partial_a(axis: usize, pv: &PVector, f: &GridFunctionND, t: &[f64]) -> Result<f64> {
    let op = pv.op(axis)?;
    pv.check(f)?;
    Ok(op.eval_a(&slice_through(axis, f, t)?, t[axis])?.value)
}

/// `B_{P_i}[f](t)` along axis `axis`.
pub fn eval_partial_b(axis: usize, pv: &PVector, f: &GridFunctionND, t: &[f64]) -> Result<f64> {
    let op = pv.op(axis)?;
    pv.check(f)?;
    op.eval_b(&slice_through(axis, f, t)?, t[axis])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientKind {
    K,
    B,
}

/// Components `T_{P_i}[f](t)` for `T` in `{K, B}`.
pub fn fractional_gradient(kind: GradientKind, pv: &PVector, f: &GridFunctionND, t: &[f64]) -> Result<Vec<f64>> {
    (0..pv.dims())
        .map(|i| match kind {
            GradientKind::K => eval_partial_k(i, pv, f, t),
            GradientKind::B => eval_partial_b(i, pv, f, t),
        })
        .collect()
}

/// Partial operator applied along one axis at every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialOp {
    K,
    KDual,
    A,
    ADual,
    B,
    Derivative,
}

pub fn apply_partial(axis: usize, kind: PartialOp, disc: &[Discretization], f: &GridFunctionND) -> GridFunctionND {
    let d = &disc[axis];
    f.sweep(axis, |line| match kind {
        PartialOp::K => d.apply_k(line),
        PartialOp::KDual => d.apply_k_dual(line),
        PartialOp::A => d.apply_a(line),
        PartialOp::ADual => d.apply_a_dual(line),
        PartialOp::B => d.apply_b(line),
        PartialOp::Derivative => d.derivative(line),
    })
}

/// Arguments `(x1, x2, x3, x4, t)` with `x2, x3, x4, t` of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgumentsND {
    pub y: f64,
    pub ky: Vec<f64>,
    pub dy: Vec<f64>,
    pub by: Vec<f64>,
    pub t: Vec<f64>,
}

/// `(dF/dx1, dF/dx2, dF/dx3, dF/dx4)` with vector-valued slots 2 to 4.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialsND {
    pub d1: f64,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub d4: Vec<f64>,
}

type ValueFnND = Arc<dyn Fn(&ArgumentsND) -> f64 + Send + Sync>;
type GradientFnND = Arc<dyn Fn(&ArgumentsND) -> PartialsND + Send + Sync>;

#[derive(Clone)]
pub struct LagrangianND {
    name: String,
    value: ValueFnND,
    gradient: Option<GradientFnND>,
}

impl fmt::Debug for LagrangianND {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianND")
            .field("name", &self.name)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

impl LagrangianND {
    pub fn new(name: impl Into<String>, value: impl Fn(&ArgumentsND) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&ArgumentsND) -> PartialsND + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &ArgumentsND) -> f64 {
        (self.value)(x)
    }

    /// Analytic partials when available, central differences otherwise.
    pub fn partials(&self, x: &ArgumentsND) -> PartialsND {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let central = |set: &dyn Fn(&mut ArgumentsND, f64), at: f64| {
            let h = fd_step(at);
            let mut p = x.clone();
            set(&mut p, at + h);
            let fp = self.value(&p);
            set(&mut p, at - h);
            let fm = self.value(&p);
            (fp - fm) / (2.0 * h)
        };
        let n = x.ky.len();
        PartialsND {
            d1: central(&|p, v| p.y = v, x.y),
            d2: (0..n).map(|i| central(&|p: &mut ArgumentsND, v| p.ky[i] = v, x.ky[i])).collect(),
            d3: (0..n).map(|i| central(&|p: &mut ArgumentsND, v| p.dy[i] = v, x.dy[i])).collect(),
            d4: (0..n).map(|i| central(&|p: &mut ArgumentsND, v| p.by[i] = v, x.by[i])).collect(),
        }
    }

    /// `|x3|^2 / 2`.
    pub fn dirichlet() -> Self {
        Self::new("dirichlet", |x| 0.5 * x.dy.iter().map(|v| v * v).sum::<f64>()).with_gradient(|x| {
            let n = x.dy.len();
            PartialsND { d1: 0.0, d2: vec![0.0; n], d3: x.dy.clone(), d4: vec![0.0; n] }
        })
    }
}

/// Residual on the interior nodes of a rectangular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReportND {
    pub axes: Vec<AxisDescriptor>,
    /// Full-grid residual; boundary entries are zero and excluded from the norms.
    pub residual: Vec<f64>,
    pub max_abs: f64,
    /// `sqrt(prod h_i sum r^2)` over interior nodes.
    pub l2: f64,
    pub interior_nodes: usize,
}

impl ResidualReportND {
    fn interior(axes: &[Grid], mut full: Vec<f64>) -> Self {
        let shape = shape_of(axes);
        let mut max_abs = 0.0_f64;
        let mut sum = 0.0;
        let mut count = 0;
        for (k, r) in full.iter_mut().enumerate() {
            let idx = unravel(k, &shape);
            let inside = idx.iter().zip(&shape).all(|(&j, &m)| j > 0 && j + 1 < m);
            if inside {
                max_abs = max_abs.max(r.abs());
                sum += *r * *r;
                count += 1;
            } else {
                *r = 0.0;
            }
        }
        let cell: f64 = axes.iter().map(|g| g.step()).product();
        Self {
            axes: axes.iter().map(|g| AxisDescriptor { a: g.a, b: g.b, n: g.n }).collect(),
            residual: full,
            max_abs,
            l2: (cell * sum).sqrt(),
            interior_nodes: count,
        }
    }

    /// Largest residual over nodes at least `margin` nodes away from every boundary.
    pub fn max_abs_within(&self, margin: usize) -> f64 {
        let shape: Vec<usize> = self.axes.iter().map(|d| d.n + 1).collect();
        self.residual
            .iter()
            .enumerate()
            .filter(|(k, _)| unravel(*k, &shape).iter().zip(&shape).all(|(&j, &m)| j >= margin && j + margin < m))
            .fold(0.0_f64, |acc, (_, r)| acc.max(r.abs()))
    }

    pub fn as_grid_function(&self) -> Result<GridFunctionND> {
        let axes = self.axes.iter().map(|d| Grid::new(d.a, d.b, d.n)).collect::<Result<Vec<_>>>()?;
        Ok(GridFunctionND { axes, values: self.residual.clone() })
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "max_abs": self.max_abs,
            "l2": self.l2,
            "interior_nodes": self.interior_nodes,
            "axes": self.axes,
        })
    }
}

/// `dF/dx1 + sum_i (K_{P_i*}[dF/dx2_i] - d/dt_i dF/dx3_i - A_{P_i*}[dF/dx4_i])` at interior nodes.
pub fn el_residual_nd(f: &LagrangianND, pv: &PVector, y: &GridFunctionND) -> Result<ResidualReportND> {
    let disc = pv.discretize(y)?;
    let n = y.dims();
    let ky: Vec<GridFunctionND> = (0..n).map(|i| apply_partial(i, PartialOp::K, &disc, y)).collect();
    let dy: Vec<GridFunctionND> = (0..n).map(|i| apply_partial(i, PartialOp::Derivative, &disc, y)).collect();
    // K applied to the differenced field, as in the one-dimensional trajectory
    let by: Vec<GridFunctionND> = (0..n).map(|i| apply_partial(i, PartialOp::K, &disc, &dy[i])).collect();

    let shape = y.shape();
    let size = y.values.len();
    let partials: Vec<PartialsND> = (0..size)
        .into_par_iter()
        .map(|k| {
            let args = ArgumentsND {
                y: y.values[k],
                ky: ky.iter().map(|g| g.values[k]).collect(),
                dy: dy.iter().map(|g| g.values[k]).collect(),
                by: by.iter().map(|g| g.values[k]).collect(),
                t: y.point(&unravel(k, &shape)),
            };
            f.partials(&args)
        })
        .collect();
    if let Some(k) = partials.iter().position(|p| {
        !p.d1.is_finite() || p.d2.iter().chain(&p.d3).chain(&p.d4).any(|v| !v.is_finite())
    }) {
        return Err(Error::NonFinite { index: k, t: f64::NAN });
    }

    let mut full: Vec<f64> = partials.iter().map(|p| p.d1).collect();
    for i in 0..n {
        let slot = |pick: fn(&PartialsND) -> &Vec<f64>| GridFunctionND {
            axes: y.axes.clone(),
            values: partials.iter().map(|p| pick(p)[i]).collect(),
        };
        let k2 = apply_partial(i, PartialOp::KDual, &disc, &slot(|p| &p.d2));
        let d3 = apply_partial(i, PartialOp::Derivative, &disc, &slot(|p| &p.d3));
        let a4 = apply_partial(i, PartialOp::ADual, &disc, &slot(|p| &p.d4));
        for k in 0..size {
            full[k] = full[k] + k2.values[k] - d3.values[k] - a4.values[k];
        }
    }
    Ok(ResidualReportND::interior(&y.axes, full))
}

/// Wave-equation residuals; axis 0 is time, the remaining axes are space.
///
/// `TimeFractional` and `SpaceTimeFractional` are the Euler-Lagrange equations of
/// `(rho (B_0 y)^2 - k |grad y|^2) / 2` and `(rho (B_0 y)^2 - k sum_i (B_i y)^2) / 2`
/// divided by `rho`. The `Printed` variants keep the sign and coefficient placement
/// of the displayed constant-coefficient equations.
///
/// `K_{P*}[g]` vanishes at the right end and `K_P[g]` at the left end for every
/// kernel, so with near-classical time kernels the time layers next to the
/// endpoints pick up a jump; `ResidualReportND::max_abs_within(2)` skips them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveForm {
    /// `A_{0*}[B_0 y] - c^2 Laplacian y`.
    TimeFractional,
    /// `rho A_{0*}[B_0 y] + c^2 Laplacian y`.
    TimeFractionalPrinted,
    /// `A_{0*}[B_0 y] - c^2 sum_i A_{i*}[B_i y]`.
    SpaceTimeFractional,
    /// `A_{0*}[B_0 y] - c^2 sum_i A_{i*}[k B_i y]`.
    SpaceTimeFractionalPrinted,
}

pub fn wave_residual(form: WaveForm, pv: &PVector, rho: f64, k: f64, y: &GridFunctionND) -> Result<ResidualReportND> {
    if !(rho > 0.0 && rho.is_finite()) || !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("density and stiffness must be positive, got rho={rho}, k={k}")));
    }
    if y.dims() < 2 {
        return Err(Error::Domain("wave residual needs a time axis and at least one space axis".into()));
    }
    let disc = pv.discretize(y)?;
    let c2 = k / rho;
    let time = {
        let b = apply_partial(0, PartialOp::B, &disc, y);
        apply_partial(0, PartialOp::ADual, &disc, &b)
    };
    let mut space = vec![0.0; y.values.len()];
    for i in 1..y.dims() {
        let term = match form {
            WaveForm::TimeFractional | WaveForm::TimeFractionalPrinted => {
                let d = apply_partial(i, PartialOp::Derivative, &disc, y);
                apply_partial(i, PartialOp::Derivative, &disc, &d)
            }
            WaveForm::SpaceTimeFractional => {
                let b = apply_partial(i, PartialOp::B, &disc, y);
                apply_partial(i, PartialOp::ADual, &disc, &b)
            }
            WaveForm::SpaceTimeFractionalPrinted => {
                let b = apply_partial(i, PartialOp::B, &disc, y);
                let kb = GridFunctionND { axes: b.axes.clone(), values: b.values.iter().map(|v| k * v).collect() };
                apply_partial(i, PartialOp::ADual, &disc, &kb)
            }
        };
        for (s, v) in space.iter_mut().zip(term.values) {
            *s += v;
        }
    }
    let full: Vec<f64> = match form {
        WaveForm::TimeFractionalPrinted => time.values.iter().zip(&space).map(|(a, s)| rho * a + c2 * s).collect(),
        _ => time.values.iter().zip(&space).map(|(a, s)| a - c2 * s).collect(),
    };
    Ok(ResidualReportND::interior(&y.axes, full))
}
