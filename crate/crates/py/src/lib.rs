//! Python bindings for `genfrac`.
//!
//! Validation failures raise `ValueError`; numerical failures raise `genfrac.NumericalError`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use genfrac::multidim::{el_residual_nd, wave_residual, GridFunctionND, LagrangianND, PVector, ResidualReportND, WaveForm};
use genfrac::noether::{check_invariance, conserved_quantity, noether_residual, relative_stdev, Generator};
use genfrac::optimize::BfgsOptions;
use genfrac::variational::{
    el_residual, eval_functional, natural_boundary_residual, solve_fundamental_with, solve_isoperimetric_with,
};
use genfrac::volterra::{resolvent, solve_first_kind, VolterraProblem};
use genfrac::{Boundary, Constraint, GridFunction, Monomial, OperatorHandle, PSet, ProblemSpec, ResidualReport, SolverOptions};

create_exception!(genfrac, NumericalError, PyRuntimeError);

fn to_py(e: genfrac::Error) -> PyErr {
    use genfrac::Error::*;
    match e {
        Domain(_) | Precondition(_) | GridMismatch(_) => PyValueError::new_err(e.to_string()),
        _ => NumericalError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for genfrac::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn params(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<BTreeMap<String, f64>> {
    Ok(match kwargs {
        Some(d) => d.as_any().extract()?,
        None => BTreeMap::new(),
    })
}

/// Uniform grid `a = t_0 < ... < t_n = b`.
#[pyclass(name = "Grid", module = "genfrac", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGrid {
    inner: genfrac::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(a: f64, b: f64, n: usize) -> PyResult<Self> {
        Ok(Self { inner: genfrac::Grid::new(a, b, n).py_err()? })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn step(&self) -> f64 {
        self.inner.step()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(a={}, b={}, n={})", self.inner.a, self.inner.b, self.inner.n)
    }
}

impl PyGrid {
    fn function(&self, values: Vec<f64>) -> PyResult<GridFunction> {
        GridFunction::new(self.inner, values).py_err()
    }
}

#[pyclass(name = "Kernel", module = "genfrac", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyKernel {
    inner: genfrac::KernelSpec,
}

#[pymethods]
impl PyKernel {
    /// Registered kernel by name, e.g. `Kernel.builtin("power_integral", alpha=0.5)`.
    #[staticmethod]
    #[pyo3(signature = (name, **kwargs))]
    fn builtin(name: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Ok(Self { inner: genfrac::builtins::kernel(name, &params(kwargs)?).py_err()? })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        genfrac::builtins::kernels().iter().map(|k| k.name).collect()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn singularity_exponent(&self) -> f64 {
        self.inner.singularity_exponent()
    }

    #[getter]
    fn is_convolution(&self) -> bool {
        self.inner.is_convolution()
    }

    fn __call__(&self, t: f64, tau: f64) -> PyResult<f64> {
        self.inner.eval(t, tau).py_err()
    }

    fn __repr__(&self) -> String {
        format!("Kernel({})", self.inner.name())
    }
}

/// `K_P`, `A_P` and `B_P` for a kernel with weights `lam` (left) and `mu` (right) on a grid.
#[pyclass(name = "Operator", module = "genfrac", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyOperator {
    inner: OperatorHandle,
    grid: PyGrid,
}

#[pymethods]
impl PyOperator {
    #[new]
    #[pyo3(signature = (kernel, grid, lam = 1.0, mu = 0.0))]
    fn new(kernel: &PyKernel, grid: &PyGrid, lam: f64, mu: f64) -> PyResult<Self> {
        let g = grid.inner;
        let pset = PSet::new(g.a, g.b, lam, mu).py_err()?;
        Ok(Self { inner: OperatorHandle::new(pset, kernel.inner.clone()).py_err()?, grid: grid.clone() })
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        self.grid.clone()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.pset().lambda
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.pset().mu
    }

    /// Operator with left and right weights swapped.
    fn dual(&self) -> Self {
        Self { inner: self.inner.dual(), grid: self.grid.clone() }
    }

    /// `K_P[f]` at every node.
    fn k(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.disc(&values)?.apply_k(&values))
    }

    fn a(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.disc(&values)?.apply_a(&values))
    }

    fn b(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.disc(&values)?.apply_b(&values))
    }

    fn k_at(&self, values: Vec<f64>, t: f64) -> PyResult<f64> {
        self.inner.eval_k(&self.grid.function(values)?, t).py_err()
    }

    fn a_at(&self, values: Vec<f64>, t: f64) -> PyResult<f64> {
        Ok(self.inner.eval_a(&self.grid.function(values)?, t).py_err()?.value)
    }

    fn b_at(&self, values: Vec<f64>, t: f64) -> PyResult<f64> {
        self.inner.eval_b(&self.grid.function(values)?, t).py_err()
    }

    /// Nodal matrix of `K_P` as a list of rows.
    fn k_matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        let disc = self.inner.discretize(&self.grid.inner).py_err()?;
        let m = disc.k_matrix();
        Ok(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

impl PyOperator {
    fn disc(&self, values: &[f64]) -> PyResult<genfrac::Discretization> {
        if values.len() != self.grid.inner.len() {
            return Err(PyValueError::new_err(format!(
                "expected {} nodal values, got {}",
                self.grid.inner.len(),
                values.len()
            )));
        }
        self.inner.discretize(&self.grid.inner).py_err()
    }

    fn function(&self, values: Vec<f64>) -> PyResult<GridFunction> {
        self.grid.function(values)
    }
}

/// `F(y, K[y], y', B[y], t)`.
#[pyclass(name = "Lagrangian", module = "genfrac", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyLagrangian {
    inner: genfrac::LagrangianSpec,
}

#[pymethods]
impl PyLagrangian {
    #[staticmethod]
    #[pyo3(signature = (name, **kwargs))]
    fn builtin(name: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Ok(Self { inner: genfrac::builtins::lagrangian(name, &params(kwargs)?).py_err()? })
    }

    /// Sum of `c * y^p0 K[y]^p1 y'^p2 B[y]^p3 t^p4` from `(c, [p0, p1, p2, p3, p4])` pairs.
    #[staticmethod]
    fn polynomial(terms: Vec<(f64, [u32; 5])>) -> PyResult<Self> {
        let terms = terms.into_iter().map(|(coefficient, powers)| Monomial { coefficient, powers }).collect();
        Ok(Self { inner: genfrac::LagrangianSpec::polynomial(terms).py_err()? })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        genfrac::builtins::lagrangians().iter().map(|l| l.name).collect()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn value(&self, y: f64, ky: f64, dy: f64, by: f64, t: f64) -> f64 {
        self.inner.value(&genfrac::Arguments::new(y, ky, dy, by, t))
    }

    /// Partial derivatives in `y`, `K[y]`, `y'` and `B[y]`.
    fn partials(&self, y: f64, ky: f64, dy: f64, by: f64, t: f64) -> [f64; 4] {
        self.inner.partials(&genfrac::Arguments::new(y, ky, dy, by, t))
    }

    fn __repr__(&self) -> String {
        format!("Lagrangian({})", self.inner.name())
    }
}

fn report_dict<'py>(py: Python<'py>, r: &ResidualReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("nodes", r.nodes.clone())?;
    d.set_item("residual", r.residual.clone())?;
    d.set_item("max_abs", r.max_abs)?;
    d.set_item("l2", r.l2)?;
    d.set_item("boundary_term", r.boundary_term)?;
    Ok(d)
}

fn options(max_iterations: Option<usize>, gradient_tolerance: Option<f64>) -> SolverOptions {
    let mut bfgs = BfgsOptions::default();
    bfgs.max_iterations = max_iterations.unwrap_or(bfgs.max_iterations);
    bfgs.gradient_tolerance = gradient_tolerance.unwrap_or(bfgs.gradient_tolerance);
    SolverOptions { bfgs, initial: None }
}

fn problem(f: &PyLagrangian, op: &PyOperator, left: Option<f64>, right: f64, constraints: Vec<Constraint>) -> ProblemSpec {
    ProblemSpec {
        lagrangian: f.inner.clone(),
        op: op.inner.clone(),
        boundary: Boundary { left, right },
        constraints,
        grid: op.grid.inner,
    }
}

/// Minimizes the functional with `y(b) = right` and `y(a) = left`, or a free left end when `left` is None.
#[pyfunction]
#[pyo3(signature = (lagrangian, operator, left, right, max_iterations = None, gradient_tolerance = None))]
fn solve<'py>(
    py: Python<'py>,
    lagrangian: &PyLagrangian,
    operator: &PyOperator,
    left: Option<f64>,
    right: f64,
    max_iterations: Option<usize>,
    gradient_tolerance: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = problem(lagrangian, operator, left, right, vec![]);
    let opts = options(max_iterations, gradient_tolerance);
    let sol = py.detach(|| solve_fundamental_with(&spec, &opts)).py_err()?;
    let d = PyDict::new(py);
    d.set_item("t", sol.y.nodes())?;
    d.set_item("y", sol.y.values.clone())?;
    d.set_item("functional", sol.functional)?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("gradient_norm", sol.gradient_norm)?;
    d.set_item("residual", report_dict(py, &sol.report)?)?;
    Ok(d)
}

/// Extremal subject to `integral G_i = target_i` for each `(G_i, target_i)`.
#[pyfunction]
#[pyo3(signature = (lagrangian, operator, left, right, constraints, max_iterations = None, gradient_tolerance = None))]
#[allow(clippy::too_many_arguments)]
fn solve_isoperimetric<'py>(
    py: Python<'py>,
    lagrangian: &PyLagrangian,
    operator: &PyOperator,
    left: Option<f64>,
    right: f64,
    constraints: Vec<(PyLagrangian, f64)>,
    max_iterations: Option<usize>,
    gradient_tolerance: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let constraints = constraints.into_iter().map(|(g, target)| Constraint { g: g.inner, target }).collect();
    let spec = problem(lagrangian, operator, left, right, constraints);
    let opts = options(max_iterations, gradient_tolerance);
    let sol = py.detach(|| solve_isoperimetric_with(&spec, &opts)).py_err()?;
    let d = PyDict::new(py);
    d.set_item("t", sol.y.nodes())?;
    d.set_item("y", sol.y.values.clone())?;
    d.set_item("multipliers", sol.multipliers.clone())?;
    d.set_item("constraint_values", sol.constraint_values.clone())?;
    d.set_item("outer_iterations", sol.outer_iterations)?;
    d.set_item("residual", report_dict(py, &sol.report)?)?;
    Ok(d)
}

/// Euler-Lagrange residual of nodal values `y` at interior nodes.
#[pyfunction]
fn el_check<'py>(py: Python<'py>, lagrangian: &PyLagrangian, operator: &PyOperator, y: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let y = operator.function(y)?;
    let d = report_dict(py, &el_residual(&lagrangian.inner, &operator.inner, &y).py_err()?)?;
    d.set_item("functional", eval_functional(&lagrangian.inner, &operator.inner, &y).py_err()?)?;
    d.set_item("natural_boundary", natural_boundary_residual(&lagrangian.inner, &operator.inner, &y).py_err()?)?;
    Ok(d)
}

/// Invariance under `t -> t`, `y -> y + eps * generator`, the Noether residual and, when
/// `F` depends on `B[y]` only, the conserved quantity.
#[pyfunction]
#[pyo3(signature = (lagrangian, operator, y, generator = 1.0, epsilon = 1e-2))]
fn noether<'py>(
    py: Python<'py>,
    lagrangian: &PyLagrangian,
    operator: &PyOperator,
    y: Vec<f64>,
    generator: f64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (f, op) = (&lagrangian.inner, &operator.inner);
    let y = operator.function(y)?;
    let gen = Generator::constant(generator, epsilon).py_err()?;
    let inv = check_invariance(f, &gen, op, &y).py_err()?;
    let d = PyDict::new(py);
    d.set_item("exact", inv.exact)?;
    d.set_item("first_order", inv.first_order)?;
    d.set_item("max_abs_difference", inv.max_abs_difference)?;
    d.set_item("residual", report_dict(py, &noether_residual(f, &gen, op, &y).py_err()?)?)?;
    if f.depends_only_on_by() {
        let q = conserved_quantity(f, op, &y).py_err()?;
        d.set_item("relative_stdev", relative_stdev(&q))?;
        d.set_item("conserved_quantity", q.values)?;
    }
    Ok(d)
}

/// Solves `integral_a^t k(t - tau) y(tau) dtau = rhs(t)` for a convolution kernel.
#[pyfunction]
fn volterra_first_kind(kernel: &PyKernel, grid: &PyGrid, rhs: Vec<f64>) -> PyResult<Vec<f64>> {
    let problem = VolterraProblem::new(&kernel.inner, grid.function(rhs)?).py_err()?;
    Ok(solve_first_kind(&problem).py_err()?.values)
}

/// Resolvent `u` of a convolution profile `h` with `h(0) = 1`: `h + h * u = 1` on `[0, b - a]`.
#[pyfunction]
#[pyo3(name = "resolvent")]
fn py_resolvent(kernel: &PyKernel, grid: &PyGrid) -> PyResult<Vec<f64>> {
    let profile = kernel
        .inner
        .profile()
        .ok_or_else(|| PyValueError::new_err(format!("kernel {} has no convolution profile", kernel.inner.name())))?;
    Ok(resolvent(profile, &grid.inner).py_err()?.values)
}

fn nd_dict<'py>(py: Python<'py>, r: &ResidualReportND, margin: usize) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("residual", r.residual.clone())?;
    d.set_item("shape", r.axes.iter().map(|a| a.n + 1).collect::<Vec<_>>())?;
    d.set_item("max_abs", r.max_abs)?;
    d.set_item("l2", r.l2)?;
    d.set_item("max_abs_within_margin", r.max_abs_within(margin))?;
    Ok(d)
}

fn nd_field(operators: &[PyRef<'_, PyOperator>], values: Vec<f64>) -> PyResult<(PVector, GridFunctionND)> {
    let axes = operators.iter().map(|o| o.grid.inner).collect();
    let pv = PVector::new(operators.iter().map(|o| o.inner.clone()).collect()).py_err()?;
    Ok((pv, GridFunctionND::new(axes, values).py_err()?))
}

/// Euler-Lagrange residual of `0.5 |grad y|^2` for a field given in row-major order.
#[pyfunction]
#[pyo3(signature = (operators, values, margin = 0))]
fn dirichlet_residual<'py>(
    py: Python<'py>,
    operators: Vec<PyRef<'py, PyOperator>>,
    values: Vec<f64>,
    margin: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let (pv, y) = nd_field(&operators, values)?;
    nd_dict(py, &el_residual_nd(&LagrangianND::dirichlet(), &pv, &y).py_err()?, margin)
}

/// Wave residual; axis 0 is time. `form` is `time_fractional`, `time_fractional_printed` or `space_time_fractional`.
#[pyfunction]
#[pyo3(name = "wave_residual", signature = (operators, values, form = "time_fractional", rho = 1.0, k = 1.0, margin = 0))]
fn py_wave_residual<'py>(
    py: Python<'py>,
    operators: Vec<PyRef<'py, PyOperator>>,
    values: Vec<f64>,
    form: &str,
    rho: f64,
    k: f64,
    margin: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let form = match form {
        "time_fractional" => WaveForm::TimeFractional,
        "time_fractional_printed" => WaveForm::TimeFractionalPrinted,
        "space_time_fractional" => WaveForm::SpaceTimeFractional,
        other => return Err(PyValueError::new_err(format!("unknown wave form '{other}'"))),
    };
    let (pv, y) = nd_field(&operators, values)?;
    nd_dict(py, &wave_residual(form, &pv, rho, k, &y).py_err()?, margin)
}

#[pymodule]
#[pyo3(name = "genfrac")]
pub fn genfrac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyLagrangian>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_isoperimetric, m)?)?;
    m.add_function(wrap_pyfunction!(el_check, m)?)?;
    m.add_function(wrap_pyfunction!(noether, m)?)?;
    m.add_function(wrap_pyfunction!(volterra_first_kind, m)?)?;
    m.add_function(wrap_pyfunction!(py_resolvent, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_residual, m)?)?;
    m.add_function(wrap_pyfunction!(py_wave_residual, m)?)?;
    Ok(())
}
