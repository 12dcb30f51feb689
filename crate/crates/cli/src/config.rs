//! TOML run configuration. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use genfrac::builtins::{self, Params};
use genfrac::lagrangian::Monomial;
use genfrac::{Grid, GridFunction, KernelSpec, LagrangianSpec, OperatorHandle, PSet};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    OperatorEval,
    Solve,
    ElCheck,
    IsoSolve,
    Noether,
    MultidimCheck,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::OperatorEval => "operator_eval",
            Kind::Solve => "solve",
            Kind::ElCheck => "el_check",
            Kind::IsoSolve => "iso_solve",
            Kind::Noether => "noether",
            Kind::MultidimCheck => "multidim_check",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Option<Kind>,
    pub grid: Option<GridConfig>,
    pub kernel: Option<KernelConfig>,
    pub pset: Option<PSetConfig>,
    pub lagrangian: Option<LagrangianConfig>,
    pub boundary: Option<BoundaryConfig>,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
    pub trajectory: Option<TrajectoryConfig>,
    pub solver: Option<SolverConfig>,
    pub operator_eval: Option<OperatorEvalConfig>,
    pub noether: Option<NoetherConfig>,
    pub multidim: Option<MultidimConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub n: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// Left and right weights; the interval comes from the grid.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PSetConfig {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
}

impl Default for PSetConfig {
    fn default() -> Self {
        Self { lambda: 1.0, mu: 0.0 }
    }
}

/// Either a registered name (with optional parameters) or polynomial terms.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianConfig {
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: Params,
    pub polynomial: Option<Vec<Monomial>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Omit for a free left end.
    pub left: Option<f64>,
    pub right: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub lagrangian: LagrangianConfig,
    pub target: f64,
}

/// `y(t) = sum c t^p`, or the solver output when `solve = true`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default)]
    pub terms: Vec<PowerTerm>,
    #[serde(default)]
    pub solve: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub gradient_tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorEvalConfig {
    /// Input function as power terms.
    pub function: Vec<PowerTerm>,
    /// Off-grid evaluation points.
    #[serde(default)]
    pub points: Vec<f64>,
    /// Random linearity and duality trials, seeded by `--seed`.
    #[serde(default)]
    pub property_trials: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoetherConfig {
    /// Translation generator `xi = generator`.
    #[serde(default = "one")]
    pub generator: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NdLagrangian {
    Dirichlet,
    Wave,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultidimConfig {
    pub axes: Vec<AxisConfig>,
    pub lagrangian: NdLagrangian,
    pub form: Option<genfrac::multidim::WaveForm>,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default = "one")]
    pub k: f64,
    pub field: FieldConfig,
    /// Also report the maximum this many nodes away from every boundary.
    #[serde(default)]
    pub margin: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    pub n: usize,
    pub kernel: KernelConfig,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
}

/// `plane_wave` (`sin(x1 - speed t0)`), `exp_sin` (`exp(x0) sin(x1)`) or `polynomial`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub terms: Vec<FieldTerm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTerm {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::validation(format!("invalid config: {}", e.message().trim())))
}

impl RunConfig {
    pub fn grid(&self, override_n: Option<usize>) -> Result<Grid, CliError> {
        let g = self.grid.ok_or_else(|| CliError::validation("missing [grid]"))?;
        Ok(Grid::new(g.a, g.b, override_n.unwrap_or(g.n))?)
    }

    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        let k = self.kernel.as_ref().ok_or_else(|| CliError::validation("missing [kernel]"))?;
        Ok(builtins::kernel(&k.name, &k.params)?)
    }

    pub fn operator(&self, grid: &Grid) -> Result<OperatorHandle, CliError> {
        let p = self.pset.unwrap_or_default();
        Ok(OperatorHandle::new(PSet::new(grid.a, grid.b, p.lambda, p.mu)?, self.kernel()?)?)
    }

    pub fn lagrangian(&self) -> Result<LagrangianSpec, CliError> {
        self.lagrangian.as_ref().ok_or_else(|| CliError::validation("missing [lagrangian]"))?.build()
    }

    pub fn boundary(&self) -> Result<BoundaryConfig, CliError> {
        self.boundary.ok_or_else(|| CliError::validation("missing [boundary]"))
    }
}

impl LagrangianConfig {
    pub fn build(&self) -> Result<LagrangianSpec, CliError> {
        match (&self.builtin, &self.polynomial) {
            (Some(name), None) => Ok(builtins::lagrangian(name, &self.params)?),
            (None, Some(terms)) => {
                if !self.params.is_empty() {
                    return Err(CliError::validation("polynomial Lagrangians take no params"));
                }
                Ok(LagrangianSpec::polynomial(terms.clone())?)
            }
            _ => Err(CliError::validation("lagrangian needs exactly one of 'builtin' or 'polynomial'")),
        }
    }
}

pub fn power_series(terms: &[PowerTerm], grid: Grid) -> GridFunction {
    GridFunction::from_fn(grid, |t| terms.iter().map(|p| p.coefficient * t.powf(p.exponent)).sum())
}
