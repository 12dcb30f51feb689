//! Named Lagrangians and kernels used by configs and bindings.

use std::collections::BTreeMap;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::{
    hadamard_kernel, power_derivative_kernel, power_integral_kernel, profile_kernel, variable_order_kernel, KernelSpec,
    Profile,
};
use crate::lagrangian::LagrangianSpec;

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy)]
pub struct BuiltinLagrangian {
    pub name: &'static str,
    pub formula: &'static str,
    pub description: &'static str,
    /// Parameter names with defaults.
    pub params: &'static [(&'static str, f64)],
    build: fn(&dyn Fn(&str) -> f64) -> LagrangianSpec,
}

impl BuiltinLagrangian {
    /// Builds the Lagrangian; unknown parameter names are rejected.
    pub fn build(&self, params: &Params) -> Result<LagrangianSpec> {
        for key in params.keys() {
            if !self.params.iter().any(|(p, _)| p == key) {
                return Err(Error::Domain(format!("{} takes no parameter '{key}'", self.name)));
            }
        }
        let get = |name: &str| -> f64 {
            params
                .get(name)
                .copied()
                .or_else(|| self.params.iter().find(|(p, _)| *p == name).map(|(_, d)| *d))
                .unwrap_or(f64::NAN)
        };
        Ok((self.build)(&get))
    }
}

const NO_PARAMS: &[(&str, f64)] = &[];

static LAGRANGIANS: &[BuiltinLagrangian] = &[
    BuiltinLagrangian {
        name: "tracking",
        formula: "(x2 + t)^2",
        description: "squared deviation of K_P[y] from -t; with kernel exp(-(t - tau)) the extremal through y(0) = -1, y(1) = -2 is y = -1 - t",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("tracking", |x| (x.ky + x.t).powi(2))
                .with_gradient(|x| [0.0, 2.0 * (x.ky + x.t), 0.0, 0.0])
                .with_dependencies([false, true, false, false])
        },
    },
    BuiltinLagrangian {
        name: "weighted_integral",
        formula: "t * x2",
        description: "isoperimetric constraint integrand t K_P[y] paired with the tracking Lagrangian",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("weighted_integral", |x| x.t * x.ky)
                .with_gradient(|x| [0.0, x.t, 0.0, 0.0])
                .with_dependencies([false, true, false, false])
        },
    },
    BuiltinLagrangian {
        name: "caputo_tracking",
        formula: "(x4 - 2 t^(2 - alpha) / Gamma(3 - alpha))^2",
        description: "squared deviation of B_P[y] from the Caputo derivative of t^2; extremal y = t^2 for the power derivative kernel of order alpha",
        params: &[("alpha", 0.5)],
        build: |p| {
            let alpha = p("alpha");
            let c = 2.0 / gamma(3.0 - alpha);
            LagrangianSpec::new("caputo_tracking", move |x| (x.by - c * x.t.powf(2.0 - alpha)).powi(2))
                .with_gradient(move |x| [0.0, 0.0, 0.0, 2.0 * (x.by - c * x.t.powf(2.0 - alpha))])
                .with_dependencies([false, false, false, true])
        },
    },
    BuiltinLagrangian {
        name: "by_square",
        formula: "x4^2",
        description: "depends only on B_P[y]; invariant under translations y + c, conserved quantity K_{P*}[2 B_P[y]]",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("by_square", |x| x.by * x.by)
                .with_gradient(|x| [0.0, 0.0, 0.0, 2.0 * x.by])
                .with_dependencies([false, false, false, true])
        },
    },
    BuiltinLagrangian {
        name: "by_linear",
        formula: "x4",
        description: "dF/dx4 = 1; the natural boundary expression reduces to K_{P*}[1](a)",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("by_linear", |x| x.by)
                .with_gradient(|_| [0.0, 0.0, 0.0, 1.0])
                .with_dependencies([false, false, false, true])
        },
    },
    BuiltinLagrangian {
        name: "kinetic",
        formula: "x3^2",
        description: "classical kinetic term; straight lines are extremals",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("kinetic", |x| x.dy * x.dy)
                .with_gradient(|x| [0.0, 0.0, 2.0 * x.dy, 0.0])
                .with_dependencies([false, false, true, false])
        },
    },
    BuiltinLagrangian {
        name: "spring",
        formula: "x3^2 / 2 + (x1 - 1)^2 / 2",
        description: "linear spring about y = 1; with a free left end and y(1) = 2 the extremal is 1 + cosh(t)/cosh(1)",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("spring", |x| 0.5 * x.dy * x.dy + 0.5 * (x.y - 1.0).powi(2))
                .with_gradient(|x| [x.y - 1.0, 0.0, x.dy, 0.0])
                .with_dependencies([true, false, true, false])
        },
    },
    BuiltinLagrangian {
        name: "pendulum",
        formula: "x3^2 / 2 - cos(x1)",
        description: "nonlinear pendulum action",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("pendulum", |x| 0.5 * x.dy * x.dy - x.y.cos())
                .with_gradient(|x| [x.y.sin(), 0.0, x.dy, 0.0])
                .with_dependencies([true, false, true, false])
        },
    },
    BuiltinLagrangian {
        name: "area",
        formula: "x1",
        description: "area under the curve, a linear isoperimetric constraint",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("area", |x| x.y)
                .with_gradient(|_| [1.0, 0.0, 0.0, 0.0])
                .with_dependencies([true, false, false, false])
        },
    },
    BuiltinLagrangian {
        name: "moment",
        formula: "t * x1",
        description: "first moment of the curve, a linear isoperimetric constraint",
        params: NO_PARAMS,
        build: |_| {
            LagrangianSpec::new("moment", |x| x.t * x.y)
                .with_gradient(|x| [x.t, 0.0, 0.0, 0.0])
                .with_dependencies([true, false, false, false])
        },
    },
    BuiltinLagrangian {
        name: "time_only",
        formula: "t",
        description: "independent of y; every variation of its functional vanishes",
        params: NO_PARAMS,
        build: |_| LagrangianSpec::new("time_only", |x| x.t).with_gradient(|_| [0.0; 4]).with_dependencies([false; 4]),
    },
];

pub fn lagrangians() -> &'static [BuiltinLagrangian] {
    LAGRANGIANS
}

pub fn find_lagrangian(name: &str) -> Result<&'static BuiltinLagrangian> {
    LAGRANGIANS.iter().find(|b| b.name == name).ok_or_else(|| {
        let known: Vec<&str> = LAGRANGIANS.iter().map(|b| b.name).collect();
        Error::Domain(format!("unknown Lagrangian '{name}'; known: {}", known.join(", ")))
    })
}

/// Builds a registered Lagrangian by name.
pub fn lagrangian(name: &str, params: &Params) -> Result<LagrangianSpec> {
    find_lagrangian(name)?.build(params)
}

#[derive(Debug, Clone, Copy)]
pub struct BuiltinKernel {
    pub name: &'static str,
    pub formula: &'static str,
    pub description: &'static str,
    pub params: &'static [&'static str],
}

static KERNELS: &[BuiltinKernel] = &[
    BuiltinKernel {
        name: "power_integral",
        formula: "(t - tau)^(alpha - 1) / Gamma(alpha)",
        description: "Riemann-Liouville fractional integral of order alpha",
        params: &["alpha"],
    },
    BuiltinKernel {
        name: "power_derivative",
        formula: "(t - tau)^(-alpha) / Gamma(1 - alpha)",
        description: "A_P and B_P reduce to Riemann-Liouville and Caputo derivatives of order alpha",
        params: &["alpha"],
    },
    BuiltinKernel {
        name: "hadamard",
        formula: "(ln(t / tau))^(alpha - 1) / (Gamma(alpha) tau)",
        description: "Hadamard fractional integral; needs a > 0",
        params: &["alpha"],
    },
    BuiltinKernel {
        name: "variable_order",
        formula: "(t - tau)^(alpha(t, tau) - 1) / Gamma(alpha(t, tau))",
        description: "variable-order fractional integral with alpha(t, tau) = alpha0 + slope (t + tau) / 2 on [a, b]",
        params: &["alpha0", "slope", "a", "b"],
    },
    BuiltinKernel {
        name: "exponential",
        formula: "exp(rate (t - tau))",
        description: "bounded convolution kernel with exponential profile",
        params: &["rate"],
    },
    BuiltinKernel {
        name: "cosine",
        formula: "cos(frequency (t - tau))",
        description: "bounded convolution kernel with cosine profile",
        params: &["frequency"],
    },
    BuiltinKernel {
        name: "constant",
        formula: "c",
        description: "constant kernel; c = 1 gives the running integral and classical derivatives",
        params: &["value"],
    },
];

pub fn kernels() -> &'static [BuiltinKernel] {
    KERNELS
}

/// Builds a registered kernel; every listed parameter is required and no others are accepted.
pub fn kernel(name: &str, params: &Params) -> Result<KernelSpec> {
    let entry = KERNELS.iter().find(|k| k.name == name).ok_or_else(|| {
        let known: Vec<&str> = KERNELS.iter().map(|k| k.name).collect();
        Error::Domain(format!("unknown kernel '{name}'; known: {}", known.join(", ")))
    })?;
    for key in params.keys() {
        if !entry.params.contains(&key.as_str()) {
            return Err(Error::Domain(format!("kernel {name} takes no parameter '{key}'")));
        }
    }
    let get = |key: &str| -> Result<f64> {
        params.get(key).copied().ok_or_else(|| Error::Domain(format!("kernel {name} needs parameter '{key}'")))
    };
    match name {
        "power_integral" => power_integral_kernel(get("alpha")?),
        "power_derivative" => power_derivative_kernel(get("alpha")?),
        "hadamard" => hadamard_kernel(get("alpha")?),
        "variable_order" => {
            let (alpha0, slope) = (get("alpha0")?, get("slope")?);
            variable_order_kernel(move |t, tau| alpha0 + slope * 0.5 * (t + tau), get("a")?, get("b")?)
        }
        "exponential" => Ok(profile_kernel(Profile::Exponential { rate: get("rate")? }, None)),
        "cosine" => Ok(profile_kernel(Profile::Cosine { frequency: get("frequency")? }, None)),
        "constant" => Ok(profile_kernel(Profile::Constant(get("value")?), None)),
        _ => unreachable!("registry entry without builder"),
    }
}
