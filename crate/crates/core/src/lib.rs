//! Numerical toolkit for the generalized fractional calculus of variations.
//!
//! Kernel-based operators `K_P`, `A_P`, `B_P`, first-kind Volterra solvers,
//! Euler-Lagrange residuals and direct solvers (fundamental, free-boundary and
//! isoperimetric problems), Noether-type conservation checks, and partial
//! operators on rectangular domains.

pub mod builtins;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod lagrangian;
pub mod multidim;
pub mod noether;
pub mod operators;
pub mod optimize;
pub mod quadrature;
pub mod report;
pub mod variational;
pub mod volterra;

pub use error::{Error, Result};
pub use grid::{DerivativeStencil, Grid, GridFunction};
pub use kernels::{
    convolution_kernel, dual, hadamard_kernel, power_derivative_kernel, power_integral_kernel,
    profile_kernel, variable_order_kernel, KernelFamily, KernelSpec, PSet, Profile,
};
pub use operators::{DerivativeValue, Discretization, OperatorHandle, QuadratureRule};
pub use lagrangian::{Arguments, LagrangianSpec, Monomial};
pub use multidim::{GridFunctionND, LagrangianND, PVector};
pub use noether::{Generator, InvarianceReport};
pub use report::ResidualReport;
pub use variational::{Boundary, Constraint, ProblemSpec, SensitivityMatrix, SolverOptions};
