//! First-kind Volterra equations `int_a^t h(t - tau) y(tau) dtau = g(t)` with
//! `h(0) = 1`, and the resolvent `u` defined by `h + h * u = 1`.
//!
//! Both are reduced to second-kind equations by differentiation and marched
//! with the trapezoidal rule.

use crate::error::{Error, Result};
use crate::grid::{DerivativeStencil, Grid, GridFunction};
use crate::kernels::{KernelSpec, Profile};

/// Back-substitution tolerance used when none is given: `1e-4` at `n = 512`,
/// growing like `h^2` on coarser grids.
pub fn default_tolerance(n: usize) -> f64 {
    1e-4 * (512.0 / n as f64).powi(2).max(1.0)
}

#[derive(Debug, Clone)]
pub struct VolterraProblem {
    profile: Profile,
    rhs: GridFunction,
}

impl VolterraProblem {
    pub fn new(kernel: &KernelSpec, rhs: GridFunction) -> Result<Self> {
        let profile = kernel
            .profile()
            .filter(|_| kernel.is_convolution())
            .ok_or_else(|| Error::Precondition(format!("{} kernel is not a smooth convolution kernel", kernel.name())))?
            .clone();
        let h0 = kernel.profile_at_zero().unwrap_or_else(|| profile.value(0.0));
        if (h0 - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("kernel profile must satisfy h(0) = 1, got {h0}")));
        }
        let scale = rhs.max_abs().max(1.0);
        if rhs.values[0].abs() > 1e-12 * scale {
            return Err(Error::Precondition(format!(
                "right-hand side must vanish at the left end, got g(a) = {}",
                rhs.values[0]
            )));
        }
        Ok(Self { profile, rhs })
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn rhs(&self) -> &GridFunction {
        &self.rhs
    }
}

/// Marches `y(t) + int_a^t kd(t - s) y(s) ds = f(t)` with the trapezoidal rule.
fn march_second_kind(grid: &Grid, kernel_derivative: &[f64], forcing: &[f64]) -> Vec<f64> {
    let h = grid.step();
    let n = grid.n;
    let mut y = vec![0.0; n + 1];
    y[0] = forcing[0];
    let diag = 1.0 + 0.5 * h * kernel_derivative[0];
    for i in 1..=n {
        let mut acc = 0.5 * kernel_derivative[i] * y[0];
        for j in 1..i {
            acc += kernel_derivative[i - j] * y[j];
        }
        y[i] = (forcing[i] - h * acc) / diag;
    }
    y
}

/// Trapezoidal `int_a^{t_i} h(t_i - s) y(s) ds` at every node.
fn convolve(grid: &Grid, profile_values: &[f64], y: &[f64]) -> Vec<f64> {
    let h = grid.step();
    (0..=grid.n)
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            let mut acc = 0.5 * (profile_values[i] * y[0] + profile_values[0] * y[i]);
            for j in 1..i {
                acc += profile_values[i - j] * y[j];
            }
            h * acc
        })
        .collect()
}

fn lag_samples(grid: &Grid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = grid.step();
    (0..=grid.n).map(|m| f(m as f64 * h)).collect()
}

/// Solves the first-kind equation with the default tolerance.
pub fn solve_first_kind(problem: &VolterraProblem) -> Result<GridFunction> {
    solve_first_kind_with_tolerance(problem, default_tolerance(problem.rhs.grid.n))
}

pub fn solve_first_kind_with_tolerance(problem: &VolterraProblem, tolerance: f64) -> Result<GridFunction> {
    let grid = problem.rhs.grid;
    let forcing = DerivativeStencil::OneSided2ndOrderAtEnds.apply(&grid, &problem.rhs.values);
    let kd = lag_samples(&grid, |s| problem.profile.derivative(s));
    let y = march_second_kind(&grid, &kd, &forcing);

    let hv = lag_samples(&grid, |s| problem.profile.value(s));
    let back = convolve(&grid, &hv, &y);
    let residual = back
        .iter()
        .zip(&problem.rhs.values)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if !(residual <= tolerance) {
        return Err(Error::IllConditioned { residual, tolerance });
    }
    GridFunction::new(grid, y)
}

/// Maximum of `|int_a^t h(t - s) y(s) ds - g(t)|` over the nodes.
pub fn back_substitution_residual(problem: &VolterraProblem, y: &GridFunction) -> Result<f64> {
    problem.rhs.grid.check_same(&y.grid)?;
    let hv = lag_samples(&y.grid, |s| problem.profile.value(s));
    let back = convolve(&y.grid, &hv, &y.values);
    Ok(back
        .iter()
        .zip(&problem.rhs.values)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Resolvent `u` on `[0, b - a]` (sampled on `grid` shifted to start at 0).
pub fn resolvent(profile: &Profile, grid: &Grid) -> Result<GridFunction> {
    resolvent_with_tolerance(profile, grid, default_tolerance(grid.n))
}

pub fn resolvent_with_tolerance(profile: &Profile, grid: &Grid, tolerance: f64) -> Result<GridFunction> {
    let h0 = profile.value(0.0);
    if (h0 - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("kernel profile must satisfy h(0) = 1, got {h0}")));
    }
    let kd = lag_samples(grid, |s| profile.derivative(s));
    let forcing: Vec<f64> = kd.iter().map(|v| -v).collect();
    let u = march_second_kind(grid, &kd, &forcing);

    let residual = resolvent_identity_residual(profile, grid, &u);
    if !(residual <= tolerance) {
        return Err(Error::IllConditioned { residual, tolerance });
    }
    GridFunction::new(*grid, u)
}

/// Maximum of `|h(t) + (h * u)(t) - 1|` over the nodes.
pub fn resolvent_identity_residual(profile: &Profile, grid: &Grid, u: &[f64]) -> f64 {
    let hv = lag_samples(grid, |s| profile.value(s));
    let conv = convolve(grid, &hv, u);
    hv.iter()
        .zip(&conv)
        .fold(0.0_f64, |m, (h, c)| m.max((h + c - 1.0).abs()))
}

/// How the right boundary value is assembled from `int_0^1 u(1 - tau) dtau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryForm {
    /// `y(1) = -1 - int u`, for the tracking problem `K_P[y](t) + t = 0`.
    Tracking,
    /// `y(1) = (xi - 1)(1 + int u)`, for `K_P[y](t) = (xi - 1) t`.
    Isoperimetric { xi: f64 },
}

/// Right boundary value from a resolvent sampled on `[0, T]`.
pub fn boundary_value_from_resolvent(u: &GridFunction, form: BoundaryForm) -> f64 {
    // int_0^T u(T - tau) dtau = int_0^T u(s) ds
    let integral = u.integral();
    match form {
        BoundaryForm::Tracking => -1.0 - integral,
        BoundaryForm::Isoperimetric { xi } => (xi - 1.0) * (1.0 + integral),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{power_integral_kernel, profile_kernel};

    fn unit(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn exponential_kernel_tracking_solution() {
        let g = unit(512);
        let k = profile_kernel(Profile::Exponential { rate: -1.0 }, None);
        let p = VolterraProblem::new(&k, GridFunction::from_fn(g, |t| -t)).unwrap();
        let y = solve_first_kind(&p).unwrap();
        for (t, v) in g.nodes().iter().zip(&y.values) {
            assert!((v - (-1.0 - t)).abs() <= 1e-4);
        }
        assert!(back_substitution_residual(&p, &y).unwrap() <= 1e-4);
    }

    #[test]
    fn unit_kernel_inverts_integration() {
        let g = unit(64);
        let k = profile_kernel(Profile::Constant(1.0), None);
        let p = VolterraProblem::new(&k, GridFunction::from_fn(g, |t| 0.5 * t * t)).unwrap();
        let y = solve_first_kind(&p).unwrap();
        for (t, v) in g.nodes().iter().zip(&y.values) {
            assert!((v - t).abs() <= 1e-12);
        }
    }

    #[test]
    fn growing_exponential_kernel() {
        let g = unit(512);
        let (alpha, xi) = (0.3, 2.0);
        let k = profile_kernel(Profile::Exponential { rate: alpha }, None);
        let p = VolterraProblem::new(&k, GridFunction::from_fn(g, |t| (xi - 1.0) * t)).unwrap();
        let y = solve_first_kind(&p).unwrap();
        for (t, v) in g.nodes().iter().zip(&y.values) {
            assert!((v - (xi - 1.0) * (1.0 - alpha * t)).abs() <= 1e-4);
        }
    }

    #[test]
    fn preconditions() {
        let g = unit(16);
        let bad = profile_kernel(Profile::Constant(2.0), None);
        assert!(matches!(
            VolterraProblem::new(&bad, GridFunction::zeros(g)),
            Err(Error::Precondition(_))
        ));
        let singular = power_integral_kernel(0.5).unwrap();
        assert!(VolterraProblem::new(&singular, GridFunction::zeros(g)).is_err());
        let ok = profile_kernel(Profile::Constant(1.0), None);
        assert!(VolterraProblem::new(&ok, GridFunction::constant(g, 1.0)).is_err());
        assert!(resolvent(&Profile::Cosine { frequency: 1.0 }.clone(), &g).is_ok());
        assert!(resolvent(&Profile::Exponential { rate: 1.0 }, &g).is_ok());
        assert!(resolvent(&Profile::Constant(3.0), &g).is_err());
    }

    #[test]
    fn resolvent_closed_forms() {
        let g = unit(512);
        let u = resolvent(&Profile::Exponential { rate: -1.0 }, &g).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.0).abs() <= 1e-6));

        let alpha = 0.3;
        let u = resolvent(&Profile::Exponential { rate: alpha }, &g).unwrap();
        assert!(u.values.iter().all(|v| (v + alpha).abs() <= 1e-6));

        let alpha = 2.0;
        let u = resolvent(&Profile::Cosine { frequency: alpha }, &g).unwrap();
        for (t, v) in g.nodes().iter().zip(&u.values) {
            assert!((v - alpha * alpha * t).abs() <= 1e-4, "t={t} u={v}");
        }
    }

    #[test]
    fn boundary_values() {
        let g = unit(64);
        let one = GridFunction::constant(g, 1.0);
        assert!((boundary_value_from_resolvent(&one, BoundaryForm::Tracking) + 2.0).abs() < 1e-14);
        let (alpha, xi) = (0.3, 2.0);
        let flat = GridFunction::constant(g, -alpha);
        let v = boundary_value_from_resolvent(&flat, BoundaryForm::Isoperimetric { xi });
        assert!((v - (xi - 1.0) * (1.0 - alpha)).abs() < 1e-14);
        let ramp = GridFunction::from_fn(g, |t| alpha * alpha * t);
        let v = boundary_value_from_resolvent(&ramp, BoundaryForm::Isoperimetric { xi });
        assert!((v - (xi - 1.0) * (1.0 + alpha * alpha / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn refinement_reduces_back_substitution_residual() {
        let k = profile_kernel(Profile::Cosine { frequency: 3.0 }, None);
        let residual = |n: usize| {
            let g = unit(n);
            let p = VolterraProblem::new(&k, GridFunction::from_fn(g, |t| t.sin() * t)).unwrap();
            let y = solve_first_kind_with_tolerance(&p, 1.0).unwrap();
            back_substitution_residual(&p, &y).unwrap()
        };
        let coarse = residual(64);
        let fine = residual(128);
        assert!(fine <= 0.5 * coarse, "{coarse} -> {fine}");
    }
}
