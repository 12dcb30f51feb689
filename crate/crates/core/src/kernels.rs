//! Kernel families for generalized fractional operators and the parameter set `P`.
//!
//! A kernel `k(t, tau)` is defined on the triangle `a <= tau < t <= b`. Weakly
//! singular kernels behave like `C (t - tau)^(-sigma)` near the diagonal with
//! `0 <= sigma < 1`; `sigma` is carried as metadata so that quadrature can
//! treat the singular cell separately.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub type OrderFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Operator parameters `<a, b, lambda, mu>`: interval and left/right weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSet {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl PSet {
    pub fn new(a: f64, b: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Domain(format!("PSet requires a < b, got a={a}, b={b}")));
        }
        if !(lambda.is_finite() && mu.is_finite()) {
            return Err(Error::Domain("PSet weights must be finite".into()));
        }
        Ok(Self { a, b, lambda, mu })
    }

    /// Left-sided set `<a, b, 1, 0>`.
    pub fn left(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 1.0, 0.0)
    }

    /// Right-sided set `<a, b, 0, 1>`.
    pub fn right(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 0.0, 1.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda == 0.0 && self.mu == 0.0
    }
}

/// Dual set: same interval, weights swapped.
pub fn dual(p: &PSet) -> PSet {
    PSet { a: p.a, b: p.b, lambda: p.mu, mu: p.lambda }
}

/// One-argument profile `h` of a convolution kernel `k(t, tau) = h(t - tau)`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// `exp(rate * s)`
    Exponential { rate: f64 },
    /// `cos(frequency * s)`
    Cosine { frequency: f64 },
    Custom {
        h: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl Profile {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Exponential { rate } => (rate * s).exp(),
            Profile::Cosine { frequency } => (frequency * s).cos(),
            Profile::Custom { h, .. } => h(s),
        }
    }

    /// `h'(s)`: closed form for the named families, central differences otherwise.
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Profile::Constant(_) => 0.0,
            Profile::Exponential { rate } => rate * (rate * s).exp(),
            Profile::Cosine { frequency } => -frequency * (frequency * s).sin(),
            Profile::Custom { derivative: Some(d), .. } => d(s),
            Profile::Custom { h, derivative: None } => {
                let step = 1e-5 * s.abs().max(1.0);
                (h(s + step) - h(s - step)) / (2.0 * step)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Constant(_) => "constant",
            Profile::Exponential { .. } => "exponential",
            Profile::Cosine { .. } => "cosine",
            Profile::Custom { .. } => "custom",
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::Exponential { rate } => write!(f, "Exponential {{ rate: {rate} }}"),
            Profile::Cosine { frequency } => write!(f, "Cosine {{ frequency: {frequency} }}"),
            Profile::Custom { derivative, .. } => {
                write!(f, "Custom {{ analytic_derivative: {} }}", derivative.is_some())
            }
        }
    }
}

#[derive(Clone)]
pub enum KernelFamily {
    /// `(t - tau)^(alpha - 1) / Gamma(alpha)`
    PowerIntegral { order: f64 },
    /// `(t - tau)^(-alpha) / Gamma(1 - alpha)`
    PowerDerivative { order: f64 },
    /// `(log(t / tau))^(alpha - 1) / (Gamma(alpha) tau)`
    Hadamard { order: f64 },
    /// `(t - tau)^(alpha(t, tau) - 1) / Gamma(alpha(t, tau))`
    VariableOrder { order: OrderFn, min_order: f64 },
    Convolution { profile: Profile },
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::PowerIntegral { order } => write!(f, "PowerIntegral({order})"),
            KernelFamily::PowerDerivative { order } => write!(f, "PowerDerivative({order})"),
            KernelFamily::Hadamard { order } => write!(f, "Hadamard({order})"),
            KernelFamily::VariableOrder { min_order, .. } => {
                write!(f, "VariableOrder(min_order={min_order})")
            }
            KernelFamily::Convolution { profile } => write!(f, "Convolution({profile:?})"),
        }
    }
}

/// Evaluatable kernel with singularity metadata.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    family: KernelFamily,
    singularity_exponent: f64,
    is_convolution: bool,
    profile_at_zero: Option<f64>,
    /// `1 / Gamma(beta)` for power kernels written as `(t - tau)^(beta - 1) / Gamma(beta)`.
    power: Option<(f64, f64)>,
}

fn check_order(order: f64) -> Result<()> {
    if order > 0.0 && order < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("order must lie in (0, 1), got {order}")))
    }
}

/// Kernel of the left Riemann-Liouville fractional integral of order `alpha`.
pub fn power_integral_kernel(alpha: f64) -> Result<KernelSpec> {
    check_order(alpha)?;
    Ok(KernelSpec {
        family: KernelFamily::PowerIntegral { order: alpha },
        singularity_exponent: 1.0 - alpha,
        is_convolution: true,
        profile_at_zero: None,
        power: Some((alpha, 1.0 / gamma(alpha))),
    })
}

/// Kernel whose generalized operators reduce to Riemann-Liouville and Caputo derivatives of order `alpha`.
pub fn power_derivative_kernel(alpha: f64) -> Result<KernelSpec> {
    check_order(alpha)?;
    let beta = 1.0 - alpha;
    Ok(KernelSpec {
        family: KernelFamily::PowerDerivative { order: alpha },
        singularity_exponent: alpha,
        is_convolution: true,
        profile_at_zero: None,
        power: Some((beta, 1.0 / gamma(beta))),
    })
}

/// Hadamard-type kernel; only meaningful on intervals with `a > 0`.
pub fn hadamard_kernel(alpha: f64) -> Result<KernelSpec> {
    check_order(alpha)?;
    Ok(KernelSpec {
        family: KernelFamily::Hadamard { order: alpha },
        singularity_exponent: 1.0 - alpha,
        is_convolution: false,
        profile_at_zero: None,
        power: None,
    })
}

/// Variable-order Riemann-Liouville kernel.
///
/// The order map is sampled on a 65 x 65 lattice of the triangle over `[a, b]`;
/// the singularity exponent is `1 - inf alpha` over the samples.
pub fn variable_order_kernel(
    order: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    a: f64,
    b: f64,
) -> Result<KernelSpec> {
    if !(a < b) {
        return Err(Error::Domain(format!("variable-order kernel needs a < b, got [{a}, {b}]")));
    }
    const SAMPLES: usize = 64;
    let h = (b - a) / SAMPLES as f64;
    let mut min_order = f64::INFINITY;
    for i in 1..=SAMPLES {
        let t = a + i as f64 * h;
        for j in 0..i {
            let tau = a + j as f64 * h;
            let alpha = order(t, tau);
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Domain(format!(
                    "variable order {alpha} outside (0, 1) at (t={t}, tau={tau})"
                )));
            }
            min_order = min_order.min(alpha);
        }
    }
    Ok(KernelSpec {
        family: KernelFamily::VariableOrder { order: Arc::new(order), min_order },
        singularity_exponent: 1.0 - min_order,
        is_convolution: false,
        profile_at_zero: None,
        power: None,
    })
}

/// Smooth convolution kernel `k(t, tau) = h(t - tau)` with `h(0) = h0`.
pub fn convolution_kernel(h: impl Fn(f64) -> f64 + Send + Sync + 'static, h0: f64) -> KernelSpec {
    profile_kernel(Profile::Custom { h: Arc::new(h), derivative: None }, Some(h0))
}

/// Convolution kernel from a named or custom profile.
pub fn profile_kernel(profile: Profile, h0: Option<f64>) -> KernelSpec {
    let h0 = h0.unwrap_or_else(|| profile.value(0.0));
    KernelSpec {
        family: KernelFamily::Convolution { profile },
        singularity_exponent: 0.0,
        is_convolution: true,
        profile_at_zero: Some(h0),
        power: None,
    }
}

impl KernelSpec {
    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn singularity_exponent(&self) -> f64 {
        self.singularity_exponent
    }

    pub fn is_convolution(&self) -> bool {
        self.is_convolution
    }

    pub fn profile_at_zero(&self) -> Option<f64> {
        self.profile_at_zero
    }

    /// `(beta, 1/Gamma(beta))` when the kernel is `(t - tau)^(beta - 1) / Gamma(beta)`.
    pub fn power_form(&self) -> Option<(f64, f64)> {
        self.power
    }

    pub fn profile(&self) -> Option<&Profile> {
        match &self.family {
            KernelFamily::Convolution { profile } => Some(profile),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.family {
            KernelFamily::PowerIntegral { .. } => "power_integral",
            KernelFamily::PowerDerivative { .. } => "power_derivative",
            KernelFamily::Hadamard { .. } => "hadamard",
            KernelFamily::VariableOrder { .. } => "variable_order",
            KernelFamily::Convolution { .. } => "convolution",
        }
    }

    /// Whether the kernel requires `tau > 0`.
    pub fn requires_positive_support(&self) -> bool {
        matches!(self.family, KernelFamily::Hadamard { .. })
    }

    /// `k(t, tau)` for `tau < t`; `tau == t` is accepted only for bounded kernels.
    pub fn eval(&self, t: f64, tau: f64) -> Result<f64> {
        let d = t - tau;
        if d < 0.0 || (d == 0.0 && self.singularity_exponent > 0.0) {
            return Err(Error::Domain(format!(
                "kernel evaluated off the triangle at (t={t}, tau={tau})"
            )));
        }
        self.eval_unchecked(t, tau)
    }

    fn eval_unchecked(&self, t: f64, tau: f64) -> Result<f64> {
        let d = t - tau;
        match &self.family {
            KernelFamily::PowerIntegral { .. } | KernelFamily::PowerDerivative { .. } => {
                let (beta, inv_gamma) = self.power.expect("power kernel");
                Ok(d.powf(beta - 1.0) * inv_gamma)
            }
            KernelFamily::Hadamard { order } => {
                if tau <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Hadamard kernel needs tau > 0, got (t={t}, tau={tau})"
                    )));
                }
                let log_ratio = (d / tau).ln_1p();
                Ok(log_ratio.powf(order - 1.0) / (gamma(*order) * tau))
            }
            KernelFamily::VariableOrder { order, .. } => {
                let alpha = order(t, tau);
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::Domain(format!(
                        "variable order {alpha} outside (0, 1) at (t={t}, tau={tau})"
                    )));
                }
                Ok(d.powf(alpha - 1.0) / gamma(alpha))
            }
            KernelFamily::Convolution { profile } => Ok(profile.value(d)),
        }
    }

    /// Bounded factor `k(t, tau) (t - tau)^sigma`; finite up to the diagonal.
    pub fn regular_part(&self, t: f64, tau: f64) -> Result<f64> {
        let d = t - tau;
        let sigma = self.singularity_exponent;
        if sigma == 0.0 {
            return self.eval_unchecked(t, tau);
        }
        match &self.family {
            KernelFamily::PowerIntegral { .. } | KernelFamily::PowerDerivative { .. } => {
                Ok(self.power.expect("power kernel").1)
            }
            KernelFamily::Hadamard { order } => {
                if tau <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Hadamard kernel needs tau > 0, got (t={t}, tau={tau})"
                    )));
                }
                let x = d / tau;
                // (d / log(t/tau))^(1-alpha) -> tau^(1-alpha) on the diagonal
                let ratio = if x.abs() < 1e-12 { tau } else { d / x.ln_1p() };
                Ok(ratio.powf(1.0 - order) / (gamma(*order) * tau))
            }
            KernelFamily::VariableOrder { order, min_order } => {
                let alpha = order(t, tau);
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::Domain(format!(
                        "variable order {alpha} outside (0, 1) at (t={t}, tau={tau})"
                    )));
                }
                let excess = alpha - min_order;
                let factor = if d == 0.0 {
                    if excess <= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    d.powf(excess)
                };
                Ok(factor / gamma(alpha))
            }
            KernelFamily::Convolution { profile } => Ok(profile.value(d)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn power_integral_values() {
        let k = power_integral_kernel(0.5).unwrap();
        assert!(close(k.eval(2.0, 1.0).unwrap(), 1.0 / PI.sqrt(), 1e-12));
        assert!(close(k.eval(1.0, 0.99).unwrap(), 0.01f64.powf(-0.5) / PI.sqrt(), 1e-10));
        assert!(close(k.eval(1.0, 0.99).unwrap(), 5.64190, 1e-5));
        assert_eq!(k.singularity_exponent(), 0.5);
        assert!(k.is_convolution());
        let near_one = power_integral_kernel(1.0 - 1e-10).unwrap();
        assert!(close(near_one.eval(3.0, 0.5).unwrap(), 1.0, 1e-8));
    }

    #[test]
    fn power_integral_rejects_orders_outside_unit_interval() {
        for alpha in [0.0, 1.0, -0.3, 1.5, f64::NAN] {
            assert!(matches!(power_integral_kernel(alpha), Err(Error::Domain(_))));
            assert!(matches!(power_derivative_kernel(alpha), Err(Error::Domain(_))));
            assert!(matches!(hadamard_kernel(alpha), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn power_derivative_values() {
        let k = power_derivative_kernel(0.5).unwrap();
        assert!(close(k.eval(2.0, 1.0).unwrap(), 0.564190, 1e-6));
        assert!(close(k.eval(1.0, 0.96).unwrap(), 2.82095, 1e-5));
        assert_eq!(k.singularity_exponent(), 0.5);
        // (t - tau)^{1/2} k -> 1/sqrt(pi)
        for e in [1e-2f64, 1e-5, 1e-9] {
            let tau = 1.0 - e;
            let d = 1.0 - tau;
            let scaled = d.sqrt() * k.eval(1.0, tau).unwrap();
            assert!(close(scaled, 1.0 / PI.sqrt(), 1e-12));
        }
    }

    #[test]
    fn hadamard_values() {
        let k = hadamard_kernel(0.5).unwrap();
        assert!(close(k.eval(E, 1.0).unwrap(), 1.0 / PI.sqrt(), 1e-12));
        assert!(close(k.eval(4.0, 2.0).unwrap(), 0.338830, 1e-6));
        assert!(!k.is_convolution());
        assert!(matches!(k.eval(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(k.eval(1.0, -0.5), Err(Error::Domain(_))));
        let near_one = hadamard_kernel(1.0 - 1e-10).unwrap();
        assert!(close(near_one.eval(2.0, 1.0).unwrap(), 1.0, 1e-8));
        // bounded after removing the singular factor
        for e in [1e-3f64, 1e-6, 1e-9] {
            let tau = 2.0 - e;
            let d = 2.0 - tau;
            let r = k.regular_part(2.0, tau).unwrap();
            assert!(close(r, d.sqrt() * k.eval(2.0, tau).unwrap(), 1e-9));
            assert!(r < 1.0);
        }
    }

    #[test]
    fn variable_order_values() {
        let k = variable_order_kernel(|_, tau| 0.5 + 0.4 * tau, 0.0, 1.0).unwrap();
        let expected = 0.5f64.powf(-0.3) / gamma(0.7);
        assert!(close(k.eval(1.0, 0.5).unwrap(), expected, 1e-12));
        assert!(close(k.eval(1.0, 0.5).unwrap(), 0.948453, 1e-6));
        assert!(close(k.singularity_exponent(), 0.5, 1e-12));

        let k = variable_order_kernel(|t, _| t / 2.0 + 1e-3, 0.0, 1.0).unwrap();
        assert!(k.singularity_exponent() < 1.0);
        let k = variable_order_kernel(|t, _| t / 2.0, 0.0, 1.0).unwrap();
        assert!(close(k.eval(1.0, 0.5).unwrap(), 0.797885, 1e-6));
    }

    #[test]
    fn variable_order_reports_escaping_order() {
        let err = variable_order_kernel(|t, _| t, 0.0, 1.5).unwrap_err();
        match err {
            Error::Domain(msg) => assert!(msg.contains("t="), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_variable_order_matches_power_integral() {
        let vo = variable_order_kernel(|_, _| 0.5, 0.0, 1.0).unwrap();
        let pi = power_integral_kernel(0.5).unwrap();
        let points = [(0.9, 0.1), (0.5, 0.49), (1.0, 0.0), (0.33, 0.2), (0.75, 0.7)];
        for (t, tau) in points {
            let a = vo.eval(t, tau).unwrap();
            let b = pi.eval(t, tau).unwrap();
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn convolution_values() {
        let k = convolution_kernel(|s| (-s).exp(), 1.0);
        assert!(close(k.eval(1.0, 0.0).unwrap(), (-1.0f64).exp(), 1e-15));
        assert_eq!(k.profile_at_zero(), Some(1.0));
        assert_eq!(k.singularity_exponent(), 0.0);
        let one = profile_kernel(Profile::Constant(1.0), None);
        assert_eq!(one.eval(0.7, 0.2).unwrap(), 1.0);
        let cosine = profile_kernel(Profile::Cosine { frequency: 2.0 }, None);
        assert!(close(cosine.eval(1.0, 0.0).unwrap(), -0.416147, 1e-6));
    }

    #[test]
    fn profile_derivatives() {
        let p = Profile::Exponential { rate: 0.3 };
        assert!(close(p.derivative(0.5), 0.3 * (0.15f64).exp(), 1e-15));
        let c = Profile::Custom { h: Arc::new(|s: f64| s.sin()), derivative: None };
        assert!(close(c.derivative(0.4), 0.4f64.cos(), 1e-8));
    }

    #[test]
    fn dual_examples() {
        let p = PSet::new(0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(dual(&p), PSet::new(0.0, 1.0, 0.0, 1.0).unwrap());
        let s = PSet::new(0.0, 1.0, 0.5, 0.5).unwrap();
        assert_eq!(dual(&s), s);
        assert!(PSet::new(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn off_triangle_evaluation_fails() {
        let k = power_integral_kernel(0.3).unwrap();
        assert!(k.eval(0.5, 0.5).is_err());
        assert!(k.eval(0.4, 0.5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dual_is_an_involution(a in -5.0..5.0f64, len in 0.1..5.0f64, l in -3.0..3.0f64, m in -3.0..3.0f64) {
                let p = PSet::new(a, a + len, l, m).unwrap();
                prop_assert_eq!(dual(&dual(&p)), p);
            }

            #[test]
            fn power_integral_kernel_is_nonnegative(alpha in 0.01..0.99f64, tau in 0.0..1.0f64, gap in 1e-6..1.0f64) {
                let k = power_integral_kernel(alpha).unwrap();
                prop_assert!(k.eval(tau + gap, tau).unwrap() >= 0.0);
            }

            #[test]
            fn scaled_singular_kernels_stay_bounded(alpha in 0.05..0.95f64, e in 1.0..12.0f64) {
                let d = 10f64.powf(-e);
                let t = 1.5;
                for k in [power_integral_kernel(alpha).unwrap(), power_derivative_kernel(alpha).unwrap(), hadamard_kernel(alpha).unwrap()] {
                    let s = k.singularity_exponent();
                    let scaled = d.powf(s) * k.eval(t, t - d).unwrap();
                    prop_assert!(scaled.is_finite() && scaled.abs() <= 10.0, "{} {}", k.name(), scaled);
                }
            }
        }
    }
}
